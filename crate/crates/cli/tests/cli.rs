use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn perish(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perish")).args(args).output().expect("run perish")
}

#[test]
fn check_fifo_prints_the_guarantee_pair() {
    let path = config("example2.toml");
    let out = perish(&["--config", path.to_str().unwrap(), "check-fifo"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("balancing guarantee   2\n") && text.contains("chao guarantee        2.300000"), "{text}");
}

#[test]
fn exit_codes_follow_the_error_kind() {
    assert_eq!(perish(&["check-fifo"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "lifetime = 3\nhorizon = 2\ncolour = 1\n").unwrap();
    let out = perish(&["--config", bad.to_str().unwrap(), "check-fifo"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("bad.toml"));

    let platelet = std::fs::read_to_string(config("platelet.toml")).unwrap();
    let small = dir.path().join("small.toml");
    std::fs::write(&small, platelet.replace("count_cap = 16", "count_cap = 16\ntable_limit = 100")).unwrap();
    let out = perish(&["--config", small.to_str().unwrap(), "solve-dp"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("state space:"));
}

#[test]
fn io_errors_name_the_path() {
    let missing = "/nonexistent/perish.toml";
    let out = perish(&["--config", missing, "check-fifo"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains(missing));
}

#[test]
fn solve_dp_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        r#"
lifetime = 2
horizon = 2
[costs]
form = "transformed"
p = 3.0
h = 1.0
w = 2.0
beta = 1.0
[demand]
kind = "pmfs"
pmfs = [[0.5, 0.5]]
[dp]
wof_inventory_cap = 3
inventory_cap = 3
count_cap = 2
"#,
    )
    .unwrap();
    let table = dir.path().join("table.csv");
    let out = perish(&["--config", cfg.to_str().unwrap(), "solve-dp", "--out", table.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&table).unwrap();
    assert!(csv.starts_with("t,info,state,value,order"));
}
