//! Subcommand implementations. Each writes its report to `out`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use perishable::demand::{DemandModel, InfoSet, Pmf};
use perishable::dp::{solve_with_limit, DpInstance, DpPolicy};
use perishable::fifo::{check_cost_condition_original, guarantee_report, guarantee_report_for, FifoReport};
use perishable::inventory::InventoryVector;
use perishable::policies::{
    BalancingContext, BalancingPolicy, MyopicPolicy, OrderingPolicy, PolicyDecision, TruncatedBalancingPolicy,
};
use perishable::sim::{
    evaluate, experiment_rows, run_platelet_experiment, EvaluationResult, ExperimentRow, ExperimentTable, PolicyKind,
};
use serde::Serialize;

use crate::config::{BuiltModel, Config, Costs};
use crate::{CheckFifoArgs, CliError, DecideArgs, DecidePolicy, SimulateArgs, SolveDpArgs};

fn parse_list<T: FromStr>(flag: &str, text: &str) -> Result<Vec<T>, CliError> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|item| item.trim().parse().map_err(|_| CliError::Usage(format!("--{flag}: cannot parse {item:?}"))))
        .collect()
}

fn stdout_error(source: std::io::Error) -> CliError {
    CliError::Io { path: PathBuf::from("<stdout>"), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// FIFO report for the configured demand; exponential laws stay continuous.
pub fn fifo_report(config: &Config, costs: &Costs) -> perishable::Result<FifoReport> {
    let params = costs.transformed()?;
    let Some(demand) = &config.demand else {
        return guarantee_report_for::<Pmf>(None, &params, config.lifetime);
    };
    if let Some(laws) = demand.exponentials(config.horizon)? {
        return guarantee_report_for(Some(&laws), &params, config.lifetime);
    }
    let model = demand.build(config.horizon)?;
    guarantee_report(model.shared().as_ref(), &params, config.lifetime)
}

#[derive(Serialize)]
struct DecideReport<'a> {
    policy: &'static str,
    t: usize,
    state: &'a [u32],
    decision: PolicyDecision,
    fifo: FifoReport,
}

pub fn decide(config: &Config, args: &DecideArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = config.demand()?.build(config.horizon)?;
    let shared = model.shared();
    let levels: Vec<u32> = parse_list("state", &args.state)?;
    if levels.len() + 1 != config.lifetime {
        return Err(CliError::Usage(format!(
            "--state needs {} values for lifetime {}, got {}",
            config.lifetime - 1,
            config.lifetime,
            levels.len()
        )));
    }
    if args.t == 0 || args.t > config.horizon {
        return Err(CliError::Usage(format!("--t must lie in 1..={}", config.horizon)));
    }
    let realized = match &args.realized {
        Some(text) => parse_list("realized", text)?,
        None => vec![0; args.t - 1],
    };
    let signals = match &args.signals {
        Some(text) => parse_list("signals", text)?,
        None if shared.forecast_window() > 0 => {
            return Err(CliError::Usage("forecast demand needs --signals".into()));
        }
        None => Vec::new(),
    };
    let info = InfoSet::new(args.t, realized, signals)?;
    let x = InventoryVector::new(levels)?;

    let params = config.costs.transformed()?;
    let ctx = BalancingContext::new(shared, params).with_rounding(config.policy.rounding);
    let (label, policy): (&'static str, Box<dyn OrderingPolicy>) = match args.policy {
        DecidePolicy::B => ("B", Box::new(BalancingPolicy::new(ctx))),
        DecidePolicy::TB => ("TB", Box::new(TruncatedBalancingPolicy::new(ctx, config.policy.upper_bound))),
        DecidePolicy::L => ("L", Box::new(MyopicPolicy::new(ctx))),
    };
    let report = DecideReport {
        policy: label,
        t: args.t,
        state: x.levels(),
        decision: policy.decide(args.t, &x, &info)?,
        fifo: fifo_report(config, &config.costs)?,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(out, "{json}").map_err(stdout_error)
}

#[derive(Serialize)]
struct PolicyResult<'a> {
    #[serde(flatten)]
    evaluation: &'a EvaluationResult,
    /// 95% normal interval on the transformed mean.
    ci95: [f64; 2],
}

#[derive(Serialize)]
struct PenaltyResults<'a> {
    p: f64,
    results: Vec<PolicyResult<'a>>,
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    seed: u64,
    scenarios: usize,
    rows: &'a [ExperimentRow],
    evaluations: Vec<PenaltyResults<'a>>,
}

fn simulation_report(table: &ExperimentTable, seed: u64, scenarios: usize) -> SimulationReport<'_> {
    let evaluations = table
        .evaluations
        .iter()
        .map(|(p, evals)| PenaltyResults {
            p: *p,
            results: evals
                .iter()
                .map(|e| PolicyResult {
                    evaluation: e,
                    ci95: [e.mean_transformed - e.half_width(), e.mean_transformed + e.half_width()],
                })
                .collect(),
        })
        .collect();
    SimulationReport { seed, scenarios, rows: &table.rows, evaluations }
}

/// Runs the study on demand without forecasts. OPT and OPT_wof coincide
/// there: both follow the same DP.
fn simulate_independent(
    config: &Config,
    model: Arc<dyn DemandModel>,
    dp_pmfs: Vec<Pmf>,
    scenarios: usize,
    seed: u64,
    policies: &[PolicyKind],
    force: bool,
) -> Result<ExperimentTable, CliError> {
    let limit = if force { None } else { Some(config.dp.table_limit) };
    let mut rows = Vec::new();
    let mut evaluations = Vec::new();
    for penalty in config.penalties()? {
        let costs = config.costs.with_penalty(penalty);
        let original = costs.original()?;
        let params = costs.transformed()?;
        let mut table = None;
        let mut evals = Vec::new();
        for kind in policies {
            let ctx = BalancingContext::new(model.clone(), params).with_rounding(config.policy.rounding);
            let policy: Box<dyn OrderingPolicy> = match kind {
                PolicyKind::B => Box::new(BalancingPolicy::new(ctx)),
                PolicyKind::TB => Box::new(TruncatedBalancingPolicy::new(ctx, config.policy.upper_bound)),
                PolicyKind::Opt | PolicyKind::OptWof => {
                    if table.is_none() {
                        let instance = DpInstance::independent(
                            config.lifetime,
                            params,
                            dp_pmfs.clone(),
                            config.dp.wof_inventory_cap,
                        )?;
                        table = Some(Arc::new(solve_with_limit(&instance, limit)?));
                    }
                    Box::new(DpPolicy::new(table.clone().expect("solved above"), kind.label()))
                }
            };
            let mut result = evaluate(policy.as_ref(), model.as_ref(), &original, config.lifetime, scenarios, seed)?;
            result.policy = kind.label().to_string();
            evals.push(result);
        }
        rows.extend(experiment_rows(params.p, &evals)?);
        evaluations.push((params.p, evals));
    }
    Ok(ExperimentTable { rows, evaluations })
}

pub fn simulate(config: &Config, args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let sim = config
        .simulation
        .as_ref()
        .ok_or_else(|| perishable::Error::Config("simulate needs a [simulation] section".into()))?;
    let seed = args.seed.unwrap_or(sim.seed);
    let scenarios = args.scenarios.unwrap_or(sim.scenarios);
    let policies = match &args.policies {
        Some(text) => text.split(',').map(PolicyKind::parse).collect::<perishable::Result<Vec<_>>>()?,
        None => sim.policies.clone(),
    };
    if policies.is_empty() || scenarios == 0 {
        return Err(CliError::Usage("need at least one policy and one scenario".into()));
    }

    let table = match config.demand()?.build(config.horizon)? {
        BuiltModel::Forecast(_) => {
            let mut experiment = config.experiment()?;
            experiment.seed = seed;
            experiment.scenarios = scenarios;
            experiment.policies = policies;
            experiment.force = args.force;
            run_platelet_experiment(&experiment)?
        }
        BuiltModel::Compound(m) => {
            let pmfs = m.marginals();
            simulate_independent(config, m, pmfs, scenarios, seed, &policies, args.force)?
        }
        BuiltModel::Independent(m) => {
            let pmfs = m.pmfs().to_vec();
            simulate_independent(config, m, pmfs, scenarios, seed, &policies, args.force)?
        }
    };

    match &args.out {
        None => table.write_csv(out)?,
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
            let csv_path = dir.join("results.csv");
            let mut csv = create(&csv_path)?;
            table.write_csv(&mut csv)?;
            csv.flush().map_err(|source| CliError::Io { path: csv_path.clone(), source })?;

            let json_path = dir.join("results.json");
            let mut json = create(&json_path)?;
            let report = simulation_report(&table, seed, scenarios);
            serde_json::to_writer_pretty(&mut json, &report)
                .map_err(|e| CliError::Io { path: json_path.clone(), source: e.into() })?;
            writeln!(json)
                .and_then(|_| json.flush())
                .map_err(|source| CliError::Io { path: json_path.clone(), source })?;
            writeln!(out, "wrote {} and {}", csv_path.display(), json_path.display()).map_err(stdout_error)?;
        }
    }
    Ok(())
}

pub fn check_fifo(config: &Config, args: &CheckFifoArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let costs = match args.beta {
        Some(beta) => config.costs.with_beta(beta),
        None => config.costs.clone(),
    };
    let report = fifo_report(config, &costs)?;
    if args.json {
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
        return writeln!(out, "{json}").map_err(stdout_error);
    }
    writeln!(out, "{report}").map_err(stdout_error)?;
    if let Costs::Original { .. } = costs {
        let original = check_cost_condition_original(&costs.original()?)?;
        writeln!(out, "{:<22}{}", "cost condition (orig)", original.original_holds.unwrap_or(original.holds))
            .map_err(stdout_error)?;
    }
    Ok(())
}

pub fn solve_dp(config: &Config, args: &SolveDpArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let instance = config.dp_instance(!args.wof)?;
    let size = instance.state_space();
    writeln!(
        out,
        "state space: {} inventory states x {} information states = {} entries",
        size.inventory_states, size.info_states, size.entries
    )
    .map_err(stdout_error)?;
    let limit = if args.force { None } else { Some(config.dp.table_limit) };
    let table = solve_with_limit(&instance, limit)?;
    writeln!(out, "expected cost: {:.6}", table.expected_initial_cost()).map_err(stdout_error)?;
    if table.info_states(1) == 1 {
        let empty = InventoryVector::zeros(config.lifetime)?;
        writeln!(out, "order at t=1 from empty stock: {}", table.order(1, 0, &empty)?).map_err(stdout_error)?;
    }
    if let Some(path) = &args.out {
        let mut file = create(path)?;
        table.write_csv(&mut file)?;
        file.flush().map_err(|source| CliError::Io { path: path.clone(), source })?;
        writeln!(out, "wrote {}", path.display()).map_err(stdout_error)?;
    }
    Ok(())
}
