mod common;

use std::sync::Arc;

use common::zero_holding_suite;
use perishable::demand::{DemandModel, IndependentDemand, InfoSet};
use perishable::dp::{
    bellman_residual, best_base_stock_exact, brute_force_policy_eval, cost_to_go_violations, reachable_states,
    solve_opt, DpInstance, DEFAULT_PATH_LIMIT,
};
use perishable::policies::{
    default_search_cap, myopic_lower_bound, BalancingContext, BalancingPolicy, Rounding, TruncatedBalancingPolicy,
    UpperBoundMode,
};

/// Every seventh instance of the zero-holding suite; the acceptance run
/// covers all of them.
#[test]
fn small_instances_respect_the_guarantees() {
    for (i, inst) in zero_holding_suite().into_iter().enumerate().filter(|(i, _)| i % 7 == 0) {
        let model: Arc<dyn DemandModel> = Arc::new(IndependentDemand::new(inst.pmfs.clone()).unwrap());
        let dp = DpInstance::tiny(inst.lifetime, inst.params, inst.pmfs.clone()).unwrap();
        let table = solve_opt(&dp).unwrap();
        let opt = table.expected_initial_cost();
        let bell = bellman_residual(&dp, &table).unwrap();
        assert!(bell.max_residual <= 1e-12 * (1.0 + opt.abs()), "instance {i}: {bell:?}");

        // The factor-two bound covers integer orders through randomized
        // rounding; the deterministic smallest crossing can exceed it.
        let ctx = BalancingContext::new(model.clone(), inst.params).with_rounding(Rounding::Randomized);
        let b = brute_force_policy_eval(
            &BalancingPolicy::new(ctx.clone()),
            model.as_ref(),
            &inst.params,
            inst.lifetime,
            DEFAULT_PATH_LIMIT,
        )
        .unwrap();
        let tb = TruncatedBalancingPolicy::new(ctx, UpperBoundMode::Fractile);
        let tb = brute_force_policy_eval(&tb, model.as_ref(), &inst.params, inst.lifetime, DEFAULT_PATH_LIMIT).unwrap();
        let slack = 1e-9 * (1.0 + opt);
        assert!(opt <= b + slack && b <= 2.0 * opt + slack, "instance {i}: B {b} OPT {opt}");
        assert!(opt <= tb + slack && tb <= 2.0 * opt + slack, "instance {i}: TB {tb} OPT {opt}");

        let cap = dp.inventory_cap;
        let (_, base) =
            best_base_stock_exact(model.as_ref(), &inst.params, inst.lifetime, 0..=cap, DEFAULT_PATH_LIMIT).unwrap();
        assert!(opt <= base + slack && b <= 2.0 * base + slack, "instance {i}: B {b} BS {base}");

        for (t, x) in reachable_states(&dp, &table).unwrap() {
            let info = InfoSet { t, realized: vec![0; t - 1], signals: Vec::new() };
            let search = default_search_cap(&x, t, &info, model.as_ref()).unwrap();
            let lower = myopic_lower_bound(&x, t, &info, &inst.params, model.as_ref(), search).unwrap();
            let q_opt = table.order(t, 0, &x).unwrap();
            assert!(lower <= q_opt, "instance {i}, t={t}, x={x:?}: lower {lower} > OPT {q_opt}");
        }

        let violations = cost_to_go_violations(&dp, &table, 1e-9).unwrap();
        assert!(violations.is_empty(), "instance {i}: {violations:?}");
    }
}
