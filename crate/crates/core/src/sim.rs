//! Monte Carlo policy evaluation.
//!
//! Scenario `i` of a run seeded with `s` draws its demand path from its own
//! ChaCha stream `(s, i)`, before the policy is consulted, so every policy
//! sees the same scenarios. Scenarios run in parallel and are reduced in
//! index order, which keeps results identical across thread counts.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{scenario_rng, CompoundPoissonSpec, DemandModel, ForecastDemand, Scenario};
use crate::dp::{solve_with_limit, DpInstance, DpPolicy};
use crate::error::{Error, Result};
use crate::inventory::{
    period_cost_original, period_cost_transformed, transition, CostParams, InventoryVector, SamplePath,
    TransformedCostParams,
};
use crate::policies::{
    BalancingContext, BalancingPolicy, OrderingPolicy, Rounding, TruncatedBalancingPolicy, UpperBoundMode,
};

/// Summary of one policy over a set of scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub policy: String,
    pub mean_transformed: f64,
    pub mean_original: f64,
    /// Standard error of the transformed mean.
    pub std_err: f64,
    pub n: usize,
    pub seed: u64,
    /// Mean discounted transformed cost of each period.
    pub per_period: Vec<f64>,
    /// Transformed cost of every scenario, in scenario order.
    #[serde(skip)]
    pub scenario_costs: Vec<f64>,
}

impl EvaluationResult {
    /// Half-width of the 95% normal confidence interval.
    pub fn half_width(&self) -> f64 {
        1.96 * self.std_err
    }
}

/// Mixed into the seed of the streams that resolve randomized orders, so
/// those draws never touch the demand streams.
const COIN_SALT: u64 = 0x5eed_c0de_0f0c_0175;

/// Stream resolving the randomized orders of scenario `index`.
pub fn coin_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ COIN_SALT);
    rng.set_stream(index);
    rng
}

fn place_order(
    policy: &dyn OrderingPolicy,
    t: usize,
    x: &InventoryVector,
    info: &crate::demand::InfoSet,
    coins: &mut ChaCha8Rng,
) -> Result<u32> {
    let decision = policy.decide(t, x, info)?;
    Ok(match decision.alternative {
        Some(_) => decision.resolve(coins.random::<f64>()),
        None => decision.quantity,
    })
}

struct ScenarioOutcome {
    transformed: f64,
    original: f64,
    per_period: Vec<f64>,
}

fn run_scenario(
    policy: &dyn OrderingPolicy,
    model: &dyn DemandModel,
    costs: &CostParams,
    transformed: &TransformedCostParams,
    lifetime: usize,
    scenario: &Scenario,
    coins: &mut ChaCha8Rng,
) -> Result<ScenarioOutcome> {
    let window = model.forecast_window();
    let mut x = InventoryVector::zeros(lifetime)?;
    let mut per_period = Vec::with_capacity(scenario.demands.len());
    let (mut original, mut demand_term) = (0.0, 0.0);
    for (i, d) in scenario.demands.iter().enumerate() {
        let t = i + 1;
        let info = scenario.info(t, window);
        let q = place_order(policy, t, &x, &info, coins)?;
        per_period.push(period_cost_transformed(&x, q, *d, transformed, t));
        original += period_cost_original(&x, q, *d, costs, t);
        demand_term += costs.beta.powi(t as i32 - 1) * costs.c * f64::from(*d);
        x = transition(&x, q, *d).next_state;
    }
    let horizon = scenario.demands.len() as i32;
    original -= costs.beta.powi(horizon) * costs.c * f64::from(x.total());
    let total: f64 = per_period.iter().sum();
    let residual = original - total - demand_term;
    if residual.abs() > 1e-9 * (1.0 + original.abs()) {
        return Err(Error::Consistency(format!(
            "original and transformed costs disagree by {residual} on one scenario"
        )));
    }
    Ok(ScenarioOutcome { transformed: total, original, per_period })
}

/// Demand scenario `index` of a run seeded with `seed`.
pub fn scenario(model: &dyn DemandModel, seed: u64, index: u64) -> Scenario {
    model.sample_scenario(&mut scenario_rng(seed, index))
}

/// Evaluates `policy` on `n_scenarios` paths starting from an empty system.
pub fn evaluate(
    policy: &dyn OrderingPolicy,
    model: &dyn DemandModel,
    costs: &CostParams,
    lifetime: usize,
    n_scenarios: usize,
    seed: u64,
) -> Result<EvaluationResult> {
    if n_scenarios == 0 {
        return Err(Error::Validation("need at least one scenario".into()));
    }
    let transformed = costs.transform()?;
    let outcomes = (0..n_scenarios as u64)
        .into_par_iter()
        .map(|i| {
            let s = scenario(model, seed, i);
            run_scenario(policy, model, costs, &transformed, lifetime, &s, &mut coin_rng(seed, i))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let horizon = model.horizon();
    let mut per_period = vec![0.0; horizon];
    let (mut sum_t, mut sum_o) = (0.0, 0.0);
    for o in &outcomes {
        sum_t += o.transformed;
        sum_o += o.original;
        for (acc, c) in per_period.iter_mut().zip(&o.per_period) {
            *acc += c;
        }
    }
    let mean = sum_t / n;
    let var = if outcomes.len() > 1 {
        outcomes.iter().map(|o| (o.transformed - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(EvaluationResult {
        policy: policy.name().to_string(),
        mean_transformed: mean,
        mean_original: sum_o / n,
        std_err: (var / n).sqrt(),
        n: outcomes.len(),
        seed,
        per_period: per_period.into_iter().map(|c| c / n).collect(),
        scenario_costs: outcomes.iter().map(|o| o.transformed).collect(),
    })
}

/// Standard error of the mean paired difference `a - b` over shared scenarios.
pub fn paired_std_err(a: &EvaluationResult, b: &EvaluationResult) -> Result<f64> {
    if a.scenario_costs.len() != b.scenario_costs.len() || a.seed != b.seed {
        return Err(Error::Validation("paired comparison needs the same scenarios".into()));
    }
    let n = a.scenario_costs.len() as f64;
    if n < 2.0 {
        return Ok(0.0);
    }
    let diffs: Vec<f64> = a.scenario_costs.iter().zip(&b.scenario_costs).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((var / n).sqrt())
}

/// Simulates scenario `index` of a run seeded with `seed` and keeps the
/// full trajectory.
pub fn simulate_path(
    policy: &dyn OrderingPolicy,
    model: &dyn DemandModel,
    lifetime: usize,
    seed: u64,
    index: u64,
) -> Result<SamplePath> {
    let scenario = scenario(model, seed, index);
    let mut coins = coin_rng(seed, index);
    let mut path = SamplePath::new(InventoryVector::zeros(lifetime)?);
    for (i, d) in scenario.demands.iter().enumerate() {
        let t = i + 1;
        let info = scenario.info(t, model.forecast_window());
        let q = place_order(policy, t, path.terminal(), &info, &mut coins)?;
        path.push(q, *d);
    }
    Ok(path)
}

/// `(cost_pi - cost_opt) / cost_opt` in percent.
pub fn error_metric(cost_pi: f64, cost_opt: f64) -> Result<f64> {
    if cost_opt.is_nan() || cost_opt <= 0.0 {
        return Err(Error::Validation(format!("benchmark cost {cost_opt} must be positive")));
    }
    Ok((cost_pi - cost_opt) / cost_opt * 100.0)
}

/// `(cost_wof - cost_pi) / cost_wof` in percent.
pub fn impr_metric(cost_wof: f64, cost_pi: f64) -> Result<f64> {
    if cost_wof.is_nan() || cost_wof <= 0.0 {
        return Err(Error::Validation(format!("benchmark cost {cost_wof} must be positive")));
    }
    Ok((cost_wof - cost_pi) / cost_wof * 100.0)
}

/// Policies the platelet experiment can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    B,
    TB,
    #[serde(rename = "OPT_wof")]
    OptWof,
    #[serde(rename = "OPT")]
    Opt,
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::B => "B",
            Self::TB => "TB",
            Self::OptWof => "OPT_wof",
            Self::Opt => "OPT",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "B" => Ok(Self::B),
            "TB" => Ok(Self::TB),
            "OPT_wof" => Ok(Self::OptWof),
            "OPT" => Ok(Self::Opt),
            other => Err(Error::Config(format!("unknown policy {other:?} (expected B, TB, OPT_wof or OPT)"))),
        }
    }
}

/// Caps of the reduced-size benchmark DPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpCaps {
    /// Inventory cap of the forecast-free DP.
    pub wof_inventory_cap: u32,
    /// Inventory cap of the DP with forecast state.
    pub inventory_cap: u32,
    /// Arrival counts above this are treated as this many.
    pub count_cap: u32,
    /// Refuse tables larger than this many entries unless forced.
    #[serde(default = "default_table_limit")]
    pub table_limit: usize,
}

fn default_table_limit() -> usize {
    crate::dp::DEFAULT_TABLE_LIMIT
}

impl Default for DpCaps {
    fn default() -> Self {
        Self { wof_inventory_cap: 30, inventory_cap: 18, count_cap: 16, table_limit: default_table_limit() }
    }
}

/// Surgery-driven platelet study: compound Poisson demand with a perfect
/// arrival-count forecast over the product lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateletExperiment {
    pub demand: CompoundPoissonSpec,
    pub lifetime: usize,
    pub horizon: usize,
    /// Days of arrival counts known in advance; the lifetime when absent.
    #[serde(default)]
    pub window: Option<usize>,
    pub penalties: Vec<f64>,
    pub holding: f64,
    pub outdating: f64,
    pub beta: f64,
    pub scenarios: usize,
    pub seed: u64,
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub upper_bound: UpperBoundMode,
    #[serde(default)]
    pub rounding: Rounding,
    #[serde(default)]
    pub dp: DpCaps,
    /// Build DP tables even when they exceed the limit.
    #[serde(default)]
    pub force: bool,
}

impl PlateletExperiment {
    /// Weekly surgery means, Monday first, and 0.32 units per surgery.
    pub fn platelet_defaults() -> Self {
        Self {
            demand: CompoundPoissonSpec {
                arrival_means: vec![2.6, 5.5, 1.9, 3.2, 3.7, 0.1, 0.0],
                per_arrival_mean: 0.32,
            },
            lifetime: 3,
            horizon: 28,
            window: None,
            penalties: vec![1000.0, 2500.0, 5000.0],
            holding: 0.0,
            outdating: 500.0,
            beta: 1.0,
            scenarios: 10_000,
            seed: 7,
            policies: vec![PolicyKind::B, PolicyKind::TB, PolicyKind::Opt, PolicyKind::OptWof],
            upper_bound: UpperBoundMode::Fractile,
            rounding: Rounding::Randomized,
            dp: DpCaps::default(),
            force: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.demand.validate()?;
        if self.lifetime < 2 || self.horizon == 0 {
            return Err(Error::Config("lifetime must be >= 2 and horizon >= 1".into()));
        }
        if self.scenarios == 0 {
            return Err(Error::Config("scenarios must be positive".into()));
        }
        if self.penalties.is_empty() || self.policies.is_empty() {
            return Err(Error::Config("penalties and policies must be non-empty".into()));
        }
        for p in &self.penalties {
            TransformedCostParams::new(*p, self.holding, self.outdating, self.beta)?;
        }
        Ok(())
    }

    fn model(&self) -> Result<ForecastDemand> {
        ForecastDemand::new(self.demand.clone(), self.horizon, self.window.unwrap_or(self.lifetime))
    }
}

/// One line of the experiment table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub policy: String,
    pub p: f64,
    pub mean_cost: f64,
    pub se: f64,
    /// Relative to OPT when it ran, otherwise to OPT_wof.
    pub error_pct: Option<f64>,
    /// Relative to OPT_wof.
    pub impr_pct: Option<f64>,
}

/// Rows plus the full evaluations behind them, grouped by penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    pub evaluations: Vec<(f64, Vec<EvaluationResult>)>,
}

impl ExperimentTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for row in &self.rows {
            writer.serialize(row).map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
        }
        writer.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))
    }

    /// Evaluation of `policy` at penalty `p`.
    pub fn result(&self, p: f64, policy: &str) -> Option<&EvaluationResult> {
        self.evaluations.iter().find(|(q, _)| *q == p).and_then(|(_, evals)| evals.iter().find(|e| e.policy == policy))
    }
}

/// Table rows for the evaluations at one penalty, labelled by policy.
pub fn experiment_rows(p: f64, evals: &[EvaluationResult]) -> Result<Vec<ExperimentRow>> {
    let find = |label: &str| evals.iter().find(|e| e.policy == label).map(|e| e.mean_transformed);
    let benchmark = find("OPT").or(find("OPT_wof"));
    let wof = find("OPT_wof");
    evals
        .iter()
        .map(|e| {
            Ok(ExperimentRow {
                policy: e.policy.clone(),
                p,
                mean_cost: e.mean_transformed,
                se: e.std_err,
                error_pct: benchmark.map(|b| error_metric(e.mean_transformed, b)).transpose()?,
                impr_pct: wof.map(|w| impr_metric(w, e.mean_transformed)).transpose()?,
            })
        })
        .collect()
}

/// Builds the policy named `kind` for one penalty level.
pub fn build_policy(
    kind: PolicyKind,
    experiment: &PlateletExperiment,
    model: &Arc<ForecastDemand>,
    params: TransformedCostParams,
) -> Result<Box<dyn OrderingPolicy>> {
    let shared: Arc<dyn DemandModel> = model.clone();
    let limit = if experiment.force { None } else { Some(experiment.dp.table_limit) };
    Ok(match kind {
        PolicyKind::B => {
            Box::new(BalancingPolicy::new(BalancingContext::new(shared, params).with_rounding(experiment.rounding)))
        }
        PolicyKind::TB => Box::new(TruncatedBalancingPolicy::new(
            BalancingContext::new(shared, params).with_rounding(experiment.rounding),
            experiment.upper_bound,
        )),
        PolicyKind::OptWof => {
            let instance = DpInstance::without_forecast(
                experiment.lifetime,
                params,
                &model.without_forecast(),
                experiment.dp.wof_inventory_cap,
            )?;
            let table = solve_with_limit(&instance, limit)?;
            Box::new(DpPolicy::new(Arc::new(table), "OPT_wof"))
        }
        PolicyKind::Opt => {
            let instance = DpInstance::with_forecast(
                experiment.lifetime,
                params,
                model,
                experiment.dp.inventory_cap,
                experiment.dp.count_cap,
            )?;
            let table = solve_with_limit(&instance, limit)?;
            Box::new(DpPolicy::new(Arc::new(table), "OPT"))
        }
    })
}

/// Runs every configured policy at every penalty on shared scenarios.
pub fn run_platelet_experiment(experiment: &PlateletExperiment) -> Result<ExperimentTable> {
    experiment.validate()?;
    let model = Arc::new(experiment.model()?);
    let mut rows = Vec::new();
    let mut evaluations = Vec::new();
    for p in &experiment.penalties {
        let params = TransformedCostParams::new(*p, experiment.holding, experiment.outdating, experiment.beta)?;
        let costs = CostParams::from_transformed(&params);
        let mut evals = Vec::new();
        for kind in &experiment.policies {
            let policy = build_policy(*kind, experiment, &model, params)?;
            let mut result = evaluate(
                policy.as_ref(),
                model.as_ref(),
                &costs,
                experiment.lifetime,
                experiment.scenarios,
                experiment.seed,
            )?;
            result.policy = kind.label().to_string();
            evals.push(result);
        }
        rows.extend(experiment_rows(*p, &evals)?);
        evaluations.push((*p, evals));
    }
    Ok(ExperimentTable { rows, evaluations })
}
