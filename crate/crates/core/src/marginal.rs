//! Marginal costs charged to a single order.
//!
//! An order of `q` units placed at period `t` is charged the expected lost
//! sales it fails to prevent in period `t` (`P`), the holding cost of its own
//! units over their life (`H`) and the cost of its units that expire unused
//! (`W`). All three are discounted to period 1.
//!
//! Under FIFO the fate of the new units does not depend on later orders,
//! which are always younger, so the costs are functions of the current
//! state, the information set and `q` alone.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::demand::{scenario_rng, DemandModel, InfoSet, Pmf};
use crate::error::{Error, Result};
use crate::inventory::{transition, InventoryVector, TransformedCostParams};

/// Monte Carlo sample size used when the closed form is unavailable.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

/// Expected marginal shortage, holding and outdating costs of one order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MarginalCostTriple {
    pub shortage: f64,
    pub holding: f64,
    pub outdating: f64,
}

impl MarginalCostTriple {
    /// `P + H + W`.
    pub fn total(&self) -> f64 {
        self.shortage + self.holding + self.outdating
    }

    /// `H + W`.
    pub fn overage(&self) -> f64 {
        self.holding + self.outdating
    }
}

/// `R_k(u)` for `k = 1..=rows`: the probability that demand flowing past
/// the stock older than age `K - k` over periods `t..t+k-1` stays below `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutdateProbTable {
    rows: Vec<Vec<f64>>,
}

impl OutdateProbTable {
    /// Number of computed rows, `min(K, T - t + 1)`.
    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    /// `R_k(u)`; `u` beyond the tabulated range is a range error.
    pub fn r(&self, k: usize, u: usize) -> Result<f64> {
        self.rows
            .get(k.wrapping_sub(1))
            .and_then(|row| row.get(u))
            .copied()
            .ok_or_else(|| Error::Range(format!("R_{k}({u}) is outside the table")))
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k - 1]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
        writer.write_record(["k", "u", "r"]).map_err(io)?;
        for (k, row) in self.rows.iter().enumerate() {
            for (u, r) in row.iter().enumerate() {
                writer.write_record([(k + 1).to_string(), u.to_string(), r.to_string()]).map_err(io)?;
            }
        }
        writer.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))
    }
}

fn check_inputs(x: &InventoryVector, t: usize, info: &InfoSet, model: &dyn DemandModel) -> Result<()> {
    if t == 0 || t > model.horizon() {
        return Err(Error::Range(format!("period {t} outside 1..={}", model.horizon())));
    }
    if info.t != t {
        return Err(Error::Validation(format!("information set is for period {}, decision is for period {t}", info.t)));
    }
    if x.lifetime() < 2 {
        return Err(Error::Validation("lifetime must be at least 2".into()));
    }
    Ok(())
}

/// Builds `R_k(u)` for all rows reachable before the horizon, tabulated far
/// enough to price any order up to `q_cap`.
pub fn outdate_prob_table(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    model: &dyn DemandModel,
    q_cap: u32,
) -> Result<OutdateProbTable> {
    check_inputs(x, t, info, model)?;
    if !model.independent_given_info() {
        return Err(Error::Capability(
            "closed-form marginal costs need demand independent across periods; use the Monte Carlo estimator".into(),
        ));
    }
    let k_life = x.lifetime();
    let rows = k_life.min(model.horizon() - t + 1);
    let cap = q_cap as usize;
    let len = |k: usize| cap + x.partial_sum(k_life - k) as usize + 1;

    let first = model.pmf(t, info)?;
    let mut table = vec![(0..len(1)).map(|u| first.prob_below(u as i64)).collect::<Vec<f64>>()];
    for k in 2..=rows {
        let pmf = model.pmf(t + k - 1, info)?;
        let shift = x.age(k_life - k + 1) as usize;
        let prev = &table[k - 2];
        let probs = pmf.probs();
        let row = (0..len(k)).map(|u| (0..u.min(probs.len())).map(|d| prev[u - d + shift] * probs[d]).sum()).collect();
        table.push(row);
    }
    Ok(OutdateProbTable { rows: table })
}

/// `P`, `H` and `W` tabulated for every integer order `0..=cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalCostCurve {
    shortage: Vec<f64>,
    holding: Vec<f64>,
    outdating: Vec<f64>,
}

impl MarginalCostCurve {
    pub fn from_parts(shortage: Vec<f64>, holding: Vec<f64>, outdating: Vec<f64>) -> Result<Self> {
        if shortage.is_empty() || shortage.len() != holding.len() || shortage.len() != outdating.len() {
            return Err(Error::Validation("cost curve components must share a non-empty grid".into()));
        }
        Ok(Self { shortage, holding, outdating })
    }

    /// Largest tabulated order.
    pub fn cap(&self) -> u32 {
        (self.shortage.len() - 1) as u32
    }

    pub fn at(&self, q: u32) -> MarginalCostTriple {
        let i = q as usize;
        MarginalCostTriple { shortage: self.shortage[i], holding: self.holding[i], outdating: self.outdating[i] }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
        writer.write_record(["q", "shortage", "holding", "outdating", "total"]).map_err(io)?;
        for q in 0..=self.cap() {
            let m = self.at(q);
            writer
                .write_record([
                    q.to_string(),
                    m.shortage.to_string(),
                    m.holding.to_string(),
                    m.outdating.to_string(),
                    m.total().to_string(),
                ])
                .map_err(io)?;
        }
        writer.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))
    }
}

/// Marginal costs as a function of a real-valued order on `[0, cap]`.
pub trait CostCurve {
    fn cap(&self) -> f64;
    fn evaluate(&self, q: f64) -> MarginalCostTriple;
}

impl CostCurve for MarginalCostCurve {
    fn cap(&self) -> f64 {
        f64::from(MarginalCostCurve::cap(self))
    }

    /// Integer demand makes every component piecewise linear between
    /// integer orders, so linear interpolation is exact.
    fn evaluate(&self, q: f64) -> MarginalCostTriple {
        let q = q.clamp(0.0, CostCurve::cap(self));
        let lo = q.floor() as u32;
        let frac = q - f64::from(lo);
        if frac == 0.0 || lo == MarginalCostCurve::cap(self) {
            return self.at(lo);
        }
        let a = self.at(lo);
        let b = self.at(lo + 1);
        let mix = |x: f64, y: f64| x + frac * (y - x);
        MarginalCostTriple {
            shortage: mix(a.shortage, b.shortage),
            holding: mix(a.holding, b.holding),
            outdating: mix(a.outdating, b.outdating),
        }
    }
}

/// `E[(D - y)^+]` for `y = start, start + 1, ..., start + n - 1`.
fn expected_excess_run(pmf: &Pmf, start: u32, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut value = pmf.expected_excess(f64::from(start));
    for i in 0..n {
        out.push(value);
        let y = i64::from(start) + i as i64;
        value = if y + 1 >= i64::from(pmf.bound()) { 0.0 } else { (value - (1.0 - pmf.cdf_at(y))).max(0.0) };
    }
    out
}

/// Exact marginal costs for every order `0..=q_cap` under demand that is
/// independent across periods given `info`.
pub fn closed_form_curve(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
    q_cap: u32,
) -> Result<MarginalCostCurve> {
    let table = outdate_prob_table(x, t, info, model, q_cap)?;
    let k_life = x.lifetime();
    let horizon = model.horizon();
    let n = q_cap as usize + 1;
    let beta = params.beta;

    let pmf = model.pmf(t, info)?;
    let shortage =
        expected_excess_run(&pmf, x.total(), n).into_iter().map(|e| params.discount(t) * params.p * e).collect();

    let mut holding = vec![0.0; n];
    if params.h > 0.0 {
        for k in 0..table.rows() {
            let weight = beta.powi((t + k) as i32 - 1) * params.h;
            let offset = x.partial_sum(k_life - k - 1) as usize;
            let row = table.row(k + 1);
            let mut acc = 0.0;
            for q in 1..n {
                acc += row[q + offset];
                holding[q] += weight * acc;
            }
        }
    }

    let mut outdating = vec![0.0; n];
    if params.w > 0.0 && t + k_life - 1 <= horizon {
        let weight = beta.powi((t + k_life) as i32 - 2) * params.w;
        let row = table.row(k_life);
        let mut acc = 0.0;
        for q in 1..n {
            acc += row[q];
            outdating[q] = weight * acc;
        }
    }
    MarginalCostCurve::from_parts(shortage, holding, outdating)
}

/// Exact `(P, H, W)` at a single order quantity.
pub fn closed_form_triple(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    q: u32,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
) -> Result<MarginalCostTriple> {
    Ok(closed_form_curve(x, t, info, params, model, q)?.at(q))
}

/// `beta^(t-1) p E[(D_t - y)^+ | f_t]` with `y = q + sum(x)`.
pub fn marginal_shortage(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    q: u32,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
) -> Result<f64> {
    check_inputs(x, t, info, model)?;
    let y = f64::from(q) + f64::from(x.total());
    Ok(params.discount(t) * params.p * model.pmf(t, info)?.expected_excess(y))
}

/// Expected discounted holding cost of the new units over their life.
pub fn marginal_holding(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    q: u32,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
) -> Result<f64> {
    Ok(closed_form_triple(x, t, info, q, params, model)?.holding)
}

/// Expected discounted cost of the new units that expire; zero when they
/// cannot expire before the horizon ends.
pub fn marginal_outdating(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    q: u32,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
) -> Result<f64> {
    Ok(closed_form_triple(x, t, info, q, params, model)?.outdating)
}

/// Monte Carlo estimate with per-component standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub triple: MarginalCostTriple,
    pub std_err: MarginalCostTriple,
    pub samples: usize,
}

/// Demand reaching the new cohort, cumulative through periods `t..t+k`.
///
/// The cohort is simulated as if unlimited so the consumption profile does
/// not depend on `q`; a finite order of `q` units then has `(q - B_k)^+`
/// units left after period `t + k`.
fn cohort_consumption(x: &InventoryVector, demands: &[u32]) -> (Vec<u32>, u32) {
    let unlimited = demands.iter().sum::<u32>() + 1;
    let mut state = x.clone();
    let mut consumed = Vec::with_capacity(demands.len());
    let mut shortfall_first = 0;
    for (k, d) in demands.iter().enumerate() {
        let order = if k == 0 { unlimited } else { 0 };
        let out = transition(&state, order, *d);
        let remnant = if k + 1 < x.lifetime() { out.next_state.age(k + 1) } else { out.outdated };
        if k == 0 {
            shortfall_first = (*d).saturating_sub(x.total());
        }
        consumed.push(unlimited - remnant);
        state = out.next_state;
    }
    (consumed, shortfall_first)
}

struct CohortSample {
    consumed: Vec<u32>,
    shortfall: u32,
}

fn draw_cohorts(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    model: &dyn DemandModel,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<CohortSample>> {
    check_inputs(x, t, info, model)?;
    if n_samples == 0 {
        return Err(Error::Validation("Monte Carlo needs at least one sample".into()));
    }
    let len = x.lifetime().min(model.horizon() - t + 1);
    (0..n_samples)
        .map(|i| {
            let mut rng = scenario_rng(seed, i as u64);
            let demands = model.sample_window(info, len, &mut rng)?;
            let (consumed, shortfall) = cohort_consumption(x, &demands);
            Ok(CohortSample { consumed, shortfall })
        })
        .collect()
}

fn sample_triple(
    sample: &CohortSample,
    t: usize,
    lifetime: usize,
    q: f64,
    params: &TransformedCostParams,
) -> MarginalCostTriple {
    let beta = params.beta;
    let shortage = params.discount(t) * params.p * (f64::from(sample.shortfall) - q).max(0.0);
    let mut holding = 0.0;
    for (k, b) in sample.consumed.iter().enumerate() {
        holding += beta.powi((t + k) as i32 - 1) * params.h * (q - f64::from(*b)).max(0.0);
    }
    let outdating = if sample.consumed.len() == lifetime {
        let b = sample.consumed[lifetime - 1];
        beta.powi((t + lifetime) as i32 - 2) * params.w * (q - f64::from(b)).max(0.0)
    } else {
        0.0
    };
    MarginalCostTriple { shortage, holding, outdating }
}

fn summarize(values: &[MarginalCostTriple]) -> McEstimate {
    let n = values.len() as f64;
    let mean_of = |f: fn(&MarginalCostTriple) -> f64| values.iter().map(f).sum::<f64>() / n;
    let se_of = |f: fn(&MarginalCostTriple) -> f64, mean: f64| {
        if values.len() < 2 {
            return 0.0;
        }
        let var = values.iter().map(|v| (f(v) - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    let triple = MarginalCostTriple {
        shortage: mean_of(|v| v.shortage),
        holding: mean_of(|v| v.holding),
        outdating: mean_of(|v| v.outdating),
    };
    let std_err = MarginalCostTriple {
        shortage: se_of(|v| v.shortage, triple.shortage),
        holding: se_of(|v| v.holding, triple.holding),
        outdating: se_of(|v| v.outdating, triple.outdating),
    };
    McEstimate { triple, std_err, samples: values.len() }
}

/// Sample-average estimate of `(P, H, W)` from `n_samples` demand windows
/// drawn conditional on `info`. Deterministic given `seed`.
#[allow(clippy::too_many_arguments)]
pub fn mc_marginal_triple(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    q: u32,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let samples = draw_cohorts(x, t, info, model, n_samples, seed)?;
    let values: Vec<_> = samples.iter().map(|s| sample_triple(s, t, x.lifetime(), f64::from(q), params)).collect();
    Ok(summarize(&values))
}

/// Sample-average curve over `0..=q_cap` with the same demand draws for
/// every order quantity, so the estimated curve keeps the monotonicity and
/// convexity of the exact one.
#[allow(clippy::too_many_arguments)]
pub fn mc_curve(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
    q_cap: u32,
    n_samples: usize,
    seed: u64,
) -> Result<MarginalCostCurve> {
    let samples = draw_cohorts(x, t, info, model, n_samples, seed)?;
    let n = q_cap as usize + 1;
    let mut parts = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for s in &samples {
        for q in 0..n {
            let m = sample_triple(s, t, x.lifetime(), q as f64, params);
            parts[0][q] += m.shortage;
            parts[1][q] += m.holding;
            parts[2][q] += m.outdating;
        }
    }
    let scale = 1.0 / samples.len() as f64;
    let [s, h, w] = parts.map(|v| v.into_iter().map(|a| a * scale).collect::<Vec<_>>());
    MarginalCostCurve::from_parts(s, h, w)
}

/// How marginal costs are evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalCostEngine {
    ClosedForm,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
    /// Closed form when the model allows it, Monte Carlo otherwise.
    #[default]
    Auto,
}

impl MarginalCostEngine {
    pub fn curve(
        &self,
        x: &InventoryVector,
        t: usize,
        info: &InfoSet,
        params: &TransformedCostParams,
        model: &dyn DemandModel,
        q_cap: u32,
    ) -> Result<MarginalCostCurve> {
        match *self {
            Self::ClosedForm => closed_form_curve(x, t, info, params, model, q_cap),
            Self::MonteCarlo { samples, seed } => mc_curve(x, t, info, params, model, q_cap, samples, seed),
            Self::Auto if model.independent_given_info() => closed_form_curve(x, t, info, params, model, q_cap),
            Self::Auto => mc_curve(x, t, info, params, model, q_cap, DEFAULT_MC_SAMPLES, 0),
        }
    }
}
