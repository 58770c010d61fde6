//! Inventory state, FIFO dynamics and period costs.
//!
//! A state lists on-hand units by age `1..K-1`. An order placed at the start
//! of a period arrives immediately as age-0 stock. Demand is met from the
//! oldest units first, unmet demand is lost, and units still on hand at age
//! `K - 1` after demand are discarded.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-hand inventory by age: `levels()[k - 1]` holds the age-`k` units.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InventoryVector(Vec<u32>);

impl InventoryVector {
    /// Builds a state for lifetime `levels.len() + 1`.
    pub fn new(levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Validation("lifetime must be at least 2 periods".into()));
        }
        Ok(Self(levels))
    }

    /// Empty system for lifetime `lifetime`.
    pub fn zeros(lifetime: usize) -> Result<Self> {
        if lifetime < 2 {
            return Err(Error::Validation(format!("lifetime {lifetime} must be at least 2")));
        }
        Ok(Self(vec![0; lifetime - 1]))
    }

    pub fn lifetime(&self) -> usize {
        self.0.len() + 1
    }

    pub fn levels(&self) -> &[u32] {
        &self.0
    }

    /// Units of age `k`, for `1 <= k <= K-1`.
    pub fn age(&self, k: usize) -> u32 {
        self.0[k - 1]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Units that expire at the end of this period if not issued.
    pub fn oldest(&self) -> u32 {
        *self.0.last().expect("non-empty")
    }

    /// `x_1 + ... + x_j`: units younger than or equal to age `j`.
    pub fn partial_sum(&self, j: usize) -> u32 {
        self.0[..j].iter().sum()
    }
}

/// Costs in the original accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Unit ordering cost.
    pub c: f64,
    /// Unit lost-sales penalty.
    pub p: f64,
    /// Unit holding cost on end-of-period inventory.
    pub h: f64,
    /// Unit outdating cost.
    pub w: f64,
    /// Discount factor in `(0, 1]`.
    pub beta: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c", self.c), ("p", self.p), ("h", self.h), ("w", self.w)] {
            if !v.is_finite() {
                return Err(Error::Validation(format!("cost {name} = {v} is not finite")));
            }
        }
        check_beta(self.beta)?;
        if self.p - self.c < 0.0 {
            return Err(Error::Validation(format!("penalty {} is below ordering cost {}", self.p, self.c)));
        }
        if self.w + self.beta * self.c < 0.0 {
            return Err(Error::Validation("outdating cost plus discounted ordering cost is negative".into()));
        }
        if self.h + (1.0 - self.beta) * self.c < 0.0 {
            return Err(Error::Validation("transformed holding cost is negative".into()));
        }
        Ok(())
    }

    /// Equivalent costs with the ordering cost moved into penalty, holding
    /// and outdating.
    pub fn transform(&self) -> Result<TransformedCostParams> {
        self.validate()?;
        Ok(TransformedCostParams {
            p: self.p - self.c,
            h: self.h + (1.0 - self.beta) * self.c,
            w: self.w + self.beta * self.c,
            beta: self.beta,
        })
    }

    /// Original costs whose transform is `params` (zero ordering cost).
    pub fn from_transformed(params: &TransformedCostParams) -> Self {
        Self { c: 0.0, p: params.p, h: params.h, w: params.w, beta: params.beta }
    }
}

/// Costs after the ordering cost has been eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedCostParams {
    pub p: f64,
    pub h: f64,
    pub w: f64,
    pub beta: f64,
}

impl TransformedCostParams {
    pub fn new(p: f64, h: f64, w: f64, beta: f64) -> Result<Self> {
        let params = Self { p, h, w, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("h", self.h), ("w", self.w)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("transformed cost {name} = {v} must be >= 0")));
            }
        }
        check_beta(self.beta)
    }

    /// `beta^(t-1)`.
    pub fn discount(&self, t: usize) -> f64 {
        self.beta.powi(t as i32 - 1)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("discount factor {beta} outside (0, 1]")))
    }
}

/// What happens in one period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodOutcome {
    /// `issued[k]` units of age `k` were issued, `k = 0..K-1`.
    pub issued: Vec<u32>,
    pub lost_sales: u32,
    pub outdated: u32,
    pub next_state: InventoryVector,
}

impl PeriodOutcome {
    pub fn total_issued(&self) -> u32 {
        self.issued.iter().sum()
    }
}

/// Applies an order of `q` units and demand `d` to state `x` under FIFO.
pub fn transition(x: &InventoryVector, q: u32, d: u32) -> PeriodOutcome {
    let k = x.lifetime();
    let mut stock = Vec::with_capacity(k);
    stock.push(q);
    stock.extend_from_slice(x.levels());
    let mut issued = vec![0; k];
    let mut remaining = d;
    for age in (0..k).rev() {
        let take = stock[age].min(remaining);
        issued[age] = take;
        remaining -= take;
    }
    let outdated = stock[k - 1] - issued[k - 1];
    let next = (0..k - 1).map(|age| stock[age] - issued[age]).collect();
    PeriodOutcome { issued, lost_sales: remaining, outdated, next_state: InventoryVector(next) }
}

/// Undiscounted cost components of a single period in transformed accounting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub shortage: f64,
    pub holding: f64,
    pub outdating: f64,
}

impl CostBreakdown {
    pub fn new(x: &InventoryVector, q: u32, d: u32, params: &TransformedCostParams) -> Self {
        let y = i64::from(q) + i64::from(x.total());
        let d = i64::from(d);
        Self {
            shortage: params.p * (d - y).max(0) as f64,
            holding: params.h * (y - d).max(0) as f64,
            outdating: params.w * (i64::from(x.oldest()) - d).max(0) as f64,
        }
    }

    pub fn total(&self) -> f64 {
        self.shortage + self.holding + self.outdating
    }
}

/// `beta^(t-1) [p (d - y)^+ + h (y - d)^+ + w (x_{K-1} - d)^+]`.
pub fn period_cost_transformed(x: &InventoryVector, q: u32, d: u32, params: &TransformedCostParams, t: usize) -> f64 {
    params.discount(t) * CostBreakdown::new(x, q, d, params).total()
}

/// Discounted original-accounting cost of a period, without terminal salvage.
pub fn period_cost_original(x: &InventoryVector, q: u32, d: u32, params: &CostParams, t: usize) -> f64 {
    let y = f64::from(q) + f64::from(x.total());
    let d = f64::from(d);
    let raw = params.c * f64::from(q)
        + params.p * (d - y).max(0.0)
        + params.h * (y - d).max(0.0)
        + params.w * (f64::from(x.oldest()) - d).max(0.0);
    params.beta.powi(t as i32 - 1) * raw
}

/// One period of a simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub t: usize,
    pub state: InventoryVector,
    pub order: u32,
    pub demand: u32,
    pub outcome: PeriodOutcome,
}

/// A dynamically consistent trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    initial: InventoryVector,
    records: Vec<PeriodRecord>,
}

impl SamplePath {
    pub fn new(initial: InventoryVector) -> Self {
        Self { initial, records: Vec::new() }
    }

    /// Advances the path by one period and returns the new record.
    pub fn push(&mut self, order: u32, demand: u32) -> &PeriodRecord {
        let state = self.terminal().clone();
        let outcome = transition(&state, order, demand);
        let t = self.records.len() + 1;
        self.records.push(PeriodRecord { t, state, order, demand, outcome });
        self.records.last().expect("just pushed")
    }

    /// Rebuilds a path from stored records, checking every link.
    pub fn from_records(initial: InventoryVector, records: Vec<PeriodRecord>) -> Result<Self> {
        let mut expected = initial.clone();
        for (i, record) in records.iter().enumerate() {
            if record.t != i + 1 {
                return Err(Error::Validation(format!("record {i} has period {}", record.t)));
            }
            if record.state != expected {
                return Err(Error::Validation(format!("state at period {} does not chain", record.t)));
            }
            if record.outcome != transition(&record.state, record.order, record.demand) {
                return Err(Error::Validation(format!("outcome at period {} is not FIFO-consistent", record.t)));
            }
            expected = record.outcome.next_state.clone();
        }
        Ok(Self { initial, records })
    }

    pub fn initial(&self) -> &InventoryVector {
        &self.initial
    }

    pub fn records(&self) -> &[PeriodRecord] {
        &self.records
    }

    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    /// State after the last recorded period.
    pub fn terminal(&self) -> &InventoryVector {
        self.records.last().map(|r| &r.outcome.next_state).unwrap_or(&self.initial)
    }

    pub fn demands(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.demand).collect()
    }

    /// One CSV row per period.
    pub fn write_csv<W: Write>(&self, params: &CostParams, out: W) -> Result<()> {
        let transformed = params.transform()?;
        let mut writer = csv::Writer::from_writer(out);
        for r in &self.records {
            let parts = CostBreakdown::new(&r.state, r.order, r.demand, &transformed);
            let row = PathRow {
                t: r.t,
                order: r.order,
                demand: r.demand,
                issued: r.outcome.issued.iter().map(u32::to_string).collect::<Vec<_>>().join(";"),
                lost: r.outcome.lost_sales,
                outdated: r.outcome.outdated,
                shortage_cost: parts.shortage,
                holding_cost: parts.holding,
                outdating_cost: parts.outdating,
                transformed_cost: transformed.discount(r.t) * parts.total(),
                original_cost: period_cost_original(&r.state, r.order, r.demand, params, r.t),
            };
            writer.serialize(row).map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
        }
        writer.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))
    }
}

#[derive(Serialize)]
struct PathRow {
    t: usize,
    order: u32,
    demand: u32,
    issued: String,
    lost: u32,
    outdated: u32,
    shortage_cost: f64,
    holding_cost: f64,
    outdating_cost: f64,
    transformed_cost: f64,
    original_cost: f64,
}

fn check_path(path: &SamplePath) -> Result<()> {
    SamplePath::from_records(path.initial.clone(), path.records.clone()).map(|_| ())
}

/// Discounted original cost, including the salvage credit `c` per unit left
/// at the end of the horizon.
pub fn total_cost_original(path: &SamplePath, params: &CostParams) -> Result<f64> {
    params.validate()?;
    check_path(path)?;
    let running: f64 =
        path.records.iter().map(|r| period_cost_original(&r.state, r.order, r.demand, params, r.t)).sum();
    let salvage = params.beta.powi(path.horizon() as i32) * params.c * f64::from(path.terminal().total());
    Ok(running - salvage)
}

/// Discounted transformed cost.
pub fn total_cost_transformed(path: &SamplePath, params: &TransformedCostParams) -> Result<f64> {
    params.validate()?;
    check_path(path)?;
    Ok(path.records.iter().map(|r| period_cost_transformed(&r.state, r.order, r.demand, params, r.t)).sum())
}

/// `C_orig - C_transformed - sum_t beta^(t-1) c d_t`; zero on any path that
/// starts empty. With starting stock the difference is `-c` times its total.
pub fn transform_residual(path: &SamplePath, orig: &CostParams) -> Result<f64> {
    let transformed = orig.transform()?;
    let original = total_cost_original(path, orig)?;
    let reduced = total_cost_transformed(path, &transformed)?;
    let demand_term: f64 =
        path.records.iter().map(|r| orig.beta.powi(r.t as i32 - 1) * orig.c * f64::from(r.demand)).sum();
    Ok(original - reduced - demand_term)
}
