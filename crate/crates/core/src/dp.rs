//! Exact finite-horizon dynamic programming and brute-force oracles.
//!
//! States are inventory vectors with total at most `inventory_cap`, encoded
//! in mixed radix. With a perfect count forecast the state also carries the
//! known arrival counts of the next `window` days, each truncated at
//! `count_cap`. Values are cost-to-go in transformed accounting, discounted
//! to the period they are indexed by: `C_t = min_q E[cost_t + beta C_{t+1}]`,
//! with `C_{T+1} = 0`.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::demand::{CompoundPoissonDemand, DemandModel, ForecastDemand, InfoSet, Pmf};
use crate::error::{Error, Result};
use crate::inventory::{period_cost_transformed, transition, InventoryVector, TransformedCostParams};
use crate::marginal::closed_form_triple;
use crate::policies::{critical_ratio, OrderingPolicy, PolicyDecision, TIE_TOLERANCE};

/// Largest value table `solve_opt` builds without being forced.
pub const DEFAULT_TABLE_LIMIT: usize = 40_000_000;

/// Largest number of demand paths the brute-force evaluators enumerate.
pub const DEFAULT_PATH_LIMIT: usize = 2_000_000;

/// Demand description understood by the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum DpDemand {
    /// Independent demand with one pmf per period.
    Independent { pmfs: Vec<Pmf> },
    /// Arrival counts revealed `window` days ahead; `counts[t - 1]` is the
    /// count pmf of day `t` and `given_count[n]` the demand pmf of a day
    /// with `n` arrivals.
    Forecast { window: usize, counts: Vec<Pmf>, given_count: Vec<Pmf> },
}

/// A problem small enough to solve exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DpInstance {
    pub lifetime: usize,
    pub params: TransformedCostParams,
    pub inventory_cap: u32,
    pub demand: DpDemand,
}

/// Size of the value table an instance needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpaceSize {
    pub inventory_states: usize,
    /// Forecast states summed over periods.
    pub info_states: usize,
    /// Stored values, `inventory_states * info_states`.
    pub entries: usize,
}

impl DpInstance {
    pub fn independent(
        lifetime: usize,
        params: TransformedCostParams,
        pmfs: Vec<Pmf>,
        inventory_cap: u32,
    ) -> Result<Self> {
        let instance = Self { lifetime, params, inventory_cap, demand: DpDemand::Independent { pmfs } };
        instance.validate()?;
        Ok(instance)
    }

    /// Independent instance whose cap, `K` times the largest demand, never binds
    /// an order-up-to level below the largest demand.
    pub fn tiny(lifetime: usize, params: TransformedCostParams, pmfs: Vec<Pmf>) -> Result<Self> {
        let dmax = pmfs.iter().map(Pmf::bound).max().unwrap_or(0);
        Self::independent(lifetime, params, pmfs, (lifetime as u32 * dmax).max(1))
    }

    /// Forecast-free instance on the marginals of a compound Poisson model.
    pub fn without_forecast(
        lifetime: usize,
        params: TransformedCostParams,
        model: &CompoundPoissonDemand,
        inventory_cap: u32,
    ) -> Result<Self> {
        Self::independent(lifetime, params, model.marginals(), inventory_cap)
    }

    /// Forecast instance with arrival counts truncated at `count_cap`.
    pub fn with_forecast(
        lifetime: usize,
        params: TransformedCostParams,
        model: &ForecastDemand,
        inventory_cap: u32,
        count_cap: u32,
    ) -> Result<Self> {
        let counts = (1..=model.horizon()).map(|t| truncate(model.arrivals(t), count_cap)).collect::<Vec<_>>();
        let top = counts.iter().map(Pmf::bound).max().unwrap_or(0);
        let given_count =
            (0..=top).map(|n| model.given_count(n).map(|p| p.into_owned())).collect::<Result<Vec<_>>>()?;
        let instance = Self {
            lifetime,
            params,
            inventory_cap,
            demand: DpDemand::Forecast { window: model.forecast_window(), counts, given_count },
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn horizon(&self) -> usize {
        match &self.demand {
            DpDemand::Independent { pmfs } => pmfs.len(),
            DpDemand::Forecast { counts, .. } => counts.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.lifetime < 2 {
            return Err(Error::Validation(format!("lifetime {} must be at least 2", self.lifetime)));
        }
        if self.horizon() == 0 {
            return Err(Error::Validation("horizon must be at least one period".into()));
        }
        if self.inventory_cap > u32::from(u16::MAX) {
            return Err(Error::Validation("inventory cap must fit in 16 bits".into()));
        }
        if let DpDemand::Forecast { window, counts, given_count } = &self.demand {
            if *window == 0 {
                return Err(Error::Validation("forecast window must be positive".into()));
            }
            if counts.iter().any(|c| c.bound() as usize >= given_count.len()) {
                return Err(Error::Validation("missing demand pmf for a possible count".into()));
            }
        }
        Ok(())
    }

    /// Demand pmfs with the forecast averaged out.
    pub fn marginal_pmfs(&self) -> Vec<Pmf> {
        match &self.demand {
            DpDemand::Independent { pmfs } => pmfs.clone(),
            DpDemand::Forecast { counts, given_count, .. } => counts
                .iter()
                .map(|c| {
                    let len = (0..=c.bound()).map(|n| given_count[n as usize].probs().len()).max().unwrap_or(1);
                    let mut mix = vec![0.0; len];
                    for (n, pn) in c.probs().iter().enumerate() {
                        for (d, pd) in given_count[n].probs().iter().enumerate() {
                            mix[d] += pn * pd;
                        }
                    }
                    let total: f64 = mix.iter().sum();
                    Pmf::new(mix.into_iter().map(|m| m / total).collect()).expect("mixture of pmfs")
                })
                .collect(),
        }
    }

    /// The same instance with the forecast ignored.
    pub fn marginalized(&self) -> Self {
        Self {
            lifetime: self.lifetime,
            params: self.params,
            inventory_cap: self.inventory_cap,
            demand: DpDemand::Independent { pmfs: self.marginal_pmfs() },
        }
    }

    pub fn state_space(&self) -> StateSpaceSize {
        let inventory_states = StateIndex::count(self.lifetime, self.inventory_cap);
        let info_states = Layout::stages(self).iter().map(|s| s.info_count).sum();
        StateSpaceSize { inventory_states, info_states, entries: inventory_states.saturating_mul(info_states) }
    }
}

fn truncate(pmf: &Pmf, cap: u32) -> Pmf {
    if pmf.bound() <= cap {
        return pmf.clone();
    }
    let mut probs = pmf.probs()[..=cap as usize].to_vec();
    probs[cap as usize] += 1.0 - pmf.cdf_at(i64::from(cap));
    Pmf::new(probs).expect("truncated pmf")
}

/// Compact enumeration of inventory vectors with bounded total.
#[derive(Debug, Clone)]
struct StateIndex {
    cap: u32,
    lifetime: usize,
    levels: Vec<Vec<u32>>,
    dense: Vec<u32>,
}

impl StateIndex {
    fn count(lifetime: usize, cap: u32) -> usize {
        // Vectors of length K-1 with sum <= cap: C(cap + K - 1, K - 1).
        let (n, k) = (cap as usize + lifetime - 1, lifetime - 1);
        (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
    }

    fn new(lifetime: usize, cap: u32) -> Self {
        let dims = lifetime - 1;
        let base = cap as usize + 1;
        let slots = base.pow(dims as u32);
        let mut dense = vec![u32::MAX; slots];
        let mut levels = Vec::new();
        for code in 0..slots {
            let mut rest = code;
            let v: Vec<u32> = (0..dims)
                .map(|_| {
                    let digit = (rest % base) as u32;
                    rest /= base;
                    digit
                })
                .collect();
            if v.iter().sum::<u32>() <= cap {
                dense[code] = levels.len() as u32;
                levels.push(v);
            }
        }
        Self { cap, lifetime, levels, dense }
    }

    fn len(&self) -> usize {
        self.levels.len()
    }

    fn find(&self, levels: &[u32]) -> Option<usize> {
        if levels.len() != self.lifetime - 1 || levels.iter().sum::<u32>() > self.cap {
            return None;
        }
        let base = self.cap as usize + 1;
        let code = levels.iter().rev().fold(0usize, |acc, v| acc * base + *v as usize);
        Some(self.dense[code] as usize)
    }

    fn vector(&self, idx: usize) -> InventoryVector {
        InventoryVector::new(self.levels[idx].clone()).expect("lifetime >= 2")
    }
}

/// Forecast bookkeeping of one period.
#[derive(Debug, Clone)]
struct Stage {
    info_count: usize,
    /// Radix of the current day's count (1 without a forecast).
    lead: usize,
    /// Weight of the newly revealed day in the next period's index.
    stride: usize,
    /// Pmf of the newly revealed count, `[1.0]` when nothing is revealed.
    append: Vec<f64>,
    /// Count radices of the known days, current day first.
    radices: Vec<usize>,
}

struct Layout;

impl Layout {
    fn stages(instance: &DpInstance) -> Vec<Stage> {
        let horizon = instance.horizon();
        match &instance.demand {
            DpDemand::Independent { .. } => (0..horizon)
                .map(|_| Stage { info_count: 1, lead: 1, stride: 0, append: vec![1.0], radices: vec![] })
                .collect(),
            DpDemand::Forecast { window, counts, .. } => {
                let radix = |s: usize| counts[s - 1].bound() as usize + 1;
                (1..=horizon)
                    .map(|t| {
                        let last = (t + window - 1).min(horizon);
                        let radices: Vec<usize> = (t..=last).map(radix).collect();
                        let (stride, append) = if t + window <= horizon {
                            (radices[1..].iter().product(), counts[t + window - 1].probs().to_vec())
                        } else {
                            (0, vec![1.0])
                        };
                        Stage { info_count: radices.iter().product(), lead: radices[0], stride, append, radices }
                    })
                    .collect()
            }
        }
    }
}

/// `E[(D - y)^+]` and `P(D >= y)` for `y = 0..=cap`.
#[derive(Debug, Clone)]
struct Tail {
    probs: Vec<f64>,
    excess: Vec<f64>,
    survival: Vec<f64>,
}

impl Tail {
    fn new(pmf: &Pmf, cap: u32) -> Self {
        let mut excess = Vec::with_capacity(cap as usize + 1);
        let mut value = pmf.mean();
        for y in 0..=i64::from(cap) {
            excess.push(value.max(0.0));
            value -= 1.0 - pmf.cdf_at(y);
        }
        let survival = (0..=i64::from(cap)).map(|y| 1.0 - pmf.cdf_at(y - 1)).collect();
        Self { probs: pmf.probs().to_vec(), excess, survival }
    }
}

/// Next-state indices for every `(state, q, d < y)`.
struct Transitions {
    q_offset: Vec<usize>,
    state_offset: Vec<usize>,
    next: Vec<u32>,
}

impl Transitions {
    fn new(states: &StateIndex) -> Self {
        let mut q_offset = Vec::new();
        let mut state_offset = Vec::with_capacity(states.len());
        let mut next = Vec::new();
        for s in 0..states.len() {
            state_offset.push(q_offset.len());
            let x = states.vector(s);
            let total = x.total();
            for q in 0..=states.cap - total {
                q_offset.push(next.len());
                for d in 0..total + q {
                    let out = transition(&x, q, d);
                    let idx = states.find(out.next_state.levels()).expect("transition stays under the cap");
                    next.push(idx as u32);
                }
            }
        }
        Self { q_offset, state_offset, next }
    }

    fn row(&self, s: usize, q: u32, y: u32) -> &[u32] {
        let start = self.q_offset[self.state_offset[s] + q as usize];
        &self.next[start..start + y as usize]
    }
}

/// Optimal cost-to-go and smallest optimal order for every period and state.
#[derive(Debug, Clone)]
pub struct ValueTable {
    lifetime: usize,
    horizon: usize,
    params: TransformedCostParams,
    window: usize,
    states: StateIndex,
    stages: Vec<Stage>,
    values: Vec<Vec<f64>>,
    orders: Vec<Vec<u16>>,
    initial: Vec<f64>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn params(&self) -> &TransformedCostParams {
        &self.params
    }

    pub fn lifetime(&self) -> usize {
        self.lifetime
    }

    pub fn inventory_cap(&self) -> u32 {
        self.states.cap
    }

    pub fn inventory_states(&self) -> usize {
        self.states.len()
    }

    /// Forecast states at period `t`.
    pub fn info_states(&self, t: usize) -> usize {
        self.stages[t - 1].info_count
    }

    /// Index of the forecast state seen in `info` at period `t`; counts
    /// above the cap are clamped to it.
    pub fn info_index(&self, t: usize, info: &InfoSet) -> Result<usize> {
        self.check_period(t)?;
        let stage = &self.stages[t - 1];
        let mut idx = 0;
        let mut weight = 1;
        for (j, radix) in stage.radices.iter().enumerate() {
            let day = t + j;
            let count =
                *info.signals.get(day - 1).ok_or_else(|| {
                    Error::Validation(format!("information at period {t} lacks the count of day {day}"))
                })? as usize;
            idx += count.min(radix - 1) * weight;
            weight *= radix;
        }
        Ok(idx)
    }

    fn state_index(&self, x: &InventoryVector) -> Option<usize> {
        self.states.find(x.levels())
    }

    fn check_period(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizon {
            return Err(Error::Range(format!("period {t} outside 1..={}", self.horizon)));
        }
        Ok(())
    }

    fn lookup<T: Copy>(&self, table: &[Vec<T>], t: usize, info: usize, x: &InventoryVector) -> Result<T> {
        self.check_period(t)?;
        if info >= self.stages[t - 1].info_count {
            return Err(Error::Range(format!("forecast state {info} out of range at period {t}")));
        }
        let s = self
            .state_index(x)
            .ok_or_else(|| Error::Range(format!("state {:?} outside the cap {}", x.levels(), self.states.cap)))?;
        Ok(table[t - 1][info * self.states.len() + s])
    }

    /// `C_t(x, info)`; zero for `t = T + 1`.
    pub fn value(&self, t: usize, info: usize, x: &InventoryVector) -> Result<f64> {
        if t == self.horizon + 1 {
            return self.state_index(x).map(|_| 0.0).ok_or_else(|| Error::Range("state outside the cap".into()));
        }
        self.lookup(&self.values, t, info, x)
    }

    /// Smallest optimal order at `(t, info, x)`.
    pub fn order(&self, t: usize, info: usize, x: &InventoryVector) -> Result<u32> {
        self.lookup(&self.orders, t, info, x).map(u32::from)
    }

    /// Probability of each forecast state at period 1.
    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    /// `E[C_1(0, F_1)]`.
    pub fn expected_initial_cost(&self) -> f64 {
        let zero = self.states.find(&vec![0; self.lifetime - 1]).expect("zero state");
        let n = self.states.len();
        self.initial.iter().enumerate().map(|(i, p)| p * self.values[0][i * n + zero]).sum()
    }

    /// Dumps `t,info,state,value,order` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
        writer.write_record(["t", "info", "state", "value", "order"]).map_err(io)?;
        let n = self.states.len();
        for t in 1..=self.horizon {
            for i in 0..self.stages[t - 1].info_count {
                for s in 0..n {
                    let state = self.states.levels[s].iter().map(u32::to_string).collect::<Vec<_>>().join(";");
                    writer
                        .write_record([
                            t.to_string(),
                            i.to_string(),
                            state,
                            self.values[t - 1][i * n + s].to_string(),
                            self.orders[t - 1][i * n + s].to_string(),
                        ])
                        .map_err(io)?;
                }
            }
        }
        writer.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))
    }
}

/// Solves with forecast state when the instance has one.
pub fn solve_opt(instance: &DpInstance) -> Result<ValueTable> {
    solve_with_limit(instance, Some(DEFAULT_TABLE_LIMIT))
}

/// Solves the instance with its forecast averaged out.
pub fn solve_opt_wof(instance: &DpInstance) -> Result<ValueTable> {
    solve_opt(&instance.marginalized())
}

/// Solves with an explicit table-size limit; `None` disables the check.
pub fn solve_with_limit(instance: &DpInstance, limit: Option<usize>) -> Result<ValueTable> {
    instance.validate()?;
    let size = instance.state_space();
    if let Some(limit) = limit {
        if size.entries > limit {
            return Err(Error::Resource(format!(
                "value table needs {} entries ({} inventory states x {} forecast states), limit {limit}; lower the caps or force",
                size.entries, size.inventory_states, size.info_states
            )));
        }
    }
    let horizon = instance.horizon();
    let cap = instance.inventory_cap;
    let states = StateIndex::new(instance.lifetime, cap);
    let stages = Layout::stages(instance);
    let moves = Transitions::new(&states);
    let (tails, window): (Vec<Tail>, usize) = match &instance.demand {
        DpDemand::Independent { pmfs } => (pmfs.iter().map(|p| Tail::new(p, cap)).collect(), 0),
        DpDemand::Forecast { window, given_count, .. } => {
            (given_count.iter().map(|p| Tail::new(p, cap)).collect(), *window)
        }
    };
    let tail_for = |t: usize, lead: usize| match &instance.demand {
        DpDemand::Independent { .. } => &tails[t - 1],
        DpDemand::Forecast { .. } => &tails[lead],
    };
    let n = states.len();
    let zero = states.find(&vec![0; instance.lifetime - 1]).expect("zero state");
    let params = instance.params;

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    let mut orders: Vec<Vec<u16>> = vec![Vec::new(); horizon];
    for t in (1..=horizon).rev() {
        let stage = &stages[t - 1];
        let next = if t < horizon { Some(&values[t]) } else { None };
        let blocks: Vec<(Vec<f64>, Vec<u16>)> = (0..stage.info_count)
            .into_par_iter()
            .map(|idx| {
                let lead = idx % stage.lead;
                let rest = idx / stage.lead;
                let mut vbar = vec![0.0; n];
                if let Some(next) = next {
                    for (c, pc) in stage.append.iter().enumerate() {
                        if *pc == 0.0 {
                            continue;
                        }
                        let j = rest + stage.stride * c;
                        for (acc, v) in vbar.iter_mut().zip(&next[j * n..(j + 1) * n]) {
                            *acc += pc * v;
                        }
                    }
                }
                optimize_block(&states, &moves, tail_for(t, lead), &vbar, zero, &params)
            })
            .collect();
        let mut v = Vec::with_capacity(stage.info_count * n);
        let mut o = Vec::with_capacity(stage.info_count * n);
        for (bv, bo) in blocks {
            v.extend(bv);
            o.extend(bo);
        }
        values[t - 1] = v;
        orders[t - 1] = o;
    }

    let initial = match &instance.demand {
        DpDemand::Independent { .. } => vec![1.0],
        DpDemand::Forecast { counts, .. } => {
            let stage = &stages[0];
            (0..stage.info_count)
                .map(|idx| {
                    let mut rest = idx;
                    stage
                        .radices
                        .iter()
                        .enumerate()
                        .map(|(j, r)| {
                            let c = rest % r;
                            rest /= r;
                            counts[j].prob(c as u32)
                        })
                        .product()
                })
                .collect()
        }
    };

    Ok(ValueTable { lifetime: instance.lifetime, horizon, params, window, states, stages, values, orders, initial })
}

fn optimize_block(
    states: &StateIndex,
    moves: &Transitions,
    tail: &Tail,
    vbar: &[f64],
    zero: usize,
    params: &TransformedCostParams,
) -> (Vec<f64>, Vec<u16>) {
    let n = states.len();
    let mut values = Vec::with_capacity(n);
    let mut orders = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(states.cap as usize + 1);
    let beta = params.beta;
    for s in 0..n {
        let levels = &states.levels[s];
        let total: u32 = levels.iter().sum();
        let oldest = *levels.last().expect("non-empty");
        costs.clear();
        for q in 0..=states.cap - total {
            let y = total + q;
            let yi = y as usize;
            let mut j = params.p * tail.excess[yi] + tail.survival[yi] * beta * vbar[zero];
            let next = moves.row(s, q, y);
            for (d, pd) in tail.probs.iter().enumerate().take(yi) {
                if *pd == 0.0 {
                    continue;
                }
                let d32 = d as u32;
                let immediate = params.h * f64::from(y - d32) + params.w * f64::from(oldest.saturating_sub(d32));
                j += pd * (immediate + beta * vbar[next[d] as usize]);
            }
            costs.push(j);
        }
        let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let q = costs.iter().position(|c| *c <= best + TIE_TOLERANCE * (1.0 + best.abs())).expect("non-empty");
        values.push(costs[q]);
        orders.push(q as u16);
    }
    (values, orders)
}

/// `C_t(x + e_k) - C_t(x)` for `k = 1..K-1`.
pub fn cost_to_go_differences(table: &ValueTable, t: usize, info: usize, x: &InventoryVector) -> Result<Vec<f64>> {
    if x.total() + 1 > table.inventory_cap() {
        return Err(Error::Range(format!("a unit added to {:?} exceeds the cap", x.levels())));
    }
    let base = table.value(t, info, x)?;
    (1..table.lifetime)
        .map(|k| {
            let mut levels = x.levels().to_vec();
            levels[k - 1] += 1;
            let bumped = InventoryVector::new(levels).expect("lifetime >= 2");
            Ok(table.value(t, info, &bumped)? - base)
        })
        .collect()
}

/// Result of re-deriving every stored value from the optimality equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanCheck {
    /// Largest `|stored value - recomputed cost at the stored order|`.
    pub max_residual: f64,
    /// Largest amount by which some other order beats the stored one.
    pub max_improvement: f64,
}

/// Recomputes each stored value by direct simulation of one period with
/// [`transition`], without the solver's tail shortcut.
pub fn bellman_residual(instance: &DpInstance, table: &ValueTable) -> Result<BellmanCheck> {
    let horizon = instance.horizon();
    let n = table.states.len();
    let mut check = BellmanCheck { max_residual: 0.0, max_improvement: 0.0 };
    for t in 1..=horizon {
        let stage = &table.stages[t - 1];
        for idx in 0..stage.info_count {
            let lead = idx % stage.lead;
            let rest = idx / stage.lead;
            let pmf = match &instance.demand {
                DpDemand::Independent { pmfs } => &pmfs[t - 1],
                DpDemand::Forecast { given_count, .. } => &given_count[lead],
            };
            for s in 0..n {
                let x = table.states.vector(s);
                let mut costs = Vec::new();
                for q in 0..=table.states.cap - x.total() {
                    let mut j = 0.0;
                    for (d, pd) in pmf.probs().iter().enumerate() {
                        if *pd == 0.0 {
                            continue;
                        }
                        let out = transition(&x, q, d as u32);
                        let mut future = 0.0;
                        if t < horizon {
                            for (c, pc) in stage.append.iter().enumerate() {
                                if *pc > 0.0 {
                                    let info = rest + stage.stride * c;
                                    future += pc * table.value(t + 1, info, &out.next_state)?;
                                }
                            }
                        }
                        j += pd
                            * (period_cost_transformed(&x, q, d as u32, &instance.params, 1)
                                + instance.params.beta * future);
                    }
                    costs.push(j);
                }
                let stored = table.values[t - 1][idx * n + s];
                let q = table.orders[t - 1][idx * n + s] as usize;
                let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
                check.max_residual = check.max_residual.max((costs[q] - stored).abs());
                check.max_improvement = check.max_improvement.max(costs[q] - best);
            }
        }
    }
    Ok(check)
}

/// A state where the cost-to-go differences break the expected ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct CostToGoViolation {
    pub t: usize,
    pub state: Vec<u32>,
    pub differences: Vec<f64>,
}

/// Checks `0 <= C^(1) <= ... <= C^(K-1) <= w / beta` at periods `2..=T` on
/// every state whose total is below `max_{s < t} ybar_s - d_min(t - 1)`.
/// Requires an independent-demand table.
pub fn cost_to_go_violations(instance: &DpInstance, table: &ValueTable, tol: f64) -> Result<Vec<CostToGoViolation>> {
    let DpDemand::Independent { pmfs } = &instance.demand else {
        return Err(Error::Capability("threshold check needs independent demand".into()));
    };
    let ratio = critical_ratio(&instance.params);
    let bound = instance.params.w / instance.params.beta;
    let mut violations = Vec::new();
    let mut running = 0u32;
    for t in 2..=instance.horizon() {
        let prev = &pmfs[t - 2];
        if ratio > 0.0 {
            running = running.max(prev.inverse_cdf(ratio)?);
        }
        let d_min = prev.probs().iter().position(|p| *p > 0.0).unwrap_or(0) as u32;
        let threshold = i64::from(running) - i64::from(d_min);
        for s in 0..table.states.len() {
            let x = table.states.vector(s);
            if i64::from(x.total()) >= threshold || x.total() + 1 > table.inventory_cap() {
                continue;
            }
            let diffs = cost_to_go_differences(table, t, 0, &x)?;
            let scale = 1.0 + table.value(t, 0, &x)?.abs();
            let slack = tol * scale;
            let ok = diffs[0] >= -slack
                && diffs.windows(2).all(|w| w[0] <= w[1] + slack)
                && *diffs.last().expect("K >= 2") <= bound + slack;
            if !ok {
                violations.push(CostToGoViolation { t, state: x.levels().to_vec(), differences: diffs });
            }
        }
    }
    Ok(violations)
}

/// Every `(t, state)` reached with positive probability when the stored
/// optimal orders are followed from an empty system.
pub fn reachable_states(instance: &DpInstance, table: &ValueTable) -> Result<Vec<(usize, InventoryVector)>> {
    let DpDemand::Independent { pmfs } = &instance.demand else {
        return Err(Error::Capability("reachability needs independent demand".into()));
    };
    let mut frontier: BTreeSet<Vec<u32>> = BTreeSet::new();
    frontier.insert(vec![0; instance.lifetime - 1]);
    let mut out = Vec::new();
    for t in 1..=instance.horizon() {
        let mut next = BTreeSet::new();
        for levels in &frontier {
            let x = InventoryVector::new(levels.clone())?;
            let q = table.order(t, 0, &x)?;
            for (d, pd) in pmfs[t - 1].probs().iter().enumerate() {
                if *pd > 0.0 {
                    next.insert(transition(&x, q, d as u32).next_state.levels().to_vec());
                }
            }
            out.push((t, x));
        }
        frontier = next;
    }
    Ok(out)
}

/// Follows a solved table. States above the cap order nothing.
#[derive(Debug, Clone)]
pub struct DpPolicy {
    table: Arc<ValueTable>,
    name: String,
}

impl DpPolicy {
    pub fn new(table: Arc<ValueTable>, name: impl Into<String>) -> Self {
        Self { table, name: name.into() }
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }
}

impl OrderingPolicy for DpPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, t: usize, x: &InventoryVector, info: &InfoSet) -> Result<PolicyDecision> {
        let quantity = match self.table.state_index(x) {
            None => 0,
            Some(_) => {
                let idx = if self.table.window == 0 { 0 } else { self.table.info_index(t, info)? };
                self.table.order(t, idx, x)?
            }
        };
        Ok(PolicyDecision::plain(quantity))
    }
}

/// Exact expectations from enumerating every demand path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceResult {
    /// `E[C(policy)]` in transformed accounting, discounted to period 1.
    pub cost: f64,
    /// `sum_t E[P_t + H_t + W_t]` at the orders the policy places.
    pub marginal_sum: f64,
    pub paths: usize,
}

struct Enumerator<'a> {
    policy: &'a dyn OrderingPolicy,
    model: &'a dyn DemandModel,
    params: &'a TransformedCostParams,
    with_marginals: bool,
    limit: usize,
    paths: usize,
}

impl Enumerator<'_> {
    fn walk(&mut self, t: usize, x: &InventoryVector, realized: &mut Vec<u32>) -> Result<(f64, f64)> {
        if t > self.model.horizon() {
            self.paths += 1;
            if self.paths > self.limit {
                return Err(Error::Resource(format!("more than {} demand paths", self.limit)));
            }
            return Ok((0.0, 0.0));
        }
        let info = InfoSet { t, realized: realized.clone(), signals: Vec::new() };
        let decision = self.policy.decide(t, x, &info)?;
        let pmf = self.model.pmf(t, &info)?.into_owned();
        let (mut cost, mut margin) = (0.0, 0.0);
        for (q, pq) in decision.outcomes() {
            if pq == 0.0 {
                continue;
            }
            if self.with_marginals {
                margin += pq * closed_form_triple(x, t, &info, q, self.params, self.model)?.total();
            }
            for (d, pd) in pmf.probs().iter().enumerate() {
                if *pd == 0.0 {
                    continue;
                }
                let d = d as u32;
                let out = transition(x, q, d);
                realized.push(d);
                let (c, m) = self.walk(t + 1, &out.next_state, realized)?;
                realized.pop();
                cost += pq * pd * (period_cost_transformed(x, q, d, self.params, t) + c);
                margin += pq * pd * m;
            }
        }
        Ok((cost, margin))
    }
}

fn enumerate(
    policy: &dyn OrderingPolicy,
    model: &dyn DemandModel,
    params: &TransformedCostParams,
    lifetime: usize,
    limit: usize,
    with_marginals: bool,
) -> Result<BruteForceResult> {
    if model.forecast_window() > 0 {
        return Err(Error::Capability("brute-force enumeration does not cover forecast signals".into()));
    }
    let mut walker = Enumerator { policy, model, params, with_marginals, limit, paths: 0 };
    let (cost, marginal_sum) = walker.walk(1, &InventoryVector::zeros(lifetime)?, &mut Vec::new())?;
    Ok(BruteForceResult { cost, marginal_sum, paths: walker.paths })
}

/// Exact expected transformed cost of `policy` from an empty system.
pub fn brute_force_policy_eval(
    policy: &dyn OrderingPolicy,
    model: &dyn DemandModel,
    params: &TransformedCostParams,
    lifetime: usize,
    path_limit: usize,
) -> Result<f64> {
    Ok(enumerate(policy, model, params, lifetime, path_limit, false)?.cost)
}

/// Exact cost together with the expected sum of marginal costs charged to
/// the orders the policy places.
pub fn brute_force_marginal_sum(
    policy: &dyn OrderingPolicy,
    model: &dyn DemandModel,
    params: &TransformedCostParams,
    lifetime: usize,
    path_limit: usize,
) -> Result<BruteForceResult> {
    enumerate(policy, model, params, lifetime, path_limit, true)
}

/// Best constant base-stock level in `levels` by exact enumeration; ties go
/// to the smallest level.
pub fn best_base_stock_exact(
    model: &dyn DemandModel,
    params: &TransformedCostParams,
    lifetime: usize,
    levels: std::ops::RangeInclusive<u32>,
    path_limit: usize,
) -> Result<(u32, f64)> {
    let mut best: Option<(u32, f64)> = None;
    for s in levels {
        let policy = crate::policies::BaseStockPolicy::constant(s);
        let cost = brute_force_policy_eval(&policy, model, params, lifetime, path_limit)?;
        if best.is_none_or(|(_, b)| cost < b - TIE_TOLERANCE * (1.0 + b.abs())) {
            best = Some((s, cost));
        }
    }
    best.ok_or_else(|| Error::Validation("empty base-stock range".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{CompoundPoissonSpec, IndependentDemand};
    use crate::policies::ConstantOrderPolicy;

    fn uniform01(horizon: usize) -> Vec<Pmf> {
        vec![Pmf::uniform(0, 1).unwrap(); horizon]
    }

    #[test]
    fn state_count_matches_enumeration() {
        for (k, cap) in [(2, 5), (3, 4), (4, 3), (5, 2)] {
            assert_eq!(StateIndex::count(k, cap), StateIndex::new(k, cap).len());
        }
    }

    #[test]
    fn single_period_is_the_newsvendor() {
        let pmf = Pmf::new(vec![0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
        for (p, h) in [(3.0, 1.0), (1.0, 3.0), (9.0, 1.0)] {
            let params = TransformedCostParams::new(p, h, 2.0, 1.0).unwrap();
            let instance = DpInstance::tiny(3, params, vec![pmf.clone()]).unwrap();
            let table = solve_opt(&instance).unwrap();
            let q = table.order(1, 0, &InventoryVector::zeros(3).unwrap()).unwrap();
            assert_eq!(q, pmf.inverse_cdf(p / (p + h)).unwrap(), "p={p} h={h}");
        }
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let params = TransformedCostParams::new(3.0, 1.0, 1.0, 0.9).unwrap();
        let instance = DpInstance::independent(3, params, vec![Pmf::point_mass(0); 4], 3).unwrap();
        let table = solve_opt(&instance).unwrap();
        assert_eq!(table.expected_initial_cost(), 0.0);
        for t in 1..=4 {
            for s in 0..table.inventory_states() {
                assert_eq!(table.orders[t - 1][s], 0);
            }
        }
        assert_eq!(solve_opt_wof(&instance).unwrap().expected_initial_cost(), 0.0);
    }

    #[test]
    fn two_period_value_matches_policy_enumeration() {
        let params = TransformedCostParams::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let instance = DpInstance::independent(2, params, uniform01(2), 2).unwrap();
        let table = solve_opt(&instance).unwrap();
        let model = IndependentDemand::new(uniform01(2)).unwrap();

        // Every integer decision rule on the reachable tree: q1 in 0..=2, then
        // a second order for each of the two period-1 demands.
        let mut best = f64::INFINITY;
        for q1 in 0..=2u32 {
            for q2a in 0..=2u32 {
                for q2b in 0..=2u32 {
                    let mut total = 0.0;
                    for d1 in 0..=1u32 {
                        let x = InventoryVector::zeros(2).unwrap();
                        let out = transition(&x, q1, d1);
                        let q2 = if d1 == 0 { q2a } else { q2b };
                        if out.next_state.total() + q2 > 2 {
                            total = f64::INFINITY;
                            break;
                        }
                        for d2 in 0..=1u32 {
                            total += 0.25
                                * (period_cost_transformed(&x, q1, d1, &params, 1)
                                    + period_cost_transformed(&out.next_state, q2, d2, &params, 2));
                        }
                    }
                    best = best.min(total);
                }
            }
        }
        assert!((table.expected_initial_cost() - best).abs() < 1e-12);

        let policy = DpPolicy::new(Arc::new(table.clone()), "OPT");
        let exact = brute_force_policy_eval(&policy, &model, &params, 2, 100).unwrap();
        assert!((exact - table.expected_initial_cost()).abs() < 1e-12);
    }

    #[test]
    fn bellman_equation_holds() {
        let params = TransformedCostParams::new(4.0, 0.5, 2.0, 0.9).unwrap();
        let pmfs = vec![
            Pmf::new(vec![0.2, 0.5, 0.3]).unwrap(),
            Pmf::new(vec![0.6, 0.1, 0.3]).unwrap(),
            Pmf::new(vec![0.25, 0.25, 0.5]).unwrap(),
        ];
        let instance = DpInstance::tiny(3, params, pmfs).unwrap();
        let table = solve_opt(&instance).unwrap();
        let check = bellman_residual(&instance, &table).unwrap();
        assert!(check.max_residual <= 1e-12, "{check:?}");
        assert!(check.max_improvement <= 1e-12, "{check:?}");
    }

    #[test]
    fn terminal_differences_vanish() {
        let params = TransformedCostParams::new(4.0, 0.0, 2.0, 1.0).unwrap();
        let instance = DpInstance::tiny(3, params, uniform01(2)).unwrap();
        let table = solve_opt(&instance).unwrap();
        let x = InventoryVector::zeros(3).unwrap();
        assert_eq!(cost_to_go_differences(&table, 3, 0, &x).unwrap(), vec![0.0, 0.0]);
        assert_eq!(cost_to_go_differences(&table, 1, 0, &x).unwrap().len(), 2);
        let full = InventoryVector::new(vec![3, 3]).unwrap();
        assert!(matches!(cost_to_go_differences(&table, 1, 0, &full), Err(Error::Range(_))));
    }

    #[test]
    fn oversized_tables_are_refused() {
        let params = TransformedCostParams::new(4.0, 0.0, 2.0, 1.0).unwrap();
        let instance = DpInstance::independent(5, params, uniform01(3), 60).unwrap();
        assert!(matches!(solve_with_limit(&instance, Some(1000)), Err(Error::Resource(_))));
    }

    #[test]
    fn forecast_never_hurts() {
        let spec = CompoundPoissonSpec { arrival_means: vec![1.5, 3.0, 0.5], per_arrival_mean: 0.5 };
        let model = ForecastDemand::new(spec, 6, 2).unwrap();
        let params = TransformedCostParams::new(20.0, 0.0, 5.0, 1.0).unwrap();
        let instance = DpInstance::with_forecast(2, params, &model, 8, 6).unwrap();
        let with = solve_opt(&instance).unwrap();
        let without = solve_opt_wof(&instance).unwrap();
        assert!(with.expected_initial_cost() <= without.expected_initial_cost() + 1e-9);
        let check = bellman_residual(&instance, &with).unwrap();
        assert!(check.max_residual <= 1e-10 && check.max_improvement <= 1e-10, "{check:?}");
    }

    #[test]
    fn brute_force_limits_and_constant_orders() {
        let params = TransformedCostParams::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let zero = IndependentDemand::zero(3).unwrap();
        let policy = ConstantOrderPolicy::new(1);
        let r = brute_force_marginal_sum(&policy, &zero, &params, 2, 10).unwrap();
        assert_eq!(r.paths, 1);
        // Holding 1, then 2 held with 1 outdating in each of the last two periods.
        assert!((r.cost - 7.0).abs() < 1e-12);
        let wide = IndependentDemand::new(uniform01(12)).unwrap();
        assert!(matches!(brute_force_policy_eval(&policy, &wide, &params, 2, 100), Err(Error::Resource(_))));
    }
}
