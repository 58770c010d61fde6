//! Ordering policies.
//!
//! The balancing rules work on a [`MarginalCostCurve`]: the dual-balancing
//! order equates the marginal shortage cost with the marginal holding plus
//! outdating cost, the myopic order minimizes their sum, and the truncated
//! rule clamps the first into `[myopic, fractile bound]`. Integer orders
//! come either from the smallest crossing or from a randomized rounding whose
//! mean is the interpolated balancing point; the policies default to the
//! latter.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::demand::{DemandModel, InfoSet};
use crate::error::{Error, Result};
use crate::inventory::{InventoryVector, TransformedCostParams};
use crate::marginal::{CostCurve, MarginalCostCurve, MarginalCostEngine, MarginalCostTriple};

/// Relative tolerance of the fractional balancing condition.
pub const BALANCE_TOLERANCE: f64 = 1e-8;

/// Relative slack under which two totals count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// An order together with the quantities that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub quantity: u32,
    /// Marginal costs at `quantity` (zero for rules that do not compute them).
    pub triple: MarginalCostTriple,
    pub balancing: Option<u32>,
    pub lower: Option<u32>,
    /// `None` both for rules without bounds and for an infinite bound.
    pub upper: Option<u32>,
    /// Set when the rule randomizes: the alternative replaces `quantity`
    /// with the given probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<Alternative>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub quantity: u32,
    pub probability: f64,
}

impl PolicyDecision {
    pub(crate) fn plain(quantity: u32) -> Self {
        Self {
            quantity,
            triple: MarginalCostTriple::default(),
            balancing: None,
            lower: None,
            upper: None,
            alternative: None,
        }
    }

    /// Possible orders with their probabilities.
    pub fn outcomes(&self) -> Vec<(u32, f64)> {
        match self.alternative {
            Some(a) => vec![(self.quantity, 1.0 - a.probability), (a.quantity, a.probability)],
            None => vec![(self.quantity, 1.0)],
        }
    }

    /// The order placed when the uniform draw is `u`.
    pub fn resolve(&self, u: f64) -> u32 {
        match self.alternative {
            Some(a) if u < a.probability => a.quantity,
            _ => self.quantity,
        }
    }
}

/// A decision rule for every period.
pub trait OrderingPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn decide(&self, t: usize, x: &InventoryVector, info: &InfoSet) -> Result<PolicyDecision>;
}

/// Smallest integer `q` with `H(q) + W(q) >= P(q)`.
pub fn integer_balancing(curve: &MarginalCostCurve) -> Result<u32> {
    (0..=curve.cap())
        .find(|q| {
            let m = curve.at(*q);
            m.overage() >= m.shortage
        })
        .ok_or_else(|| Error::SearchBound(format!("no balancing order up to {}", curve.cap())))
}

/// Randomized rounding of the balancing point. With `q` the smallest
/// crossing, returns `q - 1` plus the alternative `q` drawn with the
/// probability that makes the expected order equal the interpolated root of
/// `P - (H + W)`.
pub fn balancing_lottery(curve: &MarginalCostCurve) -> Result<(u32, Option<Alternative>)> {
    let crossing = integer_balancing(curve)?;
    if crossing == 0 {
        return Ok((0, None));
    }
    let gap = |q: u32| {
        let m = curve.at(q);
        m.shortage - m.overage()
    };
    let (before, after) = (gap(crossing - 1), gap(crossing));
    let probability = before / (before - after);
    if probability >= 1.0 {
        return Ok((crossing, None));
    }
    Ok((crossing - 1, Some(Alternative { quantity: crossing, probability })))
}

/// Real `q` with `|P - (H + W)| <= 1e-8 (P + H + W + 1)`, by bisection on
/// the non-increasing gap `P - (H + W)`.
pub fn fractional_balancing(curve: &dyn CostCurve) -> Result<f64> {
    let gap = |q: f64| {
        let m = curve.evaluate(q);
        (m.shortage - m.overage(), BALANCE_TOLERANCE * (m.total() + 1.0))
    };
    let (g0, tol0) = gap(0.0);
    if g0 <= tol0 {
        return Ok(0.0);
    }
    let mut hi = curve.cap();
    let (ghi, tolhi) = gap(hi);
    if ghi > tolhi {
        return Err(Error::SearchBound(format!("marginal shortage still dominates at {hi}")));
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (g, tol) = gap(mid);
        if g.abs() <= tol {
            return Ok(mid);
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (g, tol) = gap(hi);
    if g.abs() <= tol {
        Ok(hi)
    } else {
        Err(Error::Consistency(format!("bisection stalled at {hi} with gap {g}")))
    }
}

/// Smallest integer minimizer of `P + H + W`, found by scanning the convex
/// sequence until it stops decreasing.
pub fn integer_myopic(curve: &MarginalCostCurve) -> Result<u32> {
    for q in 0..curve.cap() {
        let here = curve.at(q).total();
        if curve.at(q + 1).total() >= here - TIE_TOLERANCE * (1.0 + here.abs()) {
            return Ok(q);
        }
    }
    let cap = curve.cap();
    if curve.at(cap).shortage == 0.0 {
        // Beyond this point the total can only grow.
        Ok(cap)
    } else {
        Err(Error::SearchBound(format!("marginal cost still decreasing at {cap}")))
    }
}

/// Smallest real minimizer of `P + H + W` by left-biased ternary search.
pub fn fractional_myopic(curve: &dyn CostCurve) -> f64 {
    let f = |q: f64| curve.evaluate(q).total();
    let (mut lo, mut hi) = (0.0, curve.cap());
    for _ in 0..300 {
        if hi - lo <= 1e-12 * (1.0 + hi) {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    lo
}

/// `median(lower, balancing, upper)`; `None` as upper means no bound.
pub fn clamp_order(lower: u32, balancing: u32, upper: Option<u32>) -> Result<u32> {
    if let Some(u) = upper {
        if lower > u {
            return Err(Error::Consistency(format!("lower bound {lower} exceeds upper bound {u}")));
        }
    }
    let capped = upper.map_or(balancing, |u| balancing.min(u));
    Ok(capped.max(lower))
}

/// Which upper bound the truncated rule uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBoundMode {
    /// `(max_{s <= t} Φ_s^{-1}(p / (p + h)) - sum(x))^+`.
    #[default]
    Fractile,
    Infinite,
}

/// `p / (p + h)`, taken as 0 when both costs vanish.
pub fn critical_ratio(params: &TransformedCostParams) -> f64 {
    let denom = params.p + params.h;
    if denom > 0.0 {
        params.p / denom
    } else {
        0.0
    }
}

/// Running maximum of the critical fractiles over periods `1..=t`, each
/// computed from the information available in its own period.
pub fn running_max_fractile(
    t: usize,
    info: &InfoSet,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
) -> Result<u32> {
    let ratio = critical_ratio(params);
    if ratio == 0.0 {
        return Ok(0);
    }
    let window = model.forecast_window();
    let mut best = 0;
    for s in 1..=t {
        let earlier = info.restricted_to(s, window);
        best = best.max(model.pmf(s, &earlier)?.inverse_cdf(ratio)?);
    }
    Ok(best)
}

/// Default upper bound on the optimal order; `None` in infinite mode.
pub fn default_upper_bound(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
    mode: UpperBoundMode,
) -> Result<Option<u32>> {
    match mode {
        UpperBoundMode::Infinite => Ok(None),
        UpperBoundMode::Fractile => Ok(Some(running_max_fractile(t, info, params, model)?.saturating_sub(x.total()))),
    }
}

/// Largest order worth pricing: beyond it the current period can never run short.
pub fn default_search_cap(x: &InventoryVector, t: usize, info: &InfoSet, model: &dyn DemandModel) -> Result<u32> {
    Ok(model.pmf(t, info)?.bound().saturating_sub(x.total()))
}

/// How the balancing policies turn the balancing point into an integer order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// The smallest integer at which `H + W >= P`.
    Smallest,
    /// A draw between the two integers around the balancing point.
    #[default]
    Randomized,
}

/// Settings shared by the balancing policies.
#[derive(Clone)]
pub struct BalancingContext {
    pub model: Arc<dyn DemandModel>,
    pub params: TransformedCostParams,
    pub engine: MarginalCostEngine,
    /// Overrides the default search cap when set.
    pub search_cap: Option<u32>,
    pub rounding: Rounding,
}

impl BalancingContext {
    pub fn new(model: Arc<dyn DemandModel>, params: TransformedCostParams) -> Self {
        Self { model, params, engine: MarginalCostEngine::Auto, search_cap: None, rounding: Rounding::default() }
    }

    pub fn with_rounding(mut self, rounding: Rounding) -> Self {
        self.rounding = rounding;
        self
    }

    pub fn curve(&self, t: usize, x: &InventoryVector, info: &InfoSet) -> Result<MarginalCostCurve> {
        let cap = match self.search_cap {
            Some(cap) => cap,
            None => default_search_cap(x, t, info, self.model.as_ref())?,
        };
        self.engine.curve(x, t, info, &self.params, self.model.as_ref(), cap)
    }
}

/// Dual-balancing order at the smallest crossing, with its diagnostics.
pub fn dual_balancing_quantity(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
    search_cap: u32,
) -> Result<PolicyDecision> {
    let curve = MarginalCostEngine::Auto.curve(x, t, info, params, model, search_cap)?;
    let q = integer_balancing(&curve)?;
    Ok(PolicyDecision { balancing: Some(q), triple: curve.at(q), ..PolicyDecision::plain(q) })
}

/// Smallest minimizer of the total marginal cost.
pub fn myopic_lower_bound(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
    search_cap: u32,
) -> Result<u32> {
    let curve = MarginalCostEngine::Auto.curve(x, t, info, params, model, search_cap)?;
    integer_myopic(&curve)
}

/// Truncated-balancing order with the default bounds and the smallest crossing.
pub fn truncated_balancing_quantity(
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    params: &TransformedCostParams,
    model: &dyn DemandModel,
    mode: UpperBoundMode,
) -> Result<PolicyDecision> {
    let cap = default_search_cap(x, t, info, model)?;
    let curve = MarginalCostEngine::Auto.curve(x, t, info, params, model, cap)?;
    truncated_from_curve(&curve, default_upper_bound(x, t, info, params, model, mode)?, Rounding::Smallest)
}

fn balancing_from_curve(curve: &MarginalCostCurve, rounding: Rounding) -> Result<PolicyDecision> {
    let crossing = integer_balancing(curve)?;
    let (q, alternative) = match rounding {
        Rounding::Smallest => (crossing, None),
        Rounding::Randomized => balancing_lottery(curve)?,
    };
    Ok(PolicyDecision { balancing: Some(crossing), triple: curve.at(q), alternative, ..PolicyDecision::plain(q) })
}

fn truncated_from_curve(curve: &MarginalCostCurve, upper: Option<u32>, rounding: Rounding) -> Result<PolicyDecision> {
    let mut decision = balancing_from_curve(curve, rounding)?;
    let lower = integer_myopic(curve)?;
    let q = clamp_order(lower, decision.quantity, upper)?;
    decision.alternative = match decision.alternative {
        Some(a) => {
            let alt = clamp_order(lower, a.quantity, upper)?;
            (alt != q).then_some(Alternative { quantity: alt, ..a })
        }
        None => None,
    };
    Ok(PolicyDecision { quantity: q, triple: curve.at(q), lower: Some(lower), upper, ..decision })
}

/// The dual-balancing policy `B`.
#[derive(Clone)]
pub struct BalancingPolicy {
    ctx: BalancingContext,
}

impl BalancingPolicy {
    pub fn new(ctx: BalancingContext) -> Self {
        Self { ctx }
    }
}

impl OrderingPolicy for BalancingPolicy {
    fn name(&self) -> &str {
        "B"
    }

    fn decide(&self, t: usize, x: &InventoryVector, info: &InfoSet) -> Result<PolicyDecision> {
        balancing_from_curve(&self.ctx.curve(t, x, info)?, self.ctx.rounding)
    }
}

/// The truncated-balancing policy `TB`.
#[derive(Clone)]
pub struct TruncatedBalancingPolicy {
    ctx: BalancingContext,
    upper: UpperBoundMode,
}

impl TruncatedBalancingPolicy {
    pub fn new(ctx: BalancingContext, upper: UpperBoundMode) -> Self {
        Self { ctx, upper }
    }
}

impl OrderingPolicy for TruncatedBalancingPolicy {
    fn name(&self) -> &str {
        "TB"
    }

    fn decide(&self, t: usize, x: &InventoryVector, info: &InfoSet) -> Result<PolicyDecision> {
        let curve = self.ctx.curve(t, x, info)?;
        let upper = default_upper_bound(x, t, info, &self.ctx.params, self.ctx.model.as_ref(), self.upper)?;
        truncated_from_curve(&curve, upper, self.ctx.rounding)
    }
}

/// The myopic rule that orders the lower bound itself.
#[derive(Clone)]
pub struct MyopicPolicy {
    ctx: BalancingContext,
}

impl MyopicPolicy {
    pub fn new(ctx: BalancingContext) -> Self {
        Self { ctx }
    }
}

impl OrderingPolicy for MyopicPolicy {
    fn name(&self) -> &str {
        "L"
    }

    fn decide(&self, t: usize, x: &InventoryVector, info: &InfoSet) -> Result<PolicyDecision> {
        let curve = self.ctx.curve(t, x, info)?;
        let q = integer_myopic(&curve)?;
        Ok(PolicyDecision { lower: Some(q), triple: curve.at(q), ..PolicyDecision::plain(q) })
    }
}

/// Orders up to `S_t` in period `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseStockPolicy {
    levels: Vec<u32>,
    name: String,
}

impl BaseStockPolicy {
    /// The same level every period.
    pub fn constant(level: u32) -> Self {
        Self { levels: vec![level], name: format!("BS({level})") }
    }

    /// One level per period; levels must not decrease.
    pub fn non_decreasing(levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Validation("base-stock levels are empty".into()));
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("base-stock levels must be non-decreasing".into()));
        }
        let name = format!("BS({})", levels.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
        Ok(Self { levels, name })
    }

    pub fn level(&self, t: usize) -> u32 {
        self.levels[(t - 1).min(self.levels.len() - 1)]
    }
}

impl OrderingPolicy for BaseStockPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, t: usize, x: &InventoryVector, _info: &InfoSet) -> Result<PolicyDecision> {
        Ok(PolicyDecision::plain(self.level(t).saturating_sub(x.total())))
    }
}

/// Always orders the same amount; useful for tests and baselines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantOrderPolicy {
    quantity: u32,
    name: String,
}

impl ConstantOrderPolicy {
    pub fn new(quantity: u32) -> Self {
        Self { quantity, name: format!("Q({quantity})") }
    }
}

impl OrderingPolicy for ConstantOrderPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, _t: usize, _x: &InventoryVector, _info: &InfoSet) -> Result<PolicyDecision> {
        Ok(PolicyDecision::plain(self.quantity))
    }
}

/// Best constant base-stock level over `levels` by simulation with common
/// random numbers; ties go to the smallest level.
pub fn optimal_base_stock(
    model: Arc<dyn DemandModel>,
    params: &TransformedCostParams,
    lifetime: usize,
    levels: std::ops::RangeInclusive<u32>,
    n_scenarios: usize,
    seed: u64,
) -> Result<(u32, f64)> {
    let costs = crate::inventory::CostParams::from_transformed(params);
    let mut best: Option<(u32, f64)> = None;
    for s in levels {
        let policy = BaseStockPolicy::constant(s);
        let result = crate::sim::evaluate(&policy, model.as_ref(), &costs, lifetime, n_scenarios, seed)?;
        if best.is_none_or(|(_, c)| result.mean_transformed < c) {
            best = Some((s, result.mean_transformed));
        }
    }
    best.ok_or_else(|| Error::Validation("empty base-stock range".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{IndependentDemand, Pmf};
    use crate::marginal::closed_form_curve;
    use proptest::prelude::*;

    /// Continuous uniform(0, 1) demand in the last period.
    struct UniformLastPeriod {
        p: f64,
        h: f64,
    }

    impl CostCurve for UniformLastPeriod {
        fn cap(&self) -> f64 {
            1.0
        }
        fn evaluate(&self, q: f64) -> MarginalCostTriple {
            MarginalCostTriple {
                shortage: self.p * (1.0 - q).powi(2) / 2.0,
                holding: self.h * q * q / 2.0,
                outdating: 0.0,
            }
        }
    }

    fn state(levels: &[u32]) -> InventoryVector {
        InventoryVector::new(levels.to_vec()).unwrap()
    }

    #[test]
    fn zero_demand_orders_nothing() {
        let model = IndependentDemand::zero(3).unwrap();
        let params = TransformedCostParams::new(5.0, 1.0, 1.0, 1.0).unwrap();
        let d = dual_balancing_quantity(&state(&[0, 0]), 1, &InfoSet::initial(), &params, &model, 4).unwrap();
        assert_eq!(d.quantity, 0);
    }

    #[test]
    fn lottery_straddles_the_crossing() {
        let curve = MarginalCostCurve::from_parts(vec![1.0, 1.0 / 3.0, 0.0], vec![0.0; 3], vec![0.0, 0.0, 16.0 / 15.0])
            .unwrap();
        assert_eq!(integer_balancing(&curve).unwrap(), 2);
        let (q, alt) = balancing_lottery(&curve).unwrap();
        let alt = alt.unwrap();
        assert_eq!((q, alt.quantity), (1, 2));
        assert!((alt.probability - (1.0 / 3.0) / (1.0 / 3.0 + 16.0 / 15.0)).abs() < 1e-15);
        let d = PolicyDecision { alternative: Some(alt), ..PolicyDecision::plain(q) };
        assert_eq!((d.resolve(0.1), d.resolve(0.9)), (2, 1));
        let exact = curve.at(2);
        let flat = MarginalCostCurve::from_parts(vec![exact.shortage; 1], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(balancing_lottery(&flat).unwrap(), (0, None));
    }

    #[test]
    fn continuous_uniform_balances_at_half() {
        let q = fractional_balancing(&UniformLastPeriod { p: 2.0, h: 2.0 }).unwrap();
        assert!((q - 0.5).abs() < 1e-7, "q = {q}");
        let q = fractional_myopic(&UniformLastPeriod { p: 3.0, h: 1.0 });
        assert!((q - 0.75).abs() < 1e-7, "q = {q}");
    }

    #[test]
    fn last_period_myopic_is_the_newsvendor() {
        let pmf = Pmf::new(vec![0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
        let model = IndependentDemand::stationary(pmf.clone(), 2).unwrap();
        let info = InfoSet::new(2, vec![1], vec![]).unwrap();
        for (p, h) in [(3.0, 1.0), (1.0, 1.0), (1.0, 4.0), (9.0, 1.0)] {
            let params = TransformedCostParams::new(p, h, 2.0, 1.0).unwrap();
            for x in [state(&[0]), state(&[1]), state(&[3])] {
                let q = myopic_lower_bound(&x, 2, &info, &params, &model, 6).unwrap();
                let fractile = pmf.inverse_cdf(p / (p + h)).unwrap();
                assert_eq!(q, fractile.saturating_sub(x.total()), "p={p} h={h} x={x:?}");
            }
        }
    }

    #[test]
    fn costly_outdating_with_no_demand_means_no_order() {
        let model = IndependentDemand::zero(3).unwrap();
        let params = TransformedCostParams::new(1.0, 0.0, 1e9, 1.0).unwrap();
        assert_eq!(myopic_lower_bound(&state(&[0, 0]), 1, &InfoSet::initial(), &params, &model, 5).unwrap(), 0);
    }

    #[test]
    fn upper_bound_examples() {
        let pmf = Pmf::uniform(0, 6).unwrap();
        let model = IndependentDemand::stationary(pmf, 3).unwrap();
        let params = TransformedCostParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let info = InfoSet::initial();
        let full = default_upper_bound(&state(&[4, 5]), 1, &info, &params, &model, UpperBoundMode::Fractile).unwrap();
        assert_eq!(full, Some(0));
        let certain = TransformedCostParams::new(1.0, 0.0, 1.0, 1.0).unwrap();
        let top = default_upper_bound(&state(&[0, 0]), 1, &info, &certain, &model, UpperBoundMode::Fractile).unwrap();
        assert_eq!(top, Some(6));
        let none = default_upper_bound(&state(&[0, 0]), 1, &info, &certain, &model, UpperBoundMode::Infinite).unwrap();
        assert_eq!(none, None);
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_order(2, 4, Some(6)).unwrap(), 4);
        assert_eq!(clamp_order(3, 1, Some(6)).unwrap(), 3);
        assert_eq!(clamp_order(0, 9, Some(6)).unwrap(), 6);
        assert_eq!(clamp_order(0, 9, None).unwrap(), 9);
        assert!(matches!(clamp_order(5, 4, Some(3)), Err(Error::Consistency(_))));
    }

    #[test]
    fn trivial_bounds_reduce_to_balancing() {
        let pmf = Pmf::new(vec![0.3, 0.3, 0.2, 0.2]).unwrap();
        let model = IndependentDemand::stationary(pmf, 4).unwrap();
        let params = TransformedCostParams::new(6.0, 0.5, 2.0, 1.0).unwrap();
        let x = state(&[1, 0]);
        let curve = closed_form_curve(&x, 1, &InfoSet::initial(), &params, &model, 3).unwrap();
        let b = integer_balancing(&curve).unwrap();
        assert_eq!(clamp_order(0, b, None).unwrap(), b);
    }

    #[test]
    fn base_stock_examples() {
        let info = InfoSet::initial();
        let policy = BaseStockPolicy::constant(5);
        assert_eq!(policy.decide(1, &state(&[3, 4]), &info).unwrap().quantity, 0);
        assert_eq!(policy.decide(1, &state(&[0, 0]), &info).unwrap().quantity, 5);
        let rising = BaseStockPolicy::non_decreasing(vec![2, 3, 5]).unwrap();
        assert_eq!(rising.decide(3, &state(&[1, 1]), &info).unwrap().quantity, 3);
        assert!(BaseStockPolicy::non_decreasing(vec![3, 2]).is_err());
    }

    #[test]
    fn base_stock_search_on_zero_demand() {
        let model: Arc<dyn DemandModel> = Arc::new(IndependentDemand::zero(3).unwrap());
        let params = TransformedCostParams::new(3.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(optimal_base_stock(model, &params, 2, 0..=4, 20, 1).unwrap(), (0, 0.0));
    }

    #[test]
    fn single_period_base_stock_is_the_fractile() {
        let pmf = Pmf::new(vec![0.1, 0.2, 0.3, 0.2, 0.2]).unwrap();
        let model: Arc<dyn DemandModel> = Arc::new(IndependentDemand::stationary(pmf.clone(), 1).unwrap());
        let params = TransformedCostParams::new(4.0, 1.0, 0.0, 1.0).unwrap();
        let (s, _) = optimal_base_stock(model, &params, 2, 0..=6, 20_000, 3).unwrap();
        let fractile = pmf.inverse_cdf(0.8).unwrap();
        assert!(s.abs_diff(fractile) <= 1, "S = {s}, fractile = {fractile}");
    }

    fn arb_pmf() -> impl Strategy<Value = Pmf> {
        prop::collection::vec(0.0f64..1.0, 1..6).prop_filter_map("positive mass", |w| {
            let total: f64 = w.iter().sum();
            (total > 0.0).then(|| Pmf::new(w.iter().map(|v| v / total).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn balancing_contract(
            pmfs in prop::collection::vec(arb_pmf(), 1..5),
            levels in prop::collection::vec(0u32..3, 1..3),
            p in 0.1f64..10.0, h in 0.0f64..3.0, w in 0.0f64..10.0, beta in 0.5f64..=1.0,
        ) {
            let model = IndependentDemand::new(pmfs).unwrap();
            let params = TransformedCostParams::new(p, h, w, beta).unwrap();
            let x = InventoryVector::new(levels).unwrap();
            let info = InfoSet::initial();
            let cap = default_search_cap(&x, 1, &info, &model).unwrap();
            let curve = closed_form_curve(&x, 1, &info, &params, &model, cap).unwrap();

            let q = integer_balancing(&curve).unwrap();
            let at = curve.at(q);
            prop_assert!(at.overage() >= at.shortage);
            if q >= 1 {
                let before = curve.at(q - 1);
                prop_assert!(before.overage() < before.shortage);
            }

            let qf = fractional_balancing(&curve).unwrap();
            let m = curve.evaluate(qf);
            prop_assert!((m.shortage - m.overage()).abs() <= BALANCE_TOLERANCE * (m.total() + 1.0));

            let (base, alternative) = balancing_lottery(&curve).unwrap();
            let mean = f64::from(base) + alternative.map_or(0.0, |a| a.probability);
            prop_assert!((mean - qf).abs() <= 1e-6 * (1.0 + qf), "lottery mean {} vs {}", mean, qf);
            if let Some(a) = alternative {
                prop_assert_eq!(a.quantity, base + 1);
                prop_assert!(a.probability > 0.0 && a.probability < 1.0);
                prop_assert_eq!(a.quantity, q);
            } else {
                prop_assert_eq!(base, q);
            }

            let lower = integer_myopic(&curve).unwrap();
            let best = (0..=cap).map(|q| curve.at(q).total()).fold(f64::INFINITY, f64::min);
            prop_assert!(curve.at(lower).total() <= best + 1e-9 * (1.0 + best));

            let upper = default_upper_bound(&x, 1, &info, &params, &model, UpperBoundMode::Fractile).unwrap();
            if upper.is_none_or(|u| lower <= u) {
                let tb = clamp_order(lower, q, upper).unwrap();
                prop_assert!(tb >= lower);
                if let Some(u) = upper {
                    prop_assert!(tb <= u);
                    if (lower..=u).contains(&q) {
                        prop_assert_eq!(tb, q);
                    }
                }
            }
        }
    }
}
