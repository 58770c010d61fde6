//! Sufficient conditions under which FIFO issuing is optimal, and the
//! resulting performance guarantees.
//!
//! The checks work on the per-period marginal distributions, so they accept
//! any [`CumulativeDistribution`]; models whose distributions depend on a
//! forecast signal are reported as unknown.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::demand::{CumulativeDistribution, DemandModel, InfoSet, Pmf};
use crate::error::{Error, Result};
use crate::inventory::{CostParams, TransformedCostParams};
use crate::policies::critical_ratio;

const CONDITION_SLACK: f64 = 1e-12;

/// Per-period marginals of a model whose distributions ignore the history.
pub fn model_marginals(model: &dyn DemandModel) -> Result<Vec<Pmf>> {
    if model.forecast_window() > 0 || !model.independent_given_info() {
        return Err(Error::Capability(
            "demand distributions depend on forecast signals; FIFO conditions are unknown".into(),
        ));
    }
    let info = InfoSet::initial();
    (1..=model.horizon()).map(|t| model.pmf(t, &info).map(|p| p.into_owned())).collect()
}

/// `inf { y : F(y) >= ratio }`, taking 0 when the ratio is 0.
pub fn fractile<D: CumulativeDistribution + ?Sized>(dist: &D, ratio: f64) -> Result<f64> {
    if ratio <= 0.0 {
        Ok(0.0)
    } else {
        dist.inverse_cdf(ratio)
    }
}

/// Critical fractiles `y_t` of every period.
pub fn fractiles<D: CumulativeDistribution>(marginals: &[D], params: &TransformedCostParams) -> Result<Vec<f64>> {
    let ratio = critical_ratio(params);
    marginals.iter().map(|d| fractile(d, ratio)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractileCheck {
    pub holds: bool,
    pub fractiles: Vec<f64>,
}

/// Whether the critical fractiles are non-decreasing over the horizon.
pub fn check_fractile_monotone<D: CumulativeDistribution>(
    marginals: &[D],
    params: &TransformedCostParams,
) -> Result<FractileCheck> {
    let fractiles = fractiles(marginals, params)?;
    let holds = fractiles.windows(2).all(|w| w[0] <= w[1]);
    Ok(FractileCheck { holds, fractiles })
}

/// [`check_fractile_monotone`] on the marginals of a demand model.
pub fn check_model_fractiles(model: &dyn DemandModel, params: &TransformedCostParams) -> Result<FractileCheck> {
    check_fractile_monotone(&model_marginals(model)?, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCondition {
    pub holds: bool,
    /// The same test stated on untransformed costs, when those are known.
    pub original_holds: Option<bool>,
}

fn at_most(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + CONDITION_SLACK * (1.0 + rhs.abs())
}

/// `h <= (1 - beta) / beta * w` on transformed costs.
pub fn check_cost_condition(params: &TransformedCostParams) -> bool {
    at_most(params.h, (1.0 - params.beta) / params.beta * params.w)
}

/// The cost condition on original costs, with both forms reported.
pub fn check_cost_condition_original(costs: &CostParams) -> Result<CostCondition> {
    let transformed = costs.transform()?;
    Ok(CostCondition {
        holds: check_cost_condition(&transformed),
        original_holds: Some(at_most(costs.h, (1.0 - costs.beta) / costs.beta * costs.w)),
    })
}

/// `max over 1 < s <= t <= T of F_t(y_s)`, or 0 when there is no such pair.
///
/// Because each `F_t` is non-decreasing, the inner maximum over `s` is
/// attained at the running maximum of the fractiles.
pub fn mixed_gamma<D: CumulativeDistribution>(marginals: &[D], fractiles: &[f64]) -> f64 {
    let mut running = f64::NEG_INFINITY;
    let mut gamma: f64 = 0.0;
    for t in 1..marginals.len() {
        running = running.max(fractiles[t]);
        gamma = gamma.max(marginals[t].cdf(running));
    }
    gamma
}

/// Largest holding cost the mixed condition admits for a given `gamma`.
pub fn mixed_threshold(gamma: f64, params: &TransformedCostParams) -> f64 {
    if gamma <= 0.0 {
        return f64::INFINITY;
    }
    let bg = params.beta * gamma;
    (1.0 - gamma) / gamma * params.p + (1.0 - bg) / bg * params.w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedCondition {
    pub holds: bool,
    pub gamma: f64,
    pub threshold: f64,
}

/// Tests `h` against the threshold implied by `gamma`.
pub fn check_mixed_condition<D: CumulativeDistribution>(
    marginals: &[D],
    params: &TransformedCostParams,
) -> Result<MixedCondition> {
    let fractiles = fractiles(marginals, params)?;
    let gamma = mixed_gamma(marginals, &fractiles);
    let threshold = mixed_threshold(gamma, params);
    Ok(MixedCondition { holds: at_most(params.h, threshold), gamma, threshold })
}

/// Guarantee of the proportional-balancing policy, `2 + (K-2)h / (Kh + w)`.
pub fn chao_guarantee(lifetime: usize, params: &TransformedCostParams) -> Result<f64> {
    if lifetime < 2 {
        return Err(Error::Validation(format!("lifetime {lifetime} must be at least 2")));
    }
    let k = lifetime as f64;
    let denom = k * params.h + params.w;
    if denom <= 0.0 {
        return Ok(2.0);
    }
    Ok(2.0 + (k - 2.0) * params.h / denom)
}

/// Everything the FIFO checks can say about one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FifoReport {
    /// `None` when the model's distributions depend on forecasts.
    pub fractile_monotone: Option<bool>,
    pub cost_condition: bool,
    pub mixed_condition: Option<bool>,
    pub gamma: Option<f64>,
    pub mixed_threshold: Option<f64>,
    pub fractiles: Option<Vec<f64>>,
    /// 2 when any condition is verified, otherwise `None`.
    pub our_guarantee: Option<f64>,
    pub chao_guarantee: f64,
}

impl FifoReport {
    pub fn guarantee_label(&self) -> String {
        match self.our_guarantee {
            Some(g) => format!("{g}"),
            None => "unverified (2 if FIFO issuing is optimal)".to_string(),
        }
    }
}

fn show(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "true",
        Some(false) => "false",
        None => "unknown",
    }
}

fn show_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "unknown".to_string(), |x| format!("{x:.6}"))
}

impl fmt::Display for FifoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22}{}", "fractile monotone", show(self.fractile_monotone))?;
        writeln!(f, "{:<22}{}", "cost condition", self.cost_condition)?;
        writeln!(f, "{:<22}{}", "mixed condition", show(self.mixed_condition))?;
        writeln!(f, "{:<22}{}", "gamma", show_f64(self.gamma))?;
        writeln!(f, "{:<22}{}", "mixed threshold", show_f64(self.mixed_threshold))?;
        writeln!(f, "{:<22}{}", "balancing guarantee", self.guarantee_label())?;
        write!(f, "{:<22}{:.6}", "chao guarantee", self.chao_guarantee)
    }
}

/// Report from explicit marginals; `None` marks them as unknown.
pub fn guarantee_report_for<D: CumulativeDistribution>(
    marginals: Option<&[D]>,
    params: &TransformedCostParams,
    lifetime: usize,
) -> Result<FifoReport> {
    let cost_condition = check_cost_condition(params);
    let chao = chao_guarantee(lifetime, params)?;
    let (monotone, mixed) = match marginals {
        Some(m) => (Some(check_fractile_monotone(m, params)?), Some(check_mixed_condition(m, params)?)),
        None => (None, None),
    };
    let any = cost_condition || monotone.as_ref().is_some_and(|c| c.holds) || mixed.as_ref().is_some_and(|c| c.holds);
    Ok(FifoReport {
        fractile_monotone: monotone.as_ref().map(|c| c.holds),
        cost_condition,
        mixed_condition: mixed.map(|c| c.holds),
        gamma: mixed.map(|c| c.gamma),
        mixed_threshold: mixed.map(|c| c.threshold),
        fractiles: monotone.map(|c| c.fractiles),
        our_guarantee: any.then_some(2.0),
        chao_guarantee: chao,
    })
}

/// Report for a demand model.
pub fn guarantee_report(
    model: &dyn DemandModel,
    params: &TransformedCostParams,
    lifetime: usize,
) -> Result<FifoReport> {
    match model_marginals(model) {
        Ok(m) => guarantee_report_for(Some(&m), params, lifetime),
        Err(Error::Capability(_)) => guarantee_report_for::<Pmf>(None, params, lifetime),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{CompoundPoissonDemand, CompoundPoissonSpec, Exponential, ForecastDemand, IndependentDemand};
    use proptest::prelude::*;

    fn tp(p: f64, h: f64, w: f64, beta: f64) -> TransformedCostParams {
        TransformedCostParams::new(p, h, w, beta).unwrap()
    }

    fn alternating(t: usize) -> Vec<Exponential> {
        (1..=t).map(|s| Exponential::new(if s % 2 == 1 { 5.0 } else { 6.0 }).unwrap()).collect()
    }

    fn gamma_double_loop<D: CumulativeDistribution>(marginals: &[D], fractiles: &[f64]) -> f64 {
        let mut gamma: f64 = 0.0;
        for t in 1..marginals.len() {
            for s in 1..=t {
                gamma = gamma.max(marginals[t].cdf(fractiles[s]));
            }
        }
        gamma
    }

    #[test]
    fn chao_examples() {
        for (beta, expected) in [(0.9, 2.214), (0.95, 2.125), (0.99, 2.029)] {
            let params = CostParams { c: 1.0, p: 2.0, h: 0.0, w: 0.0, beta }.transform().unwrap();
            assert!((chao_guarantee(5, &params).unwrap() - expected).abs() < 1e-3);
        }
        assert!((chao_guarantee(5, &tp(5.0, 1.0, 5.0, 1.0)).unwrap() - 2.3).abs() < 1e-12);
        assert_eq!(chao_guarantee(4, &tp(5.0, 0.0, 3.0, 1.0)).unwrap(), 2.0);
        assert!(chao_guarantee(1, &tp(5.0, 0.0, 3.0, 1.0)).is_err());
    }

    #[test]
    fn cost_condition_examples() {
        let example = CostParams { c: 1.0, p: 2.0, h: 0.0, w: 0.0, beta: 0.9 };
        let both = check_cost_condition_original(&example).unwrap();
        assert!(both.holds && both.original_holds == Some(true));
        assert!(check_cost_condition(&tp(3.0, 0.0, 2.0, 1.0)));
        assert!(!check_cost_condition(&tp(5.0, 1.0, 5.0, 1.0)));
    }

    #[test]
    fn alternating_exponentials() {
        let params = tp(5.0, 1.0, 5.0, 1.0);
        let m = alternating(6);
        let mixed = check_mixed_condition(&m, &params).unwrap();
        let analytic = 1.0 - (-6.0 * 6f64.ln() / 5.0).exp();
        assert!((mixed.gamma - analytic).abs() < 1e-12);
        assert!((mixed.gamma - 0.882).abs() < 0.01, "{}", mixed.gamma);
        assert!((mixed.threshold - 1.338).abs() < 0.05, "{}", mixed.threshold);
        assert!(mixed.holds);
        assert!(!check_fractile_monotone(&m, &params).unwrap().holds);
        let report = guarantee_report_for(Some(&m), &params, 5).unwrap();
        assert_eq!(report.our_guarantee, Some(2.0));
        assert!((report.chao_guarantee - 2.3).abs() < 1e-12);
    }

    #[test]
    fn iid_exponential_reduces_to_h() {
        let params = tp(4.0, 1.5, 2.0, 1.0);
        let m = vec![Exponential::new(3.0).unwrap(); 5];
        let mixed = check_mixed_condition(&m, &params).unwrap();
        assert!((mixed.gamma - 4.0 / 5.5).abs() < 1e-12);
        let p_term = (1.0 - mixed.gamma) / mixed.gamma * params.p;
        assert!((p_term - params.h).abs() < 1e-12);
        assert!(mixed.holds);
        assert!(check_fractile_monotone(&m, &params).unwrap().holds);
    }

    #[test]
    fn iid_discrete_is_monotone() {
        let model = IndependentDemand::stationary(Pmf::poisson(3.0).unwrap(), 6).unwrap();
        let params = tp(4.0, 1.0, 1.0, 1.0);
        assert!(check_model_fractiles(&model, &params).unwrap().holds);
        let report = guarantee_report(&model, &params, 3).unwrap();
        assert_eq!(report.fractile_monotone, Some(true));
        assert_eq!(report.mixed_condition, Some(true));
    }

    #[test]
    fn point_mass_drop_gives_gamma_one() {
        let m = vec![Pmf::point_mass(10), Pmf::point_mass(0)];
        let params = tp(4.0, 1.0, 2.0, 0.9);
        let mixed = check_mixed_condition(&m, &params).unwrap();
        assert_eq!(mixed.gamma, 1.0);
        assert!((mixed.threshold - (1.0 - 0.9) / 0.9 * 2.0).abs() < 1e-12);
        assert_eq!(mixed.holds, check_cost_condition(&params));
    }

    #[test]
    fn weekly_platelet_fractiles_are_not_monotone() {
        let spec =
            CompoundPoissonSpec { arrival_means: vec![2.6, 5.5, 1.9, 3.2, 3.7, 0.1, 0.0], per_arrival_mean: 0.32 };
        let model = CompoundPoissonDemand::new(spec, 7).unwrap();
        let check = check_model_fractiles(&model, &tp(1000.0, 1.0, 500.0, 1.0)).unwrap();
        assert!(!check.holds, "{:?}", check.fractiles);
    }

    #[test]
    fn forecast_models_are_unknown() {
        let spec = CompoundPoissonSpec { arrival_means: vec![2.0], per_arrival_mean: 0.5 };
        let model = ForecastDemand::new(spec, 4, 2).unwrap();
        assert!(matches!(check_model_fractiles(&model, &tp(1.0, 1.0, 1.0, 1.0)), Err(Error::Capability(_))));
        let report = guarantee_report(&model, &tp(1.0, 1.0, 0.0, 1.0), 3).unwrap();
        assert_eq!(report.fractile_monotone, None);
        assert_eq!(report.our_guarantee, None);
    }

    #[test]
    fn decreasing_demand_without_outdating_is_unverified() {
        let m: Vec<Pmf> = [8, 6, 4, 2].into_iter().map(Pmf::point_mass).collect();
        let report = guarantee_report_for(Some(&m), &tp(3.0, 1.0, 0.0, 1.0), 3).unwrap();
        assert_eq!(
            (report.fractile_monotone, report.cost_condition, report.mixed_condition),
            (Some(false), false, Some(false))
        );
        assert_eq!(report.our_guarantee, None);
        assert!(report.guarantee_label().starts_with("unverified"));
    }

    proptest! {
        #[test]
        fn gamma_matches_double_loop(
            means in proptest::collection::vec(0.5f64..20.0, 1..10),
            p in 0.1f64..10.0,
            h in 0.0f64..10.0,
        ) {
            let params = tp(p, h, 1.0, 1.0);
            let m: Vec<Exponential> = means.iter().map(|x| Exponential::new(*x).unwrap()).collect();
            let f = fractiles(&m, &params).unwrap();
            prop_assert_eq!(mixed_gamma(&m, &f), gamma_double_loop(&m, &f));
            prop_assert!((0.0..=1.0).contains(&mixed_gamma(&m, &f)));

            let pmfs: Vec<Pmf> = means.iter().map(|x| Pmf::poisson(*x).unwrap()).collect();
            let f = fractiles(&pmfs, &params).unwrap();
            prop_assert_eq!(mixed_gamma(&pmfs, &f), gamma_double_loop(&pmfs, &f));
        }

        #[test]
        fn monotone_implies_mixed(
            mut means in proptest::collection::vec(0.5f64..20.0, 1..10),
            p in 0.1f64..10.0,
            h in 0.0f64..10.0,
            w in 0.0f64..10.0,
            beta in 0.5f64..=1.0,
        ) {
            means.sort_by(f64::total_cmp);
            let params = tp(p, h, w, beta);
            let m: Vec<Exponential> = means.iter().map(|x| Exponential::new(*x).unwrap()).collect();
            prop_assert!(check_fractile_monotone(&m, &params).unwrap().holds);
            prop_assert!(check_mixed_condition(&m, &params).unwrap().holds);
        }

        #[test]
        fn chao_is_at_least_two(k in 2usize..10, h in 0.0f64..10.0, w in 0.0f64..10.0) {
            let g = chao_guarantee(k, &tp(1.0, h, w, 1.0)).unwrap();
            prop_assert!(g >= 2.0);
            let equality = k == 2 || h == 0.0;
            prop_assert_eq!(g == 2.0, equality);
        }
    }
}
