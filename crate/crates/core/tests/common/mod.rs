//! Fixtures shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::borrow::Cow;

use perishable::demand::{DemandModel, InfoSet, Pmf, Scenario};
use perishable::inventory::{InventoryVector, TransformedCostParams};
use perishable::marginal::MarginalCostTriple;
use perishable::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Independent demand whose next `window` values are announced exactly.
/// The signal for day `s` is the demand of day `s`.
#[derive(Debug, Clone)]
pub struct AnnouncedDemand {
    pub pmfs: Vec<Pmf>,
    pub window: usize,
}

impl DemandModel for AnnouncedDemand {
    fn horizon(&self) -> usize {
        self.pmfs.len()
    }

    fn forecast_window(&self) -> usize {
        self.window
    }

    fn independent_given_info(&self) -> bool {
        true
    }

    fn pmf(&self, s: usize, info: &InfoSet) -> Result<Cow<'_, Pmf>> {
        if s < info.t || s > self.horizon() {
            return Err(Error::Range(format!("period {s}")));
        }
        Ok(match info.signals.get(s - 1) {
            Some(d) => Cow::Owned(Pmf::point_mass(*d)),
            None => Cow::Borrowed(&self.pmfs[s - 1]),
        })
    }

    fn sample_scenario(&self, rng: &mut ChaCha8Rng) -> Scenario {
        let demands: Vec<u32> = self.pmfs.iter().map(|p| p.sample(rng)).collect();
        Scenario { counts: demands.clone(), demands }
    }

    fn sample_window(&self, info: &InfoSet, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
        (info.t..info.t + len).map(|s| Ok(self.pmf(s, info)?.sample(rng))).collect()
    }
}

/// Information at period `t` after the given history and announcements.
pub fn info_at(t: usize, history: &[u32], window: usize) -> InfoSet {
    let known = if window == 0 { 0 } else { (t + window - 1).min(history.len()) };
    InfoSet { t, realized: history[..t - 1].to_vec(), signals: history[..known].to_vec() }
}

/// `(P, H, W)` by walking every demand path and tracking the new units
/// through oldest-first issuing.
pub fn enumerate_triple(
    model: &dyn DemandModel,
    x: &InventoryVector,
    t: usize,
    info: &InfoSet,
    q: u32,
    params: &TransformedCostParams,
) -> MarginalCostTriple {
    let k_life = x.lifetime();
    let horizon = model.horizon();
    let last = (t + k_life - 1).min(horizon);
    let pmfs: Vec<Pmf> = (t..=last).map(|s| model.pmf(s, info).unwrap().into_owned()).collect();

    // (remaining periods of use, units), oldest first; the new cohort is last.
    let mut cohorts: Vec<(usize, u32)> = (1..k_life).rev().map(|k| (k_life - k, x.levels()[k - 1])).collect();
    cohorts.push((k_life, q));

    let y = f64::from(q + x.total());
    let shortage = params.discount(t) * params.p * pmfs[0].expected_excess(y);

    let mut holding = 0.0;
    let mut outdating = 0.0;
    walk(&pmfs, 0, t, k_life, horizon, cohorts, 1.0, params, &mut holding, &mut outdating);
    MarginalCostTriple { shortage, holding, outdating }
}

#[allow(clippy::too_many_arguments)]
fn walk(
    pmfs: &[Pmf],
    i: usize,
    t: usize,
    k_life: usize,
    horizon: usize,
    cohorts: Vec<(usize, u32)>,
    prob: f64,
    params: &TransformedCostParams,
    holding: &mut f64,
    outdating: &mut f64,
) {
    if i == pmfs.len() {
        return;
    }
    let s = t + i;
    for (d, pd) in pmfs[i].probs().iter().enumerate() {
        if *pd == 0.0 {
            continue;
        }
        let mut left = d as u32;
        let mut next = cohorts.clone();
        for c in next.iter_mut() {
            let used = c.1.min(left);
            c.1 -= used;
            left -= used;
        }
        let fresh = next.last().unwrap().1;
        let p = prob * pd;
        *holding += p * params.discount(s) * params.h * f64::from(fresh);
        if s == t + k_life - 1 && s <= horizon {
            *outdating += p * params.discount(s) * params.w * f64::from(fresh);
        }
        for c in next.iter_mut() {
            c.0 -= 1;
        }
        next.retain(|c| c.0 > 0);
        if next.is_empty() {
            continue;
        }
        walk(pmfs, i + 1, t, k_life, horizon, next, p, params, holding, outdating);
    }
}

/// Demand distributions on `{0, 1, 2}` used to build small instances.
pub fn small_pmfs() -> Vec<Pmf> {
    [
        vec![1.0],
        vec![0.0, 1.0],
        vec![0.0, 0.0, 1.0],
        vec![0.5, 0.5],
        vec![0.0, 0.5, 0.5],
        vec![0.5, 0.0, 0.5],
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        vec![0.2, 0.5, 0.3],
        vec![0.6, 0.1, 0.3],
    ]
    .into_iter()
    .map(|p| Pmf::new(p).unwrap())
    .collect()
}

/// Demand patterns, repeated cyclically over the horizon.
pub fn small_patterns() -> Vec<Vec<Pmf>> {
    let pmfs = small_pmfs();
    let mut out: Vec<Vec<Pmf>> = pmfs.iter().map(|p| vec![p.clone()]).collect();
    for (a, b) in [(2, 0), (0, 2), (3, 4), (7, 8), (6, 1), (8, 5)] {
        out.push(vec![pmfs[a].clone(), pmfs[b].clone()]);
    }
    out.push(vec![pmfs[2].clone(), pmfs[4].clone(), pmfs[3].clone(), pmfs[0].clone()]);
    out
}

#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub lifetime: usize,
    pub params: TransformedCostParams,
    pub pmfs: Vec<Pmf>,
}

/// Every combination of lifetime 2..=3, horizon 1..=4, the demand patterns
/// above and a small grid of costs with zero holding cost.
pub fn zero_holding_suite() -> Vec<SmallInstance> {
    let mut out = Vec::new();
    for lifetime in [2, 3] {
        for horizon in 1..=4 {
            for pattern in small_patterns() {
                let pmfs: Vec<Pmf> = (0..horizon).map(|i| pattern[i % pattern.len()].clone()).collect();
                for p in [1.0, 3.0, 10.0] {
                    for w in [1.0, 4.0] {
                        for beta in [0.8, 1.0] {
                            out.push(SmallInstance {
                                lifetime,
                                params: TransformedCostParams::new(p, 0.0, w, beta).unwrap(),
                                pmfs: pmfs.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn random_pmf(rng: &mut impl Rng, max_value: usize) -> Pmf {
    loop {
        let w: Vec<f64> = (0..=rng.random_range(0..=max_value))
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return Pmf::new(w.iter().map(|v| v / total).collect()).unwrap();
        }
    }
}
