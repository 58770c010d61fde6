//! Demand processes.
//!
//! Every model exposes the distribution of `D_s` conditional on the
//! information set available at the start of some period `t <= s`. Integer
//! demand is tabulated as a [`Pmf`] on `0..=bound`; tails lighter than
//! [`TAIL_TOLERANCE`] are folded onto the bound so every table normalizes
//! exactly.
//!
//! The surgery-driven platelet model is a compound Poisson process: a Poisson
//! number of surgeries per weekday, each consuming a geometric number of
//! units on `{0, 1, 2, ...}`. With a perfect count forecast the demand of a
//! day whose count is known is negative binomial.

use std::borrow::Cow;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail mass below which tabulation stops.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Allowed deviation of a user-supplied pmf from unit mass.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Slack used when comparing a cumulative sum against a target probability.
const CDF_SLACK: f64 = 1e-12;

const MAX_SUPPORT: usize = 1 << 20;

/// A probability mass function on `0..=bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl Pmf {
    /// Builds a pmf from explicit probabilities, renormalizing away rounding
    /// error. Trailing zeros are dropped so `bound` is the support maximum.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Config("pmf needs at least one entry".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Config(format!("pmf entry {bad} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Config(format!("pmf sums to {total}, expected 1")));
        }
        Ok(Self::normalized(probs))
    }

    fn normalized(mut probs: Vec<f64>) -> Self {
        while probs.len() > 1 && probs[probs.len() - 1] == 0.0 {
            probs.pop();
        }
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc.min(1.0));
        }
        *cdf.last_mut().expect("non-empty") = 1.0;
        Self { probs, cdf }
    }

    /// Tabulates `term(0), term(1), ...` until the remaining mass drops
    /// below [`TAIL_TOLERANCE`]; the remainder is lumped onto the last value.
    pub fn from_terms(mut term: impl FnMut(usize) -> f64) -> Result<Self> {
        let mut probs = Vec::new();
        let mut acc = 0.0;
        loop {
            let p = term(probs.len());
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Config(format!("pmf term {} is {p}", probs.len())));
            }
            probs.push(p);
            acc += p;
            if acc >= 1.0 - TAIL_TOLERANCE {
                break;
            }
            if probs.len() >= MAX_SUPPORT {
                return Err(Error::Config(format!("pmf did not normalize within {MAX_SUPPORT} terms (mass {acc})")));
            }
        }
        let last = probs.len() - 1;
        probs[last] += (1.0 - acc).max(0.0);
        Ok(Self::normalized(probs))
    }

    pub fn point_mass(value: u32) -> Self {
        let mut probs = vec![0.0; value as usize + 1];
        probs[value as usize] = 1.0;
        Self::normalized(probs)
    }

    /// Discrete uniform on `lo..=hi`.
    pub fn uniform(lo: u32, hi: u32) -> Result<Self> {
        if lo > hi {
            return Err(Error::Config(format!("uniform support {lo}..={hi} is empty")));
        }
        let mass = 1.0 / f64::from(hi - lo + 1);
        let probs = (0..=hi).map(|v| if v >= lo { mass } else { 0.0 }).collect();
        Ok(Self::normalized(probs))
    }

    pub fn poisson(mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::Config(format!("Poisson mean {mean} must be finite and >= 0")));
        }
        if mean == 0.0 {
            return Ok(Self::point_mass(0));
        }
        let mut prev = (-mean).exp();
        Self::from_terms(|k| {
            if k > 0 {
                prev *= mean / k as f64;
            }
            prev
        })
    }

    /// Geometric on `{0, 1, ...}` with `P(X = j) = (1 - theta) theta^j`.
    pub fn geometric(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        if theta == 0.0 {
            return Ok(Self::point_mass(0));
        }
        Self::from_terms(|j| (1.0 - theta) * theta.powi(j as i32))
    }

    /// Sum of `count` independent geometrics with parameter `theta`.
    pub fn negative_binomial(count: u32, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        if count == 0 || theta == 0.0 {
            return Ok(Self::point_mass(0));
        }
        let n = f64::from(count);
        let mut prev = (1.0 - theta).powf(n);
        Self::from_terms(|k| {
            if k > 0 {
                prev *= theta * (n + k as f64 - 1.0) / k as f64;
            }
            prev
        })
    }

    /// Compound Poisson with geometric summands, tabulated by Panjer's recursion.
    pub fn compound_poisson_geometric(arrival_mean: f64, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        if !(arrival_mean.is_finite() && arrival_mean >= 0.0) {
            return Err(Error::Config(format!("arrival mean {arrival_mean} must be >= 0")));
        }
        if arrival_mean == 0.0 || theta == 0.0 {
            return Ok(Self::point_mass(0));
        }
        let severity = |j: usize| (1.0 - theta) * theta.powi(j as i32);
        let mut table: Vec<f64> = Vec::new();
        Self::from_terms(|s| {
            let value = if s == 0 {
                (-arrival_mean * theta).exp()
            } else {
                let acc: f64 = (1..=s).map(|j| j as f64 * severity(j) * table[s - j]).sum();
                arrival_mean / s as f64 * acc
            };
            table.push(value);
            value
        })
    }

    /// Largest value with positive tabulated mass.
    pub fn bound(&self) -> u32 {
        (self.probs.len() - 1) as u32
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, v: u32) -> f64 {
        self.probs.get(v as usize).copied().unwrap_or(0.0)
    }

    /// `P(D <= v)`.
    pub fn cdf_at(&self, v: i64) -> f64 {
        if v < 0 {
            0.0
        } else {
            self.cdf.get(v as usize).copied().unwrap_or(1.0)
        }
    }

    /// `P(D < u)`.
    pub fn prob_below(&self, u: i64) -> f64 {
        self.cdf_at(u - 1)
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(v, p)| v as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probs.iter().enumerate().map(|(v, p)| (v as f64 - mean).powi(2) * p).sum()
    }

    /// `E[(D - y)^+]`.
    pub fn expected_excess(&self, y: f64) -> f64 {
        self.probs.iter().enumerate().filter(|(v, _)| *v as f64 > y).map(|(v, p)| (v as f64 - y) * p).sum()
    }

    /// Smallest `v` with `P(D <= v) >= prob`.
    pub fn inverse_cdf(&self, prob: f64) -> Result<u32> {
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(Error::Config(format!("quantile level {prob} outside (0, 1]")));
        }
        let idx = self.cdf.partition_point(|c| *c < prob - CDF_SLACK);
        Ok(idx.min(self.probs.len() - 1) as u32)
    }

    /// Inverse-transform draw from a uniform `u` in `[0, 1)`.
    pub fn quantile_draw(&self, u: f64) -> u32 {
        let idx = self.cdf.partition_point(|c| *c <= u);
        idx.min(self.probs.len() - 1) as u32
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.quantile_draw(rng.random::<f64>())
    }

    /// Distribution of the sum of two independent draws.
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        let mut out = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, a) in self.probs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.probs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::normalized(out)
    }

    /// Dumps `value,prob,cdf` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
        writer.write_record(["value", "prob", "cdf"]).map_err(io)?;
        for (v, (p, c)) in self.probs.iter().zip(&self.cdf).enumerate() {
            writer.write_record([v.to_string(), p.to_string(), c.to_string()]).map_err(io)?;
        }
        writer.flush().map_err(|e| Error::Config(format!("csv flush failed: {e}")))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && (0.0..1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Config(format!("geometric parameter {theta} outside [0, 1)")))
    }
}

/// Success parameter of the `{0, 1, ...}` geometric with the given mean.
pub fn geometric_theta(mean: f64) -> f64 {
    mean / (1.0 + mean)
}

/// Draws a geometric on `{0, 1, ...}` with `P(X >= j) = theta^j`.
pub fn sample_geometric<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> u32 {
    if theta <= 0.0 {
        return 0;
    }
    let u = 1.0 - rng.random::<f64>();
    (u.ln() / theta.ln()).floor().min(u32::MAX as f64) as u32
}

/// A one-dimensional distribution on the real line, used by the FIFO checks
/// where continuous demand appears.
pub trait CumulativeDistribution: Send + Sync {
    fn cdf(&self, x: f64) -> f64;
    /// `inf { x : F(x) >= prob }`; `+inf` when the level is never reached.
    fn inverse_cdf(&self, prob: f64) -> Result<f64>;
}

impl CumulativeDistribution for Pmf {
    fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.cdf_at(x.floor() as i64)
        }
    }

    fn inverse_cdf(&self, prob: f64) -> Result<f64> {
        Pmf::inverse_cdf(self, prob).map(f64::from)
    }
}

/// Exponential demand with the given mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponential {
    mean: f64,
}

impl Exponential {
    pub fn new(mean: f64) -> Result<Self> {
        if mean.is_finite() && mean > 0.0 {
            Ok(Self { mean })
        } else {
            Err(Error::Config(format!("exponential mean {mean} must be positive")))
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

impl CumulativeDistribution for Exponential {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x / self.mean).exp()
        }
    }

    fn inverse_cdf(&self, prob: f64) -> Result<f64> {
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(Error::Config(format!("quantile level {prob} outside (0, 1]")));
        }
        if prob == 1.0 {
            return Ok(f64::INFINITY);
        }
        Ok(-self.mean * (1.0 - prob).ln())
    }
}

/// What is known at the start of period `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoSet {
    pub t: usize,
    /// Demands `d_1..d_{t-1}`.
    pub realized: Vec<u32>,
    /// Revealed arrival counts for days `1..=min(t + window - 1, T)`; empty
    /// for models without forecasts.
    pub signals: Vec<u32>,
}

impl InfoSet {
    pub fn new(t: usize, realized: Vec<u32>, signals: Vec<u32>) -> Result<Self> {
        if t == 0 {
            return Err(Error::Validation("periods are numbered from 1".into()));
        }
        if realized.len() != t - 1 {
            return Err(Error::Validation(format!(
                "period {t} needs {} realized demands, got {}",
                t - 1,
                realized.len()
            )));
        }
        for (day, (count, demand)) in signals.iter().zip(&realized).enumerate() {
            if *count == 0 && *demand > 0 {
                return Err(Error::Validation(format!("day {} had no arrivals but demand {demand}", day + 1)));
            }
        }
        Ok(Self { t, realized, signals })
    }

    /// Information at period 1 for models without forecasts.
    pub fn initial() -> Self {
        Self { t: 1, realized: Vec::new(), signals: Vec::new() }
    }

    /// The information set `f_s` nested inside this one, for `s <= t`.
    pub fn restricted_to(&self, s: usize, window: usize) -> Self {
        debug_assert!(s >= 1 && s <= self.t);
        let keep = if window == 0 { 0 } else { (s + window - 1).min(self.signals.len()) };
        Self { t: s, realized: self.realized[..s - 1].to_vec(), signals: self.signals[..keep].to_vec() }
    }
}

/// One sampled demand trajectory together with its forecast signals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub demands: Vec<u32>,
    /// Arrival counts per day (empty when the model has none).
    pub counts: Vec<u32>,
}

impl Scenario {
    /// Information set at period `t` under a forecast window of `window` days.
    pub fn info(&self, t: usize, window: usize) -> InfoSet {
        let signals = if window == 0 || self.counts.is_empty() {
            Vec::new()
        } else {
            self.counts[..(t + window - 1).min(self.counts.len())].to_vec()
        };
        InfoSet { t, realized: self.demands[..t - 1].to_vec(), signals }
    }
}

/// Conditional demand distributions over a finite horizon.
pub trait DemandModel: Send + Sync {
    fn horizon(&self) -> usize;

    /// Number of future days whose arrival counts are revealed (0 if none).
    fn forecast_window(&self) -> usize {
        0
    }

    /// True when `D_t, ..., D_T` are mutually independent given the
    /// information set, which is what the closed-form marginal costs need.
    fn independent_given_info(&self) -> bool;

    /// Distribution of `D_s` given `info`, for `info.t <= s <= T`.
    fn pmf(&self, s: usize, info: &InfoSet) -> Result<Cow<'_, Pmf>>;

    fn sample_scenario(&self, rng: &mut ChaCha8Rng) -> Scenario;

    /// Draws `D_t, ..., D_{t+len-1}` conditional on `info`.
    fn sample_window(&self, info: &InfoSet, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>>;
}

pub(crate) fn check_period(s: usize, info: &InfoSet, horizon: usize) -> Result<()> {
    if s < info.t || s > horizon || s == 0 {
        return Err(Error::Range(format!("period {s} outside {}..={horizon}", info.t)));
    }
    Ok(())
}

/// `P(D_s = v | f_t)`.
pub fn conditional_pmf(model: &dyn DemandModel, s: usize, info: &InfoSet, v: u32) -> Result<f64> {
    Ok(model.pmf(s, info)?.prob(v))
}

/// Smallest `v` with `P(D_s <= v | f_t) >= prob`.
pub fn inverse_cdf(model: &dyn DemandModel, s: usize, info: &InfoSet, prob: f64) -> Result<u32> {
    model.pmf(s, info)?.inverse_cdf(prob)
}

/// RNG for scenario `index` of a run seeded with `seed`. Each scenario gets
/// its own ChaCha stream, so paths do not depend on evaluation order.
pub fn scenario_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Samples one demand path and the information sets seen along it.
pub fn sample_path(model: &dyn DemandModel, seed: u64) -> (Vec<u32>, Vec<InfoSet>) {
    let mut rng = scenario_rng(seed, 0);
    let scenario = model.sample_scenario(&mut rng);
    let infos = (1..=model.horizon()).map(|t| scenario.info(t, model.forecast_window())).collect();
    (scenario.demands, infos)
}

/// Independent demand with an explicit pmf per period.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentDemand {
    pmfs: Vec<Pmf>,
}

impl IndependentDemand {
    pub fn new(pmfs: Vec<Pmf>) -> Result<Self> {
        if pmfs.is_empty() {
            return Err(Error::Config("horizon must be at least one period".into()));
        }
        Ok(Self { pmfs })
    }

    pub fn stationary(pmf: Pmf, horizon: usize) -> Result<Self> {
        Self::new(vec![pmf; horizon])
    }

    /// Repeats `pattern` cyclically over the horizon.
    pub fn cyclic(pattern: &[Pmf], horizon: usize) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::Config("demand pattern is empty".into()));
        }
        Self::new((0..horizon).map(|t| pattern[t % pattern.len()].clone()).collect())
    }

    /// Demand identically zero.
    pub fn zero(horizon: usize) -> Result<Self> {
        Self::stationary(Pmf::point_mass(0), horizon)
    }

    pub fn pmfs(&self) -> &[Pmf] {
        &self.pmfs
    }
}

impl DemandModel for IndependentDemand {
    fn horizon(&self) -> usize {
        self.pmfs.len()
    }

    fn independent_given_info(&self) -> bool {
        true
    }

    fn pmf(&self, s: usize, info: &InfoSet) -> Result<Cow<'_, Pmf>> {
        check_period(s, info, self.horizon())?;
        Ok(Cow::Borrowed(&self.pmfs[s - 1]))
    }

    fn sample_scenario(&self, rng: &mut ChaCha8Rng) -> Scenario {
        let demands = self.pmfs.iter().map(|p| p.sample(rng)).collect();
        Scenario { demands, counts: Vec::new() }
    }

    fn sample_window(&self, info: &InfoSet, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
        (info.t..info.t + len).map(|s| Ok(self.pmf(s, info)?.sample(rng))).collect()
    }
}

/// Weekly compound Poisson demand: Poisson arrivals per weekday, each
/// consuming a geometric number of units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundPoissonSpec {
    /// Mean arrivals for day 1, 2, ... of the cycle; period `t` uses entry `(t - 1) % len`.
    pub arrival_means: Vec<f64>,
    /// Mean units per arrival.
    pub per_arrival_mean: f64,
}

impl CompoundPoissonSpec {
    pub fn validate(&self) -> Result<()> {
        if self.arrival_means.is_empty() {
            return Err(Error::Config("arrival_means is empty".into()));
        }
        if self.arrival_means.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Config("arrival means must be finite and nonnegative".into()));
        }
        if !(self.per_arrival_mean.is_finite() && self.per_arrival_mean > 0.0) {
            return Err(Error::Config("per_arrival_mean must be positive".into()));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        geometric_theta(self.per_arrival_mean)
    }

    pub fn arrival_mean(&self, t: usize) -> f64 {
        self.arrival_means[(t - 1) % self.arrival_means.len()]
    }

    /// Analytic `E[D_t]`.
    pub fn mean_demand(&self, t: usize) -> f64 {
        self.arrival_mean(t) * self.per_arrival_mean
    }
}

/// Tables shared by the forecast and forecast-free compound Poisson models.
#[derive(Debug, Clone)]
struct CompoundTables {
    spec: CompoundPoissonSpec,
    horizon: usize,
    arrivals: Vec<Pmf>,
    marginals: Vec<Pmf>,
    theta: f64,
}

impl CompoundTables {
    fn new(spec: CompoundPoissonSpec, horizon: usize) -> Result<Self> {
        spec.validate()?;
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least one period".into()));
        }
        let theta = spec.theta();
        let arrivals = spec.arrival_means.iter().map(|m| Pmf::poisson(*m)).collect::<Result<Vec<_>>>()?;
        let marginals = spec
            .arrival_means
            .iter()
            .map(|m| Pmf::compound_poisson_geometric(*m, theta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, horizon, arrivals, marginals, theta })
    }

    fn cycle(&self, t: usize) -> usize {
        (t - 1) % self.arrivals.len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Scenario {
        let mut demands = Vec::with_capacity(self.horizon);
        let mut counts = Vec::with_capacity(self.horizon);
        for t in 1..=self.horizon {
            let n = self.arrivals[self.cycle(t)].sample(rng);
            counts.push(n);
            demands.push(self.units(n, rng));
        }
        Scenario { demands, counts }
    }

    fn units(&self, count: u32, rng: &mut ChaCha8Rng) -> u32 {
        (0..count).map(|_| sample_geometric(self.theta, rng)).sum()
    }
}

/// Compound Poisson demand without forecasts: each day is an independent
/// compound Poisson variable.
#[derive(Debug, Clone)]
pub struct CompoundPoissonDemand {
    tables: CompoundTables,
}

impl CompoundPoissonDemand {
    pub fn new(spec: CompoundPoissonSpec, horizon: usize) -> Result<Self> {
        Ok(Self { tables: CompoundTables::new(spec, horizon)? })
    }

    pub fn spec(&self) -> &CompoundPoissonSpec {
        &self.tables.spec
    }

    /// Marginal pmf of period `t`.
    pub fn marginal(&self, t: usize) -> &Pmf {
        &self.tables.marginals[self.tables.cycle(t)]
    }

    /// Arrival-count pmf of period `t`.
    pub fn arrivals(&self, t: usize) -> &Pmf {
        &self.tables.arrivals[self.tables.cycle(t)]
    }

    /// Per-period marginals over the whole horizon.
    pub fn marginals(&self) -> Vec<Pmf> {
        (1..=self.tables.horizon).map(|t| self.marginal(t).clone()).collect()
    }
}

impl DemandModel for CompoundPoissonDemand {
    fn horizon(&self) -> usize {
        self.tables.horizon
    }

    fn independent_given_info(&self) -> bool {
        true
    }

    fn pmf(&self, s: usize, info: &InfoSet) -> Result<Cow<'_, Pmf>> {
        check_period(s, info, self.horizon())?;
        Ok(Cow::Borrowed(self.marginal(s)))
    }

    fn sample_scenario(&self, rng: &mut ChaCha8Rng) -> Scenario {
        let mut scenario = self.tables.sample(rng);
        scenario.counts.clear();
        scenario
    }

    fn sample_window(&self, info: &InfoSet, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
        check_period(info.t + len.max(1) - 1, info, self.horizon())?;
        Ok((info.t..info.t + len)
            .map(|s| {
                let n = self.arrivals(s).sample(rng);
                self.tables.units(n, rng)
            })
            .collect())
    }
}

/// Compound Poisson demand whose arrival counts are revealed `window` days
/// ahead: at period `t` the counts of days `t..t+window-1` are known exactly.
#[derive(Debug, Clone)]
pub struct ForecastDemand {
    tables: CompoundTables,
    window: usize,
    by_count: Vec<Pmf>,
}

impl ForecastDemand {
    pub fn new(spec: CompoundPoissonSpec, horizon: usize, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("forecast window must be at least one day".into()));
        }
        let tables = CompoundTables::new(spec, horizon)?;
        let max_count = tables.arrivals.iter().map(Pmf::bound).max().unwrap_or(0);
        let by_count = (0..=max_count).map(|n| Pmf::negative_binomial(n, tables.theta)).collect::<Result<Vec<_>>>()?;
        Ok(Self { tables, window, by_count })
    }

    pub fn spec(&self) -> &CompoundPoissonSpec {
        &self.tables.spec
    }

    pub fn theta(&self) -> f64 {
        self.tables.theta
    }

    pub fn arrivals(&self, t: usize) -> &Pmf {
        &self.tables.arrivals[self.tables.cycle(t)]
    }

    pub fn marginal(&self, t: usize) -> &Pmf {
        &self.tables.marginals[self.tables.cycle(t)]
    }

    /// Demand pmf of a day with `count` known arrivals.
    pub fn given_count(&self, count: u32) -> Result<Cow<'_, Pmf>> {
        match self.by_count.get(count as usize) {
            Some(p) => Ok(Cow::Borrowed(p)),
            None => Ok(Cow::Owned(Pmf::negative_binomial(count, self.tables.theta)?)),
        }
    }

    /// The same process with the forecast ignored.
    pub fn without_forecast(&self) -> CompoundPoissonDemand {
        CompoundPoissonDemand { tables: self.tables.clone() }
    }

    fn known_count(&self, s: usize, info: &InfoSet) -> Result<Option<u32>> {
        if s + 1 > info.t + self.window {
            return Ok(None);
        }
        match info.signals.get(s - 1) {
            Some(n) => Ok(Some(*n)),
            None => {
                Err(Error::Validation(format!("information at period {} lacks the arrival count of day {s}", info.t)))
            }
        }
    }
}

impl DemandModel for ForecastDemand {
    fn horizon(&self) -> usize {
        self.tables.horizon
    }

    fn forecast_window(&self) -> usize {
        self.window
    }

    fn independent_given_info(&self) -> bool {
        true
    }

    fn pmf(&self, s: usize, info: &InfoSet) -> Result<Cow<'_, Pmf>> {
        check_period(s, info, self.horizon())?;
        match self.known_count(s, info)? {
            Some(n) => self.given_count(n),
            None => Ok(Cow::Borrowed(self.marginal(s))),
        }
    }

    fn sample_scenario(&self, rng: &mut ChaCha8Rng) -> Scenario {
        self.tables.sample(rng)
    }

    fn sample_window(&self, info: &InfoSet, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
        check_period(info.t + len.max(1) - 1, info, self.horizon())?;
        (info.t..info.t + len)
            .map(|s| {
                let n = match self.known_count(s, info)? {
                    Some(n) => n,
                    None => self.arrivals(s).sample(rng),
                };
                Ok(self.tables.units(n, rng))
            })
            .collect()
    }
}
