//! Experiment configuration files.

use std::path::Path;
use std::sync::Arc;

use perishable::demand::{
    CompoundPoissonDemand, CompoundPoissonSpec, DemandModel, Exponential, ForecastDemand, IndependentDemand, Pmf,
};
use perishable::dp::DpInstance;
use perishable::inventory::{CostParams, TransformedCostParams};
use perishable::policies::{Rounding, UpperBoundMode};
use perishable::sim::{DpCaps, PlateletExperiment, PolicyKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub lifetime: usize,
    pub horizon: usize,
    pub costs: Costs,
    /// Absent when the demand process is left unspecified.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<Demand>,
    #[serde(default)]
    pub policy: PolicySettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Simulation>,
    #[serde(default)]
    pub dp: DpCaps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum Costs {
    /// Costs after moving the purchase cost into the other components.
    Transformed {
        p: f64,
        h: f64,
        w: f64,
        beta: f64,
    },
    Original {
        c: f64,
        p: f64,
        h: f64,
        w: f64,
        beta: f64,
    },
}

impl Costs {
    pub fn with_penalty(&self, penalty: f64) -> Self {
        match self.clone() {
            Self::Transformed { h, w, beta, .. } => Self::Transformed { p: penalty, h, w, beta },
            Self::Original { c, h, w, beta, .. } => Self::Original { c, p: penalty, h, w, beta },
        }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        match self.clone() {
            Self::Transformed { p, h, w, .. } => Self::Transformed { p, h, w, beta },
            Self::Original { c, p, h, w, .. } => Self::Original { c, p, h, w, beta },
        }
    }

    pub fn transformed(&self) -> perishable::Result<TransformedCostParams> {
        match *self {
            Self::Transformed { p, h, w, beta } => TransformedCostParams::new(p, h, w, beta),
            Self::Original { c, p, h, w, beta } => CostParams { c, p, h, w, beta }.transform(),
        }
    }

    /// Original-cost form; transformed costs map to a zero purchase cost.
    pub fn original(&self) -> perishable::Result<CostParams> {
        match *self {
            Self::Original { c, p, h, w, beta } => {
                let costs = CostParams { c, p, h, w, beta };
                costs.validate()?;
                Ok(costs)
            }
            Self::Transformed { .. } => Ok(CostParams::from_transformed(&self.transformed()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Demand {
    /// Poisson arrivals with geometric units each; `window` days of arrival
    /// counts are known in advance.
    CompoundPoisson {
        arrival_means: Vec<f64>,
        per_arrival_mean: f64,
        #[serde(default)]
        window: usize,
    },
    /// Explicit pmfs on `0, 1, ...`, repeated cyclically over the horizon.
    Pmfs { pmfs: Vec<Vec<f64>> },
    /// Poisson means, repeated cyclically.
    Poisson { means: Vec<f64> },
    /// Exponential means, repeated cyclically. The FIFO checks use the
    /// continuous law; ordering policies see its integer part.
    Exponential { means: Vec<f64> },
}

/// A demand model ready for the policies and the simulator.
pub enum BuiltModel {
    Independent(Arc<IndependentDemand>),
    Compound(Arc<CompoundPoissonDemand>),
    Forecast(Arc<ForecastDemand>),
}

impl BuiltModel {
    pub fn shared(&self) -> Arc<dyn DemandModel> {
        match self {
            Self::Independent(m) => m.clone(),
            Self::Compound(m) => m.clone(),
            Self::Forecast(m) => m.clone(),
        }
    }
}

fn cycle<T: Clone>(items: &[T], horizon: usize) -> Vec<T> {
    (0..horizon).map(|t| items[t % items.len()].clone()).collect()
}

impl Demand {
    fn validate(&self) -> perishable::Result<()> {
        let empty = match self {
            Self::CompoundPoisson { arrival_means, .. } => arrival_means.is_empty(),
            Self::Pmfs { pmfs } => pmfs.is_empty(),
            Self::Poisson { means } | Self::Exponential { means } => means.is_empty(),
        };
        if empty {
            return Err(perishable::Error::Config("demand needs at least one period".into()));
        }
        Ok(())
    }

    pub fn build(&self, horizon: usize) -> perishable::Result<BuiltModel> {
        self.validate()?;
        Ok(match self {
            Self::CompoundPoisson { arrival_means, per_arrival_mean, window } => {
                let spec =
                    CompoundPoissonSpec { arrival_means: arrival_means.clone(), per_arrival_mean: *per_arrival_mean };
                if *window == 0 {
                    BuiltModel::Compound(Arc::new(CompoundPoissonDemand::new(spec, horizon)?))
                } else {
                    BuiltModel::Forecast(Arc::new(ForecastDemand::new(spec, horizon, *window)?))
                }
            }
            Self::Pmfs { pmfs } => {
                let pmfs = pmfs.iter().map(|p| Pmf::new(p.clone())).collect::<perishable::Result<Vec<_>>>()?;
                BuiltModel::Independent(Arc::new(IndependentDemand::new(cycle(&pmfs, horizon))?))
            }
            Self::Poisson { means } => {
                let pmfs = means.iter().map(|m| Pmf::poisson(*m)).collect::<perishable::Result<Vec<_>>>()?;
                BuiltModel::Independent(Arc::new(IndependentDemand::new(cycle(&pmfs, horizon))?))
            }
            Self::Exponential { means } => {
                // The integer part of an exponential is geometric.
                let pmfs = means
                    .iter()
                    .map(|m| {
                        Exponential::new(*m)?;
                        Pmf::geometric((-1.0 / m).exp())
                    })
                    .collect::<perishable::Result<Vec<_>>>()?;
                BuiltModel::Independent(Arc::new(IndependentDemand::new(cycle(&pmfs, horizon))?))
            }
        })
    }

    /// Continuous marginals for the FIFO checks, when the law is exponential.
    pub fn exponentials(&self, horizon: usize) -> perishable::Result<Option<Vec<Exponential>>> {
        match self {
            Self::Exponential { means } => {
                let laws = means.iter().map(|m| Exponential::new(*m)).collect::<perishable::Result<Vec<_>>>()?;
                Ok(Some(cycle(&laws, horizon)))
            }
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySettings {
    #[serde(default)]
    pub upper_bound: UpperBoundMode,
    #[serde(default)]
    pub rounding: Rounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    /// Shortage penalties to sweep; the configured `p` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalties: Option<Vec<f64>>,
    pub scenarios: usize,
    pub seed: u64,
    pub policies: Vec<PolicyKind>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let config: Self =
            toml::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })?;
        config.validate().map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })?;
        Ok(config)
    }

    pub fn validate(&self) -> perishable::Result<()> {
        if self.lifetime < 2 {
            return Err(perishable::Error::Config(format!("lifetime {} must be at least 2", self.lifetime)));
        }
        if self.horizon == 0 {
            return Err(perishable::Error::Config("horizon must be at least 1".into()));
        }
        self.costs.transformed()?;
        if let Some(d) = &self.demand {
            d.validate()?;
        }
        if let Some(sim) = &self.simulation {
            if sim.scenarios == 0 || sim.policies.is_empty() {
                return Err(perishable::Error::Config("simulation needs scenarios and policies".into()));
            }
            for p in sim.penalties.iter().flatten() {
                self.costs.with_penalty(*p).transformed()?;
            }
        }
        Ok(())
    }

    pub fn demand(&self) -> perishable::Result<&Demand> {
        self.demand.as_ref().ok_or_else(|| perishable::Error::Config("this command needs a [demand] section".into()))
    }

    pub fn penalties(&self) -> perishable::Result<Vec<f64>> {
        let own = self.costs.original()?.p;
        Ok(self.simulation.as_ref().and_then(|s| s.penalties.clone()).unwrap_or_else(|| vec![own]))
    }

    /// The compound Poisson experiment this config describes.
    pub fn experiment(&self) -> perishable::Result<PlateletExperiment> {
        let Some(Demand::CompoundPoisson { arrival_means, per_arrival_mean, window }) = &self.demand else {
            return Err(perishable::Error::Config("simulate needs compound_poisson demand".into()));
        };
        let sim = self
            .simulation
            .as_ref()
            .ok_or_else(|| perishable::Error::Config("simulate needs a [simulation] section".into()))?;
        let penalties = self
            .penalties()?
            .into_iter()
            .map(|p| self.costs.with_penalty(p).transformed().map(|t| t.p))
            .collect::<perishable::Result<Vec<_>>>()?;
        let base = self.costs.transformed()?;
        Ok(PlateletExperiment {
            demand: CompoundPoissonSpec { arrival_means: arrival_means.clone(), per_arrival_mean: *per_arrival_mean },
            lifetime: self.lifetime,
            horizon: self.horizon,
            window: Some(*window),
            penalties,
            holding: base.h,
            outdating: base.w,
            beta: base.beta,
            scenarios: sim.scenarios,
            seed: sim.seed,
            policies: sim.policies.clone(),
            upper_bound: self.policy.upper_bound,
            rounding: self.policy.rounding,
            dp: self.dp,
            force: false,
        })
    }

    /// DP instance for the configured demand; `forecast` selects the state
    /// with known arrival counts when the model has them.
    pub fn dp_instance(&self, forecast: bool) -> perishable::Result<DpInstance> {
        let params = self.costs.transformed()?;
        match self.demand()?.build(self.horizon)? {
            BuiltModel::Independent(m) => {
                DpInstance::independent(self.lifetime, params, m.pmfs().to_vec(), self.dp.wof_inventory_cap)
            }
            BuiltModel::Compound(m) => {
                DpInstance::without_forecast(self.lifetime, params, &m, self.dp.wof_inventory_cap)
            }
            BuiltModel::Forecast(m) if forecast => {
                DpInstance::with_forecast(self.lifetime, params, &m, self.dp.inventory_cap, self.dp.count_cap)
            }
            BuiltModel::Forecast(m) => {
                DpInstance::without_forecast(self.lifetime, params, &m.without_forecast(), self.dp.wof_inventory_cap)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLATELET: &str = include_str!("../../../configs/platelet.toml");
    const EXAMPLE1: &str = include_str!("../../../configs/example1.toml");
    const EXAMPLE2: &str = include_str!("../../../configs/example2.toml");

    #[test]
    fn shipped_configs_round_trip() {
        for text in [PLATELET, EXAMPLE1, EXAMPLE2] {
            let parsed: Config = toml::from_str(text).unwrap();
            parsed.validate().unwrap();
            let again: Config = toml::from_str(&toml::to_string(&parsed).unwrap()).unwrap();
            assert_eq!(parsed, again);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = PLATELET.replace("lifetime = 3", "lifetime = 3\nlifespan = 3");
        assert!(toml::from_str::<Config>(&bad).is_err());
        let bad = PLATELET.replace("per_arrival_mean", "units_per_arrival");
        assert!(toml::from_str::<Config>(&bad).is_err());
    }

    #[test]
    fn platelet_config_is_the_weekly_experiment() {
        let config: Config = toml::from_str(PLATELET).unwrap();
        let e = config.experiment().unwrap();
        let defaults = PlateletExperiment::platelet_defaults();
        assert_eq!(e.penalties, defaults.penalties);
        assert_eq!(e.demand, defaults.demand);
        assert_eq!((e.lifetime, e.horizon, e.window), (3, 28, Some(3)));
        assert_eq!((e.holding, e.outdating, e.beta), (0.0, 500.0, 1.0));
    }

    #[test]
    fn invalid_values_fail_validation() {
        let config: Config = toml::from_str(&EXAMPLE2.replace("lifetime = 5", "lifetime = 1")).unwrap();
        assert!(config.validate().is_err());
        let config: Config = toml::from_str(&EXAMPLE1.replace("beta = 0.9", "beta = 1.5")).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn exponential_floor_is_geometric() {
        let d = Demand::Exponential { means: vec![5.0] };
        let BuiltModel::Independent(m) = d.build(1).unwrap() else { panic!() };
        let pmf = &m.pmfs()[0];
        let e = Exponential::new(5.0).unwrap();
        use perishable::demand::CumulativeDistribution;
        for k in 0..10u32 {
            let direct = e.cdf(f64::from(k + 1)) - e.cdf(f64::from(k));
            assert!((pmf.prob(k) - direct).abs() < 1e-12);
        }
    }
}
