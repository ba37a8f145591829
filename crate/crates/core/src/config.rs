//! Declarative experiment files.
//!
//! An experiment is a TOML document describing one instance plus optional
//! tables for the grid, interval search, prior, simulation, fleet and sweep.
//!
//! ```toml
//! lambda = 1.0
//! xi = 10
//! s_max = 1.0
//! T = 15.0
//! gamma = 2.0                 # or f = { family = "power", coeff = 1.0, exponent = 2.0 }
//! nu = 0.5                    # or r = { family = "demand_penalty", b = 0.0, p = 1.0, D = 1.5 }
//! cost = { cp = 1.0, cu = 5.0 }   # or costs = [1.0, …, 5.0] with xi + 1 entries
//!
//! [grid]
//! dt = 0.005
//! n_actions = 101
//!
//! [tactical]
//! t_min = 0.5
//! t_max = 30.0
//!
//! [prior]
//! mean = 1.0
//! cv = 1.0
//!
//! [simulation]
//! reps = 2000
//! n_opt = 2
//! seed = 7
//! oracle = "analytic"         # or "simulated"
//! escalate = false
//!
//! [structure]
//! lambdas = [1.0, 4.0]
//!
//! [multi]
//! n_actions = 41
//! revenue = { family = "demand_penalty", b = 0.0, p = 1.0, D = 1.5 }
//! systems = [{ lambda = 1.0, f = { family = "power", coeff = 1.0, exponent = 2.0 } },
//!            { lambda = 1.0, f = { family = "power", coeff = 1.0, exponent = 2.0 } }]
//!
//! [sweep]
//! lambda = [0.5, 1.0, 1.5]
//! xi = [10, 14, 18]
//! ```

use serde::Deserialize;

use crate::bayes::GammaPrior;
use crate::error::{Error, Result};
use crate::model::{CostFunction, GridConfig, ProblemInstance, RateFunction};
use crate::multi::{MultiInstance, SystemSpec, DEFAULT_MULTI_ACTIONS};
use crate::sim::OracleMode;
use crate::tactical::IntervalBounds;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lambda: f64,
    xi: usize,
    s_max: f64,
    #[serde(rename = "T")]
    horizon: f64,
    f: Option<RateFunction>,
    gamma: Option<f64>,
    r: Option<RateFunction>,
    nu: Option<f64>,
    cost: Option<RawCost>,
    costs: Option<Vec<f64>>,
    grid: Option<RawGrid>,
    tactical: Option<RawTactical>,
    prior: Option<RawPrior>,
    simulation: Option<SimulationSettings>,
    structure: Option<RawStructure>,
    multi: Option<RawMulti>,
    sweep: Option<SweepAxes>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    cp: f64,
    cu: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dt: Option<f64>,
    n_actions: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTactical {
    t_min: f64,
    t_max: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    mean: f64,
    cv: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStructure {
    lambdas: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMulti {
    systems: Vec<SystemSpec>,
    revenue: RateFunction,
    n_actions: Option<usize>,
}

/// Replication settings for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    pub reps: usize,
    pub n_opt: usize,
    pub seed: u64,
    #[serde(with = "oracle_name")]
    pub oracle: OracleMode,
    pub escalate: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            reps: 2000,
            n_opt: 0,
            seed: 0,
            oracle: OracleMode::Analytic,
            escalate: false,
        }
    }
}

mod oracle_name {
    use serde::{Deserialize, Deserializer};

    use crate::sim::OracleMode;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<OracleMode, D::Error> {
        match String::deserialize(d)?.as_str() {
            "analytic" => Ok(OracleMode::Analytic),
            "simulated" => Ok(OracleMode::Simulated),
            other => Err(serde::de::Error::unknown_variant(other, &["analytic", "simulated"])),
        }
    }
}

/// Parameter lists for a factorial sweep. Points are enumerated in the
/// fixed order `lambda, xi, cp, cu, T, gamma, nu`, the last axis varying
/// fastest.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    pub lambda: Option<Vec<f64>>,
    pub xi: Option<Vec<usize>>,
    pub cp: Option<Vec<f64>>,
    pub cu: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizon: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub xi: usize,
    pub cp: f64,
    pub cu: f64,
    pub horizon: f64,
    pub gamma: f64,
    pub nu: f64,
}

impl SweepPoint {
    /// Canonical power instance at this point.
    pub fn instance(&self, s_max: f64) -> ProblemInstance {
        ProblemInstance::power_canonical(
            self.lambda,
            self.xi,
            s_max,
            self.gamma,
            self.nu,
            self.cp,
            self.cu,
            self.horizon,
        )
    }
}

/// A parsed experiment file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instance: ProblemInstance,
    pub grid: GridConfig,
    pub bounds: Option<IntervalBounds>,
    pub prior: Option<GammaPrior>,
    pub simulation: SimulationSettings,
    pub structure_lambdas: Vec<f64>,
    pub multi: Option<(MultiInstance, usize)>,
    pub sweep: Option<SweepAxes>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses a TOML experiment. Syntax and schema errors carry the line,
    /// column and offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let f = match (raw.f, raw.gamma) {
            (Some(f), None) => f,
            (None, Some(gamma)) => RateFunction::power(1.0, gamma),
            (None, None) => return Err(config_err("missing key `f` (or `gamma`)")),
            (Some(_), Some(_)) => return Err(config_err("keys `f` and `gamma` are mutually exclusive")),
        };
        let r = match (raw.r, raw.nu) {
            (Some(r), None) => r,
            (None, Some(nu)) => RateFunction::power(1.0, nu),
            (None, None) => return Err(config_err("missing key `r` (or `nu`)")),
            (Some(_), Some(_)) => return Err(config_err("keys `r` and `nu` are mutually exclusive")),
        };
        let cost = match (raw.cost, raw.costs) {
            (Some(c), None) => CostFunction::canonical(raw.xi, c.cp, c.cu),
            (None, Some(v)) => CostFunction::new(v),
            (None, None) => return Err(config_err("missing key `cost` (or `costs`)")),
            (Some(_), Some(_)) => return Err(config_err("keys `cost` and `costs` are mutually exclusive")),
        };
        let instance = ProblemInstance {
            lambda: raw.lambda,
            xi: raw.xi,
            s_max: raw.s_max,
            f,
            r,
            cost,
            horizon: raw.horizon,
        };
        let default_grid = GridConfig::default_for(&instance);
        let grid = match raw.grid {
            Some(g) => GridConfig::new(
                g.dt.unwrap_or(default_grid.dt),
                g.n_actions.unwrap_or(default_grid.n_actions),
            ),
            None => default_grid,
        };
        let bounds = raw
            .tactical
            .map(|t| IntervalBounds::new(t.t_min, t.t_max))
            .transpose()
            .map_err(|e| config_err(format!("[tactical]: {e}")))?;
        let prior = raw
            .prior
            .map(|p| GammaPrior::from_mean_cv(p.mean, p.cv))
            .transpose()
            .map_err(|e| config_err(format!("[prior]: {e}")))?;
        let multi = raw.multi.map(|m| {
            (
                MultiInstance {
                    systems: m.systems,
                    xi: instance.xi,
                    s_max: instance.s_max,
                    cost: instance.cost.clone(),
                    revenue: m.revenue,
                    horizon: instance.horizon,
                },
                m.n_actions.unwrap_or(DEFAULT_MULTI_ACTIONS),
            )
        });
        if let Some(sweep) = &raw.sweep {
            for (key, empty) in [
                ("lambda", sweep.lambda.as_ref().is_some_and(Vec::is_empty)),
                ("xi", sweep.xi.as_ref().is_some_and(Vec::is_empty)),
                ("cp", sweep.cp.as_ref().is_some_and(Vec::is_empty)),
                ("cu", sweep.cu.as_ref().is_some_and(Vec::is_empty)),
                ("T", sweep.horizon.as_ref().is_some_and(Vec::is_empty)),
                ("gamma", sweep.gamma.as_ref().is_some_and(Vec::is_empty)),
                ("nu", sweep.nu.as_ref().is_some_and(Vec::is_empty)),
            ] {
                if empty {
                    return Err(config_err(format!("[sweep]: axis `{key}` is empty")));
                }
            }
        }
        Ok(Self {
            instance,
            grid,
            bounds,
            prior,
            simulation: raw.simulation.unwrap_or_default(),
            structure_lambdas: raw.structure.map(|s| s.lambdas).unwrap_or_default(),
            multi,
            sweep: raw.sweep,
        })
    }

    /// Sweep points, or an error when the base instance is not a canonical
    /// power instance the axes can vary.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let axes = self.sweep.clone().unwrap_or_default();
        let inst = &self.instance;
        let exponent = |g: &RateFunction, name: &str| match *g {
            RateFunction::Power { coeff, exponent } if coeff == 1.0 => Ok(exponent),
            _ => Err(config_err(format!("sweeps need `{name}` given as a unit power function"))),
        };
        let (cp, cu) = inst
            .cost
            .as_canonical()
            .ok_or_else(|| config_err("sweeps need `cost = { cp, cu }`"))?;
        let base = SweepPoint {
            lambda: inst.lambda,
            xi: inst.xi,
            cp,
            cu,
            horizon: inst.horizon,
            gamma: exponent(&inst.f, "gamma")?,
            nu: exponent(&inst.r, "nu")?,
        };
        let or = |v: &Option<Vec<f64>>, d: f64| v.clone().unwrap_or_else(|| vec![d]);
        let mut points = Vec::new();
        for &lambda in &or(&axes.lambda, base.lambda) {
            for &xi in &axes.xi.clone().unwrap_or_else(|| vec![base.xi]) {
                for &cp in &or(&axes.cp, base.cp) {
                    for &cu in &or(&axes.cu, base.cu) {
                        for &horizon in &or(&axes.horizon, base.horizon) {
                            for &gamma in &or(&axes.gamma, base.gamma) {
                                for &nu in &or(&axes.nu, base.nu) {
                                    points.push(SweepPoint {
                                        lambda,
                                        xi,
                                        cp,
                                        cu,
                                        horizon,
                                        gamma,
                                        nu,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"
lambda = 1.0
xi = 10
s_max = 1.0
T = 15.0
gamma = 2.0
nu = 0.5
cost = { cp = 1.0, cu = 5.0 }
"#;

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml(FIG1).unwrap();
        assert_eq!(
            cfg.instance,
            ProblemInstance::power_canonical(1.0, 10, 1.0, 2.0, 0.5, 1.0, 5.0, 15.0)
        );
        assert_eq!(cfg.grid, GridConfig::new(0.005, 101));
        assert_eq!(cfg.simulation, SimulationSettings::default());
        assert!(cfg.prior.is_none() && cfg.multi.is_none() && cfg.bounds.is_none());
    }

    #[test]
    fn full_file_round_trips() {
        let text = format!(
            "{FIG1}
[grid]
dt = 0.01
[tactical]
t_min = 0.5
t_max = 30.0
[prior]
mean = 1.0
cv = 0.5
[simulation]
reps = 100
n_opt = 2
seed = 9
oracle = \"simulated\"
[structure]
lambdas = [1.0, 4.0]
[multi]
revenue = {{ family = \"demand_penalty\", b = 0.0, p = 1.0, D = 1.5 }}
systems = [{{ lambda = 1.5, f = {{ family = \"power\", coeff = 1.0, exponent = 2.0 }} }}]
[sweep]
lambda = [0.5, 1.0]
xi = [10, 14]
"
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.grid, GridConfig::new(0.01, 101));
        assert_eq!(cfg.bounds, Some(IntervalBounds { t_min: 0.5, t_max: 30.0 }));
        assert_eq!(cfg.prior.unwrap().alpha, 4.0);
        assert_eq!(cfg.simulation.oracle, OracleMode::Simulated);
        assert_eq!(cfg.simulation.reps, 100);
        assert_eq!(cfg.structure_lambdas, vec![1.0, 4.0]);
        let (m, actions) = cfg.multi.clone().unwrap();
        assert_eq!(actions, 41);
        assert_eq!(m.systems[0].lambda, 1.5);
        let pts = cfg.sweep_points().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].lambda, pts[1].xi), (0.5, 14));
        assert_eq!(pts[3].instance(1.0).cost.as_canonical(), Some((1.0, 5.0)));
    }

    #[test]
    fn unknown_key_reports_line_and_name() {
        let text = format!("{FIG1}\n[sweep]\nlamda = [1.0]\n");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("lamda"), "{err}");
        assert!(err.contains("line 11"), "{err}");
    }

    #[test]
    fn type_errors_are_located() {
        let err = ExperimentConfig::from_toml(&FIG1.replace("xi = 10", "xi = \"ten\"")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("xi"), "{msg}");
    }

    #[test]
    fn conflicting_and_missing_keys() {
        let both = FIG1.replace("gamma = 2.0", "gamma = 2.0\nf = { family = \"power\", coeff = 1.0, exponent = 2.0 }");
        assert!(ExperimentConfig::from_toml(&both).unwrap_err().to_string().contains("mutually exclusive"));
        let none = FIG1.replace("cost = { cp = 1.0, cu = 5.0 }", "");
        assert!(ExperimentConfig::from_toml(&none).unwrap_err().to_string().contains("cost"));
        let bad_prior = format!("{FIG1}\n[prior]\nmean = 1.0\ncv = 0.0\n");
        assert!(ExperimentConfig::from_toml(&bad_prior).unwrap_err().to_string().contains("[prior]"));
    }

    #[test]
    fn explicit_costs_vector() {
        let text = FIG1.replace(
            "cost = { cp = 1.0, cu = 5.0 }",
            "costs = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.5, 2.5, 5.0]",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.instance.cost.at(9), 2.5);
        assert!(cfg.sweep_points().is_err());
    }
}
