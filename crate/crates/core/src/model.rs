//! Problem instances: deterioration and revenue rate functions, maintenance
//! cost functions and the time/action discretization used by the solvers.
//!
//! A system produces at rate `s ∈ [0, s_max]`, earns revenue at rate `r(s)`
//! and accumulates deterioration shocks as a Poisson process with intensity
//! `lambda · f(s)`. At the scheduled maintenance moment `T` the cost
//! `c_m(x)` of the reached deterioration level `x` is paid; level `xi` means
//! failure, after which the system must stay off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric rate function used for deterioration `f` and revenue `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFunction {
    /// `coeff · s^exponent`.
    Power { coeff: f64, exponent: f64 },
    /// `b·(s − D)⁺ − p·(D − s)⁺`: surplus over a demand rate `D` earns a
    /// bonus, shortfall is penalized.
    DemandPenalty {
        #[serde(rename = "b")]
        bonus: f64,
        #[serde(rename = "p")]
        penalty: f64,
        #[serde(rename = "D")]
        demand: f64,
    },
}

impl RateFunction {
    pub fn power(coeff: f64, exponent: f64) -> Self {
        RateFunction::Power { coeff, exponent }
    }

    pub fn demand_penalty(bonus: f64, penalty: f64, demand: f64) -> Self {
        RateFunction::DemandPenalty {
            bonus,
            penalty,
            demand,
        }
    }

    /// Checked evaluation; rejects negative production rates.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if s < 0.0 || s.is_nan() {
            return Err(Error::NegativeRateInput(s));
        }
        Ok(self.value(s))
    }

    /// Unchecked evaluation for hot loops. `s` must be nonnegative.
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            RateFunction::Power { coeff, exponent } => {
                if s == 0.0 {
                    0.0
                } else {
                    coeff * s.powf(exponent)
                }
            }
            RateFunction::DemandPenalty {
                bonus,
                penalty,
                demand,
            } => bonus * (s - demand).max(0.0) - penalty * (demand - s).max(0.0),
        }
    }

    pub fn is_convex(&self) -> bool {
        match *self {
            RateFunction::Power { exponent, .. } => exponent >= 1.0,
            RateFunction::DemandPenalty { bonus, penalty, .. } => bonus >= penalty,
        }
    }

    pub fn is_concave(&self) -> bool {
        match *self {
            RateFunction::Power { exponent, .. } => exponent <= 1.0,
            RateFunction::DemandPenalty { bonus, penalty, .. } => bonus <= penalty,
        }
    }

    /// Parameter sanity: finite values, strictly increasing power families,
    /// nonnegative demand-penalty weights with a positive demand.
    pub fn check(&self) -> Result<()> {
        match *self {
            RateFunction::Power { coeff, exponent } => {
                if !(coeff.is_finite() && coeff > 0.0) {
                    return Err(Error::InvalidRateFunction(format!(
                        "power coefficient must be positive, got {coeff}"
                    )));
                }
                if !(exponent.is_finite() && exponent > 0.0) {
                    return Err(Error::InvalidRateFunction(format!(
                        "power exponent must be positive, got {exponent}"
                    )));
                }
            }
            RateFunction::DemandPenalty {
                bonus,
                penalty,
                demand,
            } => {
                if !(bonus.is_finite() && bonus >= 0.0 && penalty.is_finite() && penalty >= 0.0) {
                    return Err(Error::InvalidRateFunction(format!(
                        "bonus and penalty must be nonnegative, got b={bonus}, p={penalty}"
                    )));
                }
                if !(demand.is_finite() && demand > 0.0) {
                    return Err(Error::InvalidRateFunction(format!(
                        "demand must be positive, got {demand}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Maintenance cost `c_m(x)` for `x ∈ {0, …, xi}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    costs: Vec<f64>,
}

impl CostFunction {
    /// Wraps an explicit cost vector. Shape checks happen in [`validate_instance`].
    pub fn new(costs: Vec<f64>) -> Self {
        Self { costs }
    }

    /// Preventive cost `cp` in every non-failed level, corrective `cu` at `xi`.
    pub fn canonical(xi: usize, cp: f64, cu: f64) -> Self {
        let mut costs = vec![cp; xi + 1];
        costs[xi] = cu;
        Self { costs }
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    #[inline]
    pub fn at(&self, x: usize) -> f64 {
        self.costs[x]
    }

    pub fn xi(&self) -> usize {
        self.costs.len().saturating_sub(1)
    }

    /// `(cp, cu)` when all non-failed levels share one cost.
    pub fn as_canonical(&self) -> Option<(f64, f64)> {
        let (&cu, rest) = self.costs.split_last()?;
        let cp = *rest.first()?;
        rest.iter().all(|&c| c == cp).then_some((cp, cu))
    }

    pub(crate) fn check(&self, xi: usize) -> Result<()> {
        if self.costs.len() != xi + 1 {
            return Err(Error::CostLength {
                got: self.costs.len(),
                expected: xi + 1,
            });
        }
        if let Some(bad) = self.costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidParameter {
                name: "cost",
                reason: format!("costs must be finite and nonnegative, got {bad}"),
            });
        }
        for (level, w) in self.costs.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(Error::NonIncreasingCost { level });
            }
        }
        let scale = self.costs.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
        for (i, w) in self.costs.windows(3).enumerate() {
            let second = (w[2] - w[1]) - (w[1] - w[0]);
            if second < -1e-12 * scale {
                return Err(Error::NonConvexCost { level: i + 1 });
            }
        }
        Ok(())
    }
}

/// A single-system control problem over one maintenance interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    /// Base rate: deterioration shocks per time unit when `f = 1`.
    pub lambda: f64,
    /// Failure level.
    pub xi: usize,
    /// Upper end of the production interval `[0, s_max]`.
    pub s_max: f64,
    /// Deterioration function.
    pub f: RateFunction,
    /// Revenue function.
    pub r: RateFunction,
    pub cost: CostFunction,
    /// Length of the maintenance interval.
    pub horizon: f64,
}

impl ProblemInstance {
    /// Power-law instance with canonical two-level costs, the family used
    /// throughout the numerical studies.
    #[allow(clippy::too_many_arguments)]
    pub fn power_canonical(
        lambda: f64,
        xi: usize,
        s_max: f64,
        gamma: f64,
        nu: f64,
        cp: f64,
        cu: f64,
        horizon: f64,
    ) -> Self {
        Self {
            lambda,
            xi,
            s_max,
            f: RateFunction::power(1.0, gamma),
            r: RateFunction::power(1.0, nu),
            cost: CostFunction::canonical(xi, cp, cu),
            horizon,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    /// Largest shock intensity the instance can produce, `lambda · f(s_max)`.
    pub fn max_intensity(&self) -> f64 {
        self.lambda * self.f.value(self.s_max)
    }
}

/// Time step and action-grid resolution for the backward recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dt: f64,
    /// Number of uniformly spaced actions in `[0, s_max]`, endpoints included.
    pub n_actions: usize,
}

impl GridConfig {
    pub const DEFAULT_DT: f64 = 0.005;
    pub const DEFAULT_ACTIONS: usize = 101;

    pub fn new(dt: f64, n_actions: usize) -> Self {
        Self { dt, n_actions }
    }

    /// `dt = min(0.005, stability bound / 2)` with 101 actions.
    pub fn default_for(inst: &ProblemInstance) -> Self {
        let intensity = inst.max_intensity();
        let bound = if intensity > 0.0 {
            1.0 / intensity
        } else {
            f64::INFINITY
        };
        Self {
            dt: Self::DEFAULT_DT.min(bound / 2.0),
            n_actions: Self::DEFAULT_ACTIONS,
        }
    }

    /// Number of time steps covering `horizon`.
    pub fn steps(&self, horizon: f64) -> usize {
        (horizon / self.dt).round() as usize
    }

    /// The action grid `{0, s_max/(M−1), …, s_max}`.
    pub fn actions(&self, s_max: f64) -> Vec<f64> {
        let m = self.n_actions;
        (0..m)
            .map(|j| {
                if j + 1 == m {
                    s_max
                } else {
                    s_max * j as f64 / (m - 1) as f64
                }
            })
            .collect()
    }
}

/// An instance together with a grid that passed every check in
/// [`validate_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedInstance {
    inst: ProblemInstance,
    grid: GridConfig,
}

impl ValidatedInstance {
    pub fn instance(&self) -> &ProblemInstance {
        &self.inst
    }

    pub fn grid(&self) -> GridConfig {
        self.grid
    }

    pub fn into_parts(self) -> (ProblemInstance, GridConfig) {
        (self.inst, self.grid)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}

/// Checks every instance and grid invariant and returns the pair unchanged.
pub fn validate_instance(inst: ProblemInstance, grid: GridConfig) -> Result<ValidatedInstance> {
    positive("lambda", inst.lambda)?;
    positive("s_max", inst.s_max)?;
    if inst.xi < 1 {
        return Err(Error::InvalidParameter {
            name: "xi",
            reason: "failure level must be at least 1".into(),
        });
    }
    if !(inst.horizon.is_finite() && inst.horizon > 0.0) {
        return Err(Error::EmptyHorizon {
            horizon: inst.horizon,
            dt: grid.dt,
        });
    }
    positive("dt", grid.dt)?;
    if grid.n_actions < 2 {
        return Err(Error::InvalidParameter {
            name: "n_actions",
            reason: format!("need at least 2 actions, got {}", grid.n_actions),
        });
    }

    match inst.f {
        RateFunction::Power { .. } => inst.f.check()?,
        RateFunction::DemandPenalty { .. } => {
            let at_zero = inst.f.value(0.0);
            if at_zero != 0.0 {
                return Err(Error::DeteriorationNotZeroAtOff { value: at_zero });
            }
            return Err(Error::DeteriorationNotPower);
        }
    }
    inst.r.check()?;
    inst.cost.check(inst.xi)?;

    if grid.dt > inst.horizon || grid.steps(inst.horizon) == 0 {
        return Err(Error::EmptyHorizon {
            horizon: inst.horizon,
            dt: grid.dt,
        });
    }
    let product = grid.dt * inst.max_intensity();
    if product >= 1.0 {
        return Err(Error::UnstableGrid { product });
    }
    Ok(ValidatedInstance { inst, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ProblemInstance {
        ProblemInstance {
            lambda: 1.0,
            xi: 10,
            s_max: 1.0,
            f: RateFunction::power(1.0, 2.0),
            r: RateFunction::power(1.0, 0.5),
            cost: CostFunction::canonical(10, 1.0, 5.0),
            horizon: 15.0,
        }
    }

    #[test]
    fn reference_instance_is_valid() {
        let v = validate_instance(reference(), GridConfig::new(0.005, 101)).unwrap();
        assert_eq!(v.instance(), &reference());
    }

    #[test]
    fn decreasing_cost_rejected() {
        let mut inst = reference();
        let mut costs = vec![1.0; 11];
        costs[10] = 0.5;
        inst.cost = CostFunction::new(costs);
        assert_eq!(
            validate_instance(inst, GridConfig::new(0.005, 101)),
            Err(Error::NonIncreasingCost { level: 9 })
        );
    }

    #[test]
    fn concave_cost_rejected() {
        let mut inst = reference();
        inst.xi = 3;
        inst.cost = CostFunction::new(vec![0.0, 2.0, 3.0, 3.5]);
        assert!(matches!(
            validate_instance(inst, GridConfig::new(0.005, 101)),
            Err(Error::NonConvexCost { level: 1 })
        ));
    }

    #[test]
    fn wrong_cost_length_rejected() {
        let mut inst = reference();
        inst.cost = CostFunction::canonical(5, 1.0, 5.0);
        assert!(matches!(
            validate_instance(inst, GridConfig::new(0.005, 101)),
            Err(Error::CostLength { got: 6, expected: 11 })
        ));
    }

    #[test]
    fn unstable_grid_rejected() {
        assert!(matches!(
            validate_instance(reference(), GridConfig::new(2.0, 101)),
            Err(Error::UnstableGrid { product }) if product == 2.0
        ));
    }

    #[test]
    fn demand_penalty_deterioration_rejected() {
        let mut inst = reference();
        inst.f = RateFunction::demand_penalty(0.0, 1.0, 1.5);
        assert!(matches!(
            validate_instance(inst.clone(), GridConfig::new(0.005, 101)),
            Err(Error::DeteriorationNotZeroAtOff { .. })
        ));
        inst.f = RateFunction::demand_penalty(1.0, 0.0, 1.5);
        assert_eq!(
            validate_instance(inst, GridConfig::new(0.005, 101)),
            Err(Error::DeteriorationNotPower)
        );
    }

    #[test]
    fn empty_horizon_rejected() {
        let mut inst = reference();
        inst.horizon = 0.0;
        assert!(matches!(
            validate_instance(inst.clone(), GridConfig::new(0.005, 101)),
            Err(Error::EmptyHorizon { .. })
        ));
        inst.horizon = 0.001;
        assert!(matches!(
            validate_instance(inst, GridConfig::new(0.005, 101)),
            Err(Error::EmptyHorizon { .. })
        ));
    }

    #[test]
    fn decreasing_revenue_rejected() {
        let mut inst = reference();
        inst.r = RateFunction::power(-1.0, 1.0);
        assert!(matches!(
            validate_instance(inst, GridConfig::new(0.005, 101)),
            Err(Error::InvalidRateFunction(_))
        ));
    }

    #[test]
    fn rate_function_values() {
        assert_eq!(RateFunction::power(1.0, 2.0).eval(0.5).unwrap(), 0.25);
        assert_eq!(RateFunction::power(1.0, 0.5).eval(0.0).unwrap(), 0.0);
        assert_eq!(
            RateFunction::demand_penalty(0.0, 1.0, 1.5).eval(1.0).unwrap(),
            -0.5
        );
        assert_eq!(
            RateFunction::power(1.0, 2.0).eval(-0.1),
            Err(Error::NegativeRateInput(-0.1))
        );
    }

    #[test]
    fn default_grid_respects_stability() {
        let inst = ProblemInstance::power_canonical(150.0, 10, 2.0, 2.0, 1.0, 1.0, 10.0, 10.0);
        let g = GridConfig::default_for(&inst);
        assert!(g.dt * inst.max_intensity() <= 0.5 + 1e-15);
        let g = GridConfig::default_for(&reference());
        assert_eq!(g.dt, 0.005);
    }

    #[test]
    fn action_grid_endpoints() {
        let a = GridConfig::new(0.01, 101).actions(2.0);
        assert_eq!(a.len(), 101);
        assert_eq!(a[0], 0.0);
        assert_eq!(a[100], 2.0);
        assert!((a[50] - 1.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn power_deterioration_zero_at_off_and_monotone(
                coeff in 0.01f64..10.0, exponent in 0.1f64..4.0, s_max in 0.1f64..5.0
            ) {
                let f = RateFunction::power(coeff, exponent);
                let mut inst = reference();
                inst.f = f;
                inst.s_max = s_max;
                let grid = GridConfig::default_for(&inst);
                prop_assume!(validate_instance(inst, grid).is_ok());
                prop_assert_eq!(f.eval(0.0).unwrap(), 0.0);
                let mut prev = f.value(0.0);
                for i in 1..1000 {
                    let v = f.value(s_max * i as f64 / 999.0);
                    prop_assert!(v >= prev);
                    prev = v;
                }
            }

            #[test]
            fn validated_costs_are_convex(
                base in 0.0f64..5.0,
                incs in proptest::collection::vec(0.0f64..3.0, 1..12),
            ) {
                let mut sorted = incs.clone();
                sorted.sort_by(f64::total_cmp);
                let mut costs = vec![base];
                for d in &sorted {
                    let last = *costs.last().unwrap();
                    costs.push(last + d);
                }
                let xi = costs.len() - 1;
                let mut inst = reference();
                inst.xi = xi;
                inst.cost = CostFunction::new(costs.clone());
                let v = validate_instance(inst, GridConfig::new(0.005, 11));
                prop_assert!(v.is_ok());
                for w in costs.windows(3) {
                    prop_assert!((w[2] - w[1]) - (w[1] - w[0]) >= -1e-9);
                }
            }
        }
    }
}
