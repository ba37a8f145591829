//! Small fleets of systems that share one demand-driven revenue stream.
//!
//! The state is the vector of deterioration levels and the recursion is the
//! single-system scheme with one shock term per system:
//!
//! ```text
//! J(x, n+1) = J(x, n) + dt · max_s [ r(Σ s_i) − Σ_i λ_i f_i(s_i) (J(x, n) − J(x + e_i, n)) ]
//! ```
//!
//! with `s_i = 0` for failed systems. The maximization enumerates the full
//! product action grid.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::csvfmt::num;
use crate::error::{Error, Result};
use crate::hjb::select_action;
use crate::model::{CostFunction, GridConfig, RateFunction};

/// Largest supported fleet.
pub const MAX_SYSTEMS: usize = 3;
/// Largest product action grid `M^N`.
pub const MAX_ACTIONS: usize = 1_000_000;
/// Per-system action count used when none is configured.
pub const DEFAULT_MULTI_ACTIONS: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub lambda: f64,
    pub f: RateFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiInstance {
    pub systems: Vec<SystemSpec>,
    pub xi: usize,
    pub s_max: f64,
    pub cost: CostFunction,
    /// Revenue as a function of the total production rate.
    pub revenue: RateFunction,
    pub horizon: f64,
}

/// Revenue of the rate vector `s`: `revenue` evaluated at the total rate.
pub fn multi_revenue(s: &[f64], revenue: &RateFunction) -> f64 {
    revenue.value(s.iter().sum())
}

/// Values and policies over `(x_1, …, x_N)` × remaining-time steps.
#[derive(Debug, Clone)]
pub struct MultiSolution {
    n_systems: usize,
    xi: usize,
    dt: f64,
    steps: usize,
    actions: Vec<f64>,
    states: usize,
    // Step-major; state index x_1 + (xi+1) x_2 + …
    values: Vec<f64>,
    // One rate per system per state and step.
    policy: Vec<f64>,
}

impl MultiSolution {
    pub fn n_systems(&self) -> usize {
        self.n_systems
    }

    pub fn xi(&self) -> usize {
        self.xi
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Per-system action grid.
    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    fn state_index(&self, x: &[usize]) -> usize {
        assert_eq!(x.len(), self.n_systems, "state has the wrong dimension");
        x.iter().rev().fold(0, |acc, &xi| {
            assert!(xi <= self.xi, "level {xi} above failure level {}", self.xi);
            acc * (self.xi + 1) + xi
        })
    }

    pub fn value(&self, x: &[usize], n: usize) -> f64 {
        assert!(n <= self.steps, "step {n} beyond {}", self.steps);
        self.values[n * self.states + self.state_index(x)]
    }

    pub fn policy(&self, x: &[usize], n: usize) -> &[f64] {
        assert!(n <= self.steps, "step {n} beyond {}", self.steps);
        let at = (n * self.states + self.state_index(x)) * self.n_systems;
        &self.policy[at..at + self.n_systems]
    }

    /// Writes `x1,…,xN,n,value,s1,…,sN`, states varying fastest in `x1`
    /// within each step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let xs: Vec<String> = (1..=self.n_systems).map(|i| format!("x{i}")).collect();
        let ss: Vec<String> = (1..=self.n_systems).map(|i| format!("s{i}")).collect();
        writeln!(out, "{},n,value,{}", xs.join(","), ss.join(","))?;
        let mut x = vec![0; self.n_systems];
        for n in 0..=self.steps {
            for idx in 0..self.states {
                decode(idx, self.xi, &mut x);
                let levels: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                let rates: Vec<String> = self.policy(&x, n).iter().map(|&s| num(s)).collect();
                writeln!(
                    out,
                    "{},{},{},{}",
                    levels.join(","),
                    n,
                    num(self.values[n * self.states + idx]),
                    rates.join(",")
                )?;
            }
        }
        Ok(())
    }
}

fn decode(mut idx: usize, xi: usize, x: &mut [usize]) {
    for level in x.iter_mut() {
        *level = idx % (xi + 1);
        idx /= xi + 1;
    }
}

fn validate(inst: &MultiInstance, grid: GridConfig) -> Result<usize> {
    let n = inst.systems.len();
    if n == 0 || n > MAX_SYSTEMS {
        return Err(Error::InvalidParameter {
            name: "systems",
            reason: format!("need 1 to {MAX_SYSTEMS} systems, got {n}"),
        });
    }
    if inst.xi < 1 {
        return Err(Error::InvalidParameter {
            name: "xi",
            reason: "failure level must be at least 1".into(),
        });
    }
    if !(inst.s_max.is_finite() && inst.s_max > 0.0) {
        return Err(Error::InvalidParameter {
            name: "s_max",
            reason: format!("must be positive, got {}", inst.s_max),
        });
    }
    for sys in &inst.systems {
        if !(sys.lambda.is_finite() && sys.lambda > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be positive, got {}", sys.lambda),
            });
        }
        match sys.f {
            RateFunction::Power { .. } => sys.f.check()?,
            RateFunction::DemandPenalty { .. } => return Err(Error::DeteriorationNotPower),
        }
    }
    inst.revenue.check()?;
    inst.cost.check(inst.xi)?;
    if !(grid.dt.is_finite() && grid.dt > 0.0) || grid.n_actions < 2 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!("need dt > 0 and at least 2 actions, got {grid:?}"),
        });
    }
    let size = grid
        .n_actions
        .checked_pow(n as u32)
        .filter(|&s| s <= MAX_ACTIONS)
        .ok_or(Error::ActionSpaceTooLarge {
            size: grid.n_actions.saturating_pow(n as u32),
            limit: MAX_ACTIONS,
        })?;
    let steps = grid.steps(inst.horizon);
    if !(inst.horizon.is_finite() && inst.horizon > 0.0) || steps == 0 {
        return Err(Error::EmptyHorizon {
            horizon: inst.horizon,
            dt: grid.dt,
        });
    }
    let product = grid.dt
        * inst
            .systems
            .iter()
            .map(|sys| sys.lambda * sys.f.value(inst.s_max))
            .sum::<f64>();
    if product >= 1.0 {
        return Err(Error::UnstableGrid { product });
    }
    Ok(size)
}

pub fn solve_multi(inst: &MultiInstance, grid: GridConfig) -> Result<MultiSolution> {
    let n_actions = validate(inst, grid)?;
    let n_sys = inst.systems.len();
    let xi = inst.xi;
    let m = grid.n_actions;
    let actions = grid.actions(inst.s_max);
    let steps = grid.steps(inst.horizon);
    let states = (xi + 1).pow(n_sys as u32);

    // Per-system intensities and the revenue of every action vector, the
    // latter indexed a_1 + M a_2 + ….
    let intensity: Vec<Vec<f64>> = inst
        .systems
        .iter()
        .map(|sys| actions.iter().map(|&s| sys.lambda * sys.f.value(s)).collect())
        .collect();
    let mut rates = vec![0.0; n_sys];
    let revenue: Vec<f64> = (0..n_actions)
        .map(|a| {
            decode_action(a, m, &actions, &mut rates);
            multi_revenue(&rates, &inst.revenue)
        })
        .collect();

    let stride: Vec<usize> = (0..n_sys).map(|i| (xi + 1).pow(i as u32)).collect();
    let mut values = vec![0.0; states * (steps + 1)];
    let mut policy = vec![0.0; states * (steps + 1) * n_sys];
    let mut x = vec![0; n_sys];
    for idx in 0..states {
        decode(idx, xi, &mut x);
        values[idx] = -x.iter().map(|&l| inst.cost.at(l)).sum::<f64>();
    }

    // Admissible action vectors per state: failed systems pinned to 0.
    let admissible: Vec<Vec<usize>> = (0..states)
        .map(|idx| {
            let mut x = vec![0; n_sys];
            decode(idx, xi, &mut x);
            (0..n_actions)
                .filter(|&a| {
                    let mut rest = a;
                    x.iter().all(|&l| {
                        let ai = rest % m;
                        rest /= m;
                        l < xi || ai == 0
                    })
                })
                .collect()
        })
        .collect();

    let mut gaps = vec![0.0; n_sys];
    let mut objective_buf: Vec<f64> = Vec::with_capacity(n_actions);
    for n in 0..steps {
        let (done, rest) = values.split_at_mut((n + 1) * states);
        let cur = &done[n * states..];
        let next = &mut rest[..states];
        for idx in 0..states {
            decode(idx, xi, &mut x);
            let at = ((n + 1) * states + idx) * n_sys;
            if x.iter().all(|&l| l == xi) {
                next[idx] = cur[idx];
                policy[at..at + n_sys].fill(actions[0]);
                continue;
            }
            for i in 0..n_sys {
                gaps[i] = if x[i] < xi { cur[idx] - cur[idx + stride[i]] } else { 0.0 };
            }
            objective_buf.clear();
            for &a in &admissible[idx] {
                let mut rest = a;
                let mut loss = 0.0;
                for i in 0..n_sys {
                    loss += intensity[i][rest % m] * gaps[i];
                    rest /= m;
                }
                objective_buf.push(revenue[a] - loss);
            }
            let (pick, best) = select_action(|j| objective_buf[j], objective_buf.len());
            next[idx] = cur[idx] + grid.dt * best;
            decode_action(admissible[idx][pick], m, &actions, &mut policy[at..at + n_sys]);
        }
    }
    if steps > 0 {
        let (head, tail) = policy.split_at_mut(states * n_sys);
        head.copy_from_slice(&tail[..states * n_sys]);
    }

    Ok(MultiSolution {
        n_systems: n_sys,
        xi,
        dt: grid.dt,
        steps,
        actions,
        states,
        values,
        policy,
    })
}

fn decode_action(mut a: usize, m: usize, actions: &[f64], out: &mut [f64]) {
    for s in out.iter_mut() {
        *s = actions[a % m];
        a /= m;
    }
}
