//! Maintenance-interval optimization.
//!
//! The recursion runs forward in remaining time and its values at step `n`
//! do not depend on the horizon, so a single solve at the largest candidate
//! interval yields `J*(0, T)` for every shorter `T` on the grid. The search
//! below reads that column instead of re-solving per probe.

use std::io::{self, Write};

use crate::baseline::{erlang_cdf, expected_min_erlang};
use crate::csvfmt::num;
use crate::error::{Error, Result};
use crate::hjb::{nearest_index, solve, SolutionGrid};
use crate::model::{validate_instance, GridConfig, ProblemInstance};
use crate::search::{golden_max, golden_min};

/// Search bounds for the maintenance interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalBounds {
    pub t_min: f64,
    pub t_max: f64,
}

impl IntervalBounds {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "interval bounds",
                reason: format!("need 0 < t_min < t_max, got [{t_min}, {t_max}]"),
            });
        }
        Ok(Self { t_min, t_max })
    }

    /// `[10 dt, 10 xi / lambda]`.
    pub fn default_for(inst: &ProblemInstance, grid: GridConfig) -> Self {
        Self {
            t_min: 10.0 * grid.dt,
            t_max: 10.0 * inst.xi as f64 / inst.lambda,
        }
    }
}

/// Result of the integrated interval search.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalResult {
    pub t_star: f64,
    pub g_star: f64,
    /// The optimum sits within two steps of a search bound.
    pub boundary_hit: bool,
    /// `(T, g(T))` samples across the bounds, in increasing `T`.
    pub curve: Vec<(f64, f64)>,
    pub warning: Option<String>,
}

impl IntervalResult {
    /// Writes the sampled curve with header `T,g`.
    pub fn write_curve_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "T,g")?;
        for &(t, g) in &self.curve {
            writeln!(out, "{},{}", num(t), num(g))?;
        }
        Ok(())
    }
}

/// Long-run average profit `g(T) = J*(0, T) / T`.
pub fn average_profit(inst: &ProblemInstance, horizon: f64, grid: GridConfig) -> Result<f64> {
    let sol = solve(&validate_instance(inst.with_horizon(horizon), grid)?);
    Ok(sol.initial_value() / horizon)
}

/// `g` read from a solution covering at least `t`.
fn g_from(sol: &SolutionGrid, t: f64) -> f64 {
    let n = nearest_index(t, sol.dt()).min(sol.steps());
    sol.value(0, n) / t
}

const CURVE_POINTS: usize = 400;

/// Maximizes `g` over `bounds` from one solve at `bounds.t_max`.
pub fn optimize_interval(
    inst: &ProblemInstance,
    bounds: IntervalBounds,
    grid: GridConfig,
) -> Result<IntervalResult> {
    let sol = solve(&validate_instance(inst.with_horizon(bounds.t_max), grid)?);
    optimize_on(&sol, bounds)
}

fn optimize_on(sol: &SolutionGrid, bounds: IntervalBounds) -> Result<IntervalResult> {
    let dt = sol.dt();
    let n_lo = (bounds.t_min / dt).ceil().max(1.0) as usize;
    let n_hi = ((bounds.t_max / dt).floor() as usize).min(sol.steps());
    if n_lo > n_hi {
        return Err(Error::EmptyHorizon {
            horizon: bounds.t_max,
            dt,
        });
    }
    let g = |n: usize| sol.value(0, n) / (n as f64 * dt);

    let coarse = golden_max(
        |t| g(nearest_index(t, dt).clamp(n_lo, n_hi)),
        n_lo as f64 * dt,
        n_hi as f64 * dt,
        dt,
    );
    // Finish with a hill climb on the step lattice.
    let mut best = {
        let n = nearest_index(coarse.arg, dt).clamp(n_lo, n_hi);
        (n, g(n))
    };
    loop {
        let left = (best.0 > n_lo).then(|| (best.0 - 1, g(best.0 - 1)));
        let right = (best.0 < n_hi).then(|| (best.0 + 1, g(best.0 + 1)));
        match [left, right].into_iter().flatten().max_by(|a, b| a.1.total_cmp(&b.1)) {
            Some(step) if step.1 > best.1 => best = step,
            _ => break,
        }
    }

    let stride = ((n_hi - n_lo) / CURVE_POINTS).max(1);
    let mut curve: Vec<(f64, f64)> = (n_lo..=n_hi)
        .step_by(stride)
        .map(|n| (n as f64 * dt, g(n)))
        .collect();
    if curve.last().map(|c| c.0) != Some(n_hi as f64 * dt) {
        curve.push((n_hi as f64 * dt, g(n_hi)));
    }
    // A sampled point beating the bracket means g was not unimodal there.
    let mut warning = None;
    if let Some(&(t, v)) = curve.iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
        if v > best.1 {
            warning = Some(format!(
                "g is not unimodal: sampled g({t}) = {v} exceeds the bracketed optimum"
            ));
            best = (nearest_index(t, dt), v);
        }
    }
    let pos = curve.partition_point(|c| c.0 < best.0 as f64 * dt);
    if curve.get(pos).map(|c| c.0) != Some(best.0 as f64 * dt) {
        curve.insert(pos, (best.0 as f64 * dt, best.1));
    }

    let boundary_hit = best.0 <= n_lo + 2 || best.0 + 2 >= n_hi;
    if boundary_hit && warning.is_none() {
        warning = Some(format!(
            "optimum at the search bound T = {}; no interior maximizer in [{}, {}]",
            best.0 as f64 * dt,
            bounds.t_min,
            bounds.t_max
        ));
    }
    Ok(IntervalResult {
        t_star: best.0 as f64 * dt,
        g_star: best.1,
        boundary_hit,
        curve,
        warning,
    })
}

/// Like [`optimize_interval`] but an optimum on a bound is an error.
pub fn optimize_interval_strict(
    inst: &ProblemInstance,
    bounds: IntervalBounds,
    grid: GridConfig,
) -> Result<IntervalResult> {
    let res = optimize_interval(inst, bounds, grid)?;
    if res.boundary_hit {
        return Err(Error::NoInteriorMaximizer {
            t_min: bounds.t_min,
            t_max: bounds.t_max,
        });
    }
    Ok(res)
}

/// Expected cost rate of the classical age rule at interval `t`, for a
/// lifetime that is Erlang with shape `xi` and the base rate `lambda`. The
/// production policy is ignored.
pub fn sequential_cost_rate(lambda: f64, xi: usize, cp: f64, cu: f64, t: f64) -> f64 {
    let p_fail = erlang_cdf(xi, lambda, t);
    (cp + (cu - cp) * p_fail) / expected_min_erlang(xi, lambda, t)
}

/// Interval minimizing [`sequential_cost_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequentialResult {
    pub t_star: f64,
    pub cost_rate: f64,
    pub boundary_hit: bool,
}

pub fn sequential_interval(
    lambda: f64,
    xi: usize,
    cp: f64,
    cu: f64,
    bounds: IntervalBounds,
) -> Result<SequentialResult> {
    if !(cp > 0.0 && cu > cp) {
        return Err(Error::InvalidCosts { cp, cu });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("must be positive, got {lambda}"),
        });
    }
    let width = bounds.t_max - bounds.t_min;
    let m = golden_min(
        |t| sequential_cost_rate(lambda, xi, cp, cu, t),
        bounds.t_min,
        bounds.t_max,
        1e-9 * width,
    );
    let mut best = (m.arg, m.value);
    // A bound that ties the interior minimum wins, so flat tails report the bound.
    for t in [bounds.t_max, bounds.t_min] {
        let v = sequential_cost_rate(lambda, xi, cp, cu, t);
        if v <= best.1 {
            best = (t, v);
        }
    }
    let edge = 1e-6 * width;
    Ok(SequentialResult {
        t_star: best.0,
        cost_rate: best.1,
        boundary_hit: best.0 - bounds.t_min <= edge || bounds.t_max - best.0 <= edge,
    })
}

/// Integrated against sequential interval choice under the optimal
/// condition-based policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalComparison {
    pub t_integrated: f64,
    pub t_sequential: f64,
    pub g_integrated: f64,
    pub g_sequential: f64,
    /// `100 (g(T_I) − g(T_S)) / |g(T_S)|`.
    pub r_hat_percent: f64,
}

pub fn compare_integrated_sequential(
    inst: &ProblemInstance,
    bounds: IntervalBounds,
    grid: GridConfig,
) -> Result<IntervalComparison> {
    let (cp, cu) = inst.cost.as_canonical().ok_or_else(|| Error::InvalidParameter {
        name: "cost",
        reason: "the sequential approach needs two-level costs".into(),
    })?;
    let seq = sequential_interval(inst.lambda, inst.xi, cp, cu, bounds)?;
    let sol = solve(&validate_instance(inst.with_horizon(bounds.t_max), grid)?);
    let integrated = optimize_on(&sol, bounds)?;
    let g_sequential = g_from(&sol, seq.t_star);
    Ok(IntervalComparison {
        t_integrated: integrated.t_star,
        t_sequential: seq.t_star,
        g_integrated: integrated.g_star,
        g_sequential,
        r_hat_percent: 100.0 * (integrated.g_star - g_sequential) / g_sequential.abs(),
    })
}
