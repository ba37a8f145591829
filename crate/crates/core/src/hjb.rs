//! Finite-difference backward recursion for the single-system HJB equation.
//!
//! With `n` counting remaining time in steps of `dt`, the explicit scheme is
//!
//! ```text
//! J(x, n+1) = J(x, n) + dt · max_s [ r(s) − λ f(s) (J(x, n) − J(x+1, n)) ]   x < xi
//! J(xi, n+1) = J(xi, n)
//! J(x, 0)   = −c_m(x)
//! ```
//!
//! which is exactly the discrete-time dynamic program in which one shock
//! arrives during a step with probability `λ f(s) dt`.

use std::io::{self, Write};

use crate::csvfmt::num;
use crate::error::{Error, Result};
use crate::model::{ProblemInstance, ValidatedInstance};
use crate::structure::check_bang_bang;

/// Which production rates the maximization ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionMode {
    /// `{0, s_max}` when bang-bang optimality is detected, the full grid otherwise.
    #[default]
    Auto,
    /// Always the full `n_actions` grid.
    Full,
    /// Always `{0, s_max}`.
    BangBang,
}

/// Optimal value and policy over deterioration levels × remaining-time steps.
#[derive(Debug, Clone)]
pub struct SolutionGrid {
    instance: ProblemInstance,
    dt: f64,
    steps: usize,
    actions: Vec<f64>,
    // Both stored step-major: index n * (xi + 1) + x.
    values: Vec<f64>,
    policy: Vec<f64>,
}

impl SolutionGrid {
    pub fn instance(&self) -> &ProblemInstance {
        &self.instance
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of time steps `N`; valid step indices are `0..=N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn xi(&self) -> usize {
        self.instance.xi
    }

    /// Action set the maximization ranged over.
    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn is_two_action(&self) -> bool {
        self.actions.len() == 2
    }

    #[inline]
    fn idx(&self, x: usize, n: usize) -> usize {
        n * (self.instance.xi + 1) + x
    }

    /// `J*(x, n·dt)`. Panics when out of range.
    #[inline]
    pub fn value(&self, x: usize, n: usize) -> f64 {
        self.values[self.idx(x, n)]
    }

    /// `s*(x, n·dt)`. Panics when out of range.
    #[inline]
    pub fn rate(&self, x: usize, n: usize) -> f64 {
        self.policy[self.idx(x, n)]
    }

    /// Mutable access for fault-injection tests.
    #[doc(hidden)]
    pub fn value_mut(&mut self, x: usize, n: usize) -> &mut f64 {
        let i = self.idx(x, n);
        &mut self.values[i]
    }

    /// Value at `x = 0` with the full horizon remaining.
    pub fn initial_value(&self) -> f64 {
        self.value(0, self.steps)
    }

    fn time_index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || t > self.steps as f64 * self.dt + 0.5 * self.dt {
            return Err(Error::OutOfRange(format!(
                "remaining time {t} outside [0, {}]",
                self.steps as f64 * self.dt
            )));
        }
        Ok(nearest_index(t, self.dt).min(self.steps))
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x > self.instance.xi {
            return Err(Error::OutOfRange(format!(
                "state {x} above failure level {}",
                self.instance.xi
            )));
        }
        Ok(())
    }

    /// Writes `x,n,t_remaining,value,policy` rows, x-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,n,t_remaining,value,policy")?;
        for x in 0..=self.xi() {
            for n in 0..=self.steps {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    x,
                    n,
                    num(n as f64 * self.dt),
                    num(self.value(x, n)),
                    num(self.rate(x, n))
                )?;
            }
        }
        Ok(())
    }
}

/// Relative margin within which an objective value counts as tied with the
/// maximum.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Whether `v` ties `max` within the margin.
#[inline]
fn ties(v: f64, max: f64) -> bool {
    v >= max - TIE_TOLERANCE * max.abs().max(1.0)
}

/// Chooses the rate for one state: index 0 (off) when it ties the maximum,
/// otherwise the exact maximizer, smallest index on exact equality.
///
/// Ties with "off" occur on converged plateaus where roundoff decides the
/// sign of a vanishing gap. Ties among positive rates occur on singular arcs
/// where the gap is small but real, and resolving them by the margin would
/// pick an arbitrary interior rate next to the true optimum.
pub(crate) fn select_action<F: Fn(usize) -> f64>(objective: F, len: usize) -> (usize, f64) {
    let (mut arg, mut max) = (0, f64::NEG_INFINITY);
    for j in 0..len {
        let v = objective(j);
        if v > max {
            arg = j;
            max = v;
        }
    }
    if ties(objective(0), max) {
        arg = 0;
    }
    (arg, max)
}

/// [`select_action`] for an objective concave in the index: climb from
/// `start` to the peak, then bisect the rising flank for the first index
/// attaining it.
fn select_action_concave<F: Fn(usize) -> f64>(objective: F, len: usize, start: usize) -> (usize, f64) {
    let mut j = start.min(len - 1);
    let mut vj = objective(j);
    while j + 1 < len {
        let v = objective(j + 1);
        if v > vj {
            j += 1;
            vj = v;
        } else {
            break;
        }
    }
    while j > 0 {
        let v = objective(j - 1);
        if v > vj {
            j -= 1;
            vj = v;
        } else {
            break;
        }
    }
    if ties(objective(0), vj) {
        return (0, vj);
    }
    let (mut lo, mut hi) = (0, j);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if objective(mid) >= vj {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    (lo, vj)
}

/// Nearest grid index to `t / dt`, exact halves rounding down.
pub fn nearest_index(t: f64, dt: f64) -> usize {
    let q = t / dt;
    let lo = q.floor();
    let idx = if q - lo > 0.5 { lo + 1.0 } else { lo };
    idx.max(0.0) as usize
}

/// Solves with [`ActionMode::Auto`].
pub fn solve(inst: &ValidatedInstance) -> SolutionGrid {
    solve_with(inst, ActionMode::Auto)
}

pub fn solve_with(inst: &ValidatedInstance, mode: ActionMode) -> SolutionGrid {
    let p = inst.instance();
    let grid = inst.grid();
    let two_action = match mode {
        ActionMode::Auto => check_bang_bang(p).is_bang_bang,
        ActionMode::Full => false,
        ActionMode::BangBang => true,
    };
    let actions = if two_action {
        vec![0.0, p.s_max]
    } else {
        grid.actions(p.s_max)
    };
    let steps = grid.steps(p.horizon);
    backward_recursion(p.clone(), grid.dt, steps, actions)
}

fn backward_recursion(
    instance: ProblemInstance,
    dt: f64,
    steps: usize,
    actions: Vec<f64>,
) -> SolutionGrid {
    let xi = instance.xi;
    let width = xi + 1;
    let revenue: Vec<f64> = actions.iter().map(|&s| instance.r.value(s)).collect();
    let intensity: Vec<f64> = actions
        .iter()
        .map(|&s| instance.lambda * instance.f.value(s))
        .collect();
    // Off action for the failed state: the smallest rate, which is 0.
    let off = actions[0];

    let mut values = vec![0.0; width * (steps + 1)];
    let mut policy = vec![0.0; width * (steps + 1)];
    for x in 0..=xi {
        values[x] = -instance.cost.at(x);
    }

    // r concave and f convex make the objective concave whenever the gap is
    // nonnegative, which allows the warm-started search.
    let concave = instance.r.is_concave() && instance.f.is_convex() && actions.len() > 2;
    let mut warm = vec![0usize; width];

    for n in 0..steps {
        let (done, rest) = values.split_at_mut((n + 1) * width);
        let cur = &done[n * width..];
        let next = &mut rest[..width];
        let next_policy = &mut policy[(n + 1) * width..(n + 2) * width];
        for x in 0..xi {
            let gap = cur[x] - cur[x + 1];
            let objective = |j: usize| revenue[j] - intensity[j] * gap;
            let (arg, best) = if concave && gap >= 0.0 {
                select_action_concave(objective, actions.len(), warm[x])
            } else {
                select_action(objective, actions.len())
            };
            warm[x] = arg;
            // The value takes the exact maximum; the policy the smallest
            // rate inside the tie margin.
            next[x] = cur[x] + dt * best;
            next_policy[x] = actions[arg];
        }
        next[xi] = cur[xi];
        next_policy[xi] = off;
    }
    // Step 0 carries the maximizer against the boundary values, which is the
    // rate applied on the first step.
    if steps > 0 {
        let (head, tail) = policy.split_at_mut(width);
        head.copy_from_slice(&tail[..width]);
    }

    SolutionGrid {
        instance,
        dt,
        steps,
        actions,
        values,
        policy,
    }
}

/// `J*(x, t)` at the nearest time step.
pub fn value_at(sol: &SolutionGrid, x: usize, t: f64) -> Result<f64> {
    sol.check_state(x)?;
    let n = sol.time_index(t)?;
    Ok(sol.value(x, n))
}

/// `s*(x, t)` at the nearest time step.
pub fn policy_at(sol: &SolutionGrid, x: usize, t: f64) -> Result<f64> {
    sol.check_state(x)?;
    let n = sol.time_index(t)?;
    Ok(sol.rate(x, n))
}

/// First and second differences of the value in the deterioration level.
#[derive(Debug, Clone)]
pub struct MarginalGrid {
    xi: usize,
    steps: usize,
    delta: Vec<f64>,
    delta2: Vec<f64>,
}

impl MarginalGrid {
    /// `J(x, n) − J(x+1, n)` for `x < xi`.
    pub fn delta(&self, x: usize, n: usize) -> f64 {
        assert!(x < self.xi);
        self.delta[n * self.xi + x]
    }

    /// `Δ(x, n) − Δ(x+1, n)` for `x < xi − 1`.
    pub fn delta2(&self, x: usize, n: usize) -> f64 {
        assert!(x + 1 < self.xi);
        self.delta2[n * (self.xi - 1) + x]
    }

    pub fn xi(&self) -> usize {
        self.xi
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

pub fn marginals(sol: &SolutionGrid) -> MarginalGrid {
    let xi = sol.xi();
    let steps = sol.steps();
    let mut delta = Vec::with_capacity(xi * (steps + 1));
    let mut delta2 = Vec::with_capacity(xi.saturating_sub(1) * (steps + 1));
    for n in 0..=steps {
        let row_start = delta.len();
        for x in 0..xi {
            delta.push(sol.value(x, n) - sol.value(x + 1, n));
        }
        for x in 0..xi.saturating_sub(1) {
            delta2.push(delta[row_start + x] - delta[row_start + x + 1]);
        }
    }
    MarginalGrid {
        xi,
        steps,
        delta,
        delta2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_instance, CostFunction, GridConfig, RateFunction};

    pub(crate) fn reference(lambda: f64) -> ValidatedInstance {
        let inst = ProblemInstance {
            lambda,
            xi: 10,
            s_max: 1.0,
            f: RateFunction::power(1.0, 2.0),
            r: RateFunction::power(1.0, 0.5),
            cost: CostFunction::canonical(10, 1.0, 5.0),
            horizon: 15.0,
        };
        validate_instance(inst, GridConfig::new(0.005, 101)).unwrap()
    }

    #[test]
    fn boundary_and_failure_rows() {
        let sol = solve(&reference(1.0));
        for x in 0..=10 {
            let c = if x == 10 { 5.0 } else { 1.0 };
            assert_eq!(sol.value(x, 0), -c);
        }
        for n in 0..=sol.steps() {
            assert_eq!(sol.rate(10, n), 0.0);
            assert_eq!(sol.value(10, n), -5.0);
        }
        assert_eq!(value_at(&sol, 10, 7.3).unwrap(), -5.0);
        assert_eq!(value_at(&sol, 0, 0.0).unwrap(), -1.0);
        assert_eq!(policy_at(&sol, 10, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn recursion_matches_hand_computation() {
        let sol = solve(&reference(1.0));
        // Step 1 from the boundary: x = 9 faces gap 4, so the maximizer of
        // sqrt(s) − 4 s² is (1/16)^(2/3) ≈ 0.1575, up to one action cell.
        let s = sol.rate(9, 1);
        assert!((s - (1.0f64 / 16.0).powf(2.0 / 3.0)).abs() <= 0.01, "{s}");
        let expected = -1.0 + 0.005 * (s.sqrt() - 4.0 * s * s);
        assert!((sol.value(9, 1) - expected).abs() < 1e-15);
        // Zero gap below level 9: full production.
        assert_eq!(sol.rate(0, 1), 1.0);
        assert_eq!(sol.value(0, 1), -1.0 + 0.005);
    }

    #[test]
    fn vanishing_revenue_stays_at_preventive_cost() {
        let mut inst = reference(1.0).instance().clone();
        inst.r = RateFunction::power(1e-12, 0.5);
        let v = validate_instance(inst, GridConfig::new(0.005, 101)).unwrap();
        let sol = solve(&v);
        assert!((sol.initial_value() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_queries() {
        let sol = solve(&reference(1.0));
        assert!(matches!(value_at(&sol, 11, 1.0), Err(Error::OutOfRange(_))));
        assert!(matches!(value_at(&sol, 0, 16.0), Err(Error::OutOfRange(_))));
        assert!(matches!(policy_at(&sol, 0, -1.0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn nearest_index_ties_round_down() {
        assert_eq!(nearest_index(0.0125, 0.005), 2);
        assert_eq!(nearest_index(0.013, 0.005), 3);
        assert_eq!(nearest_index(8.6, 0.005), 1720);
        assert_eq!(nearest_index(0.5, 1.0), 0);
        assert_eq!(nearest_index(1.5, 1.0), 1);
    }

    #[test]
    fn marginals_at_boundary() {
        let sol = solve(&reference(1.0));
        let m = marginals(&sol);
        for x in 0..10 {
            let expected = sol.instance().cost.at(x + 1) - sol.instance().cost.at(x);
            assert_eq!(m.delta(x, 0), expected);
        }
        assert_eq!(m.delta(8, 0), 0.0);
        assert_eq!(m.delta(9, 0), 4.0);
        for n in 0..=m.steps() {
            for x in 0..10 {
                assert!(m.delta(x, n) >= -1e-12);
            }
        }
    }

    #[test]
    fn lower_rates_for_higher_base_rate() {
        let slow = solve(&reference(1.0));
        let fast = solve(&reference(4.0));
        let cell = 1.0 / 100.0;
        for n in (0..=slow.steps()).step_by(50) {
            for x in 0..=10 {
                assert!(fast.rate(x, n) <= slow.rate(x, n) + cell + 1e-12);
            }
        }
    }

    #[test]
    fn swapped_functions_give_two_valued_policy() {
        let mut inst = reference(1.0).instance().clone();
        std::mem::swap(&mut inst.f, &mut inst.r);
        let v = validate_instance(inst, GridConfig::new(0.005, 101)).unwrap();
        let sol = solve(&v);
        assert!(sol.is_two_action());
        let full = solve_with(&v, ActionMode::Full);
        for n in 0..=full.steps() {
            for x in 0..=10 {
                let s = full.rate(x, n);
                assert!(s == 0.0 || s == 1.0, "rate {s} at ({x},{n})");
                assert_eq!(s, sol.rate(x, n));
            }
        }
    }

    #[test]
    fn csv_layout() {
        let mut inst = reference(1.0).instance().clone();
        inst.horizon = 0.01;
        let v = validate_instance(inst, GridConfig::new(0.005, 11)).unwrap();
        let sol = solve(&v);
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,n,t_remaining,value,policy");
        assert_eq!(lines.len(), 1 + 11 * 3);
        assert_eq!(lines[1], "0,0,0,-1,1");
        assert_eq!(lines[2], "0,1,0.005,-0.995,1");
        assert!(lines.last().unwrap().starts_with("10,2,0.01,-5,0"));
    }

    proptest::proptest! {
        #[test]
        fn warm_search_matches_full_scan(
            nu in 0.1f64..=1.0,
            gamma in 1.0f64..4.0,
            c in 0.0f64..20.0,
            m in 3usize..150,
            start in 0usize..150,
        ) {
            let s: Vec<f64> = (0..m).map(|j| 2.0 * j as f64 / (m - 1) as f64).collect();
            let objective = |j: usize| s[j].powf(nu) - c * s[j].powf(gamma);
            proptest::prop_assert_eq!(
                select_action_concave(objective, m, start % m),
                select_action(objective, m)
            );
        }
    }
}
