//! Static fixed-rate baseline: one constant production rate for the whole
//! interval, evaluated in closed form through the Erlang distribution of the
//! failure time.

use crate::error::{Error, Result};
use crate::hjb::solve;
use crate::model::{validate_instance, GridConfig, ProblemInstance};
use crate::search::golden_max;

/// `P(T_k ≤ t)` for `T_k ~ Erlang(k, mu)`.
///
/// Below the mean the upper Poisson tail is summed directly, so tiny
/// probabilities keep their relative accuracy.
pub fn erlang_cdf(k: usize, mu: f64, t: f64) -> f64 {
    assert!(k >= 1, "Erlang shape must be at least 1");
    let m = mu * t;
    if m <= 0.0 {
        return 0.0;
    }
    if m < k as f64 {
        let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
        let mut term = (-m + k as f64 * m.ln() - ln_fact).exp();
        let mut sum = 0.0;
        let mut j = k;
        while term > 1e-17 * sum || sum == 0.0 {
            sum += term;
            j += 1;
            term *= m / j as f64;
            if term == 0.0 {
                break;
            }
        }
        sum.min(1.0)
    } else {
        let mut term = (-m).exp();
        let mut head = 0.0;
        for j in 0..k {
            if j > 0 {
                term *= m / j as f64;
            }
            head += term;
        }
        (1.0 - head).max(0.0)
    }
}

/// `E[min(T_k, t)] = (1/mu) Σ_{j=1..k} P(T_j ≤ t)`, equal to `t` when `mu = 0`.
pub fn expected_min_erlang(k: usize, mu: f64, t: f64) -> f64 {
    if mu <= 0.0 {
        return t;
    }
    let total: f64 = (1..=k).map(|j| erlang_cdf(j, mu, t)).sum();
    total / mu
}

fn canonical_costs(inst: &ProblemInstance) -> Result<(f64, f64)> {
    let (cp, cu) = inst.cost.as_canonical().ok_or_else(|| Error::InvalidParameter {
        name: "cost",
        reason: "closed forms need two-level costs (c_p below failure, c_u at failure)".into(),
    })?;
    if !(cp >= 0.0 && cu >= cp) {
        return Err(Error::InvalidCosts { cp, cu });
    }
    Ok((cp, cu))
}

/// Expected profit of producing at constant rate `s` over `[0, horizon]`.
///
/// The system earns `r(s)` until it fails and nothing afterwards.
pub fn fixed_rate_profit(inst: &ProblemInstance, s: f64, horizon: f64) -> Result<f64> {
    if !(0.0..=inst.s_max).contains(&s) {
        return Err(Error::RateOutOfRange {
            rate: s,
            s_max: inst.s_max,
        });
    }
    let (cp, cu) = canonical_costs(inst)?;
    let mu = inst.lambda * inst.f.value(s);
    if mu == 0.0 {
        return Ok(inst.r.value(s) * horizon - cp);
    }
    let running = expected_min_erlang(inst.xi, mu, horizon);
    let p_fail = erlang_cdf(inst.xi, mu, horizon);
    Ok(inst.r.value(s) * running - cp - (cu - cp) * p_fail)
}

/// Best constant rate and its performance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedRateResult {
    pub s_star: f64,
    pub expected_profit: f64,
    pub p_failure: f64,
    pub expected_runtime: f64,
}

/// Grid search over `n_actions` rates followed by a golden-section
/// refinement around the best grid point.
pub fn optimize_fixed_rate(
    inst: &ProblemInstance,
    horizon: f64,
    n_actions: usize,
) -> Result<FixedRateResult> {
    canonical_costs(inst)?;
    let rates = GridConfig::new(1.0, n_actions.max(2)).actions(inst.s_max);
    let mut best = (0, f64::NEG_INFINITY);
    for (j, &s) in rates.iter().enumerate() {
        let p = fixed_rate_profit(inst, s, horizon)?;
        if p > best.1 {
            best = (j, p);
        }
    }
    let lo = rates[best.0.saturating_sub(1)];
    let hi = rates[(best.0 + 1).min(rates.len() - 1)];
    let profit = |s: f64| fixed_rate_profit(inst, s.clamp(0.0, inst.s_max), horizon).unwrap_or(f64::NEG_INFINITY);
    let refined = golden_max(profit, lo, hi, 1e-10 * inst.s_max);
    let (s_star, expected_profit) = if refined.value > best.1 {
        (refined.arg, refined.value)
    } else {
        (rates[best.0], best.1)
    };
    let mu = inst.lambda * inst.f.value(s_star);
    Ok(FixedRateResult {
        s_star,
        expected_profit,
        p_failure: if mu == 0.0 { 0.0 } else { erlang_cdf(inst.xi, mu, horizon) },
        expected_runtime: expected_min_erlang(inst.xi, mu, horizon),
    })
}

/// Condition-based against static profit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeValue {
    /// `100 (P_CS − P_FS) / P_FS`.
    pub r_percent: f64,
    pub p_cs: f64,
    pub p_fs: f64,
    pub fixed: FixedRateResult,
}

/// Relative value of condition-based production over the best static rate
/// on `[0, inst.horizon]`.
pub fn relative_value(inst: &ProblemInstance, grid: GridConfig) -> Result<RelativeValue> {
    let fixed = optimize_fixed_rate(inst, inst.horizon, grid.n_actions)?;
    let p_fs = fixed.expected_profit;
    if p_fs.abs() < 1e-9 {
        return Err(Error::DegenerateBaseline(p_fs));
    }
    let p_cs = solve(&validate_instance(inst.clone(), grid)?).initial_value();
    Ok(RelativeValue {
        r_percent: 100.0 * (p_cs - p_fs) / p_fs,
        p_cs,
        p_fs,
        fixed,
    })
}
