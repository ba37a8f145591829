//! Structural analysis of optimal policies: sufficient conditions for
//! bang-bang optimality, switching curves, and a verifier for the
//! monotonicity, concavity and submodularity properties of solved grids.

use std::fmt;
use std::io::{self, Write};

use crate::csvfmt::num;
use crate::error::{Error, Result};
use crate::hjb::{marginals, SolutionGrid};
use crate::model::{ProblemInstance, RateFunction};

/// Points of the open interval `(0, s_max)` used by the ratio test.
pub const RATIO_GRID_POINTS: usize = 10_001;
/// Slack allowed on `r(s_max)/f(s_max) − r(s)/f(s)`.
pub const RATIO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BangBangReason {
    EqualFunctions,
    PowerExponentDominance,
    ConvexConcave,
    RatioTestGrid,
    NotDetected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BangBangVerdict {
    pub is_bang_bang: bool,
    pub reason: BangBangReason,
    /// Minimum over the ratio grid of the gap between the ratio at `s_max`
    /// and the ratio at `s`, with ratio `(r(s) − r(0))/f(s)`.
    pub worst_ratio_gap: f64,
}

fn worst_ratio_gap(r: &RateFunction, f: &RateFunction, s_max: f64) -> f64 {
    let base = r.value(0.0);
    let top = (r.value(s_max) - base) / f.value(s_max);
    let denom = (RATIO_GRID_POINTS + 1) as f64;
    (1..=RATIO_GRID_POINTS)
        .map(|i| {
            let s = s_max * i as f64 / denom;
            top - (r.value(s) - base) / f.value(s)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Sufficient-condition test for a bang-bang optimal policy.
///
/// The closed-form shortcuts (identical functions, power pairs with the
/// revenue exponent at least the deterioration exponent, convex revenue with
/// concave deterioration) are tried first; otherwise the ratio
/// `(r(s) − r(0))/f(s) ≤ (r(s_max) − r(0))/f(s_max)` is checked on a grid.
/// A negative verdict only means the condition was not detected. The base
/// rate is never read.
pub fn check_bang_bang(inst: &ProblemInstance) -> BangBangVerdict {
    let (r, f, s_max) = (&inst.r, &inst.f, inst.s_max);
    let gap = worst_ratio_gap(r, f, s_max);
    let reason = if r == f {
        BangBangReason::EqualFunctions
    } else if matches!(
        (r, f),
        (RateFunction::Power { exponent: nu, .. }, RateFunction::Power { exponent: gamma, .. })
            if nu >= gamma
    ) {
        BangBangReason::PowerExponentDominance
    } else if r.is_convex() && f.is_concave() {
        BangBangReason::ConvexConcave
    } else if gap >= -RATIO_TOLERANCE {
        BangBangReason::RatioTestGrid
    } else {
        BangBangReason::NotDetected
    };
    BangBangVerdict {
        is_bang_bang: reason != BangBangReason::NotDetected,
        reason,
        worst_ratio_gap: gap,
    }
}

/// Smallest deterioration level at which production is off, per time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchingCurve {
    /// `threshold[n]` with `n` steps of remaining time; `xi + 1` if
    /// production is never off at step `n`.
    pub threshold: Vec<usize>,
}

impl SwitchingCurve {
    /// The curve never rises as remaining time grows, i.e. it is
    /// nondecreasing along the horizon as maintenance approaches. This is
    /// the ordering forced by rates that decrease in remaining time.
    pub fn is_monotone(&self) -> bool {
        self.threshold.windows(2).all(|w| w[1] <= w[0])
    }
}

pub fn extract_switching_curve(sol: &SolutionGrid) -> Result<SwitchingCurve> {
    let s_max = sol.instance().s_max;
    let xi = sol.xi();
    let mut threshold = Vec::with_capacity(sol.steps() + 1);
    for n in 0..=sol.steps() {
        let mut first_off = xi + 1;
        for x in 0..=xi {
            let s = sol.rate(x, n);
            if s != 0.0 && s != s_max {
                return Err(Error::NotBangBangSolution);
            }
            if s == 0.0 && first_off > xi {
                first_off = x;
            }
            if first_off <= xi && s != 0.0 {
                return Err(Error::IncompatibleGrids(format!(
                    "production resumes above the switching level at step {n}, level {x}"
                )));
            }
        }
        threshold.push(first_off);
    }
    Ok(SwitchingCurve { threshold })
}

/// Properties checked by [`verify_structure`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    ValueDecreasingInX,
    ValueIncreasingInT,
    ValueDecreasingInLambda,
    MarginalNonnegative,
    ConcaveInX,
    MarginalIncreasingInT,
    ConcaveInT,
    SubmodularXLambda,
    PolicyDecreasingInX,
    PolicyDecreasingInT,
    PolicyDecreasingInLambda,
}

impl Property {
    pub const ALL: [Property; 11] = [
        Property::ValueDecreasingInX,
        Property::ValueIncreasingInT,
        Property::ValueDecreasingInLambda,
        Property::MarginalNonnegative,
        Property::ConcaveInX,
        Property::MarginalIncreasingInT,
        Property::ConcaveInT,
        Property::SubmodularXLambda,
        Property::PolicyDecreasingInX,
        Property::PolicyDecreasingInT,
        Property::PolicyDecreasingInLambda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::ValueDecreasingInX => "value_decreasing_in_x",
            Property::ValueIncreasingInT => "value_increasing_in_t",
            Property::ValueDecreasingInLambda => "value_decreasing_in_lambda",
            Property::MarginalNonnegative => "marginal_nonnegative",
            Property::ConcaveInX => "concave_in_x",
            Property::MarginalIncreasingInT => "marginal_increasing_in_t",
            Property::ConcaveInT => "concave_in_t",
            Property::SubmodularXLambda => "submodular_x_lambda",
            Property::PolicyDecreasingInX => "policy_decreasing_in_x",
            Property::PolicyDecreasingInT => "policy_decreasing_in_t",
            Property::PolicyDecreasingInLambda => "policy_decreasing_in_lambda",
        }
    }

    fn needs_lambda_pair(self) -> bool {
        matches!(
            self,
            Property::ValueDecreasingInLambda
                | Property::SubmodularXLambda
                | Property::PolicyDecreasingInLambda
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

impl Outcome {
    fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "true",
            Outcome::Fail => "false",
            Outcome::Skipped => "skipped",
        }
    }
}

/// Result for one property: the largest violation beyond tolerance and where.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub property: Property,
    pub outcome: Outcome,
    /// Largest amount by which the inequality was violated (0 if none).
    pub max_violation: f64,
    pub x: Option<usize>,
    pub n: Option<usize>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StructureReport {
    pub checks: Vec<PropertyCheck>,
    /// Slack on value inequalities.
    pub value_tolerance: f64,
    /// Slack on policy inequalities (one action cell).
    pub policy_slack: f64,
}

impl StructureReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != Outcome::Fail)
    }

    pub fn get(&self, property: Property) -> &PropertyCheck {
        self.checks
            .iter()
            .find(|c| c.property == property)
            .expect("every property is reported")
    }

    /// Writes `property,pass,max_violation,x,n,lambda`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "property,pass,max_violation,x,n,lambda")?;
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for c in &self.checks {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.property.name(),
                c.outcome.label(),
                num(c.max_violation),
                opt(c.x),
                opt(c.n),
                c.lambda.map(num).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<30} {:>8} {:>14} {:>5} {:>7} {:>8}",
            "property", "pass", "max_violation", "x", "n", "lambda"
        )?;
        for c in &self.checks {
            let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{:<30} {:>8} {:>14.3e} {:>5} {:>7} {:>8}",
                c.property.name(),
                c.outcome.label(),
                c.max_violation,
                opt(c.x),
                opt(c.n),
                c.lambda.map(num).unwrap_or_else(|| "-".into())
            )?;
        }
        Ok(())
    }
}

/// Tracks the worst violation of `lhs ≤ rhs + slack`.
struct Tracker {
    property: Property,
    slack: f64,
    worst: f64,
    at: Option<(usize, usize, f64)>,
}

impl Tracker {
    fn new(property: Property, slack: f64) -> Self {
        Self {
            property,
            slack,
            worst: 0.0,
            at: None,
        }
    }

    #[inline]
    fn le(&mut self, lhs: f64, rhs: f64, x: usize, n: usize, lambda: f64) {
        let excess = lhs - rhs;
        if excess > self.slack && excess > self.worst {
            self.worst = excess;
            self.at = Some((x, n, lambda));
        }
    }

    fn finish(self) -> PropertyCheck {
        PropertyCheck {
            property: self.property,
            outcome: if self.at.is_some() {
                Outcome::Fail
            } else {
                Outcome::Pass
            },
            max_violation: self.worst,
            x: self.at.map(|a| a.0),
            n: self.at.map(|a| a.1),
            lambda: self.at.map(|a| a.2),
        }
    }
}

fn compatible(a: &SolutionGrid, b: &SolutionGrid) -> Result<()> {
    let (p, q) = (a.instance(), b.instance());
    let same = p.xi == q.xi
        && p.s_max == q.s_max
        && p.f == q.f
        && p.r == q.r
        && p.cost == q.cost
        && a.steps() == b.steps()
        && a.dt() == b.dt()
        && a.actions() == b.actions();
    if same {
        Ok(())
    } else {
        Err(Error::IncompatibleGrids(
            "grids must share every instance parameter except lambda, plus dt and actions".into(),
        ))
    }
}

/// Checks every proved structural property on one or more grids that differ
/// only in the base rate. Properties comparing base rates are skipped for a
/// single grid.
pub fn verify_structure(sols: &[SolutionGrid]) -> Result<StructureReport> {
    let first = sols
        .first()
        .ok_or_else(|| Error::IncompatibleGrids("no grids supplied".into()))?;
    for other in &sols[1..] {
        compatible(first, other)?;
    }
    let mut ordered: Vec<&SolutionGrid> = sols.iter().collect();
    ordered.sort_by(|a, b| a.instance().lambda.total_cmp(&b.instance().lambda));

    let scale = sols
        .iter()
        .flat_map(|s| (0..=s.xi()).map(move |x| s.value(x, s.steps()).abs().max(s.value(x, 0).abs())))
        .fold(1.0_f64, f64::max);
    let tol = 1e-6 * scale;
    let slack = if first.is_two_action() {
        0.0
    } else {
        first.instance().s_max / (first.actions().len() - 1) as f64 + 1e-12
    };

    let mut t = Property::ALL.map(|p| {
        let s = if matches!(
            p,
            Property::PolicyDecreasingInX
                | Property::PolicyDecreasingInT
                | Property::PolicyDecreasingInLambda
        ) {
            slack
        } else {
            tol
        };
        Tracker::new(p, s)
    });
    let [vx, vt, vl, mnn, cx, mt, ct, sub, px, pt, pl] = &mut t;

    let xi = first.xi();
    let steps = first.steps();
    for sol in &ordered {
        let lam = sol.instance().lambda;
        let m = marginals(sol);
        for n in 0..=steps {
            for x in 0..xi {
                vx.le(sol.value(x + 1, n), sol.value(x, n), x, n, lam);
                mnn.le(0.0, m.delta(x, n), x, n, lam);
                px.le(sol.rate(x + 1, n), sol.rate(x, n), x, n, lam);
                if x + 1 < xi {
                    cx.le(m.delta2(x, n), 0.0, x, n, lam);
                }
                if n < steps {
                    mt.le(m.delta(x, n), m.delta(x, n + 1), x, n, lam);
                }
            }
            for x in 0..=xi {
                if n < steps {
                    vt.le(sol.value(x, n), sol.value(x, n + 1), x, n, lam);
                    pt.le(sol.rate(x, n + 1), sol.rate(x, n), x, n, lam);
                }
                if n + 1 < steps {
                    let d0 = sol.value(x, n + 1) - sol.value(x, n);
                    let d1 = sol.value(x, n + 2) - sol.value(x, n + 1);
                    ct.le(d1, d0, x, n, lam);
                }
            }
        }
    }
    for pair in ordered.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let lam = hi.instance().lambda;
        let (mlo, mhi) = (marginals(lo), marginals(hi));
        for n in 0..=steps {
            for x in 0..=xi {
                vl.le(hi.value(x, n), lo.value(x, n), x, n, lam);
                pl.le(hi.rate(x, n), lo.rate(x, n), x, n, lam);
                if x < xi {
                    sub.le(mlo.delta(x, n), mhi.delta(x, n), x, n, lam);
                }
            }
        }
    }

    let single = ordered.len() < 2;
    let checks = t
        .into_iter()
        .map(|tr| {
            let skip = single && tr.property.needs_lambda_pair();
            let mut c = tr.finish();
            if skip {
                c.outcome = Outcome::Skipped;
            }
            c
        })
        .collect();
    Ok(StructureReport {
        checks,
        value_tolerance: tol,
        policy_slack: slack,
    })
}
