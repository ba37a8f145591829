//! Monte Carlo evaluation of production policies.
//!
//! Shock times are generated by thinning a homogeneous Poisson stream of
//! rate `lambda · f(s_max)`. The production rate is constant on each cell
//! of the time grid, except that it drops to zero the moment the system
//! fails, and revenue and usage are integrated exactly per cell.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;

use crate::bayes::{ce_estimate, ce_schedule, CESchedule, GammaPrior, UsageIntegral};
use crate::csvfmt::num;
use crate::error::{Error, Result};
use crate::hjb::{solve, SolutionGrid};
use crate::model::{validate_instance, GridConfig, ProblemInstance};

/// Generator for replication `rep` of a run seeded with `seed`. Each
/// replication owns a separate ChaCha stream, so results do not depend on
/// how replications are scheduled across threads.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// One simulated maintenance interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(elapsed time, new level)` for every accepted shock.
    pub events: Vec<(f64, usize)>,
    /// Rate prescribed in each grid cell.
    pub applied_rates: Vec<f64>,
    pub revenue: f64,
    pub maintenance_cost: f64,
    pub profit: f64,
    pub usage: UsageIntegral,
    pub final_level: usize,
    pub failure_time: Option<f64>,
    /// Base-rate estimates in force during each phase (CE paths only).
    pub estimates: Vec<f64>,
}

struct Plant<'a> {
    inst: &'a ProblemInstance,
    lambda: f64,
    dt: f64,
    cells: usize,
}

fn run_path<R, P>(plant: &Plant<'_>, rng: &mut R, mut rate: P) -> Result<Trajectory>
where
    R: Rng + ?Sized,
    P: FnMut(usize, usize, UsageIntegral) -> Result<f64>,
{
    let inst = plant.inst;
    let envelope = plant.lambda * inst.f.value(inst.s_max);
    let gaps = Exp::new(envelope).map_err(|e| Error::InvalidParameter {
        name: "envelope rate",
        reason: e.to_string(),
    })?;
    let mut x = 0;
    let mut usage = UsageIntegral::default();
    let mut revenue = 0.0;
    let mut events = Vec::new();
    let mut applied_rates = Vec::with_capacity(plant.cells);
    let mut failure_time = None;
    let mut candidate = gaps.sample(rng);

    for k in 0..plant.cells {
        let start = k as f64 * plant.dt;
        let end = (k + 1) as f64 * plant.dt;
        let s = if x == inst.xi { 0.0 } else { rate(k, x, usage)? };
        applied_rates.push(s);
        let mut accept = plant.lambda * inst.f.value(s) / envelope;
        if accept > 1.0 + 1e-12 {
            return Err(Error::EnvelopeViolated(accept));
        }
        while candidate < end {
            // Always draw, so paths under different policies share candidates.
            let u: f64 = rng.random();
            if u < accept {
                x += 1;
                events.push((candidate, x));
                if x == inst.xi {
                    revenue += inst.r.value(s) * (candidate - start);
                    usage.add(inst.f.value(s), candidate - start);
                    accept = 0.0;
                    failure_time = Some(candidate);
                }
            }
            candidate += gaps.sample(rng);
        }
        // A failed system is down and earns nothing until maintenance.
        if x < inst.xi {
            revenue += inst.r.value(s) * (end - start);
            usage.add(inst.f.value(s), end - start);
        }
    }

    let maintenance_cost = inst.cost.at(x);
    Ok(Trajectory {
        events,
        applied_rates,
        revenue,
        maintenance_cost,
        profit: revenue - maintenance_cost,
        usage,
        final_level: x,
        failure_time,
        estimates: Vec::new(),
    })
}

/// Rate lookup of a solution whose step may be a fraction of the cell.
struct PolicyView<'a> {
    sol: &'a SolutionGrid,
    stride: usize,
    cells: usize,
}

impl PolicyView<'_> {
    fn rate(&self, cell: usize, x: usize) -> f64 {
        let n = ((self.cells - cell) * self.stride).min(self.sol.steps());
        self.sol.rate(x, n)
    }
}

/// Solves `template` at base rate `lambda`. When the cell `grid.dt` is
/// unstable at that rate the step is refined by an integer factor, which is
/// returned alongside the solution.
pub fn solve_at(template: &ProblemInstance, lambda: f64, grid: GridConfig) -> Result<(SolutionGrid, usize)> {
    let inst = template.with_lambda(lambda);
    let product = grid.dt * inst.max_intensity();
    let stride = if product < 1.0 {
        1
    } else {
        (2.0 * product).ceil() as usize
    };
    let fine = GridConfig::new(grid.dt / stride as f64, grid.n_actions);
    Ok((solve(&validate_instance(inst, fine)?), stride))
}

/// Simulates `policy` on the system it was solved for, with the true base
/// rate replaced by `true_lambda`.
pub fn simulate_path(policy: &SolutionGrid, true_lambda: f64, seed: u64) -> Result<Trajectory> {
    simulate_path_with(policy, true_lambda, &mut replication_rng(seed, 0))
}

pub fn simulate_path_with<R: Rng + ?Sized>(
    policy: &SolutionGrid,
    true_lambda: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let plant = Plant {
        inst: policy.instance(),
        lambda: true_lambda,
        dt: policy.dt(),
        cells: policy.steps(),
    };
    let view = PolicyView {
        sol: policy,
        stride: 1,
        cells: policy.steps(),
    };
    run_path(&plant, rng, |k, x, _| Ok(view.rate(k, x)))
}

/// Simulates the static policy that produces at `s` until failure.
pub fn simulate_constant<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    s: f64,
    dt: f64,
    true_lambda: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(0.0..=inst.s_max).contains(&s) {
        return Err(Error::RateOutOfRange {
            rate: s,
            s_max: inst.s_max,
        });
    }
    let plant = Plant {
        inst,
        lambda: true_lambda,
        dt,
        cells: GridConfig::new(dt, 2).steps(inst.horizon),
    };
    run_path(&plant, rng, |_, _, _| Ok(s))
}

/// Everything a certainty-equivalent path needs that does not depend on the
/// sampled system: the schedule and the phase-0 policy at the prior mean.
#[derive(Debug, Clone)]
pub struct CePlan {
    template: ProblemInstance,
    grid: GridConfig,
    prior: GammaPrior,
    schedule: CESchedule,
    epoch_cells: Vec<usize>,
    cells: usize,
    initial: SolutionGrid,
    initial_stride: usize,
}

impl CePlan {
    pub fn new(template: &ProblemInstance, grid: GridConfig, prior: GammaPrior, n_opt: usize) -> Result<Self> {
        let (initial, initial_stride) = solve_at(template, prior.mean(), grid)?;
        let schedule = ce_schedule(template.horizon, n_opt);
        Ok(Self {
            template: template.clone(),
            grid,
            prior,
            epoch_cells: schedule.epoch_cells(grid.dt),
            schedule,
            cells: grid.steps(template.horizon),
            initial,
            initial_stride,
        })
    }

    pub fn schedule(&self) -> &CESchedule {
        &self.schedule
    }

    pub fn prior(&self) -> GammaPrior {
        self.prior
    }

    pub fn template(&self) -> &ProblemInstance {
        &self.template
    }

    pub fn grid(&self) -> GridConfig {
        self.grid
    }
}

/// Certainty-equivalent path: start from the policy at the prior mean and
/// re-solve at each epoch with the posterior mean. Every re-solve covers the
/// full horizon and is read at the true remaining time.
pub fn simulate_ce(
    template: &ProblemInstance,
    grid: GridConfig,
    prior: GammaPrior,
    true_lambda: f64,
    n_opt: usize,
    seed: u64,
) -> Result<Trajectory> {
    let plan = CePlan::new(template, grid, prior, n_opt)?;
    simulate_ce_with(&plan, true_lambda, &mut replication_rng(seed, 0))
}

pub fn simulate_ce_with<R: Rng + ?Sized>(plan: &CePlan, true_lambda: f64, rng: &mut R) -> Result<Trajectory> {
    let plant = Plant {
        inst: &plan.template,
        lambda: true_lambda,
        dt: plan.grid.dt,
        cells: plan.cells,
    };
    let mut estimates = vec![plan.prior.mean()];
    let mut current: Option<(SolutionGrid, usize)> = None;
    let mut next_epoch = 0;
    let mut traj = run_path(&plant, rng, |k, x, usage| {
        while next_epoch < plan.epoch_cells.len() && plan.epoch_cells[next_epoch] <= k {
            next_epoch += 1;
            let lambda_hat = ce_estimate(plan.prior, x as u64, usage);
            estimates.push(lambda_hat);
            current = Some(solve_at(&plan.template, lambda_hat, plan.grid)?);
        }
        let (sol, stride) = match &current {
            Some((sol, stride)) => (sol, *stride),
            None => (&plan.initial, plan.initial_stride),
        };
        Ok(PolicyView {
            sol,
            stride,
            cells: plan.cells,
        }
        .rate(k, x))
    })?;
    traj.estimates = estimates;
    Ok(traj)
}

/// Sum by recursive halving; the split points depend only on the length,
/// so the result is reproducible and the rounding error grows like log n.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
}

impl SampleStats {
    pub fn from_sample(v: &[f64]) -> Self {
        let n = v.len();
        let mean = pairwise_sum(v) / n as f64;
        let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Self {
            n,
            mean,
            std_dev: var.sqrt(),
        }
    }

    pub fn std_err(&self) -> f64 {
        self.std_dev / (self.n as f64).sqrt()
    }

    /// Half-width of the normal 95% interval.
    pub fn ci95(&self) -> f64 {
        Z95 * self.std_err()
    }
}

const Z95: f64 = 1.959_963_984_540_054;

/// Where the Oracle profit of a replication comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMode {
    /// `J*(0, T)` solved at the sampled base rate.
    #[default]
    Analytic,
    /// One simulated path under the Oracle policy, sharing the CE path's
    /// candidate stream.
    Simulated,
}

#[derive(Debug, Clone)]
pub struct RegretConfig {
    pub template: ProblemInstance,
    pub grid: GridConfig,
    pub prior: GammaPrior,
    pub n_opt: usize,
    pub reps: usize,
    pub oracle: OracleMode,
    /// Double the replications until both means are known to 0.1% or
    /// [`MAX_REPS`] is reached.
    pub escalate: bool,
}

pub const MAX_REPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepRecord {
    pub rep: u64,
    pub lambda_star: f64,
    pub oracle_value: f64,
    pub ce_profit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretEstimate {
    /// `100 (oracle − CE) / oracle`, in percent.
    pub mean_regret: f64,
    pub ci_halfwidth: f64,
    pub reps: usize,
    pub oracle_mean: f64,
    pub ce_mean: f64,
    pub oracle_ci_halfwidth: f64,
    pub ce_ci_halfwidth: f64,
    /// Both 95% intervals are narrower than 0.1% of their means.
    pub ci_target_met: bool,
}

#[derive(Debug, Clone)]
pub struct RegretRun {
    pub estimate: RegretEstimate,
    pub records: Vec<RepRecord>,
}

fn replicate(cfg: &RegretConfig, plan: &CePlan, seed: u64, rep: u64) -> Result<RepRecord> {
    let mut rng = replication_rng(seed, rep);
    let draw = Gamma::new(cfg.prior.alpha, 1.0 / cfg.prior.beta).map_err(|e| Error::InvalidParameter {
        name: "prior",
        reason: e.to_string(),
    })?;
    let lambda_star: f64 = draw.sample(&mut rng);
    let oracle_value = match cfg.oracle {
        OracleMode::Analytic => solve_at(&cfg.template, lambda_star, cfg.grid)?.0.initial_value(),
        OracleMode::Simulated => {
            let (sol, stride) = solve_at(&cfg.template, lambda_star, cfg.grid)?;
            let plant = Plant {
                inst: &plan.template,
                lambda: lambda_star,
                dt: cfg.grid.dt,
                cells: plan.cells,
            };
            let view = PolicyView {
                sol: &sol,
                stride,
                cells: plan.cells,
            };
            let mut shared = rng.clone();
            run_path(&plant, &mut shared, |k, x, _| Ok(view.rate(k, x)))?.profit
        }
    };
    let ce_profit = simulate_ce_with(plan, lambda_star, &mut rng)?.profit;
    Ok(RepRecord {
        rep,
        lambda_star,
        oracle_value,
        ce_profit,
    })
}

/// Regret of the CE policy against the Oracle that knows the sampled base
/// rate, with a delta-method interval on the ratio of paired means.
pub fn estimate_regret(cfg: &RegretConfig, seed: u64) -> Result<RegretRun> {
    if cfg.reps < 2 {
        return Err(Error::InvalidParameter {
            name: "reps",
            reason: format!("need at least 2 replications, got {}", cfg.reps),
        });
    }
    let plan = CePlan::new(&cfg.template, cfg.grid, cfg.prior, cfg.n_opt)?;
    let mut records: Vec<RepRecord> = Vec::new();
    let mut target = cfg.reps;
    loop {
        let fresh: Vec<RepRecord> = (records.len() as u64..target as u64)
            .into_par_iter()
            .map(|rep| replicate(cfg, &plan, seed, rep))
            .collect::<Result<_>>()?;
        records.extend(fresh);
        let estimate = summarize(&records)?;
        if !cfg.escalate || estimate.ci_target_met || target >= MAX_REPS {
            return Ok(RegretRun { estimate, records });
        }
        target = (target * 2).min(MAX_REPS);
    }
}

/// Aggregates paired replications into a [`RegretEstimate`].
pub fn summarize(records: &[RepRecord]) -> Result<RegretEstimate> {
    let oracle: Vec<f64> = records.iter().map(|r| r.oracle_value).collect();
    let ce: Vec<f64> = records.iter().map(|r| r.ce_profit).collect();
    let so = SampleStats::from_sample(&oracle);
    let sc = SampleStats::from_sample(&ce);
    if so.mean <= 0.0 {
        return Err(Error::NonPositiveOracleMean(so.mean));
    }
    let n = records.len() as f64;
    let products: Vec<f64> = records
        .iter()
        .map(|r| (r.oracle_value - so.mean) * (r.ce_profit - sc.mean))
        .collect();
    let cov = pairwise_sum(&products) / (n - 1.0);
    let (o, c) = (so.mean, sc.mean);
    // Var(C/O) by the delta method.
    let var_ratio = (sc.std_dev.powi(2) / (o * o) + c * c * so.std_dev.powi(2) / o.powi(4)
        - 2.0 * c * cov / o.powi(3))
        / n;
    let target_met = 2.0 * so.ci95() < 1e-3 * o.abs() && 2.0 * sc.ci95() < 1e-3 * c.abs();
    Ok(RegretEstimate {
        mean_regret: 100.0 * (o - c) / o,
        ci_halfwidth: 100.0 * Z95 * var_ratio.max(0.0).sqrt(),
        reps: records.len(),
        oracle_mean: o,
        ce_mean: c,
        oracle_ci_halfwidth: so.ci95(),
        ce_ci_halfwidth: sc.ci95(),
        ci_target_met: target_met,
    })
}

/// Per-replication table with header `rep,lambda_star,oracle_value,ce_profit`
/// and a closing `mean` row.
pub fn write_replications_csv<W: Write>(run: &RegretRun, mut out: W) -> io::Result<()> {
    writeln!(out, "rep,lambda_star,oracle_value,ce_profit")?;
    for r in &run.records {
        writeln!(
            out,
            "{},{},{},{}",
            r.rep,
            num(r.lambda_star),
            num(r.oracle_value),
            num(r.ce_profit)
        )?;
    }
    let lambdas: Vec<f64> = run.records.iter().map(|r| r.lambda_star).collect();
    writeln!(
        out,
        "mean,{},{},{}",
        num(pairwise_sum(&lambdas) / lambdas.len() as f64),
        num(run.estimate.oracle_mean),
        num(run.estimate.ce_mean)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(horizon: f64) -> ProblemInstance {
        ProblemInstance::power_canonical(1.0, 10, 1.0, 2.0, 0.5, 1.0, 5.0, horizon)
    }

    fn solved(inst: &ProblemInstance, dt: f64) -> SolutionGrid {
        solve(&validate_instance(inst.clone(), GridConfig::new(dt, 101)).unwrap())
    }

    #[test]
    fn identical_seed_gives_identical_path() {
        let sol = solved(&reference(15.0), 0.01);
        let a = simulate_path(&sol, 1.3, 42).unwrap();
        let b = simulate_path(&sol, 1.3, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&sol, 1.3, 43).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn path_invariants() {
        let sol = solved(&reference(15.0), 0.01);
        for seed in 0..50 {
            let t = simulate_path(&sol, 3.0, seed).unwrap();
            assert!(t.events.windows(2).all(|w| w[0].0 <= w[1].0 && w[1].1 == w[0].1 + 1));
            assert!(t.final_level <= 10);
            assert!((t.profit - (t.revenue - t.maintenance_cost)).abs() < 1e-9);
            if let Some(ft) = t.failure_time {
                let cell = (ft / 0.01).floor() as usize;
                assert!(t.applied_rates[cell + 1..].iter().all(|&s| s == 0.0));
            }
        }
    }

    #[test]
    fn switched_off_system_never_deteriorates() {
        let inst = reference(5.0);
        let t = simulate_constant(&inst, 0.0, 0.01, 2.0, &mut replication_rng(1, 0)).unwrap();
        assert!(t.events.is_empty());
        assert_eq!(t.revenue, 0.0);
        assert_eq!(t.maintenance_cost, 1.0);
        assert_eq!(t.usage, UsageIntegral(0.0));
    }

    #[test]
    fn event_count_matches_poisson_mean() {
        // Large failure level so the count is never capped.
        let mut inst = ProblemInstance::power_canonical(1.5, 1000, 1.0, 2.0, 0.5, 1.0, 5.0, 4.0);
        inst.cost = crate::model::CostFunction::canonical(1000, 1.0, 5.0);
        let n = 10_000;
        let counts: Vec<f64> = (0..n)
            .map(|rep| {
                let t = simulate_constant(&inst, 1.0, 0.01, 1.5, &mut replication_rng(7, rep)).unwrap();
                t.events.len() as f64
            })
            .collect();
        let st = SampleStats::from_sample(&counts);
        assert!((st.mean - 6.0).abs() < 3.0 * st.std_err(), "{st:?}");
    }

    #[test]
    fn thinned_gaps_pass_ks_against_exponential() {
        let mut inst = ProblemInstance::power_canonical(2.0, 100_000, 1.0, 2.0, 0.5, 1.0, 5.0, 1.0);
        inst.cost = crate::model::CostFunction::canonical(100_000, 1.0, 5.0);
        inst.horizon = 20_000.0;
        // Rate 0.6 accepts 36% of candidates at envelope 2.
        let s = 0.6;
        let rate = 2.0 * s * s;
        let t = simulate_constant(&inst, s, 0.5, 2.0, &mut replication_rng(3, 0)).unwrap();
        let mut gaps: Vec<f64> = t.events.windows(2).map(|w| w[1].0 - w[0].0).take(10_000).collect();
        assert_eq!(gaps.len(), 10_000);
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len() as f64;
        let d = gaps
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let cdf = 1.0 - (-rate * g).exp();
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic.
        assert!(d < 1.628 / n.sqrt(), "D = {d}");
    }

    #[test]
    fn simulated_mean_matches_solver_value() {
        let inst = reference(6.0);
        let sol = solved(&inst, 0.01);
        let profits: Vec<f64> = (0..2000)
            .map(|rep| simulate_path_with(&sol, 1.0, &mut replication_rng(5, rep)).unwrap().profit)
            .collect();
        let st = SampleStats::from_sample(&profits);
        let exact = sol.initial_value();
        assert!((st.mean - exact).abs() < st.ci95(), "mc {} ± {} exact {exact}", st.mean, st.ci95());
    }

    #[test]
    fn usage_at_epoch_is_cell_sum() {
        let inst = reference(4.0);
        let grid = GridConfig::new(0.01, 101);
        let prior = GammaPrior::from_mean_cv(1.0, 0.5).unwrap();
        let plan = CePlan::new(&inst, grid, prior, 1).unwrap();
        let t = simulate_ce_with(&plan, 1.0, &mut replication_rng(9, 0)).unwrap();
        let epoch = plan.epoch_cells[0];
        let usage: f64 = t.applied_rates[..epoch].iter().map(|s| s * s * 0.01).sum();
        let shocks = t.events.iter().filter(|e| e.0 < epoch as f64 * 0.01).count();
        if t.failure_time.is_none_or(|ft| ft >= epoch as f64 * 0.01) {
            let expected = ce_estimate(prior, shocks as u64, UsageIntegral(usage));
            assert!((t.estimates[1] - expected).abs() < 1e-12);
        }
        assert_eq!(t.estimates.len(), 2);
        assert_eq!(t.estimates[0], 1.0);
    }

    #[test]
    fn faster_deterioration_slows_the_next_phase() {
        let inst = reference(15.0);
        let grid = GridConfig::new(0.01, 101);
        let (low, _) = solve_at(&inst, 1.0, grid).unwrap();
        let (high, _) = solve_at(&inst, 2.5, grid).unwrap();
        for x in 0..10 {
            for n in (1..=low.steps()).step_by(50) {
                assert!(high.rate(x, n) <= low.rate(x, n) + 0.01, "x={x} n={n}");
            }
        }
    }

    #[test]
    fn unstable_rates_refine_the_step() {
        let inst = reference(2.0);
        let (sol, stride) = solve_at(&inst, 150.0, GridConfig::new(0.01, 11)).unwrap();
        assert_eq!(stride, 3);
        assert_eq!(sol.steps(), 600);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let v = vec![0.1; 1_000_000];
        assert!((pairwise_sum(&v) - 100_000.0).abs() < 1e-8);
    }

    #[test]
    fn point_mass_prior_has_negligible_regret() {
        let inst = reference(5.0);
        let cfg = RegretConfig {
            template: inst,
            grid: GridConfig::new(0.01, 51),
            prior: GammaPrior::from_mean_cv(1.0, 1e-3).unwrap(),
            n_opt: 0,
            reps: 200,
            oracle: OracleMode::Analytic,
            escalate: false,
        };
        let run = estimate_regret(&cfg, 17).unwrap();
        assert_eq!(run.records.len(), 200);
        assert!(run.estimate.mean_regret.abs() < 2.0 * run.estimate.ci_halfwidth + 0.5, "{:?}", run.estimate);
        let again = estimate_regret(&cfg, 17).unwrap();
        assert_eq!(run.records, again.records);
    }

    #[test]
    fn replication_csv_has_summary_row() {
        let cfg = RegretConfig {
            template: reference(2.0),
            grid: GridConfig::new(0.02, 11),
            prior: GammaPrior::from_mean_cv(1.0, 0.5).unwrap(),
            n_opt: 1,
            reps: 5,
            oracle: OracleMode::Simulated,
            escalate: false,
        };
        let run = estimate_regret(&cfg, 1).unwrap();
        let mut buf = Vec::new();
        write_replications_csv(&run, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "rep,lambda_star,oracle_value,ce_profit");
        assert_eq!(lines.len(), 7);
        assert!(lines[6].starts_with("mean,"));
    }

    #[test]
    fn too_few_reps_rejected() {
        let cfg = RegretConfig {
            template: reference(2.0),
            grid: GridConfig::new(0.02, 11),
            prior: GammaPrior::from_mean_cv(1.0, 0.5).unwrap(),
            n_opt: 0,
            reps: 1,
            oracle: OracleMode::Analytic,
            escalate: false,
        };
        assert!(estimate_regret(&cfg, 0).is_err());
    }
}
