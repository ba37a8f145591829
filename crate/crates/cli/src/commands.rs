use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use cbp_core::baseline::{relative_value, RelativeValue};
use cbp_core::config::ExperimentConfig;
use cbp_core::csvfmt::num;
use cbp_core::multi::solve_multi;
use cbp_core::sim::{estimate_regret, write_replications_csv, RegretConfig};
use cbp_core::structure::{check_bang_bang, extract_switching_curve, verify_structure};
use cbp_core::tactical::{compare_integrated_sequential, optimize_interval, IntervalBounds};
use cbp_core::{solve, validate_instance, GridConfig, ProblemInstance, RateFunction};

use crate::manifest::{GridRecord, Manifest};
use crate::sweep;
use crate::CommonArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: cbp_core::Error },
    #[error(transparent)]
    Core(#[from] cbp_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loaded configuration with command-line overrides applied.
pub struct Context {
    pub command: String,
    pub args: CommonArgs,
    pub text: String,
    pub cfg: ExperimentConfig,
    pub outputs: Vec<String>,
}

impl Context {
    fn load(command: &str, args: &CommonArgs) -> CliResult<Self> {
        let text = fs::read_to_string(&args.config).map_err(io_err(&args.config))?;
        let mut cfg = ExperimentConfig::from_toml(&text).map_err(|source| CliError::Config {
            path: args.config.clone(),
            source,
        })?;
        if let Some(dt) = args.dt {
            cfg.grid.dt = dt;
        }
        if let Some(m) = args.actions {
            cfg.grid.n_actions = m;
        }
        if let Some(seed) = args.seed {
            cfg.simulation.seed = seed;
        }
        if let Some(reps) = args.reps {
            cfg.simulation.reps = reps;
        }
        if let Some(n_opt) = args.n_opt {
            cfg.simulation.n_opt = n_opt;
        }
        fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
        Ok(Self {
            command: command.to_string(),
            args: args.clone(),
            text,
            cfg,
            outputs: Vec::new(),
        })
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.args.out.join(name)
    }

    /// Creates `name` in the output directory and records it in the manifest.
    pub fn write<F>(&mut self, name: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = self.out_path(name);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
        self.record(name);
        Ok(())
    }

    pub fn record(&mut self, name: &str) {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
    }

    fn finish(mut self, steps: usize) -> CliResult<()> {
        let mut manifest = Manifest::new(
            &self.command,
            &self.args.config,
            &self.text,
            self.cfg.simulation.seed,
            GridRecord {
                dt: self.cfg.grid.dt,
                n_actions: self.cfg.grid.n_actions,
                steps,
            },
        );
        manifest.outputs = std::mem::take(&mut self.outputs);
        let path = self.out_path("manifest.toml");
        fs::write(&path, manifest.to_toml()).map_err(io_err(&path))
    }
}

pub fn run(command: &str, args: &CommonArgs) -> CliResult<()> {
    let mut ctx = Context::load(command, args)?;
    let steps = ctx.cfg.grid.steps(ctx.cfg.instance.horizon);
    match command {
        "solve" => run_solve(&mut ctx)?,
        "structure" => run_structure(&mut ctx)?,
        "tactical" => run_tactical(&mut ctx)?,
        "baseline" => run_baseline(&mut ctx)?,
        "simulate" => run_simulate(&mut ctx)?,
        "multi" => run_multi(&mut ctx)?,
        "sweep" => sweep::run_sweep(&mut ctx)?,
        other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
    ctx.finish(steps)
}

fn run_solve(ctx: &mut Context) -> CliResult<()> {
    let sol = solve(&validate_instance(ctx.cfg.instance.clone(), ctx.cfg.grid)?);
    ctx.write("solution.csv", |w| sol.write_csv(w))?;
    println!("J*(0, T) = {}", num(sol.initial_value()));
    println!("actions: {}", if sol.is_two_action() { "{0, s_max}" } else { "full grid" });
    Ok(())
}

fn run_structure(ctx: &mut Context) -> CliResult<()> {
    let inst = ctx.cfg.instance.clone();
    let lambdas = if ctx.cfg.structure_lambdas.is_empty() {
        vec![inst.lambda]
    } else {
        ctx.cfg.structure_lambdas.clone()
    };
    let sols = lambdas
        .iter()
        .map(|&l| Ok(solve(&validate_instance(inst.with_lambda(l), ctx.cfg.grid)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let report = verify_structure(&sols)?;
    ctx.write("structure.csv", |w| report.write_csv(w))?;
    print!("{report}");

    let verdict = check_bang_bang(&inst);
    println!("bang-bang: {} ({:?})", verdict.is_bang_bang, verdict.reason);
    if verdict.is_bang_bang {
        let curves = sols
            .iter()
            .map(extract_switching_curve)
            .collect::<Result<Vec<_>, _>>()?;
        ctx.write("switching.csv", |w| {
            writeln!(w, "lambda,n,t_remaining,threshold")?;
            for (sol, curve) in sols.iter().zip(&curves) {
                for (n, th) in curve.threshold.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        num(sol.instance().lambda),
                        n,
                        num(n as f64 * sol.dt()),
                        th
                    )?;
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn run_tactical(ctx: &mut Context) -> CliResult<()> {
    let inst = ctx.cfg.instance.clone();
    let grid = ctx.cfg.grid;
    let bounds = ctx.cfg.bounds.unwrap_or_else(|| IntervalBounds::default_for(&inst, grid));
    let res = optimize_interval(&inst, bounds, grid)?;
    ctx.write("tactical_curve.csv", |w| res.write_curve_csv(w))?;
    let cmp = match inst.cost.as_canonical() {
        Some((cp, cu)) if cp > 0.0 && cu > cp => Some(compare_integrated_sequential(&inst, bounds, grid)?),
        _ => None,
    };
    ctx.write("tactical.csv", |w| {
        writeln!(w, "t_star,g_star,boundary_hit,t_sequential,g_sequential,r_hat")?;
        let (ts, gs, rh) = match cmp {
            Some(c) => (num(c.t_sequential), num(c.g_sequential), num(c.r_hat_percent)),
            None => Default::default(),
        };
        writeln!(
            w,
            "{},{},{},{ts},{gs},{rh}",
            num(res.t_star),
            num(res.g_star),
            res.boundary_hit
        )
    })?;
    println!("T* = {}  g(T*) = {}", num(res.t_star), num(res.g_star));
    if let Some(warning) = &res.warning {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn power_exponent(f: &RateFunction) -> Option<f64> {
    match *f {
        RateFunction::Power { coeff, exponent } if coeff == 1.0 => Some(exponent),
        _ => None,
    }
}

pub const BASELINE_HEADER: &str = "lambda,xi,cp,cu,T,gamma,nu,s_star,p_fs,p_cs,R";

/// One row of the baseline table; `rv` is `None` when the static profit
/// is zero and the relative value is undefined.
pub fn baseline_row(inst: &ProblemInstance, rv: Option<&RelativeValue>) -> String {
    let (cp, cu) = inst.cost.as_canonical().unwrap_or((f64::NAN, f64::NAN));
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let tail = match rv {
        Some(rv) => format!(
            "{},{},{},{}",
            num(rv.fixed.s_star),
            num(rv.p_fs),
            num(rv.p_cs),
            num(rv.r_percent)
        ),
        None => ",,,".to_string(),
    };
    format!(
        "{},{},{},{},{},{},{},{tail}",
        num(inst.lambda),
        inst.xi,
        num(cp),
        num(cu),
        num(inst.horizon),
        opt(power_exponent(&inst.f)),
        opt(power_exponent(&inst.r)),
    )
}

fn run_baseline(ctx: &mut Context) -> CliResult<()> {
    let inst = ctx.cfg.instance.clone();
    let rv = relative_value(&inst, ctx.cfg.grid)?;
    ctx.write("baseline.csv", |w| {
        writeln!(w, "{BASELINE_HEADER}")?;
        writeln!(w, "{}", baseline_row(&inst, Some(&rv)))
    })?;
    println!(
        "static s* = {}  P_FS = {}  P_CS = {}  R = {}%",
        num(rv.fixed.s_star),
        num(rv.p_fs),
        num(rv.p_cs),
        num(rv.r_percent)
    );
    Ok(())
}

fn run_simulate(ctx: &mut Context) -> CliResult<()> {
    let prior = ctx
        .cfg
        .prior
        .ok_or_else(|| CliError::Usage("simulate needs a [prior] table".into()))?;
    let s = ctx.cfg.simulation;
    let cfg = RegretConfig {
        template: ctx.cfg.instance.clone(),
        grid: ctx.cfg.grid,
        prior,
        n_opt: s.n_opt,
        reps: s.reps,
        oracle: s.oracle,
        escalate: s.escalate,
    };
    let run = estimate_regret(&cfg, s.seed)?;
    ctx.write("replications.csv", |w| write_replications_csv(&run, w))?;
    let e = run.estimate;
    ctx.write("regret.csv", |w| {
        writeln!(w, "mean_regret,ci_halfwidth,reps,oracle_mean,ce_mean,ci_target_met")?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            num(e.mean_regret),
            num(e.ci_halfwidth),
            e.reps,
            num(e.oracle_mean),
            num(e.ce_mean),
            e.ci_target_met
        )
    })?;
    println!(
        "regret = {}% ± {} over {} replications",
        num(e.mean_regret),
        num(e.ci_halfwidth),
        e.reps
    );
    Ok(())
}

fn run_multi(ctx: &mut Context) -> CliResult<()> {
    let (inst, default_actions) = ctx
        .cfg
        .multi
        .clone()
        .ok_or_else(|| CliError::Usage("multi needs a [multi] table".into()))?;
    let grid = GridConfig::new(ctx.cfg.grid.dt, ctx.args.actions.unwrap_or(default_actions));
    ctx.cfg.grid = grid;
    let sol = solve_multi(&inst, grid)?;
    ctx.write("multi.csv", |w| sol.write_csv(w))?;
    let origin = vec![0; sol.n_systems()];
    println!("J*(0, T) = {}", num(sol.value(&origin, sol.steps())));
    Ok(())
}
