//! Checkpointed parameter sweep of the static-rate comparison.
//!
//! Rows are computed in parallel chunks and appended in point order. After
//! each chunk the CSV is flushed and `sweep.checkpoint` records how many
//! rows are final, so an interrupted sweep resumes where it stopped.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use cbp_core::baseline::relative_value;
use cbp_core::config::SweepPoint;
use cbp_core::{Error, GridConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{baseline_row, io_err, CliError, CliResult, Context, BASELINE_HEADER};
use crate::manifest::sha256_hex;

pub const SWEEP_CSV: &str = "sweep.csv";
pub const CHECKPOINT: &str = "sweep.checkpoint";

/// Number of key columns identifying a sweep point in each row.
const KEY_COLUMNS: usize = 7;

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    fingerprint: String,
    completed: usize,
    total: usize,
}

impl Checkpoint {
    fn load(path: &Path) -> CliResult<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Usage(format!("{}: unreadable checkpoint: {e}", path.display())))
    }

    /// Written to a temporary file and renamed, so a crash never leaves a
    /// half-written checkpoint.
    fn store(&self, path: &Path) -> CliResult<()> {
        let tmp = path.with_extension("checkpoint.tmp");
        let text = toml::to_string(self).expect("checkpoint fields are plain values");
        fs::write(&tmp, text).map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }
}

fn key_of(row: &str) -> Vec<&str> {
    row.split(',').take(KEY_COLUMNS).collect()
}

fn point_row(point: &SweepPoint, s_max: f64, base: GridConfig) -> CliResult<String> {
    let inst = point.instance(s_max);
    let grid = GridConfig::new(base.dt.min(GridConfig::default_for(&inst).dt), base.n_actions);
    match relative_value(&inst, grid) {
        Ok(rv) => Ok(baseline_row(&inst, Some(&rv))),
        Err(Error::DegenerateBaseline(_)) => Ok(baseline_row(&inst, None)),
        Err(e) => Err(CliError::Core(e)),
    }
}

/// Reads the rows already written and checks they belong to `points`.
fn resume_rows(csv: &Path, completed: usize, points: &[SweepPoint], s_max: f64) -> CliResult<Vec<String>> {
    let file = File::open(csv).map_err(io_err(csv))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == BASELINE_HEADER => {}
        _ => {
            return Err(CliError::Usage(format!(
                "{}: header does not match the sweep layout",
                csv.display()
            )))
        }
    }
    let mut rows = Vec::with_capacity(completed);
    for (i, line) in lines.take(completed).enumerate() {
        let line = line.map_err(io_err(csv))?;
        let expected = baseline_row(&points[i].instance(s_max), None);
        if key_of(&line) != key_of(&expected) {
            return Err(CliError::Usage(format!(
                "{}: row {} does not match sweep point {i}; remove the checkpoint to start over",
                csv.display(),
                i + 1
            )));
        }
        rows.push(line);
    }
    if rows.len() < completed {
        return Err(CliError::Usage(format!(
            "{}: checkpoint claims {completed} rows but only {} are present",
            csv.display(),
            rows.len()
        )));
    }
    Ok(rows)
}

pub fn run_sweep(ctx: &mut Context) -> CliResult<()> {
    let points = ctx.cfg.sweep_points().map_err(|source| CliError::Config {
        path: ctx.args.config.clone(),
        source,
    })?;
    let s_max = ctx.cfg.instance.s_max;
    let grid = ctx.cfg.grid;
    let fingerprint = sha256_hex(format!("{}\ndt={}\nactions={}", ctx.text, grid.dt, grid.n_actions).as_bytes());

    let csv = ctx.out_path(SWEEP_CSV);
    let ckpt_path = ctx.out_path(CHECKPOINT);
    let mut done = match Checkpoint::load(&ckpt_path)? {
        Some(c) if c.fingerprint != fingerprint => {
            return Err(CliError::Usage(format!(
                "{}: checkpoint was written for a different configuration; remove it or use another --out",
                ckpt_path.display()
            )))
        }
        Some(c) if csv.exists() => c.completed.min(points.len()),
        _ => 0,
    };

    // Rewrite the verified prefix so any partially written tail is dropped.
    let kept = if done > 0 {
        resume_rows(&csv, done, &points, s_max)?
    } else {
        Vec::new()
    };
    {
        let mut out = File::create(&csv).map_err(io_err(&csv))?;
        let mut text = format!("{BASELINE_HEADER}\n");
        for row in &kept {
            text.push_str(row);
            text.push('\n');
        }
        out.write_all(text.as_bytes()).map_err(io_err(&csv))?;
    }
    if done > 0 {
        eprintln!("resuming sweep at point {done} of {}", points.len());
    }

    let chunk = 4 * rayon::current_num_threads().max(1);
    let mut out = OpenOptions::new().append(true).open(&csv).map_err(io_err(&csv))?;
    while done < points.len() {
        let end = (done + chunk).min(points.len());
        let rows = points[done..end]
            .par_iter()
            .map(|p| point_row(p, s_max, grid))
            .collect::<CliResult<Vec<_>>>()?;
        let mut text = String::new();
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        out.write_all(text.as_bytes()).map_err(io_err(&csv))?;
        out.sync_data().map_err(io_err(&csv))?;
        done = end;
        Checkpoint {
            fingerprint: fingerprint.clone(),
            completed: done,
            total: points.len(),
        }
        .store(&ckpt_path)?;
    }
    if points.is_empty() {
        Checkpoint {
            fingerprint,
            completed: 0,
            total: 0,
        }
        .store(&ckpt_path)?;
    }
    ctx.record(SWEEP_CSV);
    ctx.record(CHECKPOINT);
    println!("{} sweep points written to {}", points.len(), csv.display());
    Ok(())
}
