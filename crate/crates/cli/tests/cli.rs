use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BASE: &str = r#"
lambda = 1.0
xi = 8
s_max = 1.0
T = 5.0
gamma = 2.0
nu = 1.0
cost = { cp = 1.0, cu = 5.0 }

[grid]
dt = 0.01
n_actions = 21
"#;

fn cbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = cbp(&args);
    assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn solve_outputs_are_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", BASE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("solve", &cfg, &a, &[]);
    run_ok("solve", &cfg, &b, &[]);
    let first = fs::read(a.join("solution.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("solution.csv")).unwrap());
    let header = String::from_utf8(first).unwrap();
    assert!(header.starts_with("x,"), "{}", &header[..40]);

    let manifest = fs::read_to_string(a.join("manifest.toml")).unwrap();
    for key in ["config_sha256", "seed", "version", "timestamp", "steps = 500", "solution.csv"] {
        assert!(manifest.contains(key), "{manifest}");
    }
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", BASE);
    let out = dir.path().join("o");
    run_ok("solve", &cfg, &out, &["--dt", "0.02", "--actions", "11", "--seed", "42"]);
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("dt = 0.02"), "{manifest}");
    assert!(manifest.contains("n_actions = 11"), "{manifest}");
    assert!(manifest.contains("seed = 42"), "{manifest}");
}

#[test]
fn config_errors_name_file_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &format!("{BASE}\n[prior]\nmaen = 1.0\n"));
    let o = cbp(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml") && err.contains("maen") && err.contains("line"), "{err}");
}

#[test]
fn invalid_instance_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.toml", &BASE.replace("cu = 5.0", "cu = 0.5"));
    let o = cbp(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn every_command_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BASE}
[tactical]
t_min = 0.5
t_max = 15.0
[prior]
mean = 1.0
cv = 0.5
[simulation]
reps = 20
n_opt = 1
[multi]
revenue = {{ family = \"demand_penalty\", b = 0.0, p = 1.0, D = 1.0 }}
systems = [{{ lambda = 1.0, f = {{ family = \"power\", coeff = 1.0, exponent = 2.0 }} }}]
n_actions = 11
"
    );
    let cfg = write_config(dir.path(), "all.toml", &text);
    let cases: [(&str, &[&str]); 6] = [
        ("structure", &["structure.csv"]),
        ("tactical", &["tactical.csv", "tactical_curve.csv"]),
        ("baseline", &["baseline.csv"]),
        ("simulate", &["replications.csv", "regret.csv"]),
        ("multi", &["multi.csv"]),
        ("solve", &["solution.csv"]),
    ];
    for (cmd, files) in cases {
        let out = dir.path().join(cmd);
        run_ok(cmd, &cfg, &out, &[]);
        for f in files {
            let body = fs::read_to_string(out.join(f)).unwrap();
            assert!(body.lines().count() >= 2, "{cmd}/{f} is empty");
        }
    }
    let baseline = fs::read_to_string(dir.path().join("baseline/baseline.csv")).unwrap();
    assert!(baseline.starts_with("lambda,xi,cp,cu,T,gamma,nu,s_star,p_fs,p_cs,R\n"));
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", &format!("{BASE}\n[prior]\nmean = 1.0\ncv = 0.5\n"));
    let runs: Vec<Vec<u8>> = ["x", "y"]
        .iter()
        .map(|d| {
            let out = dir.path().join(d);
            run_ok("simulate", &cfg, &out, &["--reps", "16", "--seed", "5", "--n-opt", "2"]);
            fs::read(out.join("replications.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

const SWEEP: &str = "
[sweep]
lambda = [0.5, 1.0, 2.0]
xi = [6, 8]
cu = [3.0, 5.0]
nu = [1.0, 2.0]
";

#[test]
fn sweep_resumes_after_interruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sw.toml", &format!("{BASE}{SWEEP}"));
    let full = dir.path().join("full");
    run_ok("sweep", &cfg, &full, &[]);
    let reference = fs::read_to_string(full.join("sweep.csv")).unwrap();
    assert_eq!(reference.lines().count(), 1 + 24);

    // Simulate a crash after 5 rows with a torn sixth row.
    let part = dir.path().join("part");
    fs::create_dir_all(&part).unwrap();
    let lines: Vec<&str> = reference.lines().collect();
    let torn = format!("{}\n{}", lines[..6].join("\n"), &lines[6][..8]);
    fs::write(part.join("sweep.csv"), torn).unwrap();
    let ckpt = fs::read_to_string(full.join("sweep.checkpoint"))
        .unwrap()
        .replace("completed = 24", "completed = 5");
    fs::write(part.join("sweep.checkpoint"), ckpt).unwrap();

    let o = run_ok("sweep", &cfg, &part, &[]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("resuming sweep at point 5"));
    assert_eq!(fs::read_to_string(part.join("sweep.csv")).unwrap(), reference);
}

#[test]
fn sweep_refuses_a_foreign_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sw.toml", &format!("{BASE}{SWEEP}"));
    let out = dir.path().join("o");
    run_ok("sweep", &cfg, &out, &[]);
    let o = cbp(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--dt",
        "0.005",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different configuration"));
}

#[test]
fn sweep_detects_mismatched_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sw.toml", &format!("{BASE}{SWEEP}"));
    let out = dir.path().join("o");
    run_ok("sweep", &cfg, &out, &[]);
    let csv = out.join("sweep.csv");
    let edited = fs::read_to_string(&csv).unwrap().replacen("\n0.5,6,", "\n0.7,6,", 1);
    fs::write(&csv, edited).unwrap();
    let o = cbp(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not match sweep point 0"));
}
