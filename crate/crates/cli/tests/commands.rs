use std::path::Path;
use std::process::Command;

use tnqc_cli::artifacts::{schedule_hash, ScheduleFile};
use tnqc_cli::commands::{evaluate, gradcheck, heatmap, optimize};
use tnqc_cli::config::problem_fingerprint;
use tnqc_cli::{CliError, Context, RunConfig, RunOptions, TimeUnit};
use tnqc_core::model::{PulseSchedule, Task};
use tnqc_core::optimizer::OptimizerConfig;

fn ctx(cfg: &RunConfig, out: &Path) -> Context {
    Context::new(cfg, &RunOptions { out: Some(out.into()), ..RunOptions::default() }).unwrap()
}

fn single(task: Task, n: usize) -> RunConfig {
    let mut c = RunConfig::new(task);
    c.n = Some(n);
    c
}

#[test]
fn config_round_trips_through_toml() {
    let mut c = RunConfig::new(Task::GhzPrep);
    c.sizes = Some(vec![4, 6, 8]);
    c.delta_j = 0.05;
    c.error_step = Some(0.01);
    c.duration = Some(0.125);
    c.time_unit = Some(TimeUnit::TauG);
    c.bins = Some(40);
    c.amp_cap = Some(8.0);
    c.m = Some(12);
    c.verification_factor = Some(5);
    c.seed = 42;
    c.d_max = Some(10);
    c.substeps = Some(2);
    c.output_dir = Some("runs/ghz".into());
    c.checkpoint = Some("runs/ghz/cp.json".into());
    c.optimizer.max_iters = 250;
    c.optimizer.target_value = Some(1e-6);
    let text = c.to_toml().unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), c);

    let minimal = RunConfig::from_toml("task = \"parallel-x\"\nn = 3\n").unwrap();
    assert_eq!(RunConfig::from_toml(&minimal.to_toml().unwrap()).unwrap(), minimal);
}

#[test]
fn bad_configs_are_config_errors() {
    let bad = [
        "task = \"parallel-cnot\"\nn = 5\n",
        "task = \"parallel-x\"\nsizes = []\n",
        "task = \"parallel-x\"\nsizes = [4, 2]\n",
        "task = \"parallel-x\"\nn = 2\nsizes = [2]\n",
        "task = \"parallel-x\"\n",
        "task = \"teleport\"\nn = 2\n",
        "task = \"parallel-x\"\nn = 2\ncolour = 1\n",
        "task = \"parallel-x\"\nn = 2\ndelta_j = -0.1\n",
        "task = \"parallel-x\"\nn = 2\n[optimizer]\nline_search = { c1 = 0.9, c2 = 0.1 }\n",
    ];
    for text in bad {
        match RunConfig::from_toml(text) {
            Err(e @ CliError::Config(_)) => assert_eq!(e.exit_code(), 1),
            other => panic!("{text:?} gave {other:?}"),
        }
    }
}

#[test]
fn fingerprint_ignores_output_location() {
    let mut a = single(Task::ParallelX, 2);
    let mut b = a.clone();
    b.output_dir = Some("elsewhere".into());
    assert_eq!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
    a.seed = 1;
    assert_ne!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
}

#[test]
fn optimize_x_gate_then_evaluate_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = single(Task::ParallelX, 2);
    let summary = optimize(&cfg, &ctx(&cfg, dir.path())).unwrap();
    let cell = &summary.cells[0];
    assert!(cell.verification.mean_infidelity < 1e-8);
    assert_eq!(cell.verification.m, 30);
    assert_eq!(cell.verification.std_error, 0.0);
    assert!(dir.path().join("summary.toml").exists());
    assert!(dir.path().join("checkpoint.json").exists());
    let sched = dir.path().join(&cell.schedule_file);

    let mut at_error = cfg.clone();
    at_error.delta_j = 0.05;
    let rec = evaluate(&at_error, &ctx(&at_error, dir.path()), &sched).unwrap();
    assert!(rec.mean_infidelity > 1e-6);
    assert!(rec.per_gate_infidelity.unwrap() < rec.mean_infidelity);

    let mut other_bins = cfg.clone();
    other_bins.bins = Some(7);
    assert!(matches!(evaluate(&other_bins, &ctx(&other_bins, dir.path()), &sched), Err(CliError::Config(_))));

    let [hx, hy] = heatmap(&sched, dir.path()).unwrap();
    let x = std::fs::read_to_string(hx).unwrap();
    assert!(x.lines().any(|l| l.contains("tau-pi")));
    assert_eq!(x.lines().filter(|l| !l.starts_with('#')).count(), 2);
    assert!(std::fs::read_to_string(hy).unwrap().lines().filter(|l| !l.starts_with('#')).all(|l| l.split(',').count() == 10));
}

#[test]
fn heatmap_of_a_constant_pulse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = single(Task::ParallelX, 3);
    let p = cfg.problem(3, 0.0).unwrap();
    let s = PulseSchedule::constant(3, p.bins(), p.schedule.dt(), 1.0, 0.0).unwrap();
    let file = ScheduleFile {
        task: Task::ParallelX,
        n: 3,
        delta_j: 0.0,
        time_unit: TimeUnit::TauPi,
        problem_fingerprint: problem_fingerprint(&p),
        config_fingerprint: cfg.fingerprint().unwrap(),
        schedule_hash: schedule_hash(&s),
        schedule: s,
    };
    let path = dir.path().join("s.json");
    std::fs::write(&path, serde_json::to_vec(&file).unwrap()).unwrap();
    let [hx, hy] = heatmap(&path, dir.path()).unwrap();
    let rows = |p: &Path| -> Vec<String> { std::fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect() };
    assert_eq!(rows(&hx), vec!["1,1,1,1,1,1,1,1,1,1"; 3]);
    assert_eq!(rows(&hy), vec!["0,0,0,0,0,0,0,0,0,0"; 3]);

    let mut tampered = file.clone();
    tampered.schedule_hash = "0".repeat(64);
    std::fs::write(&path, serde_json::to_vec(&tampered).unwrap()).unwrap();
    assert!(heatmap(&path, dir.path()).is_err());
    std::fs::write(&path, b"{ not json").unwrap();
    assert!(matches!(heatmap(&path, dir.path()), Err(CliError::Config(_))));
}

#[test]
fn gradcheck_small_systems() {
    let dir = tempfile::tempdir().unwrap();
    for task in Task::ALL {
        let n = if task.needs_even_n() { 4 } else { 3 };
        let mut cfg = single(task, n);
        cfg.delta_j = 0.05;
        cfg.bins = Some(3);
        cfg.m = Some(2);
        let r = gradcheck(&cfg, &ctx(&cfg, dir.path())).unwrap();
        assert!(r.max_rel_error < 1e-6, "{task}: {}", r.max_rel_error);
    }
    let mut zero = single(Task::ParallelX, 3);
    zero.bins = Some(0);
    assert_eq!(gradcheck(&zero, &ctx(&zero, dir.path())).unwrap().components, 0);
    let big = single(Task::ParallelX, 8);
    let err = gradcheck(&big, &ctx(&big, dir.path())).unwrap_err();
    assert!(err.to_string().contains("n <= 5"));
}

#[test]
fn resume_reuses_checkpointed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(Task::ParallelX);
    cfg.sizes = Some(vec![2, 3]);
    cfg.optimizer = OptimizerConfig { max_iters: 10, ..OptimizerConfig::default() };
    let first = optimize(&cfg, &ctx(&cfg, dir.path())).unwrap();
    let resumed_ctx = Context::new(&cfg, &RunOptions { out: Some(dir.path().into()), resume: true, ..RunOptions::default() }).unwrap();
    let second = optimize(&cfg, &resumed_ctx).unwrap();
    assert!(second.cells.iter().all(|c| c.seed_source == "checkpoint"));
    for (a, b) in first.cells.iter().zip(&second.cells) {
        assert_eq!(a.schedule_hash, b.schedule_hash);
    }
    let mut changed = cfg.clone();
    changed.seed = 5;
    let changed_ctx = Context::new(&changed, &RunOptions { out: Some(dir.path().into()), resume: true, ..RunOptions::default() }).unwrap();
    assert!(matches!(optimize(&changed, &changed_ctx), Err(CliError::Config(_))));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_tnqc");
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "task = \"parallel-cnot\"\nn = 5\n").unwrap();
    let out = Command::new(bin).args(["optimize", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even"));

    let missing = Command::new(bin).args(["gradcheck", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let good = dir.path().join("good.toml");
    std::fs::write(&good, "task = \"ghz-prep\"\nn = 3\nbins = 2\nm = 1\n").unwrap();
    let out = Command::new(bin).args(["gradcheck", "--config"]).arg(&good).args(["--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max relative error"));
}
