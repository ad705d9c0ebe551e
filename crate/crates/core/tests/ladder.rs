//! Warm-start ladders on small problems.

use tnqc_core::model::{build_problem, Endpoints, Overrides, Task};
use tnqc_core::objective::{mean_infidelity, EnsembleObjective};
use tnqc_core::optimizer::{extend_schedule, initial_guess, ladder_optimize, optimize_schedule, LadderCell, LadderPlan, OptimizerConfig, SeedSource};
use tnqc_core::{ControlProblem, PulseSchedule, Result};

fn factory(task: Task, overrides: Overrides) -> impl FnMut(usize, f64) -> Result<(ControlProblem, Endpoints)> {
    move |n, dj| {
        let p = build_problem(task, n, dj, &overrides)?;
        let e = p.endpoints()?;
        Ok((p, e))
    }
}

fn guess(cfg: OptimizerConfig) -> impl FnMut(&ControlProblem, &Endpoints) -> Result<PulseSchedule> {
    move |p, e| initial_guess(p, e, &cfg)
}

#[test]
fn size_ladder_reaches_exact_gates() {
    let cfg = OptimizerConfig::default();
    let plan = LadderPlan::new(vec![2, 3], vec![0.0]).unwrap();
    let mut seen = Vec::new();
    let cells = ladder_optimize(&plan, factory(Task::ParallelX, Overrides::default()), guess(cfg), &cfg, None, &[], |c| {
        seen.push((c.n, c.delta_j));
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, vec![(2, 0.0), (3, 0.0)]);
    assert_eq!(cells[1].seed_source, SeedSource::SmallerSize { n: 2 });
    assert!(cells[1].value < 1e-8, "{}", cells[1].value);
    assert!(cells.iter().all(|c| !c.flagged || c.seed_value < 1e-8));
}

#[test]
fn single_cell_plan_is_one_optimizer_run() {
    let cfg = OptimizerConfig { max_iters: 30, ..OptimizerConfig::default() };
    let plan = LadderPlan::new(vec![3], vec![0.02]).unwrap();
    let cells = ladder_optimize(&plan, factory(Task::ParallelX, Overrides::default()), guess(cfg), &cfg, None, &[], |_| Ok(())).unwrap();

    let p = build_problem(Task::ParallelX, 3, 0.02, &Overrides::default()).unwrap();
    let e = p.endpoints().unwrap();
    let obj = EnsembleObjective::new(&p, &e, p.samples().unwrap()).unwrap();
    let direct = optimize_schedule(&obj, &initial_guess(&p, &e, &cfg).unwrap(), &cfg).unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].history, direct.history);
    assert_eq!(cells[0].value, direct.value.min(direct.seed_value));
}

#[test]
fn error_ladder_beats_the_error_free_solution() {
    let cfg = OptimizerConfig { max_iters: 150, ..OptimizerConfig::default() };
    let plan = LadderPlan::new(vec![4], LadderPlan::error_ramp(0.05, 0.01).unwrap()).unwrap();
    let cells = ladder_optimize(&plan, factory(Task::ParallelX, Overrides::default()), guess(cfg), &cfg, None, &[], |_| Ok(())).unwrap();
    assert_eq!(cells.len(), 6);
    for w in cells.windows(2) {
        assert_eq!(w[1].seed_source, SeedSource::SmallerError { delta_j: w[0].delta_j });
    }

    let p = build_problem(Task::ParallelX, 4, 0.05, &Overrides::default()).unwrap();
    let e = p.endpoints().unwrap();
    let ver = p.verification_samples().unwrap();
    let plain = mean_infidelity(&p, &e, &cells[0].schedule, &ver).unwrap().mean_infidelity;
    let robust = mean_infidelity(&p, &e, &cells[5].schedule, &ver).unwrap().mean_infidelity;
    assert!(robust < plain, "robust {robust:e} vs error-free {plain:e}");
}

#[test]
fn resume_skips_finished_cells() {
    let cfg = OptimizerConfig { max_iters: 20, ..OptimizerConfig::default() };
    let plan = LadderPlan::new(vec![2, 3], vec![0.0]).unwrap();
    let first = ladder_optimize(&plan, factory(Task::ParallelX, Overrides::default()), guess(cfg), &cfg, None, &[], |_| Ok(())).unwrap();
    let partial: Vec<LadderCell> = first[..1].to_vec();
    let mut computed = Vec::new();
    let second = ladder_optimize(&plan, factory(Task::ParallelX, Overrides::default()), guess(cfg), &cfg, None, &partial, |c| {
        computed.push(c.n);
        Ok(())
    })
    .unwrap();
    assert_eq!(computed, vec![3]);
    assert_eq!(second[0].seed_source, SeedSource::Checkpoint);
    assert_eq!(second[1].schedule, first[1].schedule);
}

#[test]
fn extended_pi_pulse_stays_close() {
    // Diagnostic bound: the extended solution should be within 10x of the
    // smaller one before reoptimization.
    let cfg = OptimizerConfig::default();
    let p2 = build_problem(Task::ParallelX, 2, 0.0, &Overrides::default()).unwrap();
    let e2 = p2.endpoints().unwrap();
    let g = initial_guess(&p2, &e2, &cfg).unwrap();
    let v2 = mean_infidelity(&p2, &e2, &g, &p2.samples().unwrap()).unwrap().mean_infidelity;
    let p3 = build_problem(Task::ParallelX, 3, 0.0, &Overrides::default()).unwrap();
    let e3 = p3.endpoints().unwrap();
    let v3 = mean_infidelity(&p3, &e3, &extend_schedule(&g, 3).unwrap(), &p3.samples().unwrap()).unwrap().mean_infidelity;
    assert!(v3 < 10.0 * v2, "{v3:e} vs {v2:e}");
}
