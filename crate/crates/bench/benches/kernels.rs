use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnqc_core::model::{build_problem, sample_at, Overrides, Task};
use tnqc_core::objective::EnsembleObjective;
use tnqc_core::tebd::propagate;
use tnqc_core::tensor::svd_truncate;
use tnqc_core::{DenseTensor, Mps, PulseSchedule, TrotterSettings, C64};

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(&[rows, cols], |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_schedule(n: usize, bins: usize, dt: f64, seed: u64) -> PulseSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || (0..n * bins).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let x = draw();
    let y = draw();
    PulseSchedule::from_amplitudes(n, bins, dt, x, y).unwrap()
}

fn svd(c: &mut Criterion) {
    let mut g = c.benchmark_group("svd_truncate");
    for dim in [16, 40, 80] {
        let m = random_matrix(dim, dim, dim as u64);
        g.bench_with_input(BenchmarkId::from_parameter(dim), &m, |b, m| b.iter(|| svd_truncate(black_box(m), dim / 2, 1e-14).unwrap()));
    }
    g.finish();
}

fn state_propagation(c: &mut Criterion) {
    let mut g = c.benchmark_group("propagate_state");
    g.sample_size(20);
    for n in [6, 12] {
        let p = build_problem(Task::GhzPrep, n, 0.05, &Overrides::default()).unwrap();
        let s = random_schedule(n, p.bins(), p.schedule.dt(), 7);
        let sample = sample_at(&p.ensemble, n, 0).unwrap();
        let psi = Mps::product_state(&vec![0; n]).unwrap();
        let settings = TrotterSettings::new(16);
        g.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| propagate(black_box(&psi), &s, &p.coupling, &sample, &settings, false).unwrap())
        });
    }
    g.finish();
}

fn ensemble_gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("ensemble_gradient");
    g.sample_size(10);
    for task in [Task::ParallelX, Task::GhzPrep] {
        let n = 4;
        let p = build_problem(task, n, 0.05, &Overrides { bins: Some(20), ensemble_size: Some(6), ..Overrides::default() }).unwrap();
        let e = p.endpoints().unwrap();
        let obj = EnsembleObjective::new(&p, &e, p.samples().unwrap()).unwrap();
        let s = random_schedule(n, p.bins(), p.schedule.dt(), 11);
        g.bench_function(BenchmarkId::new(task.name(), n), |b| b.iter(|| obj.value_and_gradient(black_box(&s)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, svd, state_propagation, ensemble_gradient);
criterion_main!(benches);
