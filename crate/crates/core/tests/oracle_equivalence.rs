//! Tensor-network propagation against brute-force dense propagation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnqc_core::dense::{dense_propagate, DenseState, DenseUnitary};
use tnqc_core::model::{sample_at, CouplingPattern, EnsembleSpec, ParasiticSample, PulseSchedule};
use tnqc_core::tebd::{propagate, TrotterSettings};
use tnqc_core::{Mpo, Mps, C64};

fn random_schedule(n: usize, bins: usize, dt: f64, seed: u64) -> PulseSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || (0..n * bins).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
    let (x, y) = (draw(), draw());
    PulseSchedule::from_amplitudes(n, bins, dt, x, y).unwrap()
}

fn sample(n: usize, seed: u64) -> ParasiticSample {
    sample_at(&EnsembleSpec { delta_j: 0.05, m: 1, seed }, n, 0).unwrap()
}

#[test]
fn states_match_dense_over_fifty_slices() {
    let n = 6;
    let schedule = random_schedule(n, 50, 0.1, 11);
    let coupling = CouplingPattern::uniform(n, 1.0);
    let s = sample(n, 3);
    let psi0 = Mps::random(n, 4, 5).unwrap();
    let dense0 = DenseState::new(n, psi0.to_dense()).unwrap();

    let settings = TrotterSettings::new(1 << (n / 2));
    let tn = propagate(&psi0, &schedule, &coupling, &s, &settings, false).unwrap();
    let exact = dense_propagate(&dense0, &schedule, &coupling, &s, 1).unwrap();
    let tn_dense = DenseState::new(n, tn.final_state.to_dense()).unwrap();
    let deficit = 1.0 - exact.overlap(&tn_dense).norm_sqr();
    assert!(deficit.abs() < 1e-10, "deficit {deficit:e}");
    assert!(tn.discarded_weight < 1e-20);
}

#[test]
fn unitaries_match_dense_over_fifty_slices() {
    let n = 5;
    let schedule = random_schedule(n, 50, 0.1, 12);
    let coupling = CouplingPattern::alternating(n, 1.0);
    let s = sample(n, 4);
    // Operator bonds need up to 4^(n/2) to stay exact.
    let settings = TrotterSettings::new(1 << (2 * (n / 2)));
    let tn = propagate(&Mpo::identity(n).unwrap(), &schedule, &coupling, &s, &settings, false).unwrap();
    let exact = dense_propagate(&DenseUnitary::identity(n).unwrap(), &schedule, &coupling, &s, 1).unwrap();
    let tn_dense = DenseUnitary::from_matrix(&tn.final_state.to_dense()).unwrap();
    let deficit = 1.0 - exact.trace_overlap(&tn_dense).norm_sqr();
    assert!(deficit.abs() < 1e-10, "deficit {deficit:e}");
}

#[test]
fn substeps_agree_between_propagators() {
    let n = 4;
    let schedule = random_schedule(n, 6, 0.3, 13);
    let coupling = CouplingPattern::uniform(n, 1.0);
    let s = sample(n, 5);
    let psi0 = Mps::product_state(&[0, 1, 0, 0]).unwrap();
    let settings = TrotterSettings {
        substeps: 3,
        ..TrotterSettings::new(16)
    };
    let tn = propagate(&psi0, &schedule, &coupling, &s, &settings, false).unwrap();
    let exact = dense_propagate(&DenseState::new(n, psi0.to_dense()).unwrap(), &schedule, &coupling, &s, 3).unwrap();
    let deficit = 1.0 - exact.overlap(&DenseState::new(n, tn.final_state.to_dense()).unwrap()).norm_sqr();
    assert!(deficit.abs() < 1e-12);
}

#[test]
fn dense_propagation_is_linear() {
    let n = 5;
    let schedule = random_schedule(n, 8, 0.2, 14);
    let coupling = CouplingPattern::uniform(n, 1.0);
    let s = sample(n, 6);
    let a = DenseState::new(n, Mps::random(n, 4, 1).unwrap().to_dense()).unwrap();
    let b = DenseState::new(n, Mps::random(n, 4, 2).unwrap().to_dense()).unwrap();
    let (ca, cb) = (C64::new(0.3, -0.7), C64::new(-1.1, 0.2));
    let mix: Vec<C64> = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| ca * x + cb * y).collect();
    let mix = DenseState::new(n, mix).unwrap();

    let pa = dense_propagate(&a, &schedule, &coupling, &s, 1).unwrap();
    let pb = dense_propagate(&b, &schedule, &coupling, &s, 1).unwrap();
    let pm = dense_propagate(&mix, &schedule, &coupling, &s, 1).unwrap();
    for ((m, x), y) in pm.amplitudes().iter().zip(pa.amplitudes()).zip(pb.amplitudes()) {
        assert!((m - (ca * x + cb * y)).norm() < 1e-12);
    }
}

#[test]
fn dense_unitary_stays_unitary_over_a_hundred_slices() {
    let n = 4;
    let schedule = random_schedule(n, 100, 0.1, 15);
    let u = dense_propagate(&DenseUnitary::identity(n).unwrap(), &schedule, &CouplingPattern::uniform(n, 1.0), &sample(n, 7), 1).unwrap();
    assert!(u.to_matrix().unitarity_defect() < 1e-10);
}

#[test]
fn oversized_inputs_are_rejected() {
    assert!(DenseState::basis(11, 0).is_err());
    assert!(DenseUnitary::identity(8).is_err());
}
