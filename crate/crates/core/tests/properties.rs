//! Randomized invariants of the building blocks.

use proptest::prelude::*;
use tnqc_core::dense::DenseState;
use tnqc_core::model::{build_problem, sample_at, sample_ensemble, EnsembleSpec, Overrides, PulseSchedule, Task};
use tnqc_core::objective::{mean_infidelity, per_gate_infidelity};
use tnqc_core::optimizer::extend_schedule;
use tnqc_core::tensor::{bond_gate, single_quadrature_gate, svd_truncate, DenseTensor, Quadrature};
use tnqc_core::{Mps, C64};

fn matrix(rows: usize, cols: usize, vals: &[f64]) -> DenseTensor {
    let data = (0..rows * cols).map(|k| C64::new(vals[2 * k], vals[2 * k + 1])).collect();
    DenseTensor::new(vec![rows, cols], data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn params_round_trip(n in 1usize..5, bins in 0usize..6, seed in any::<u64>()) {
        let len = n * bins;
        let x: Vec<f64> = (0..len).map(|k| ((seed >> (k % 60)) & 7) as f64 - 3.5).collect();
        let y: Vec<f64> = x.iter().map(|v| -0.5 * v).collect();
        let s = PulseSchedule::from_amplitudes(n, bins, 0.1, x.clone(), y.clone()).unwrap();
        let p = s.to_params();
        prop_assert_eq!(p.len(), 2 * len);
        prop_assert_eq!(&p[..len], &x[..]);
        prop_assert_eq!(s.with_params(&p).unwrap(), s);
    }

    #[test]
    fn samples_stay_in_range_and_are_reproducible(n in 2usize..9, dj in 0.0f64..0.2, seed in any::<u64>(), index in 0u64..1000) {
        let spec = EnsembleSpec { delta_j: dj, m: 1, seed };
        let a = sample_at(&spec, n, index).unwrap();
        prop_assert_eq!(a.bonds(), n - 1);
        for v in a.jx.iter().chain(&a.jy).chain(&a.jz) {
            prop_assert!(v.abs() <= dj);
        }
        prop_assert_eq!(&a, &sample_at(&spec, n, index).unwrap());
    }

    #[test]
    fn ensemble_is_indexable(n in 2usize..6, m in 1usize..12, seed in any::<u64>()) {
        let spec = EnsembleSpec { delta_j: 0.05, m, seed };
        let all = sample_ensemble(&spec, n).unwrap();
        prop_assert_eq!(all.len(), m);
        let k = m / 2;
        prop_assert_eq!(&all[k], &sample_at(&spec, n, k as u64).unwrap());
    }

    #[test]
    fn untruncated_svd_reconstructs(rows in 1usize..7, cols in 1usize..7, vals in prop::collection::vec(-1.0f64..1.0, 98)) {
        let m = matrix(rows, cols, &vals);
        let split = svd_truncate(&m, 64, 0.0).unwrap();
        let mut us = split.u.clone();
        let kept = split.s.len();
        for r in 0..rows {
            for c in 0..kept {
                let v = us.get(&[r, c]) * split.s[c];
                us.set(&[r, c], v);
            }
        }
        let back = us.matmul(&split.v).unwrap();
        prop_assert!(back.max_abs_diff(&m) < 1e-10);
        prop_assert!(split.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn truncation_keeps_the_cap_and_reports_the_tail(vals in prop::collection::vec(-1.0f64..1.0, 72), cap in 1usize..6) {
        let m = matrix(6, 6, &vals);
        let full = svd_truncate(&m, 64, 0.0).unwrap();
        let cut = svd_truncate(&m, cap, 0.0).unwrap();
        prop_assert!(cut.s.len() <= cap);
        let tail: f64 = full.s[cut.s.len()..].iter().map(|s| s * s).sum();
        prop_assert!((cut.report.discarded_weight - tail).abs() < 1e-10);
    }

    #[test]
    fn gates_preserve_norm(n in 2usize..7, amp in -3.0f64..3.0, g in 0.0f64..1.5, j in -0.1f64..0.1, seed in any::<u64>()) {
        let mut psi = Mps::random(n, 4, seed).unwrap();
        let before = psi.norm();
        psi.apply_one_site(&single_quadrature_gate(amp, 0.3, Quadrature::X), n / 2).unwrap();
        psi.apply_one_site(&single_quadrature_gate(-amp, 0.2, Quadrature::Y), 0).unwrap();
        psi.apply_two_site(&bond_gate(g, j, -j, 0.5 * j, 0.25), n - 2, 64, 0.0).unwrap();
        prop_assert!((psi.norm() - before).abs() < 1e-10);
    }

    #[test]
    fn mps_and_dense_amplitudes_agree(n in 1usize..7, seed in any::<u64>()) {
        let psi = Mps::random(n, 3, seed).unwrap();
        let d = DenseState::new(n, psi.to_dense()).unwrap();
        prop_assert!((d.norm() - psi.norm()).abs() < 1e-10);
        prop_assert!((d.overlap(&d).re - psi.overlap(&psi).unwrap().norm()).abs() < 1e-10);
    }

    #[test]
    fn extension_keeps_existing_rows(n in 1usize..5, extra in 0usize..3, bins in 1usize..5) {
        let x: Vec<f64> = (0..n * bins).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let s = PulseSchedule::from_amplitudes(n, bins, 0.1, x, y).unwrap();
        let e = extend_schedule(&s, n + extra).unwrap();
        for j in 0..n {
            prop_assert_eq!(e.x_row(j), s.x_row(j));
            prop_assert_eq!(e.y_row(j), s.y_row(j));
        }
        for j in n..n + extra {
            prop_assert_eq!(e.x_row(j), s.x_row(n - 1));
        }
    }

    #[test]
    fn per_gate_is_monotone_and_bounded(chi in 0.0f64..0.99, n in 1usize..60) {
        let one = per_gate_infidelity(chi, n, 1).unwrap();
        let two = per_gate_infidelity(chi, n, 2).unwrap();
        prop_assert!((0.0..=chi + 1e-15).contains(&one));
        prop_assert!(two >= one - 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn infidelity_lies_in_unit_interval(task_idx in 0usize..4, seed in any::<u64>()) {
        let task = Task::ALL[task_idx];
        let p = build_problem(task, 4, 0.05, &Overrides { bins: Some(4), ensemble_size: Some(2), seed: Some(seed), ..Overrides::default() }).unwrap();
        let ends = p.endpoints().unwrap();
        let params: Vec<f64> = (0..p.schedule.num_params()).map(|k| (((seed >> (k % 64)) & 3) as f64 - 1.5) * 0.7).collect();
        let s = p.schedule.with_params(&params).unwrap();
        let v = mean_infidelity(&p, &ends, &s, &p.samples().unwrap()).unwrap();
        prop_assert!(v.mean_infidelity >= -1e-12 && v.mean_infidelity <= 1.0 + 1e-12);
        for chi in &v.per_sample {
            prop_assert!(*chi >= -1e-12 && *chi <= 1.0 + 1e-12);
        }
    }
}
