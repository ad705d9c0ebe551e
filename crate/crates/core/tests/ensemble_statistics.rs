use tnqc_core::model::{build_problem, parasitic_terms, sample_ensemble, EnsembleSpec, Overrides, Task};

#[test]
fn moments_match_the_uniform_law() {
    let dj = 0.05;
    let spec = EnsembleSpec { delta_j: dj, m: 10_000, seed: 2024 };
    let samples = sample_ensemble(&spec, 4).unwrap();
    let values: Vec<f64> = samples.iter().flat_map(|s| s.jx.iter().chain(&s.jy).chain(&s.jz).copied()).collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let law_var = dj * dj / 3.0;
    assert!(mean.abs() < 3.0 * (law_var / k).sqrt(), "mean {mean}");
    assert!((var / law_var - 1.0).abs() < 0.05, "variance {var} vs {law_var}");
}

#[test]
fn default_ensemble_size_is_six_per_bond() {
    for n in [2, 4, 10, 50] {
        assert_eq!(parasitic_terms(n), 3 * (n - 1));
        let p = build_problem(Task::ParallelX, n, 0.05, &Overrides::default()).unwrap();
        assert_eq!(p.ensemble.m, 6 * (n - 1));
        assert_eq!(p.verification_samples().unwrap().len(), 5 * 6 * (n - 1));
    }
}

#[test]
fn verification_ensemble_is_disjoint() {
    let p = build_problem(Task::GhzPrep, 4, 0.05, &Overrides::default()).unwrap();
    let opt = p.samples().unwrap();
    let ver = p.verification_samples().unwrap();
    assert!(opt.iter().all(|s| !ver.contains(s)));
}
