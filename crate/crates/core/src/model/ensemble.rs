//! Sampling of static parasitic couplings.
//!
//! Each sample is drawn from its own ChaCha20 stream: the key comes from the
//! ensemble seed and the 64-bit stream id is the sample index. Sample `s`
//! is therefore identical no matter how many samples are drawn, in which
//! order, or on how many threads. Within a sample the draws are all `jx`
//! (bond order), then all `jy`, then all `jz`, each uniform on
//! `[-ΔJ, ΔJ]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Offset added to an optimization seed to obtain the verification seed.
pub const VERIFICATION_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Number of parasitic terms on a chain of `n` qubits, `3(n-1)`.
pub fn parasitic_terms(n: usize) -> usize {
    3 * n.saturating_sub(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub delta_j: f64,
    pub m: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    /// Optimization ensemble of size `2·n_J`.
    pub fn for_optimization(n: usize, delta_j: f64, seed: u64) -> Self {
        Self {
            delta_j,
            m: (2 * parasitic_terms(n)).max(1),
            seed,
        }
    }

    /// Larger, disjoint ensemble used to validate an optimized schedule.
    pub fn verification(&self, factor: usize) -> Self {
        Self {
            delta_j: self.delta_j,
            m: self.m * factor,
            seed: self.seed.wrapping_add(VERIFICATION_SEED_OFFSET),
        }
    }
}

/// One realization of the per-bond `(J^x, J^y, J^z)` couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParasiticSample {
    pub jx: Vec<f64>,
    pub jy: Vec<f64>,
    pub jz: Vec<f64>,
}

impl ParasiticSample {
    pub fn zero(n: usize) -> Self {
        let b = n.saturating_sub(1);
        Self {
            jx: vec![0.0; b],
            jy: vec![0.0; b],
            jz: vec![0.0; b],
        }
    }

    pub fn bonds(&self) -> usize {
        self.jx.len()
    }
}

/// Draws sample number `index` of the ensemble.
pub fn sample_at(spec: &EnsembleSpec, n: usize, index: u64) -> Result<ParasiticSample> {
    if !(spec.delta_j >= 0.0) || !spec.delta_j.is_finite() {
        return Err(invalid!("ΔJ must be finite and non-negative, got {}", spec.delta_j));
    }
    if spec.delta_j == 0.0 {
        return Ok(ParasiticSample::zero(n));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let b = n.saturating_sub(1);
    let mut draw = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| rng.random_range(-spec.delta_j..=spec.delta_j))
            .collect()
    };
    let jx = draw(b);
    let jy = draw(b);
    let jz = draw(b);
    Ok(ParasiticSample { jx, jy, jz })
}

pub fn sample_ensemble(spec: &EnsembleSpec, n: usize) -> Result<Vec<ParasiticSample>> {
    if spec.m == 0 {
        return Err(invalid!("ensemble size must be at least 1"));
    }
    (0..spec.m as u64).map(|s| sample_at(spec, n, s)).collect()
}
