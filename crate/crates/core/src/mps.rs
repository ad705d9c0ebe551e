//! Matrix product states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::Chain;
use crate::error::{invalid, Result};
use crate::mpo::Mpo;
use crate::tensor::{DenseTensor, TruncationReport, C64, ONE, ZERO};

/// A state on `n` qubits stored as site tensors `(left, physical, right)`.
///
/// Sites are indexed from 0; site 0 is the most significant qubit in dense
/// representations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mps {
    chain: Chain,
}

impl Mps {
    pub fn from_sites(sites: Vec<DenseTensor>) -> Result<Self> {
        if sites.iter().any(|t| t.rank() != 3) {
            return Err(invalid!("MPS site tensors must have rank 3"));
        }
        Ok(Self {
            chain: Chain::new(sites, None)?,
        })
    }

    pub(crate) fn from_chain(chain: Chain) -> Self {
        Self { chain }
    }

    pub(crate) fn chain(&self) -> &Chain {
        &self.chain
    }

    /// Computational basis state `|b_0 b_1 ... b_{n-1}>`.
    pub fn product_state(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid!("product state needs at least one bit"));
        }
        let mut sites = Vec::with_capacity(bits.len());
        for &b in bits {
            let data = match b {
                0 => vec![ONE, ZERO],
                1 => vec![ZERO, ONE],
                _ => return Err(invalid!("bits must be 0 or 1, got {b}")),
            };
            sites.push(DenseTensor::new(vec![1, 2, 1], data)?);
        }
        Ok(Self {
            chain: Chain::new(sites, Some(0))?,
        })
    }

    /// `(|0...0> + |1...1>)/sqrt(2)` in its exact bond-dimension-2 form.
    pub fn ghz_state(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid!("GHZ state needs n >= 2, got {n}"));
        }
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut sites = Vec::with_capacity(n);
        let mut first = DenseTensor::zeros(&[1, 2, 2]);
        first.set(&[0, 0, 0], h);
        first.set(&[0, 1, 1], h);
        sites.push(first);
        for _ in 1..n - 1 {
            let mut bulk = DenseTensor::zeros(&[2, 2, 2]);
            bulk.set(&[0, 0, 0], ONE);
            bulk.set(&[1, 1, 1], ONE);
            sites.push(bulk);
        }
        let mut last = DenseTensor::zeros(&[2, 2, 1]);
        last.set(&[0, 0, 0], ONE);
        last.set(&[1, 1, 0], ONE);
        sites.push(last);
        Ok(Self {
            chain: Chain::new(sites, Some(0))?,
        })
    }

    /// Normalized random state with bonds `min(d_max, 2^k, 2^(n-k))`,
    /// right-canonical with center 0.
    pub fn random(n: usize, d_max: usize, seed: u64) -> Result<Self> {
        if n == 0 || d_max == 0 {
            return Err(invalid!("random MPS needs n >= 1 and d_max >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bond = |k: usize| -> usize {
            let cap = |e: usize| if e >= 63 { usize::MAX } else { 1usize << e };
            d_max.min(cap(k)).min(cap(n - k))
        };
        let sites = (0..n)
            .map(|k| {
                DenseTensor::from_fn(&[bond(k), 2, bond(k + 1)], |_| {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        let mut mps = Self {
            chain: Chain::new(sites, None)?,
        };
        mps.canonicalize(0)?;
        let norm = mps.norm();
        mps.chain.scale(C64::new(1.0 / norm, 0.0));
        Ok(mps)
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.chain.sites
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.chain.bond_dims()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.chain.center
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        self.chain.inner(&other.chain)
    }

    pub fn norm(&self) -> f64 {
        self.chain.norm_sqr().sqrt()
    }

    pub fn apply_one_site(&mut self, gate: &DenseTensor, site: usize) -> Result<()> {
        self.chain.apply_one(gate, site)
    }

    /// Applies a two-qubit gate on `(left, left + 1)`; if anything is
    /// truncated the state is renormalized.
    pub fn apply_two_site(&mut self, gate: &DenseTensor, left: usize, d_max: usize, cutoff: f64) -> Result<TruncationReport> {
        self.chain.apply_two(gate, left, d_max, cutoff, true)
    }

    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        self.chain.canonicalize(center)
    }

    pub fn is_left_orthonormal(&self, site: usize, tol: f64) -> bool {
        self.chain.is_left_orthonormal(site, tol)
    }

    pub fn is_right_orthonormal(&self, site: usize, tol: f64) -> bool {
        self.chain.is_right_orthonormal(site, tol)
    }

    /// `<self|op|self>` (real part). Use [`Mps::expectation_complex`] to
    /// inspect the imaginary residue for non-Hermitian operators.
    pub fn expectation(&self, op: &Mpo) -> Result<f64> {
        Ok(self.expectation_complex(op)?.re)
    }

    pub fn expectation_complex(&self, op: &Mpo) -> Result<C64> {
        self.overlap(&op.apply(self)?)
    }

    /// Dense amplitudes, site 0 most significant.
    pub fn to_dense(&self) -> Vec<C64> {
        self.chain.to_dense()
    }

    pub fn scale(&mut self, factor: C64) {
        self.chain.scale(factor);
    }
}
