//! Matrix product operators.
//!
//! Site tensors have axes `(left, in, out, right)`; the element
//! `W[l, i, o, r]` multiplies `|o><i|`. Gates act on the `out` index, so
//! applying `G` to an operator `U` produces `G·U`.

use serde::{Deserialize, Serialize};

use crate::chain::{dims, Chain};
use crate::error::{invalid, Result};
use crate::mps::Mps;
use crate::tensor::{DenseTensor, TruncationReport, C64, ONE, ZERO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mpo {
    chain: Chain,
}

fn local(op: &DenseTensor) -> DenseTensor {
    // (out, in) matrix -> (1, in, out, 1) site
    DenseTensor::from_fn(&[1, 2, 2, 1], |ix| op.get(&[ix[2], ix[1]]))
}

impl Mpo {
    pub fn from_sites(sites: Vec<DenseTensor>) -> Result<Self> {
        if sites.iter().any(|t| t.rank() != 4 || t.shape()[1] != 2 || t.shape()[2] != 2) {
            return Err(invalid!("MPO site tensors must have shape (l, 2, 2, r)"));
        }
        Ok(Self {
            chain: Chain::new(sites, None)?,
        })
    }

    pub(crate) fn chain(&self) -> &Chain {
        &self.chain
    }

    /// Product operator `op_0 ⊗ op_1 ⊗ ...` from 2x2 `(out, in)` matrices.
    pub fn product(ops: &[DenseTensor]) -> Result<Self> {
        if ops.is_empty() {
            return Err(invalid!("operator needs at least one site"));
        }
        if ops.iter().any(|o| o.shape() != [2, 2]) {
            return Err(invalid!("product factors must be 2x2"));
        }
        Self::from_sites(ops.iter().map(local).collect())
    }

    /// Identity on `n` qubits, bond dimension 1.
    pub fn identity(n: usize) -> Result<Self> {
        Self::product(&vec![DenseTensor::identity(2); n])
    }

    /// `X ⊗ X ⊗ ... ⊗ X`, bond dimension 1.
    pub fn parallel_x(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid!("parallel X needs n >= 1"));
        }
        Self::product(&vec![crate::tensor::pauli::x(); n])
    }

    /// `CNOT(0,1) ⊗ CNOT(2,3) ⊗ ...`, controls on even sites.
    ///
    /// Built as `|0><0| ⊗ I + |1><1| ⊗ X` per pair: bond 2 inside a pair and
    /// 1 between pairs.
    pub fn parallel_cnot(n: usize) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(invalid!("parallel CNOT needs an even n, got {n}"));
        }
        let mut control = DenseTensor::zeros(&[1, 2, 2, 2]);
        control.set(&[0, 0, 0, 0], ONE);
        control.set(&[0, 1, 1, 1], ONE);
        let mut target = DenseTensor::zeros(&[2, 2, 2, 1]);
        target.set(&[0, 0, 0, 0], ONE);
        target.set(&[0, 1, 1, 0], ONE);
        target.set(&[1, 0, 1, 0], ONE);
        target.set(&[1, 1, 0, 0], ONE);
        let mut sites = Vec::with_capacity(n);
        for _ in 0..n / 2 {
            sites.push(control.clone());
            sites.push(target.clone());
        }
        Self::from_sites(sites)
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

    /// Left-multiplies by a single-qubit gate on `site`.
    pub fn apply_one_site(&mut self, gate: &DenseTensor, site: usize) -> Result<()> {
        self.chain.apply_one(gate, site)
    }

    /// Left-multiplies by a two-qubit gate on `(left, left + 1)`.
    ///
    /// Truncation is Frobenius-optimal with the `(in, out)` pair treated as
    /// one physical index; the operator is not rescaled afterwards.
    pub fn apply_two_site(&mut self, gate: &DenseTensor, left: usize, d_max: usize, cutoff: f64) -> Result<TruncationReport> {
        self.chain.apply_two(gate, left, d_max, cutoff, false)
    }

    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        self.chain.canonicalize(center)
    }

    /// `tr(self† other) / 2^n`.
    pub fn trace_overlap(&self, other: &Mpo) -> Result<C64> {
        let raw = self.chain.inner(&other.chain)?;
        Ok(raw * 0.5f64.powi(self.len() as i32))
    }

    /// Dense `2^n x 2^n` matrix indexed `[out, in]`, site 0 most significant.
    pub fn to_dense(&self) -> DenseTensor {
        let n = self.len();
        let fused = self.chain.to_dense();
        let dim = 1usize << n;
        let mut out = DenseTensor::zeros(&[dim, dim]);
        let data = out.data_mut();
        for (k, &z) in fused.iter().enumerate() {
            if z == ZERO {
                continue;
            }
            // k enumerates (in_0, out_0, in_1, out_1, ...) most significant first
            let (mut row, mut col) = (0usize, 0usize);
            for site in 0..n {
                let pair = (k >> (2 * (n - 1 - site))) & 3;
                col = (col << 1) | (pair >> 1);
                row = (row << 1) | (pair & 1);
            }
            data[row * dim + col] = z;
        }
        out
    }

    /// Exact product `self · psi` (bond dimensions multiply).
    pub fn apply(&self, psi: &Mps) -> Result<Mps> {
        if psi.len() != self.len() {
            return Err(invalid!("length mismatch: {} vs {}", self.len(), psi.len()));
        }
        let mut sites = Vec::with_capacity(self.len());
        for (w, a) in self.sites().iter().zip(psi.sites()) {
            let (lw, _, rw) = dims(w);
            let (la, _, ra) = dims(a);
            let mut t = DenseTensor::zeros(&[lw * la, 2, rw * ra]);
            let wd = w.data();
            let ad = a.data();
            let td = t.data_mut();
            for x in 0..lw {
                for y in 0..rw {
                    for i in 0..2 {
                        for o in 0..2 {
                            let wv = wd[((x * 2 + i) * 2 + o) * rw + y];
                            if wv == ZERO {
                                continue;
                            }
                            for u in 0..la {
                                for v in 0..ra {
                                    td[((x * la + u) * 2 + o) * (rw * ra) + y * ra + v] += wv * ad[(u * 2 + i) * ra + v];
                                }
                            }
                        }
                    }
                }
            }
            sites.push(t);
        }
        Mps::from_sites(sites)
    }

    pub fn scale(&mut self, factor: C64) {
        self.chain.scale(factor);
    }

    /// Conjugate transpose, site by site.
    pub fn adjoint(&self) -> Mpo {
        let sites = self.sites().iter().map(|t| t.permute(&[0, 2, 1, 3]).unwrap().conj()).collect();
        Mpo {
            chain: Chain { sites, center: None },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{bond_gate, pauli, single_quadrature_gate, Quadrature};

    fn dense_trace_overlap(a: &DenseTensor, b: &DenseTensor) -> C64 {
        let d = a.shape()[0] as f64;
        a.data().iter().zip(b.data()).map(|(x, y)| x.conj() * y).sum::<C64>() / d
    }

    #[test]
    fn identity_dense_and_overlap() {
        let id = Mpo::identity(4).unwrap();
        assert_eq!(id.to_dense(), DenseTensor::identity(16));
        assert!((id.trace_overlap(&id).unwrap() - ONE).norm() < 1e-15);
        let ghz = Mps::ghz_state(4).unwrap();
        let out = id.apply(&ghz).unwrap();
        assert!((out.overlap(&ghz).unwrap() - ONE).norm() < 1e-14);
    }

    #[test]
    fn parallel_x_targets() {
        let x2 = Mpo::parallel_x(2).unwrap();
        assert_eq!(x2.to_dense(), pauli::kron(&pauli::x(), &pauli::x()));
        let x5 = Mpo::parallel_x(5).unwrap();
        assert!(Mpo::identity(5).unwrap().trace_overlap(&x5).unwrap().norm() < 1e-15);
        let flipped = x5.apply(&Mps::product_state(&[0; 5]).unwrap()).unwrap();
        assert!((flipped.overlap(&Mps::product_state(&[1; 5]).unwrap()).unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn parallel_cnot_targets() {
        let c = Mpo::parallel_cnot(2).unwrap();
        let mut cnot = DenseTensor::zeros(&[4, 4]);
        for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            cnot.set(&[r, col], ONE);
        }
        assert_eq!(c.to_dense(), cnot);
        let out = c.apply(&Mps::product_state(&[1, 0]).unwrap()).unwrap();
        assert!((out.overlap(&Mps::product_state(&[1, 1]).unwrap()).unwrap() - ONE).norm() < 1e-15);
        let c4 = Mpo::parallel_cnot(4).unwrap();
        assert!((c4.trace_overlap(&c4).unwrap() - ONE).norm() < 1e-14);
        assert_eq!(c4.bond_dims(), vec![2, 1, 2]);
        assert_eq!(c4.to_dense(), pauli::kron(&cnot, &cnot));
        assert!(Mpo::parallel_cnot(3).is_err());
    }

    #[test]
    fn one_site_gate_multiplies_from_left() {
        let mut id = Mpo::identity(2).unwrap();
        id.apply_one_site(&pauli::x(), 0).unwrap();
        assert_eq!(id.to_dense(), pauli::kron(&pauli::x(), &pauli::id()));
    }

    #[test]
    fn gate_sequence_matches_dense_products() {
        let n = 5;
        let mut mpo = Mpo::identity(n).unwrap();
        let mut dense = DenseTensor::identity(1 << n);
        let id = pauli::id();
        let embed1 = |g: &DenseTensor, site: usize| {
            let mut m = DenseTensor::identity(1);
            for k in 0..n {
                m = pauli::kron(&m, if k == site { g } else { &id });
            }
            m
        };
        let embed2 = |g: &DenseTensor, left: usize| {
            let mut m = DenseTensor::identity(1);
            let mut k = 0;
            while k < n {
                if k == left {
                    m = pauli::kron(&m, g);
                    k += 2;
                } else {
                    m = pauli::kron(&m, &id);
                    k += 1;
                }
            }
            m
        };
        let gates: Vec<(bool, usize, DenseTensor)> = vec![
            (false, 1, bond_gate(1.0, 0.3, -0.2, 0.1, 0.7)),
            (true, 0, single_quadrature_gate(0.8, 1.0, Quadrature::Y)),
            (false, 3, bond_gate(0.5, -0.4, 0.2, 0.3, 0.9)),
            (true, 4, single_quadrature_gate(-1.3, 1.0, Quadrature::X)),
            (false, 0, bond_gate(0.2, 0.6, 0.6, -0.1, 1.1)),
            (false, 2, bond_gate(-0.7, 0.1, 0.4, 0.2, 0.8)),
        ];
        for (single, site, g) in &gates {
            if *single {
                mpo.apply_one_site(g, *site).unwrap();
                dense = embed1(g, *site).matmul(&dense).unwrap();
            } else {
                mpo.apply_two_site(g, *site, 32, 0.0).unwrap();
                dense = embed2(g, *site).matmul(&dense).unwrap();
            }
        }
        assert!(mpo.to_dense().max_abs_diff(&dense) < 1e-10);
        let x = Mpo::parallel_x(n).unwrap();
        let expected = dense_trace_overlap(&dense, &x.to_dense());
        assert!((mpo.trace_overlap(&x).unwrap() - expected).norm() < 1e-10);
        // global phase does not change the modulus
        let mut phased = x.clone();
        phased.scale(C64::from_polar(1.0, 0.9));
        assert!((mpo.trace_overlap(&phased).unwrap().norm() - expected.norm()).abs() < 1e-12);
    }

    #[test]
    fn adjoint_of_cnot_pair_is_itself() {
        let c = Mpo::parallel_cnot(2).unwrap();
        assert_eq!(c.adjoint().to_dense(), c.to_dense());
    }
}
