//! Open-boundary site chains shared by [`Mps`](crate::Mps) and [`Mpo`](crate::Mpo).
//!
//! Site `k` holds a tensor `(left, phys..., right)`. The physical part is
//! either `[2]` (states) or `[2, 2]` = `(in, out)` (operators). In both cases
//! the fastest physical factor is the *active* qubit index that gates act
//! on; any slower factor is a spectator. An operator chain is therefore just
//! a state chain with a spectator of extent 2, and all gauge, truncation and
//! overlap code is written once here.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::{lq, matmul, matmul_adjoint_left, qr, svd_truncate, DenseTensor, TruncationReport, C64, ONE, ZERO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Chain {
    pub(crate) sites: Vec<DenseTensor>,
    /// When set, sites left of it are left-orthonormal and sites right of it
    /// are right-orthonormal.
    pub(crate) center: Option<usize>,
}

/// `(left, physical, right)` extents of a site tensor.
pub(crate) fn dims(t: &DenseTensor) -> (usize, usize, usize) {
    let s = t.shape();
    let p = s[1..s.len() - 1].iter().product();
    (s[0], p, s[s.len() - 1])
}

fn with_bonds(t: &DenseTensor, left: usize, right: usize) -> Vec<usize> {
    let s = t.shape();
    let mut shape = Vec::with_capacity(s.len());
    shape.push(left);
    shape.extend_from_slice(&s[1..s.len() - 1]);
    shape.push(right);
    shape
}

impl Chain {
    pub(crate) fn new(sites: Vec<DenseTensor>, center: Option<usize>) -> Result<Self> {
        if sites.is_empty() {
            return Err(invalid!("a chain needs at least one site"));
        }
        let phys = sites[0].shape()[1..sites[0].rank() - 1].to_vec();
        for (k, t) in sites.iter().enumerate() {
            if t.rank() < 3 || t.shape()[1..t.rank() - 1] != phys[..] {
                return Err(invalid!("site {k} has inconsistent shape {:?}", t.shape()));
            }
            if *t.shape().last().unwrap() == 0 || t.shape()[0] == 0 {
                return Err(invalid!("site {k} has an empty bond"));
            }
            if !t.is_finite() {
                return Err(invalid!("site {k} has non-finite entries"));
            }
        }
        if sites[0].shape()[0] != 1 || *sites.last().unwrap().shape().last().unwrap() != 1 {
            return Err(invalid!("boundary bonds must have extent 1"));
        }
        for k in 0..sites.len() - 1 {
            let r = *sites[k].shape().last().unwrap();
            if r != sites[k + 1].shape()[0] {
                return Err(invalid!("bond {k} mismatch: {} vs {}", r, sites[k + 1].shape()[0]));
            }
        }
        if *phys.last().unwrap() != 2 {
            return Err(invalid!("active physical extent must be 2"));
        }
        if let Some(c) = center {
            if c >= sites.len() {
                return Err(invalid!("center {c} out of range"));
            }
        }
        Ok(Self { sites, center })
    }

    pub(crate) fn len(&self) -> usize {
        self.sites.len()
    }

    pub(crate) fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1]
            .iter()
            .map(|t| *t.shape().last().unwrap())
            .collect()
    }

    pub(crate) fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.len() {
            return Err(invalid!("site {site} out of range for {} sites", self.len()));
        }
        Ok(())
    }

    /// Applies a 2x2 gate to the active index of `site`.
    pub(crate) fn apply_one(&mut self, gate: &DenseTensor, site: usize) -> Result<()> {
        self.check_site(site)?;
        if gate.shape() != [2, 2] {
            return Err(invalid!("one-site gate must be 2x2, got {:?}", gate.shape()));
        }
        let g = gate.data();
        let t = &mut self.sites[site];
        let (l, p, r) = dims(t);
        let data = t.data_mut();
        for ls in 0..l * p / 2 {
            for rr in 0..r {
                let i0 = (ls * 2) * r + rr;
                let i1 = (ls * 2 + 1) * r + rr;
                let (v0, v1) = (data[i0], data[i1]);
                data[i0] = g[0] * v0 + g[1] * v1;
                data[i1] = g[2] * v0 + g[3] * v1;
            }
        }
        if self.center.is_some() && gate.unitarity_defect() > 1e-12 {
            self.center = None;
        }
        Ok(())
    }

    fn shift_center_right(&mut self, k: usize) -> Result<()> {
        let t = &self.sites[k];
        let (l, p, r) = dims(t);
        let (q, rmat) = qr(&t.clone().reshape(&[l * p, r])?)?;
        let kept = q.shape()[1];
        let shape = with_bonds(t, l, kept);
        self.sites[k] = q.reshape(&shape)?;
        let next = &self.sites[k + 1];
        let (_, pn, rn) = dims(next);
        let merged = matmul(rmat.data(), next.data(), kept, r, pn * rn);
        let shape = with_bonds(next, kept, rn);
        self.sites[k + 1] = DenseTensor::new(shape, merged)?;
        Ok(())
    }

    fn shift_center_left(&mut self, k: usize) -> Result<()> {
        let t = &self.sites[k];
        let (l, p, r) = dims(t);
        let (lmat, q) = lq(&t.clone().reshape(&[l, p * r])?)?;
        let kept = q.shape()[0];
        let shape = with_bonds(t, kept, r);
        self.sites[k] = q.reshape(&shape)?;
        let prev = &self.sites[k - 1];
        let (lp, pp, _) = dims(prev);
        let merged = matmul(prev.data(), lmat.data(), lp * pp, l, kept);
        let shape = with_bonds(prev, lp, kept);
        self.sites[k - 1] = DenseTensor::new(shape, merged)?;
        Ok(())
    }

    /// Brings the chain into mixed-canonical form around `center`.
    pub(crate) fn canonicalize(&mut self, center: usize) -> Result<()> {
        self.check_site(center)?;
        match self.center {
            Some(cur) => {
                for k in cur..center {
                    self.shift_center_right(k)?;
                }
                for k in (center + 1..=cur).rev() {
                    self.shift_center_left(k)?;
                }
            }
            None => {
                for k in 0..center {
                    self.shift_center_right(k)?;
                }
                for k in (center + 1..self.len()).rev() {
                    self.shift_center_left(k)?;
                }
            }
        }
        self.center = Some(center);
        Ok(())
    }

    /// Applies a 4x4 gate to the active indices of `left` and `left + 1`,
    /// splitting the result with a truncated SVD.
    ///
    /// The orthogonality center is moved onto the pair first. It ends on
    /// `left + 1` if it arrived from the left and on `left` otherwise, so
    /// sweeps in either direction never re-canonicalize.
    pub(crate) fn apply_two(
        &mut self,
        gate: &DenseTensor,
        left: usize,
        d_max: usize,
        cutoff: f64,
        renormalize: bool,
    ) -> Result<TruncationReport> {
        if left + 1 >= self.len() {
            return Err(invalid!("two-site gate at {left} out of range for {} sites", self.len()));
        }
        if gate.shape() != [4, 4] {
            return Err(invalid!("two-site gate must be 4x4, got {:?}", gate.shape()));
        }
        let sweep_right = match self.center {
            Some(c) if c == left => true,
            Some(c) if c == left + 1 => false,
            Some(c) if c > left + 1 => {
                self.canonicalize(left + 1)?;
                false
            }
            _ => {
                self.canonicalize(left)?;
                true
            }
        };
        let a = &self.sites[left];
        let b = &self.sites[left + 1];
        let (l, p1, k) = dims(a);
        let (_, p2, r) = dims(b);
        let (s1, s2) = (p1 / 2, p2 / 2);
        let theta = matmul(a.data(), b.data(), l * p1, k, p2 * r);
        let g = gate.data();
        let mut out = vec![ZERO; theta.len()];
        let idx = |ls: usize, a1: usize, sg: usize, a2: usize, rr: usize| (((ls * 2 + a1) * s2 + sg) * 2 + a2) * r + rr;
        let mut v = [ZERO; 4];
        for ls in 0..l * s1 {
            for sg in 0..s2 {
                for rr in 0..r {
                    for (q, slot) in v.iter_mut().enumerate() {
                        *slot = theta[idx(ls, q / 2, sg, q % 2, rr)];
                    }
                    for q in 0..4 {
                        let row = &g[q * 4..q * 4 + 4];
                        out[idx(ls, q / 2, sg, q % 2, rr)] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
                    }
                }
            }
        }
        let theta = DenseTensor::new(vec![l * p1, p2 * r], out)?;
        let mut split = svd_truncate(&theta, d_max, cutoff)?;
        if renormalize && split.report.discarded_weight > 0.0 {
            let norm = split.s.iter().map(|s| s * s).sum::<f64>().sqrt();
            split.s.iter_mut().for_each(|s| *s /= norm);
        }
        let kept = split.s.len();
        let (mut u, mut v) = (split.u, split.v);
        if sweep_right {
            let vd = v.data_mut();
            for (i, s) in split.s.iter().enumerate() {
                vd[i * p2 * r..(i + 1) * p2 * r].iter_mut().for_each(|z| *z *= s);
            }
        } else {
            let ud = u.data_mut();
            for row in ud.chunks_mut(kept) {
                row.iter_mut().zip(&split.s).for_each(|(z, s)| *z *= s);
            }
        }
        let shape_a = with_bonds(&self.sites[left], l, kept);
        let shape_b = with_bonds(&self.sites[left + 1], kept, r);
        self.sites[left] = u.reshape(&shape_a)?;
        self.sites[left + 1] = v.reshape(&shape_b)?;
        self.center = Some(if sweep_right { left + 1 } else { left });
        Ok(split.report)
    }

    fn check_compatible(&self, other: &Chain) -> Result<()> {
        if self.len() != other.len() {
            return Err(invalid!("length mismatch: {} vs {}", self.len(), other.len()));
        }
        for k in 0..self.len() {
            if dims(&self.sites[k]).1 != dims(&other.sites[k]).1 {
                return Err(invalid!("physical extents differ at site {k}"));
            }
        }
        Ok(())
    }

    /// `<self|other>`, conjugating `self`.
    pub(crate) fn inner(&self, other: &Chain) -> Result<C64> {
        self.check_compatible(other)?;
        let mut env = vec![ONE];
        for (a, b) in self.sites.iter().zip(&other.sites) {
            env = step_left_env(&env, a, b);
        }
        Ok(env[0])
    }

    pub(crate) fn norm_sqr(&self) -> f64 {
        self.inner(self).expect("self-compatible").re
    }

    /// `<self| op_k at site j |other>` for every site `j` and every 2x2
    /// operator `op_k`, acting on the active index.
    pub(crate) fn local_insertions(&self, other: &Chain, ops: &[DenseTensor]) -> Result<Vec<Vec<C64>>> {
        self.check_compatible(other)?;
        let n = self.len();
        let mut lefts = Vec::with_capacity(n);
        lefts.push(vec![ONE]);
        for k in 0..n - 1 {
            let next = step_left_env(&lefts[k], &self.sites[k], &other.sites[k]);
            lefts.push(next);
        }
        let mut rights = vec![Vec::new(); n];
        rights[n - 1] = vec![ONE];
        for k in (1..n).rev() {
            rights[k - 1] = step_right_env(&rights[k], &self.sites[k], &other.sites[k]);
        }
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut row = Vec::with_capacity(ops.len());
            for op in ops {
                let mut single = Chain {
                    sites: vec![other.sites[k].clone()],
                    center: None,
                };
                // apply_one only needs the site tensor, not boundary bonds.
                single.apply_one(op, 0)?;
                let ket = &single.sites[0];
                let (l2, p, r2) = dims(ket);
                let (l1, _, r1) = dims(&self.sites[k]);
                let lk = matmul(&lefts[k], ket.data(), l1, l2, p * r2);
                // contract right bond with the right environment: R is (r1 x r2)
                let mut value = ZERO;
                let bra = self.sites[k].data();
                let renv = &rights[k];
                for i in 0..l1 * p {
                    for a in 0..r1 {
                        let mut acc = ZERO;
                        for b in 0..r2 {
                            acc += lk[i * r2 + b] * renv[a * r2 + b];
                        }
                        value += bra[i * r1 + a].conj() * acc;
                    }
                }
                row.push(value);
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Contracts the chain into a dense vector indexed by the fused physical
    /// indices, site 0 most significant.
    pub(crate) fn to_dense(&self) -> Vec<C64> {
        let mut vec = vec![ONE];
        let mut prefix = 1usize;
        let mut bond = 1usize;
        for t in &self.sites {
            let (l, p, r) = dims(t);
            debug_assert_eq!(l, bond);
            vec = matmul(&vec, t.data(), prefix, l, p * r);
            prefix *= p;
            bond = r;
        }
        vec
    }

    pub(crate) fn is_left_orthonormal(&self, k: usize, tol: f64) -> bool {
        let t = &self.sites[k];
        let (l, p, r) = dims(t);
        let g = matmul_adjoint_left(t.data(), t.data(), l * p, r, r);
        is_identity(&g, r, tol)
    }

    pub(crate) fn is_right_orthonormal(&self, k: usize, tol: f64) -> bool {
        let t = &self.sites[k];
        let (l, p, r) = dims(t);
        let m = DenseTensor::new(vec![l, p * r], t.data().to_vec()).unwrap();
        let g = m.matmul(&m.dagger().unwrap()).unwrap();
        is_identity(g.data(), l, tol)
    }

    pub(crate) fn scale(&mut self, factor: C64) {
        let k = self.center.unwrap_or(0);
        self.sites[k].data_mut().iter_mut().for_each(|z| *z *= factor);
    }
}

fn is_identity(g: &[C64], d: usize, tol: f64) -> bool {
    (0..d).all(|i| (0..d).all(|j| (g[i * d + j] - if i == j { ONE } else { ZERO }).norm() < tol))
}

/// `E'[r1, r2] = sum conj(a[l1, p, r1]) E[l1, l2] b[l2, p, r2]`.
fn step_left_env(env: &[C64], a: &DenseTensor, b: &DenseTensor) -> Vec<C64> {
    let (l1, p, r1) = dims(a);
    let (l2, _, r2) = dims(b);
    let tmp = matmul(env, b.data(), l1, l2, p * r2);
    matmul_adjoint_left(a.data(), &tmp, l1 * p, r1, r2)
}

/// `E[l1, l2] = sum conj(a[l1, p, r1]) b[l2, p, r2] E'[r1, r2]`.
fn step_right_env(env: &[C64], a: &DenseTensor, b: &DenseTensor) -> Vec<C64> {
    let (l1, p, r1) = dims(a);
    let (l2, _, r2) = dims(b);
    // tmp[l2, p, r1] = sum_r2 b[l2, p, r2] E'[r1, r2]
    let mut tmp = vec![ZERO; l2 * p * r1];
    let bd = b.data();
    for i in 0..l2 * p {
        for x in 0..r1 {
            let mut acc = ZERO;
            for y in 0..r2 {
                acc += bd[i * r2 + y] * env[x * r2 + y];
            }
            tmp[i * r1 + x] = acc;
        }
    }
    let ad = a.data();
    let mut out = vec![ZERO; l1 * l2];
    for x in 0..l1 {
        for y in 0..l2 {
            let mut acc = ZERO;
            let arow = &ad[x * p * r1..(x + 1) * p * r1];
            let trow = &tmp[y * p * r1..(y + 1) * p * r1];
            for (u, v) in arow.iter().zip(trow) {
                acc += u.conj() * v;
            }
            out[x * l2 + y] = acc;
        }
    }
    out
}
