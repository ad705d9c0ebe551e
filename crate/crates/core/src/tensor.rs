//! Dense complex tensor kernels.
//!
//! Tensors are stored row-major: the last axis varies fastest. Every
//! tensor-network routine in the crate is built from the handful of kernels
//! here (contraction, permutation, QR, truncated SVD) plus the closed-form
//! gate constructors used by the Trotter circuit.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, numerical, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(invalid!(
                "shape {:?} needs {} entries, got {}",
                shape,
                len,
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![ZERO; len],
        }
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(&[dim, dim]);
        for i in 0..dim {
            t.data[i * dim + i] = ONE;
        }
        t
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut index = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&index));
            for axis in (0..shape.len()).rev() {
                index[axis] += 1;
                if index[axis] < shape[axis] {
                    break;
                }
                index[axis] = 0;
            }
        }
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    /// Row-major matrix from nested rows.
    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid!("ragged rows"));
        }
        Self::new(vec![m, n], rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: C64) {
        let k = self.offset(index);
        self.data[k] = value;
    }

    /// Reinterprets the row-major data with a new shape of equal size.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(invalid!(
                "cannot reshape {:?} into {:?}",
                self.shape,
                shape
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Reorders axes: axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(invalid!("{:?} is not a permutation of {} axes", axes, rank));
        }
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return Ok(self.clone());
        }
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let mut strides = vec![1usize; rank];
        for k in (0..rank.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.shape[k + 1];
        }
        let src_strides: Vec<usize> = axes.iter().map(|&a| strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut index = vec![0usize; rank];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[src]);
            for axis in (0..rank).rev() {
                index[axis] += 1;
                src += src_strides[axis];
                if index[axis] < new_shape[axis] {
                    break;
                }
                src -= src_strides[axis] * new_shape[axis];
                index[axis] = 0;
            }
        }
        Ok(Self {
            shape: new_shape,
            data,
        })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Conjugate transpose of a matrix.
    pub fn dagger(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(invalid!("dagger needs a matrix, got shape {:?}", self.shape));
        }
        Ok(self.permute(&[1, 0])?.conj())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(invalid!(
                "matmul shape mismatch {:?} x {:?}",
                self.shape,
                other.shape
            ));
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        Ok(Self {
            shape: vec![m, n],
            data: matmul(&self.data, &other.data, m, k, n),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |(G†G - I)_{ij}|` for a square matrix.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.dagger().expect("matrix").matmul(self).expect("square");
        g.max_abs_diff(&Self::identity(self.shape[0]))
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.shape[0], self.shape[1], &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self {
            shape: vec![rows, cols],
            data,
        }
    }
}

/// Row-major `(m x k) * (k x n)`.
pub(crate) fn matmul(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![ZERO; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == ZERO {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

/// Row-major `(k x m)^† * (k x n)`, i.e. `conj(a)^T b`.
pub(crate) fn matmul_adjoint_left(a: &[C64], b: &[C64], k: usize, m: usize, n: usize) -> Vec<C64> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![ZERO; m * n];
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let a_pi = a[p * m + i].conj();
            if a_pi == ZERO {
                continue;
            }
            let row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += a_pi * bv;
            }
        }
    }
    out
}

/// Sums over paired axes of `a` and `b`.
///
/// The result carries the unpaired axes of `a` (in order) followed by the
/// unpaired axes of `b`.
pub fn contract(a: &DenseTensor, b: &DenseTensor, axes_a: &[usize], axes_b: &[usize]) -> Result<DenseTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(invalid!("axis lists differ in length"));
    }
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        if x >= a.rank() || y >= b.rank() {
            return Err(invalid!("axis out of range ({x}, {y})"));
        }
        if a.shape[x] != b.shape[y] {
            return Err(invalid!(
                "paired axes have extents {} and {}",
                a.shape[x],
                b.shape[y]
            ));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|k| !axes_a.contains(k)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|k| !axes_b.contains(k)).collect();
    let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let perm_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
    let m: usize = free_a.iter().map(|&k| a.shape[k]).product();
    let k: usize = axes_a.iter().map(|&x| a.shape[x]).product();
    let n: usize = free_b.iter().map(|&x| b.shape[x]).product();
    let pa = a.permute(&perm_a)?;
    let pb = b.permute(&perm_b)?;
    let shape: Vec<usize> = free_a
        .iter()
        .map(|&x| a.shape[x])
        .chain(free_b.iter().map(|&x| b.shape[x]))
        .collect();
    DenseTensor::new(shape, matmul(&pa.data, &pb.data, m, k, n))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub kept_rank: usize,
    /// Sum of squared discarded singular values.
    pub discarded_weight: f64,
    pub largest_discarded: f64,
}

impl TruncationReport {
    pub fn merge(&mut self, other: &TruncationReport) {
        self.kept_rank = self.kept_rank.max(other.kept_rank);
        self.discarded_weight += other.discarded_weight;
        self.largest_discarded = self.largest_discarded.max(other.largest_discarded);
    }
}

/// Result of [`svd_truncate`]: `m ≈ u · diag(s) · v`.
#[derive(Clone, Debug)]
pub struct SvdSplit {
    /// `rows x kept`, orthonormal columns.
    pub u: DenseTensor,
    /// Descending.
    pub s: Vec<f64>,
    /// `kept x cols`, orthonormal rows.
    pub v: DenseTensor,
    pub report: TruncationReport,
}

/// Truncated singular value decomposition of a matrix.
///
/// Keeps `min(d_max, #{s_i > cutoff * s_1}, rank)` singular values, never
/// fewer than one.
pub fn svd_truncate(m: &DenseTensor, d_max: usize, cutoff: f64) -> Result<SvdSplit> {
    if d_max < 1 {
        return Err(invalid!("d_max must be at least 1"));
    }
    if m.rank() != 2 {
        return Err(invalid!("svd_truncate needs a matrix, got shape {:?}", m.shape));
    }
    if !(cutoff >= 0.0) {
        return Err(invalid!("cutoff must be non-negative, got {cutoff}"));
    }
    if !m.is_finite() {
        return Err(numerical!("svd input contains non-finite entries"));
    }
    let (rows, cols) = (m.shape[0], m.shape[1]);
    let (u_full, singular, vt_full) = full_svd(&m.to_nalgebra())
        .ok_or_else(|| numerical!("svd of {rows}x{cols} matrix did not converge"))?;
    let full = singular.len();
    let mut order: Vec<usize> = (0..full).collect();
    // Stable sort: ties keep their position.
    order.sort_by(|&i, &j| singular[j].total_cmp(&singular[i]));
    let sorted: Vec<f64> = order.iter().map(|&i| singular[i]).collect();

    let threshold = cutoff * sorted.first().copied().unwrap_or(0.0);
    let above = sorted.iter().take_while(|&&s| s > threshold).count();
    let keep = d_max.min(above).min(full).max(1);

    let discarded = &sorted[keep..];
    let report = TruncationReport {
        kept_rank: keep,
        discarded_weight: discarded.iter().map(|s| s * s).sum(),
        largest_discarded: discarded.first().copied().unwrap_or(0.0),
    };

    let mut u = Vec::with_capacity(rows * keep);
    for i in 0..rows {
        for &k in &order[..keep] {
            u.push(u_full[(i, k)]);
        }
    }
    let mut v = Vec::with_capacity(keep * cols);
    for &k in &order[..keep] {
        for j in 0..cols {
            v.push(vt_full[(k, j)]);
        }
    }
    Ok(SvdSplit {
        u: DenseTensor::new(vec![rows, keep], u)?,
        s: sorted[..keep].to_vec(),
        v: DenseTensor::new(vec![keep, cols], v)?,
        report,
    })
}

/// Thin SVD `m = u · diag(s) · v_t`, unsorted.
///
/// nalgebra's bidiagonal solver occasionally returns inconsistent factors
/// for rank-deficient complex input, so its result is checked against `m`
/// and replaced by a one-sided Jacobi decomposition when the check fails.
fn full_svd(m: &DMatrix<C64>) -> Option<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let scale = m.norm();
    if scale == 0.0 {
        return jacobi_svd(m);
    }
    if let Some(svd) = m.clone().try_svd(true, true, 1e-13, 10_000) {
        let (u, vt) = (svd.u?, svd.v_t?);
        let s: Vec<f64> = svd.singular_values.iter().copied().collect();
        let mut us = u.clone();
        for (j, sv) in s.iter().enumerate() {
            us.column_mut(j).scale_mut(*sv);
        }
        if (us * &vt - m).norm() <= 1e-11 * scale {
            return Some((u, s, vt));
        }
    }
    jacobi_svd(m)
}

/// One-sided (Hestenes) Jacobi SVD.
fn jacobi_svd(m: &DMatrix<C64>) -> Option<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let (rows, cols) = m.shape();
    if rows < cols {
        let (u, s, vt) = jacobi_svd(&m.adjoint())?;
        return Some((vt.adjoint(), s, u.adjoint()));
    }
    let mut w = m.clone();
    let mut v = DMatrix::<C64>::identity(cols, cols);
    let tol = f64::EPSILON * rows as f64;
    let mut converged = false;
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let a = mat[(i, p)];
                        let b = mat[(i, q)] * phase;
                        mat[(i, p)] = a * c - b * sn;
                        mat[(i, q)] = a * sn + b * c;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let mut s = Vec::with_capacity(cols);
    let mut u = DMatrix::<C64>::zeros(rows, cols);
    for j in 0..cols {
        let nj = w.column(j).norm();
        s.push(nj);
        if nj > 0.0 {
            u.set_column(j, &(w.column(j) / C64::new(nj, 0.0)));
        }
    }
    // Null columns: complete to an orthonormal set.
    let biggest = s.iter().copied().fold(0.0, f64::max);
    for j in 0..cols {
        if s[j] > f64::EPSILON * biggest && s[j] > 0.0 {
            continue;
        }
        for e in 0..rows {
            let mut col = nalgebra::DVector::<C64>::zeros(rows);
            col[e] = ONE;
            for k in 0..cols {
                if k != j && u.column(k).norm() > 0.5 {
                    let proj = u.column(k).dotc(&col);
                    col -= u.column(k) * proj;
                }
            }
            let n = col.norm();
            if n > 1e-3 {
                u.set_column(j, &(col / C64::new(n, 0.0)));
                break;
            }
        }
    }
    Some((u, s, v.adjoint()))
}

/// Thin QR decomposition `m = q · r` with `q` having orthonormal columns.
pub fn qr(m: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    if m.rank() != 2 {
        return Err(invalid!("qr needs a matrix, got shape {:?}", m.shape));
    }
    let qr = m.to_nalgebra().qr();
    Ok((
        DenseTensor::from_nalgebra(&qr.q()),
        DenseTensor::from_nalgebra(&qr.r()),
    ))
}

/// Thin LQ decomposition `m = l · q` with `q` having orthonormal rows.
pub fn lq(m: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    let (q, r) = qr(&m.dagger()?)?;
    Ok((r.dagger()?, q.dagger()?))
}

pub mod pauli {
    use super::{DenseTensor, C64, I, ONE, ZERO};

    pub fn id() -> DenseTensor {
        DenseTensor::identity(2)
    }

    pub fn x() -> DenseTensor {
        DenseTensor::new(vec![2, 2], vec![ZERO, ONE, ONE, ZERO]).unwrap()
    }

    pub fn y() -> DenseTensor {
        DenseTensor::new(vec![2, 2], vec![ZERO, -I, I, ZERO]).unwrap()
    }

    pub fn z() -> DenseTensor {
        DenseTensor::new(vec![2, 2], vec![ONE, ZERO, ZERO, -ONE]).unwrap()
    }

    /// Kronecker product of two single-qubit operators (left factor is the
    /// more significant qubit).
    pub fn kron(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
        let (da, db) = (a.shape()[0], b.shape()[0]);
        let d = da * db;
        DenseTensor::from_fn(&[d, d], |ix| -> C64 {
            let (r, c) = (ix[0], ix[1]);
            a.get(&[r / db, c / db]) * b.get(&[r % db, c % db])
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    Y,
}

/// `exp(-i·amp·dt·P)` for the Pauli `P` of the given quadrature.
pub fn single_quadrature_gate(amp: f64, dt: f64, axis: Quadrature) -> DenseTensor {
    let theta = amp * dt;
    let (c, s) = (theta.cos(), theta.sin());
    let diag = C64::new(c, 0.0);
    let data = match axis {
        // cos I - i sin X
        Quadrature::X => vec![diag, C64::new(0.0, -s), C64::new(0.0, -s), diag],
        // cos I - i sin Y, with -iY = [[0, -1], [1, 0]]
        Quadrature::Y => vec![diag, C64::new(-s, 0.0), C64::new(s, 0.0), diag],
    };
    DenseTensor::new(vec![2, 2], data).unwrap()
}

/// `exp(-i·dt·(jx·XX + jy·YY + (g + jz)·ZZ))` on two qubits.
///
/// XX, YY and ZZ commute and are simultaneously diagonal in the Bell basis,
/// with eigenvalue signs (XX, YY, ZZ) = (+,-,+) on Φ+, (-,+,+) on Φ-,
/// (+,+,-) on Ψ+ and (-,-,-) on Ψ-.
pub fn bond_gate(g: f64, jx: f64, jy: f64, jz: f64, dt: f64) -> DenseTensor {
    let zz = g + jz;
    let phase = |e: f64| C64::from_polar(1.0, -dt * e);
    let phi_plus = phase(jx - jy + zz);
    let phi_minus = phase(-jx + jy + zz);
    let psi_plus = phase(jx + jy - zz);
    let psi_minus = phase(-jx - jy - zz);
    let (a, b) = ((phi_plus + phi_minus) * 0.5, (phi_plus - phi_minus) * 0.5);
    let (c, d) = ((psi_plus + psi_minus) * 0.5, (psi_plus - psi_minus) * 0.5);
    #[rustfmt::skip]
    let data = vec![
        a,    ZERO, ZERO, b,
        ZERO, c,    d,    ZERO,
        ZERO, d,    c,    ZERO,
        b,    ZERO, ZERO, a,
    ];
    DenseTensor::new(vec![4, 4], data).unwrap()
}
