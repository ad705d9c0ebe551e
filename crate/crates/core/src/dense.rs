//! Brute-force statevector and unitary propagation for small systems.
//!
//! Qubit 0 is the most significant bit of a basis index, matching
//! [`Mps::to_dense`](crate::Mps::to_dense) and
//! [`Mpo::to_dense`](crate::Mpo::to_dense).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::model::{CouplingPattern, ParasiticSample, PulseSchedule};
use crate::tebd::{build_circuit, SliceCircuit, TrotterSettings};
use crate::tensor::{DenseTensor, C64, ONE, ZERO};

pub const MAX_STATE_QUBITS: usize = 10;
pub const MAX_UNITARY_QUBITS: usize = 7;

/// `2^n` amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Vec<C64>,
}

/// `2^n x 2^n` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseUnitary {
    n: usize,
    data: Vec<C64>,
}

/// Column block acted on by gates: rows are basis indices, each column an
/// independent vector.
pub trait DenseOperand: Clone {
    fn qubits(&self) -> usize;
    fn columns(&self) -> usize;
    fn raw_mut(&mut self) -> &mut [C64];
    fn qubit_cap() -> usize;
}

impl DenseState {
    pub fn new(n: usize, amps: Vec<C64>) -> Result<Self> {
        if n == 0 || n > MAX_STATE_QUBITS {
            return Err(invalid!("dense states support 1..={MAX_STATE_QUBITS} qubits, got {n}"));
        }
        if amps.len() != 1 << n {
            return Err(invalid!("expected {} amplitudes, got {}", 1usize << n, amps.len()));
        }
        Ok(Self { n, amps })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        let mut amps = vec![ZERO; 1 << n.min(MAX_STATE_QUBITS + 1)];
        if index >= amps.len() {
            return Err(invalid!("basis index {index} out of range"));
        }
        amps[index] = ONE;
        Self::new(n, amps)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

impl DenseUnitary {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_UNITARY_QUBITS {
            return Err(invalid!("dense unitaries support 1..={MAX_UNITARY_QUBITS} qubits, got {n}"));
        }
        Ok(Self {
            n,
            data: DenseTensor::identity(1 << n).into_data(),
        })
    }

    pub fn from_matrix(m: &DenseTensor) -> Result<Self> {
        let dim = m.shape()[0];
        if m.rank() != 2 || m.shape()[1] != dim || !dim.is_power_of_two() {
            return Err(invalid!("expected a square 2^n matrix, got {:?}", m.shape()));
        }
        let n = dim.trailing_zeros() as usize;
        if n == 0 || n > MAX_UNITARY_QUBITS {
            return Err(invalid!("dense unitaries support 1..={MAX_UNITARY_QUBITS} qubits, got {n}"));
        }
        Ok(Self { n, data: m.data().to_vec() })
    }

    pub fn to_matrix(&self) -> DenseTensor {
        let dim = 1 << self.n;
        DenseTensor::new(vec![dim, dim], self.data.clone()).expect("square")
    }

    /// `tr(self† other) / 2^n`.
    pub fn trace_overlap(&self, other: &Self) -> C64 {
        let s: C64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        s / (1u64 << self.n) as f64
    }
}

impl DenseOperand for DenseState {
    fn qubits(&self) -> usize {
        self.n
    }
    fn columns(&self) -> usize {
        1
    }
    fn raw_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }
    fn qubit_cap() -> usize {
        MAX_STATE_QUBITS
    }
}

impl DenseOperand for DenseUnitary {
    fn qubits(&self) -> usize {
        self.n
    }
    fn columns(&self) -> usize {
        1 << self.n
    }
    fn raw_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }
    fn qubit_cap() -> usize {
        MAX_UNITARY_QUBITS
    }
}

/// Applies a 2x2 gate on `qubit` to every column.
pub fn apply_one<T: DenseOperand>(op: &mut T, gate: &DenseTensor, qubit: usize) {
    let n = op.qubits();
    let cols = op.columns();
    let bit = 1usize << (n - 1 - qubit);
    let g = gate.data();
    let data = op.raw_mut();
    for row in 0..1usize << n {
        if row & bit != 0 {
            continue;
        }
        let (r0, r1) = (row * cols, (row | bit) * cols);
        for c in 0..cols {
            let (v0, v1) = (data[r0 + c], data[r1 + c]);
            data[r0 + c] = g[0] * v0 + g[1] * v1;
            data[r1 + c] = g[2] * v0 + g[3] * v1;
        }
    }
}

/// Applies a 4x4 gate on `(left, left + 1)` to every column.
pub fn apply_two<T: DenseOperand>(op: &mut T, gate: &DenseTensor, left: usize) {
    let n = op.qubits();
    let cols = op.columns();
    let hi = 1usize << (n - 1 - left);
    let lo = 1usize << (n - 2 - left);
    let g = gate.data();
    let data = op.raw_mut();
    let mut v = [ZERO; 4];
    for row in 0..1usize << n {
        if row & (hi | lo) != 0 {
            continue;
        }
        let rows = [row, row | lo, row | hi, row | hi | lo];
        for c in 0..cols {
            for (k, r) in rows.iter().enumerate() {
                v[k] = data[r * cols + c];
            }
            for (k, r) in rows.iter().enumerate() {
                let gr = &g[k * 4..k * 4 + 4];
                data[r * cols + c] = gr[0] * v[0] + gr[1] * v[1] + gr[2] * v[2] + gr[3] * v[3];
            }
        }
    }
}

/// Applies one slice: bond gates left to right, then Y, then X.
pub fn apply_slice<T: DenseOperand>(op: &mut T, slice: &SliceCircuit) {
    for (j, g) in slice.v_gates.iter().enumerate() {
        apply_two(op, g, j);
    }
    for (j, g) in slice.y_gates.iter().enumerate() {
        apply_one(op, g, j);
    }
    for (j, g) in slice.x_gates.iter().enumerate() {
        apply_one(op, g, j);
    }
}

/// Exact propagation through the same slice circuit the tensor-network
/// propagator uses.
pub fn dense_propagate<T: DenseOperand>(
    initial: &T,
    schedule: &PulseSchedule,
    coupling: &CouplingPattern,
    sample: &ParasiticSample,
    substeps: usize,
) -> Result<T> {
    let n = initial.qubits();
    if n > T::qubit_cap() {
        return Err(invalid!("dense propagation is capped at {} qubits, got {n}", T::qubit_cap()));
    }
    if schedule.n() != n {
        return Err(invalid!("operand has {n} qubits, schedule has {}", schedule.n()));
    }
    let settings = TrotterSettings {
        substeps,
        ..TrotterSettings::new(2)
    };
    let slices = build_circuit(schedule, coupling, sample, &settings)?;
    let mut out = initial.clone();
    for s in &slices {
        apply_slice(&mut out, s);
    }
    Ok(out)
}

/// Lowest eigenpair of a dense Hermitian matrix.
pub fn exact_ground(h: &DenseTensor) -> Result<(f64, Vec<C64>)> {
    if h.rank() != 2 || h.shape()[0] != h.shape()[1] {
        return Err(invalid!("expected a square matrix, got {:?}", h.shape()));
    }
    let dim = h.shape()[0];
    if dim > 1 << MAX_STATE_QUBITS {
        return Err(invalid!("exact diagonalization is capped at {MAX_STATE_QUBITS} qubits"));
    }
    let scale = h.frobenius_norm().max(1.0);
    if h.max_abs_diff(&h.dagger()?) > 1e-12 * scale {
        return Err(invalid!("matrix is not Hermitian"));
    }
    // Real symmetric embedding [[Re, -Im], [Im, Re]]: same spectrum, each
    // eigenvalue doubled, and (u, v) maps back to the eigenvector u + i v.
    let d = h.data();
    let big = DMatrix::from_fn(2 * dim, 2 * dim, |i, j| {
        let z = d[(i % dim) * dim + j % dim];
        match (i < dim, j < dim) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = SymmetricEigen::new(big);
    let (idx, energy) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best });
    let col = eig.eigenvectors.column(idx);
    let mut state: Vec<C64> = (0..dim).map(|k| C64::new(col[k], col[k + dim])).collect();
    let norm = state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    state.iter_mut().for_each(|z| *z /= norm);
    Ok((energy, state))
}
