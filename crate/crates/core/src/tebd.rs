//! Trotterized propagation of states and unitaries.
//!
//! One bin of the schedule is one slice `U_l = X_l · Y_l · V_l`: the bond
//! gates `V_l` are applied first, left to right, then the Y rotations, then
//! the X rotations. The adjoint slice runs the same layers in reverse.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::ensemble::ParasiticSample;
use crate::model::schedule::{CouplingPattern, PulseSchedule};
use crate::mpo::Mpo;
use crate::mps::Mps;
use crate::tensor::{bond_gate, single_quadrature_gate, DenseTensor, Quadrature, TruncationReport, C64};

pub const DEFAULT_CUTOFF: f64 = 1e-12;

/// Anything that can be pushed through a slice circuit: states and
/// unitaries.
pub trait Evolvable: Clone + Send + Sync {
    fn num_sites(&self) -> usize;
    fn gate_one(&mut self, gate: &DenseTensor, site: usize) -> Result<()>;
    fn gate_two(&mut self, gate: &DenseTensor, left: usize, d_max: usize, cutoff: f64) -> Result<TruncationReport>;
    /// Normalized overlap: `<self|other>` for states, `tr(self† other)/2^n`
    /// for operators.
    fn fidelity_overlap(&self, other: &Self) -> Result<C64>;
    /// Normalized overlaps with each operator inserted at each site.
    fn local_overlaps(&self, other: &Self, ops: &[DenseTensor]) -> Result<Vec<Vec<C64>>>;
}

impl Evolvable for Mps {
    fn num_sites(&self) -> usize {
        self.len()
    }
    fn gate_one(&mut self, gate: &DenseTensor, site: usize) -> Result<()> {
        self.apply_one_site(gate, site)
    }
    fn gate_two(&mut self, gate: &DenseTensor, left: usize, d_max: usize, cutoff: f64) -> Result<TruncationReport> {
        self.apply_two_site(gate, left, d_max, cutoff)
    }
    fn fidelity_overlap(&self, other: &Self) -> Result<C64> {
        self.overlap(other)
    }
    fn local_overlaps(&self, other: &Self, ops: &[DenseTensor]) -> Result<Vec<Vec<C64>>> {
        self.chain().local_insertions(other.chain(), ops)
    }
}

impl Evolvable for Mpo {
    fn num_sites(&self) -> usize {
        self.len()
    }
    fn gate_one(&mut self, gate: &DenseTensor, site: usize) -> Result<()> {
        self.apply_one_site(gate, site)
    }
    fn gate_two(&mut self, gate: &DenseTensor, left: usize, d_max: usize, cutoff: f64) -> Result<TruncationReport> {
        self.apply_two_site(gate, left, d_max, cutoff)
    }
    fn fidelity_overlap(&self, other: &Self) -> Result<C64> {
        self.trace_overlap(other)
    }
    fn local_overlaps(&self, other: &Self, ops: &[DenseTensor]) -> Result<Vec<Vec<C64>>> {
        let scale = 0.5f64.powi(self.len() as i32);
        let mut out = self.chain().local_insertions(other.chain(), ops)?;
        out.iter_mut().flatten().for_each(|z| *z *= scale);
        Ok(out)
    }
}

/// Bond cap, relative SVD cutoff and number of Trotter slices per bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterSettings {
    pub d_max: usize,
    pub cutoff: f64,
    pub substeps: usize,
}

impl TrotterSettings {
    pub fn new(d_max: usize) -> Self {
        Self {
            d_max,
            cutoff: DEFAULT_CUTOFF,
            substeps: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d_max < 2 {
            return Err(invalid!("bond cap must be at least 2, got {}", self.d_max));
        }
        if self.substeps < 1 {
            return Err(invalid!("at least one Trotter slice per bin is required"));
        }
        if !(self.cutoff >= 0.0) {
            return Err(invalid!("cutoff must be non-negative"));
        }
        Ok(())
    }
}

/// Gates of one Trotter slice.
#[derive(Clone, Debug)]
pub struct SliceCircuit {
    pub v_gates: Vec<DenseTensor>,
    pub y_gates: Vec<DenseTensor>,
    pub x_gates: Vec<DenseTensor>,
}

fn dagger(g: &DenseTensor) -> DenseTensor {
    g.dagger().expect("gate is a matrix")
}

impl SliceCircuit {
    pub fn apply_v_layer<S: Evolvable>(&self, s: &mut S, d_max: usize, cutoff: f64) -> Result<TruncationReport> {
        let mut report = TruncationReport::default();
        for (j, g) in self.v_gates.iter().enumerate() {
            report.merge(&s.gate_two(g, j, d_max, cutoff)?);
        }
        Ok(report)
    }

    pub fn apply_y_layer<S: Evolvable>(&self, s: &mut S) -> Result<()> {
        self.y_gates.iter().enumerate().try_for_each(|(j, g)| s.gate_one(g, j))
    }

    pub fn apply_x_layer<S: Evolvable>(&self, s: &mut S) -> Result<()> {
        self.x_gates.iter().enumerate().try_for_each(|(j, g)| s.gate_one(g, j))
    }

    pub fn apply_x_layer_adjoint<S: Evolvable>(&self, s: &mut S) -> Result<()> {
        self.x_gates.iter().enumerate().try_for_each(|(j, g)| s.gate_one(&dagger(g), j))
    }

    pub fn apply<S: Evolvable>(&self, s: &mut S, d_max: usize, cutoff: f64) -> Result<TruncationReport> {
        let report = self.apply_v_layer(s, d_max, cutoff)?;
        self.apply_y_layer(s)?;
        self.apply_x_layer(s)?;
        Ok(report)
    }

    /// Applies `U_l†`.
    pub fn apply_adjoint<S: Evolvable>(&self, s: &mut S, d_max: usize, cutoff: f64) -> Result<TruncationReport> {
        self.apply_x_layer_adjoint(s)?;
        self.apply_y_layer_adjoint(s)?;
        self.apply_v_layer_adjoint(s, d_max, cutoff)
    }

    pub fn apply_y_layer_adjoint<S: Evolvable>(&self, s: &mut S) -> Result<()> {
        self.y_gates.iter().enumerate().try_for_each(|(j, g)| s.gate_one(&dagger(g), j))
    }

    pub fn apply_v_layer_adjoint<S: Evolvable>(&self, s: &mut S, d_max: usize, cutoff: f64) -> Result<TruncationReport> {
        let mut report = TruncationReport::default();
        for (j, g) in self.v_gates.iter().enumerate().rev() {
            report.merge(&s.gate_two(&dagger(g), j, d_max, cutoff)?);
        }
        Ok(report)
    }
}

fn check_shapes(schedule: &PulseSchedule, coupling: &CouplingPattern, sample: &ParasiticSample) -> Result<()> {
    let bonds = schedule.n() - 1;
    if coupling.bonds() != bonds {
        return Err(invalid!("coupling has {} bonds, schedule needs {bonds}", coupling.bonds()));
    }
    if sample.jx.len() != bonds || sample.jy.len() != bonds || sample.jz.len() != bonds {
        return Err(invalid!("parasitic sample does not match {bonds} bonds"));
    }
    Ok(())
}

/// Circuit for bin `bin` (0-based) with slice width `dt`.
pub fn build_slice_with_dt(
    schedule: &PulseSchedule,
    bin: usize,
    coupling: &CouplingPattern,
    sample: &ParasiticSample,
    dt: f64,
) -> Result<SliceCircuit> {
    if bin >= schedule.bins() {
        return Err(invalid!("bin {bin} out of range for {} bins", schedule.bins()));
    }
    check_shapes(schedule, coupling, sample)?;
    let n = schedule.n();
    let v_gates = (0..n - 1)
        .map(|j| bond_gate(coupling.g[j], sample.jx[j], sample.jy[j], sample.jz[j], dt))
        .collect();
    let y_gates = (0..n)
        .map(|j| single_quadrature_gate(schedule.y(j, bin), dt, Quadrature::Y))
        .collect();
    let x_gates = (0..n)
        .map(|j| single_quadrature_gate(schedule.x(j, bin), dt, Quadrature::X))
        .collect();
    Ok(SliceCircuit { v_gates, y_gates, x_gates })
}

/// Circuit for bin `bin` (0-based) with the schedule's bin width.
pub fn build_slice(schedule: &PulseSchedule, bin: usize, coupling: &CouplingPattern, sample: &ParasiticSample) -> Result<SliceCircuit> {
    build_slice_with_dt(schedule, bin, coupling, sample, schedule.dt())
}

/// All slices in time order; bin `l` contributes `substeps` identical slices.
pub fn build_circuit(
    schedule: &PulseSchedule,
    coupling: &CouplingPattern,
    sample: &ParasiticSample,
    settings: &TrotterSettings,
) -> Result<Vec<SliceCircuit>> {
    settings.validate()?;
    check_shapes(schedule, coupling, sample)?;
    let dt = schedule.dt() / settings.substeps as f64;
    let mut slices = Vec::with_capacity(schedule.bins() * settings.substeps);
    for l in 0..schedule.bins() {
        let c = build_slice_with_dt(schedule, l, coupling, sample, dt)?;
        for _ in 1..settings.substeps {
            slices.push(c.clone());
        }
        slices.push(c);
    }
    Ok(slices)
}

/// Snapshots recorded during forward propagation.
#[derive(Clone, Debug)]
pub struct ForwardTape<S> {
    /// `a_0 ... a_L`: the state after each slice, `a_0` the initial one.
    pub forward: Vec<S>,
    /// For each slice, the state after its V and Y layers.
    pub after_y: Vec<S>,
}

#[derive(Clone, Debug)]
pub struct Propagation<S> {
    pub final_state: S,
    pub tape: Option<ForwardTape<S>>,
    pub discarded_weight: f64,
}

fn check_sites<S: Evolvable>(s: &S, schedule: &PulseSchedule) -> Result<()> {
    if s.num_sites() != schedule.n() {
        return Err(invalid!("network has {} sites, schedule has {} qubits", s.num_sites(), schedule.n()));
    }
    Ok(())
}

pub fn propagate<S: Evolvable>(
    initial: &S,
    schedule: &PulseSchedule,
    coupling: &CouplingPattern,
    sample: &ParasiticSample,
    settings: &TrotterSettings,
    keep_tape: bool,
) -> Result<Propagation<S>> {
    check_sites(initial, schedule)?;
    let slices = build_circuit(schedule, coupling, sample, settings)?;
    propagate_slices(initial, &slices, settings, keep_tape)
}

fn propagate_slices<S: Evolvable>(initial: &S, slices: &[SliceCircuit], settings: &TrotterSettings, keep_tape: bool) -> Result<Propagation<S>> {
    let mut state = initial.clone();
    let mut discarded = 0.0;
    let mut tape = keep_tape.then(|| ForwardTape {
        forward: vec![initial.clone()],
        after_y: Vec::with_capacity(slices.len()),
    });
    for slice in slices {
        discarded += slice.apply_v_layer(&mut state, settings.d_max, settings.cutoff)?.discarded_weight;
        slice.apply_y_layer(&mut state)?;
        if let Some(t) = tape.as_mut() {
            t.after_y.push(state.clone());
        }
        slice.apply_x_layer(&mut state)?;
        if let Some(t) = tape.as_mut() {
            t.forward.push(state.clone());
        }
    }
    Ok(Propagation {
        final_state: state,
        tape,
        discarded_weight: discarded,
    })
}

/// Pulls `target` back through the slice adjoints.
///
/// Returns `b_0 ... b_L` with `b_L = target` and `b_l = U_l† b_{l+1}`, so
/// that `<b_l|a_l>` is the same for every `l` up to truncation.
pub fn propagate_backward<S: Evolvable>(
    target: &S,
    schedule: &PulseSchedule,
    coupling: &CouplingPattern,
    sample: &ParasiticSample,
    settings: &TrotterSettings,
) -> Result<Vec<S>> {
    check_sites(target, schedule)?;
    let slices = build_circuit(schedule, coupling, sample, settings)?;
    backward_slices(target, &slices, settings)
}

fn backward_slices<S: Evolvable>(target: &S, slices: &[SliceCircuit], settings: &TrotterSettings) -> Result<Vec<S>> {
    let mut out = vec![target.clone(); slices.len() + 1];
    let mut state = target.clone();
    for (q, slice) in slices.iter().enumerate().rev() {
        slice.apply_adjoint(&mut state, settings.d_max, settings.cutoff)?;
        out[q] = state.clone();
    }
    Ok(out)
}

/// Forward and backward caches for exact overlap gradients.
#[derive(Clone, Debug)]
pub struct GradientTape<S> {
    pub forward: Vec<S>,
    pub after_y: Vec<S>,
    pub backward: Vec<S>,
    pub slices: Vec<SliceCircuit>,
    /// Slice width (bin width divided by the number of substeps).
    pub slice_dt: f64,
    pub substeps: usize,
    pub discarded_weight: f64,
}

impl<S: Evolvable> GradientTape<S> {
    pub fn record(
        initial: &S,
        target: &S,
        schedule: &PulseSchedule,
        coupling: &CouplingPattern,
        sample: &ParasiticSample,
        settings: &TrotterSettings,
    ) -> Result<Self> {
        check_sites(initial, schedule)?;
        check_sites(target, schedule)?;
        let slices = build_circuit(schedule, coupling, sample, settings)?;
        let prop = propagate_slices(initial, &slices, settings, true)?;
        let tape = prop.tape.expect("tape requested");
        let backward = backward_slices(target, &slices, settings)?;
        Ok(Self {
            forward: tape.forward,
            after_y: tape.after_y,
            backward,
            slices,
            slice_dt: schedule.dt() / settings.substeps as f64,
            substeps: settings.substeps,
            discarded_weight: prop.discarded_weight,
        })
    }

    pub fn final_state(&self) -> &S {
        self.forward.last().expect("tape holds the initial state")
    }

    /// `<target|final>` (normalized).
    pub fn overlap(&self) -> Result<C64> {
        self.backward.last().expect("tape holds the target").fidelity_overlap(self.final_state())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::pauli;
    use std::f64::consts::PI;

    #[test]
    fn zero_slice_is_identity() {
        let s = PulseSchedule::zeros(3, 1, 0.2).unwrap();
        let c = build_slice(&s, 0, &CouplingPattern::zero(3), &ParasiticSample::zero(3)).unwrap();
        for g in c.v_gates.iter() {
            assert!(g.max_abs_diff(&DenseTensor::identity(4)) < 1e-15);
        }
        for g in c.x_gates.iter().chain(&c.y_gates) {
            assert!(g.max_abs_diff(&DenseTensor::identity(2)) < 1e-15);
        }
        assert!(build_slice(&s, 1, &CouplingPattern::zero(3), &ParasiticSample::zero(3)).is_err());
    }

    #[test]
    fn single_x_pulse_acts_as_minus_i_x() {
        let mut s = PulseSchedule::zeros(2, 1, 0.5).unwrap();
        s.set(Quadrature::X, 0, 0, PI);
        let mut u = Mpo::identity(2).unwrap();
        let c = build_slice(&s, 0, &CouplingPattern::zero(2), &ParasiticSample::zero(2)).unwrap();
        c.apply(&mut u, 4, 0.0).unwrap();
        let expected = pauli::kron(&pauli::x(), &pauli::id()).scale(C64::new(0.0, -1.0));
        assert!(u.to_dense().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn identity_schedule_leaves_state() {
        let s = PulseSchedule::zeros(4, 5, 0.1).unwrap();
        let psi = Mps::product_state(&[0; 4]).unwrap();
        let p = propagate(&psi, &s, &CouplingPattern::zero(4), &ParasiticSample::zero(4), &TrotterSettings::new(8), true).unwrap();
        assert!((p.final_state.overlap(&psi).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(p.tape.unwrap().forward.len(), 6);
        let back = propagate_backward(&psi, &s, &CouplingPattern::zero(4), &ParasiticSample::zero(4), &TrotterSettings::new(8)).unwrap();
        assert!(back.iter().all(|b| (b.overlap(&psi).unwrap().norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn pi_pulse_gives_parallel_x() {
        let n = 5;
        let bins = 10;
        let t = PI / 2.0;
        let s = PulseSchedule::constant(n, bins, t / bins as f64, 1.0, 0.0).unwrap();
        let p = propagate(&Mpo::identity(n).unwrap(), &s, &CouplingPattern::zero(n), &ParasiticSample::zero(n), &TrotterSettings::new(20), false).unwrap();
        let ov = p.final_state.trace_overlap(&Mpo::parallel_x(n).unwrap()).unwrap();
        assert!(ov.norm() > 1.0 - 1e-10);
    }

    #[test]
    fn rejects_small_bond_cap() {
        let s = PulseSchedule::zeros(2, 1, 0.1).unwrap();
        let r = propagate(&Mps::product_state(&[0, 0]).unwrap(), &s, &CouplingPattern::zero(2), &ParasiticSample::zero(2), &TrotterSettings::new(1), false);
        assert!(r.is_err());
    }
}
