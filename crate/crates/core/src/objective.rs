//! Ensemble-averaged infidelities and their exact gradients.
//!
//! For one disorder sample the overlap is `O = <target|U(T)|initial>`
//! (normalized trace overlap for gates) and the infidelity `1 - |O|^2`.
//! With `a_l` the forward snapshots and `b_l` the target pulled back to
//! slice `l`, the overlap derivatives are
//!
//! ```text
//! dO/dx_jl = -i dt <b_{l+1}| X_j |a_{l+1}>
//! dO/dy_jl = -i dt <b_{l+1}| XL_l Y_j XL_l† |a_{l+1}>
//! ```
//!
//! where `XL_l` is the X layer of slice `l`. The Y generator sits under the
//! X layer, so both sides are rotated back through it before the insertion.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, numerical, Result};
use crate::model::{ControlProblem, CouplingPattern, Endpoints, ParasiticSample, PulseSchedule};
use crate::mpo::Mpo;
use crate::mps::Mps;
use crate::tebd::{build_circuit, propagate, Evolvable, GradientTape, TrotterSettings};
use crate::tensor::{pauli, C64};

/// `1 - |tr(u† target)/2^n|^2`.
pub fn gate_infidelity(u: &Mpo, target: &Mpo) -> Result<f64> {
    Ok(1.0 - u.trace_overlap(target)?.norm_sqr())
}

/// `1 - |<psi|target>|^2`.
pub fn state_infidelity(psi: &Mps, target: &Mps) -> Result<f64> {
    Ok(1.0 - psi.overlap(target)?.norm_sqr())
}

/// `1 - (1 - mean_chi)^(span/n)`: the infidelity of one of the parallel
/// gates implied by the infidelity of the whole layer.
pub fn per_gate_infidelity(mean_chi: f64, n: usize, span: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&mean_chi) {
        return Err(invalid!("mean infidelity must lie in [0, 1), got {mean_chi}"));
    }
    if n == 0 || !(span == 1 || span == 2) {
        return Err(invalid!("need n >= 1 and a gate span of 1 or 2"));
    }
    Ok(1.0 - (1.0 - mean_chi).powf(span as f64 / n as f64))
}

/// Overlap and its derivatives for one sample, laid out like the schedule.
#[derive(Clone, Debug)]
pub struct OverlapGradient {
    pub overlap: C64,
    pub dx: Vec<C64>,
    pub dy: Vec<C64>,
}

/// Overlap derivatives from a recorded tape.
pub fn overlap_gradient<S: Evolvable>(tape: &GradientTape<S>, schedule: &PulseSchedule) -> Result<OverlapGradient> {
    let n = schedule.n();
    let bins = schedule.bins();
    if tape.slices.len() != bins * tape.substeps || tape.forward.len() != tape.slices.len() + 1 {
        return Err(invalid!("tape does not match a {n}x{bins} schedule"));
    }
    let mut dx = vec![C64::new(0.0, 0.0); n * bins];
    let mut dy = dx.clone();
    let factor = C64::new(0.0, -tape.slice_dt);
    for (q, slice) in tape.slices.iter().enumerate() {
        let bin = q / tape.substeps;
        let b = &tape.backward[q + 1];
        let ox = b.local_overlaps(&tape.forward[q + 1], &[pauli::x()])?;
        let mut c = b.clone();
        slice.apply_x_layer_adjoint(&mut c)?;
        let oy = c.local_overlaps(&tape.after_y[q], &[pauli::y()])?;
        for j in 0..n {
            dx[j * bins + bin] += factor * ox[j][0];
            dy[j * bins + bin] += factor * oy[j][0];
        }
    }
    Ok(OverlapGradient {
        overlap: tape.overlap()?,
        dx,
        dy,
    })
}

/// Forward pass storing every slice boundary, then a single backward pass
/// that accumulates the derivatives without keeping the pulled-back target.
fn streaming_gradient<S: Evolvable>(
    initial: &S,
    target: &S,
    schedule: &PulseSchedule,
    coupling: &CouplingPattern,
    sample: &ParasiticSample,
    settings: &TrotterSettings,
) -> Result<(OverlapGradient, f64)> {
    let n = schedule.n();
    let bins = schedule.bins();
    let slices = build_circuit(schedule, coupling, sample, settings)?;
    let mut forward = Vec::with_capacity(slices.len() + 1);
    forward.push(initial.clone());
    let mut discarded = 0.0;
    let mut state = initial.clone();
    for slice in &slices {
        discarded += slice.apply(&mut state, settings.d_max, settings.cutoff)?.discarded_weight;
        forward.push(state.clone());
    }
    let overlap = target.fidelity_overlap(&state)?;

    let mut dx = vec![C64::new(0.0, 0.0); n * bins];
    let mut dy = dx.clone();
    let factor = C64::new(0.0, -schedule.dt() / settings.substeps as f64);
    let (px, py) = (pauli::x(), pauli::y());
    let mut b = target.clone();
    for (q, slice) in slices.iter().enumerate().rev() {
        let bin = q / settings.substeps;
        let ox = b.local_overlaps(&forward[q + 1], std::slice::from_ref(&px))?;
        let mut a = forward.pop().expect("snapshot per slice");
        slice.apply_x_layer_adjoint(&mut a)?;
        slice.apply_x_layer_adjoint(&mut b)?;
        let oy = b.local_overlaps(&a, std::slice::from_ref(&py))?;
        for j in 0..n {
            dx[j * bins + bin] += factor * ox[j][0];
            dy[j * bins + bin] += factor * oy[j][0];
        }
        slice.apply_y_layer_adjoint(&mut b)?;
        discarded += slice.apply_v_layer_adjoint(&mut b, settings.d_max, settings.cutoff)?.discarded_weight;
    }
    Ok((OverlapGradient { overlap, dx, dy }, discarded))
}

/// Mean infidelity over an ensemble and the per-sample data behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub mean_infidelity: f64,
    pub per_sample: Vec<f64>,
    pub overlaps: Vec<C64>,
    /// Total truncation weight over all samples and slices.
    pub discarded_weight: f64,
}

impl ObjectiveValue {
    fn from_overlaps(overlaps: Vec<C64>, discarded_weight: f64) -> Self {
        let per_sample: Vec<f64> = overlaps.iter().map(|o| 1.0 - o.norm_sqr()).collect();
        let mean_infidelity = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        Self {
            mean_infidelity,
            per_sample,
            overlaps,
            discarded_weight,
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        let m = self.per_sample.len();
        if m < 2 {
            return 0.0;
        }
        let mean = self.mean_infidelity;
        let var = self.per_sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt()
    }
}

/// Derivatives of the mean infidelity, laid out like the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub n: usize,
    pub bins: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientField {
    /// Flat vector in the schedule's parameter order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.gx.iter().chain(&self.gy).copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.gx.iter().chain(&self.gy).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Initial and target objects in a form the propagator can use directly.
#[derive(Clone, Debug)]
enum Ends {
    Gate { initial: Mpo, target: Mpo },
    State { initial: Mps, target: Mps },
}

/// Ensemble objective for a fixed problem, endpoint pair and sample set.
///
/// Samples are evaluated in parallel (on `pool` if one is set, otherwise
/// on the global rayon pool) and reduced sequentially in sample order, so
/// results do not depend on the thread count.
#[derive(Clone)]
pub struct EnsembleObjective {
    ends: Ends,
    coupling: CouplingPattern,
    settings: TrotterSettings,
    samples: Vec<ParasiticSample>,
    /// For each sample, the index of its first identical sample. Repeated
    /// realizations (all of them when ΔJ = 0) are evaluated once.
    first_copy: Vec<usize>,
    pool: Option<Arc<ThreadPool>>,
}

impl EnsembleObjective {
    pub fn new(problem: &ControlProblem, endpoints: &Endpoints, samples: Vec<ParasiticSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid!("the sample list is empty"));
        }
        let n = problem.n;
        let ends = match endpoints {
            Endpoints::Gate { target } => Ends::Gate {
                initial: Mpo::identity(n)?,
                target: target.clone(),
            },
            Endpoints::State { initial, target } => Ends::State {
                initial: initial.clone(),
                target: target.clone(),
            },
        };
        let sites = match &ends {
            Ends::Gate { target, .. } => [target.len(), target.len()],
            Ends::State { initial, target } => [initial.len(), target.len()],
        };
        if sites != [n, n] {
            return Err(invalid!("endpoints have {sites:?} sites, problem has {n}"));
        }
        if let Some(s) = samples.iter().find(|s| s.bonds() != n - 1) {
            return Err(invalid!("sample has {} bonds, expected {}", s.bonds(), n - 1));
        }
        let settings = TrotterSettings {
            substeps: problem.substeps,
            ..TrotterSettings::new(problem.d_max)
        };
        let mut distinct: Vec<usize> = Vec::new();
        let first_copy = (0..samples.len())
            .map(|i| match distinct.iter().find(|&&d| samples[d] == samples[i]) {
                Some(&d) => d,
                None => {
                    distinct.push(i);
                    i
                }
            })
            .collect();
        Ok(Self {
            ends,
            coupling: problem.coupling.clone(),
            settings,
            samples,
            first_copy,
            pool: None,
        })
    }

    pub fn with_pool(mut self, pool: Option<Arc<ThreadPool>>) -> Self {
        self.pool = pool;
        self
    }

    pub fn with_settings(mut self, settings: TrotterSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn settings(&self) -> &TrotterSettings {
        &self.settings
    }

    pub fn samples(&self) -> &[ParasiticSample] {
        &self.samples
    }

    fn run<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send + Clone,
        F: Fn(&ParasiticSample) -> Result<T> + Sync,
    {
        let unique: Vec<usize> = (0..self.samples.len()).filter(|&i| self.first_copy[i] == i).collect();
        let work = || {
            unique
                .par_iter()
                .map(|&i| f(&self.samples[i]).map_err(|e| e.context(format_args!("sample {i}"))))
                .collect::<Vec<_>>()
        };
        let results = match &self.pool {
            Some(pool) => pool.install(work),
            None => work(),
        };
        let results: Vec<T> = results.into_iter().collect::<Result<_>>()?;
        let mut slot = vec![0; self.samples.len()];
        for (k, &i) in unique.iter().enumerate() {
            slot[i] = k;
        }
        Ok(self.first_copy.iter().map(|&d| results[slot[d]].clone()).collect())
    }

    /// Overlap and discarded weight of one sample.
    fn sample_overlap(&self, sample: &ParasiticSample, schedule: &PulseSchedule) -> Result<(C64, f64)> {
        match &self.ends {
            Ends::Gate { initial, target } => {
                let p = propagate(initial, schedule, &self.coupling, sample, &self.settings, false)?;
                Ok((target.fidelity_overlap(&p.final_state)?, p.discarded_weight))
            }
            Ends::State { initial, target } => {
                let p = propagate(initial, schedule, &self.coupling, sample, &self.settings, false)?;
                Ok((target.fidelity_overlap(&p.final_state)?, p.discarded_weight))
            }
        }
    }

    fn check(&self, schedule: &PulseSchedule) -> Result<()> {
        if schedule.n() != self.coupling.bonds() + 1 {
            return Err(invalid!("schedule has {} qubits, problem has {}", schedule.n(), self.coupling.bonds() + 1));
        }
        Ok(())
    }

    pub fn value(&self, schedule: &PulseSchedule) -> Result<ObjectiveValue> {
        self.check(schedule)?;
        let res = self.run(|s| self.sample_overlap(s, schedule))?;
        let discarded = res.iter().map(|r| r.1).sum();
        let value = ObjectiveValue::from_overlaps(res.into_iter().map(|r| r.0).collect(), discarded);
        finite(value)
    }

    pub fn value_and_gradient(&self, schedule: &PulseSchedule) -> Result<(ObjectiveValue, GradientField)> {
        self.check(schedule)?;
        let res = self.run(|s| match &self.ends {
            Ends::Gate { initial, target } => streaming_gradient(initial, target, schedule, &self.coupling, s, &self.settings),
            Ends::State { initial, target } => streaming_gradient(initial, target, schedule, &self.coupling, s, &self.settings),
        })?;
        let m = res.len() as f64;
        let len = schedule.n() * schedule.bins();
        let mut gx = vec![0.0; len];
        let mut gy = vec![0.0; len];
        let mut overlaps = Vec::with_capacity(res.len());
        let mut discarded = 0.0;
        for (g, d) in &res {
            // d|O|^2 = 2 Re(conj(O) dO); the infidelity derivative is its negative
            let oc = g.overlap.conj();
            for k in 0..len {
                gx[k] -= 2.0 * (oc * g.dx[k]).re / m;
                gy[k] -= 2.0 * (oc * g.dy[k]).re / m;
            }
            overlaps.push(g.overlap);
            discarded += d;
        }
        let value = finite(ObjectiveValue::from_overlaps(overlaps, discarded))?;
        if gx.iter().chain(&gy).any(|v| !v.is_finite()) {
            return Err(numerical!("gradient contains non-finite entries"));
        }
        let field = GradientField {
            n: schedule.n(),
            bins: schedule.bins(),
            gx,
            gy,
        };
        Ok((value, field))
    }
}

fn finite(v: ObjectiveValue) -> Result<ObjectiveValue> {
    if !v.mean_infidelity.is_finite() {
        return Err(numerical!("infidelity is not finite"));
    }
    Ok(v)
}

/// Mean infidelity and gradient for `schedule` on the given samples.
pub fn infidelity_gradient(
    problem: &ControlProblem,
    endpoints: &Endpoints,
    schedule: &PulseSchedule,
    samples: &[ParasiticSample],
) -> Result<(ObjectiveValue, GradientField)> {
    EnsembleObjective::new(problem, endpoints, samples.to_vec())?.value_and_gradient(schedule)
}

pub fn mean_infidelity(
    problem: &ControlProblem,
    endpoints: &Endpoints,
    schedule: &PulseSchedule,
    samples: &[ParasiticSample],
) -> Result<ObjectiveValue> {
    EnsembleObjective::new(problem, endpoints, samples.to_vec())?.value(schedule)
}

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// `max_k |a_k - f_k| / max(1, max_k |f_k|)`.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub components: usize,
}

/// Central finite differences of `f` at `params` with the given step.
pub fn finite_difference<F>(f: F, params: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut p = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let orig = p[k];
        p[k] = orig + step;
        let plus = f(&p)?;
        p[k] = orig - step;
        let minus = f(&p)?;
        p[k] = orig;
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

pub fn compare_gradients(analytic: &[f64], numeric: &[f64]) -> GradCheckReport {
    let scale = numeric.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = None;
    let mut max_err = 0.0;
    for (k, (a, f)) in analytic.iter().zip(numeric).enumerate() {
        let e = (a - f).abs() / scale;
        if worst.is_none() || e > max_err {
            max_err = e;
            worst = Some(k);
        }
    }
    GradCheckReport {
        max_rel_error: max_err,
        worst_index: worst,
        components: analytic.len(),
    }
}

/// Compares the analytic ensemble gradient with central differences of the
/// ensemble mean.
pub fn gradient_check(objective: &EnsembleObjective, schedule: &PulseSchedule, step: f64) -> Result<GradCheckReport> {
    let (_, grad) = objective.value_and_gradient(schedule)?;
    let numeric = finite_difference(
        |p| Ok(objective.value(&schedule.with_params(p)?)?.mean_infidelity),
        &schedule.to_params(),
        step,
    )?;
    Ok(compare_gradients(&grad.to_flat(), &numeric))
}
