//! Warm-started optimization over a grid of system sizes and error
//! magnitudes.

use std::sync::Arc;

use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use super::lbfgs::{lbfgs_minimize, IterationRecord, OptimizerConfig, Termination};
use crate::error::{invalid, Result};
use crate::model::{ControlProblem, Endpoints, PulseSchedule};
use crate::objective::EnsembleObjective;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderPlan {
    pub sizes: Vec<usize>,
    pub errors: Vec<f64>,
}

impl LadderPlan {
    pub fn new(sizes: Vec<usize>, errors: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() || errors.is_empty() {
            return Err(invalid!("a ladder needs at least one size and one error magnitude"));
        }
        if sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid!("sizes must be strictly increasing: {sizes:?}"));
        }
        if errors.iter().any(|e| !(e.is_finite() && *e >= 0.0)) || errors.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid!("error magnitudes must be non-negative and strictly increasing: {errors:?}"));
        }
        Ok(Self { sizes, errors })
    }

    /// `0, step, 2·step, ...` up to and including `max`.
    pub fn error_ramp(max: f64, step: f64) -> Result<Vec<f64>> {
        if !(max >= 0.0 && step > 0.0) {
            return Err(invalid!("ramp needs max >= 0 and step > 0"));
        }
        let count = (max / step + 1e-9).floor() as usize;
        let mut out: Vec<f64> = (0..=count).map(|k| (k as f64 * step).min(max)).collect();
        if max - out.last().copied().unwrap_or(0.0) > 1e-12 {
            out.push(max);
        }
        out.dedup();
        Ok(out)
    }
}

/// Where a cell's starting schedule came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SeedSource {
    InitialGuess,
    SmallerSize { n: usize },
    SmallerError { delta_j: f64 },
    Checkpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderCell {
    pub n: usize,
    pub delta_j: f64,
    pub schedule: PulseSchedule,
    pub seed_source: SeedSource,
    /// Optimization-ensemble infidelity of the seed and of the result.
    pub seed_value: f64,
    pub value: f64,
    /// The optimizer did not improve on the seed; the seed was kept.
    pub flagged: bool,
    pub termination: Option<Termination>,
    pub history: Vec<IterationRecord>,
}

/// Copies the last row onto every new qubit.
pub fn extend_schedule(s: &PulseSchedule, new_n: usize) -> Result<PulseSchedule> {
    if new_n < s.n() {
        return Err(invalid!("cannot shrink a {}-qubit schedule to {new_n}", s.n()));
    }
    let mut out = s.clone();
    while out.n() < new_n {
        out.push_row_copy();
    }
    Ok(out)
}

/// Resamples a schedule onto a new bin grid by absolute time. Bins past the
/// old end are zero.
pub fn resample_time(s: &PulseSchedule, bins: usize, dt: f64) -> Result<PulseSchedule> {
    if bins == s.bins() && (dt - s.dt()).abs() <= 1e-12 * dt {
        return Ok(s.clone());
    }
    let n = s.n();
    let mut x = vec![0.0; n * bins];
    let mut y = vec![0.0; n * bins];
    for l in 0..bins {
        let t = (l as f64 + 0.5) * dt;
        let old = (t / s.dt()).floor() as usize;
        if old >= s.bins() {
            continue;
        }
        for j in 0..n {
            x[j * bins + l] = s.x(j, old);
            y[j * bins + l] = s.y(j, old);
        }
    }
    PulseSchedule::from_amplitudes(n, bins, dt, x, y)?.with_amp_cap(s.amp_cap())
}

/// Brings a seed from another cell onto the shape of `problem`.
pub fn adapt_seed(seed: &PulseSchedule, problem: &ControlProblem) -> Result<PulseSchedule> {
    let grown = extend_schedule(seed, problem.n)?;
    resample_time(&grown, problem.bins(), problem.schedule.dt())?.with_amp_cap(problem.schedule.amp_cap())
}

/// Result of one optimizer run on a fixed objective.
#[derive(Clone, Debug)]
pub struct Optimized {
    pub schedule: PulseSchedule,
    pub seed_value: f64,
    pub value: f64,
    pub termination: Termination,
    pub history: Vec<IterationRecord>,
}

/// Runs L-BFGS on the ensemble objective starting from `seed`.
pub fn optimize_schedule(objective: &EnsembleObjective, seed: &PulseSchedule, config: &OptimizerConfig) -> Result<Optimized> {
    let mut cfg = *config;
    if cfg.bound.is_none() {
        cfg.bound = seed.amp_cap();
    }
    let mut seed_value = None;
    let f = |p: &[f64]| -> Result<(f64, Vec<f64>)> {
        let s = seed.with_params(p)?;
        let (v, g) = objective.value_and_gradient(&s)?;
        seed_value.get_or_insert(v.mean_infidelity);
        Ok((v.mean_infidelity, g.to_flat()))
    };
    let r = lbfgs_minimize(f, &seed.to_params(), &cfg)?;
    Ok(Optimized {
        schedule: seed.with_params(&r.best)?,
        seed_value: seed_value.unwrap_or(r.value),
        value: r.value,
        termination: r.termination,
        history: r.history,
    })
}

/// Optimizes every `(n, ΔJ)` cell of the plan, sizes outermost.
///
/// Each cell is seeded by whichever is better on its own optimization
/// ensemble: the result at the previous size (extended) or the result at
/// the previous error magnitude. The first cell uses `initial_guess`.
/// Cells found in `resume` are taken as they are. `on_cell` sees every
/// finished cell, for checkpointing.
pub fn ladder_optimize<F, G, C>(
    plan: &LadderPlan,
    mut factory: F,
    mut initial_guess: G,
    config: &OptimizerConfig,
    pool: Option<Arc<ThreadPool>>,
    resume: &[LadderCell],
    mut on_cell: C,
) -> Result<Vec<LadderCell>>
where
    F: FnMut(usize, f64) -> Result<(ControlProblem, Endpoints)>,
    G: FnMut(&ControlProblem, &Endpoints) -> Result<PulseSchedule>,
    C: FnMut(&LadderCell) -> Result<()>,
{
    let mut cells: Vec<LadderCell> = Vec::new();
    let find = |cells: &[LadderCell], n: usize, dj: f64| cells.iter().position(|c| c.n == n && c.delta_j == dj);
    for (i, &n) in plan.sizes.iter().enumerate() {
        for (k, &dj) in plan.errors.iter().enumerate() {
            if let Some(done) = find(resume, n, dj) {
                let mut c = resume[done].clone();
                c.seed_source = SeedSource::Checkpoint;
                cells.push(c);
                continue;
            }
            let ctx = format!("cell n={n}, ΔJ={dj}");
            let (problem, ends) = factory(n, dj).map_err(|e| e.context(&ctx))?;
            let objective = EnsembleObjective::new(&problem, &ends, problem.samples()?)?.with_pool(pool.clone());

            let mut candidates: Vec<(PulseSchedule, SeedSource)> = Vec::new();
            if i > 0 {
                if let Some(p) = find(&cells, plan.sizes[i - 1], dj) {
                    candidates.push((adapt_seed(&cells[p].schedule, &problem)?, SeedSource::SmallerSize { n: plan.sizes[i - 1] }));
                }
            }
            if k > 0 {
                if let Some(p) = find(&cells, n, plan.errors[k - 1]) {
                    candidates.push((cells[p].schedule.clone(), SeedSource::SmallerError { delta_j: plan.errors[k - 1] }));
                }
            }
            if candidates.is_empty() {
                candidates.push((initial_guess(&problem, &ends)?, SeedSource::InitialGuess));
            }
            let mut best: Option<(PulseSchedule, SeedSource, f64)> = None;
            for (s, src) in candidates {
                let v = objective.value(&s).map_err(|e| e.context(&ctx))?.mean_infidelity;
                if best.as_ref().is_none_or(|b| v < b.2) {
                    best = Some((s, src, v));
                }
            }
            let (seed, source, seed_value) = best.expect("at least one candidate");
            let run = optimize_schedule(&objective, &seed, config).map_err(|e| e.context(&ctx))?;
            let flagged = !(run.value < seed_value);
            let cell = LadderCell {
                n,
                delta_j: dj,
                schedule: if flagged { seed } else { run.schedule },
                seed_source: source,
                seed_value,
                value: run.value.min(seed_value),
                flagged,
                termination: Some(run.termination),
                history: run.history,
            };
            on_cell(&cell)?;
            cells.push(cell);
        }
    }
    Ok(cells)
}
