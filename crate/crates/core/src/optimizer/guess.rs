//! Starting schedules for cells without a ladder seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ladder::optimize_schedule;
use super::lbfgs::OptimizerConfig;
use crate::error::{numerical, Result};
use crate::model::{build_problem, ControlProblem, Endpoints, Overrides, PulseSchedule, Task};
use crate::objective::EnsembleObjective;

/// Relative noise on the π-pulse guess.
pub const PI_PULSE_NOISE: f64 = 0.01;
/// Amplitude of the random state-preparation guess, in drive units.
pub const STATE_PREP_NOISE: f64 = 0.1;
/// Pair-gate infidelity accepted as a CNOT seed.
const CNOT_SEED_TOL: f64 = 1e-10;
const CNOT_SEED_ATTEMPTS: u64 = 16;

fn rng_for(problem: &ControlProblem, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(problem.ensemble.seed ^ salt)
}

/// Uniform π pulse on X with 1% relative noise, and 1% of that amplitude
/// on Y.
pub fn pi_pulse_guess(problem: &ControlProblem) -> Result<PulseSchedule> {
    let mut rng = rng_for(problem, 0x7069);
    let x0 = std::f64::consts::FRAC_PI_2 / problem.duration();
    let len = problem.n * problem.bins();
    let x: Vec<f64> = (0..len).map(|_| x0 * (1.0 + PI_PULSE_NOISE * rng.random_range(-1.0..=1.0))).collect();
    let y: Vec<f64> = (0..len).map(|_| x0 * PI_PULSE_NOISE * rng.random_range(-1.0..=1.0)).collect();
    PulseSchedule::from_amplitudes(problem.n, problem.bins(), problem.schedule.dt(), x, y)?.with_amp_cap(problem.schedule.amp_cap())
}

/// Small uniform noise on both quadratures.
pub fn noise_guess(problem: &ControlProblem, amplitude: f64) -> Result<PulseSchedule> {
    let mut rng = rng_for(problem, 0x6e6f);
    let len = problem.n * problem.bins();
    let mut draw = || (0..len).map(|_| amplitude * rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
    let x = draw();
    let y = draw();
    PulseSchedule::from_amplitudes(problem.n, problem.bins(), problem.schedule.dt(), x, y)?.with_amp_cap(problem.schedule.amp_cap())
}

/// Optimizes a single CNOT on two qubits with the problem's bins and
/// duration, then copies the pair rows onto every pair.
pub fn cnot_guess(problem: &ControlProblem, config: &OptimizerConfig) -> Result<PulseSchedule> {
    let pair = build_problem(
        Task::ParallelCnot,
        2,
        0.0,
        &Overrides {
            duration: Some(problem.duration()),
            bins: Some(problem.bins()),
            d_max: Some(4),
            ensemble_size: Some(1),
            substeps: Some(problem.substeps),
            amp_cap: problem.schedule.amp_cap(),
            ..Overrides::default()
        },
    )?;
    let ends = pair.endpoints()?;
    let objective = EnsembleObjective::new(&pair, &ends, pair.samples()?)?;
    let cfg = OptimizerConfig {
        target_value: Some(CNOT_SEED_TOL * 1e-2),
        ..*config
    };
    let mut best: Option<(PulseSchedule, f64)> = None;
    for attempt in 0..CNOT_SEED_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0de + attempt);
        let len = 2 * pair.bins();
        let mut draw = || (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
        let (x, y) = (draw(), draw());
        let start = PulseSchedule::from_amplitudes(2, pair.bins(), pair.schedule.dt(), x, y)?.with_amp_cap(pair.schedule.amp_cap())?;
        let run = optimize_schedule(&objective, &start, &cfg)?;
        if best.as_ref().is_none_or(|b| run.value < b.1) {
            best = Some((run.schedule, run.value));
        }
        if best.as_ref().is_some_and(|b| b.1 < CNOT_SEED_TOL) {
            break;
        }
    }
    let (two, value) = best.expect("at least one attempt");
    if !(value < 1e-3) {
        return Err(numerical!("could not find a two-qubit CNOT seed (best infidelity {value:.3e})"));
    }
    let n = problem.n;
    let bins = problem.bins();
    let mut x = Vec::with_capacity(n * bins);
    let mut y = Vec::with_capacity(n * bins);
    for j in 0..n {
        x.extend_from_slice(two.x_row(j % 2));
        y.extend_from_slice(two.y_row(j % 2));
    }
    PulseSchedule::from_amplitudes(n, bins, problem.schedule.dt(), x, y)?.with_amp_cap(problem.schedule.amp_cap())
}

/// Default starting schedule for a task.
pub fn initial_guess(problem: &ControlProblem, _endpoints: &Endpoints, config: &OptimizerConfig) -> Result<PulseSchedule> {
    match problem.task {
        Task::ParallelX => pi_pulse_guess(problem),
        Task::ParallelCnot => cnot_guess(problem, config),
        Task::GhzPrep | Task::HeisenbergGroundPrep => noise_guess(problem, STATE_PREP_NOISE),
    }
}
