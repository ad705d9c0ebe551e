use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dmrg::{dmrg, DmrgSettings};
use super::ensemble::{sample_ensemble, EnsembleSpec, ParasiticSample};
use super::hamiltonian::heisenberg_mpo;
use super::schedule::{CouplingPattern, PulseSchedule};
use crate::error::{invalid, Error, Result};
use crate::mpo::Mpo;
use crate::mps::Mps;

/// Single-qubit drive strength. A constant X amplitude of 1 flips a qubit
/// in time `π/2`.
pub const DRIVE_SCALE: f64 = 1.0;
/// Strength of an active tunable ZZ coupling.
pub const COUPLING_SCALE: f64 = 1.0;
/// Default ratio between the verification and optimization ensembles.
pub const VERIFICATION_FACTOR: usize = 5;

/// Time for a π rotation at unit drive.
pub fn tau_pi() -> f64 {
    PI / (2.0 * DRIVE_SCALE)
}

/// `2π/g`.
pub fn tau_g() -> f64 {
    2.0 * PI / COUPLING_SCALE
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    ParallelX,
    ParallelCnot,
    GhzPrep,
    HeisenbergGroundPrep,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::ParallelX, Task::ParallelCnot, Task::GhzPrep, Task::HeisenbergGroundPrep];

    pub fn is_gate(self) -> bool {
        matches!(self, Task::ParallelX | Task::ParallelCnot)
    }

    pub fn needs_even_n(self) -> bool {
        matches!(self, Task::ParallelCnot | Task::HeisenbergGroundPrep)
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::ParallelX => "parallel-x",
            Task::ParallelCnot => "parallel-cnot",
            Task::GhzPrep => "ghz-prep",
            Task::HeisenbergGroundPrep => "heisenberg-ground-prep",
        }
    }

    fn min_n(self) -> usize {
        match self {
            Task::ParallelX => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| invalid!("unknown task '{s}'"))
    }
}

/// Optional changes to the task defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub duration: Option<f64>,
    pub bins: Option<usize>,
    pub d_max: Option<usize>,
    pub ensemble_size: Option<usize>,
    pub verification_factor: Option<usize>,
    pub seed: Option<u64>,
    pub substeps: Option<usize>,
    pub amp_cap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    pub n: usize,
    pub task: Task,
    pub coupling: CouplingPattern,
    /// All-zero schedule fixing the bin layout.
    pub schedule: PulseSchedule,
    pub ensemble: EnsembleSpec,
    pub verification_factor: usize,
    pub d_max: usize,
    pub substeps: usize,
    pub energy_scale: f64,
    pub tau_g: f64,
}

/// Start and goal of the control task.
#[derive(Clone, Debug)]
pub enum Endpoints {
    /// Start from the identity, reach `target`.
    Gate { target: Mpo },
    State { initial: Mps, target: Mps },
}

pub fn build_problem(task: Task, n: usize, delta_j: f64, overrides: &Overrides) -> Result<ControlProblem> {
    if n < task.min_n() {
        return Err(invalid!("{task} needs n >= {}, got {n}", task.min_n()));
    }
    if task.needs_even_n() && n % 2 != 0 {
        return Err(invalid!("{task} needs an even number of qubits, got {n}"));
    }
    if !(delta_j >= 0.0) || !delta_j.is_finite() {
        return Err(invalid!("ΔJ must be finite and non-negative, got {delta_j}"));
    }
    let nf = n as f64;
    let (coupling, duration, bins, d_max, energy_scale) = match task {
        Task::ParallelX => (CouplingPattern::zero(n), tau_pi(), 10, 20, DRIVE_SCALE),
        Task::ParallelCnot => (CouplingPattern::alternating(n, COUPLING_SCALE), tau_g() / 2.0, 20, 20, COUPLING_SCALE),
        Task::GhzPrep => (CouplingPattern::uniform(n, COUPLING_SCALE), nf * tau_g() / 8.0, 20 * n, 10, COUPLING_SCALE),
        Task::HeisenbergGroundPrep => (CouplingPattern::uniform(n, COUPLING_SCALE), nf * tau_g() / 2.0, 20 * n, 20, COUPLING_SCALE),
    };
    let duration = overrides.duration.unwrap_or(duration);
    let bins = overrides.bins.unwrap_or(bins);
    let d_max = overrides.d_max.unwrap_or(d_max);
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(invalid!("duration must be positive, got {duration}"));
    }
    if bins == 0 {
        return Err(invalid!("at least one time bin is required"));
    }
    if d_max < 2 {
        return Err(invalid!("bond cap must be at least 2, got {d_max}"));
    }
    let schedule = PulseSchedule::zeros(n, bins, duration / bins as f64)?.with_amp_cap(overrides.amp_cap)?;
    let mut ensemble = EnsembleSpec::for_optimization(n, delta_j, overrides.seed.unwrap_or(0));
    if let Some(m) = overrides.ensemble_size {
        if m == 0 {
            return Err(invalid!("ensemble size must be at least 1"));
        }
        ensemble.m = m;
    }
    let verification_factor = overrides.verification_factor.unwrap_or(VERIFICATION_FACTOR);
    let substeps = overrides.substeps.unwrap_or(1);
    if verification_factor == 0 || substeps == 0 {
        return Err(invalid!("verification factor and substeps must be at least 1"));
    }
    Ok(ControlProblem {
        n,
        task,
        coupling,
        schedule,
        ensemble,
        verification_factor,
        d_max,
        substeps,
        energy_scale,
        tau_g: tau_g(),
    })
}

impl ControlProblem {
    pub fn duration(&self) -> f64 {
        self.schedule.total_time()
    }

    pub fn bins(&self) -> usize {
        self.schedule.bins()
    }

    pub fn zero_schedule(&self) -> PulseSchedule {
        self.schedule.clone()
    }

    pub fn verification_ensemble(&self) -> EnsembleSpec {
        self.ensemble.verification(self.verification_factor)
    }

    pub fn samples(&self) -> Result<Vec<ParasiticSample>> {
        sample_ensemble(&self.ensemble, self.n)
    }

    pub fn verification_samples(&self) -> Result<Vec<ParasiticSample>> {
        sample_ensemble(&self.verification_ensemble(), self.n)
    }

    /// Checks that a schedule fits this problem.
    pub fn check_schedule(&self, s: &PulseSchedule) -> Result<()> {
        if s.n() != self.n || s.bins() != self.bins() {
            return Err(invalid!(
                "schedule is {}x{}, problem expects {}x{}",
                s.n(),
                s.bins(),
                self.n,
                self.bins()
            ));
        }
        if (s.dt() - self.schedule.dt()).abs() > 1e-12 * self.schedule.dt() {
            return Err(invalid!("schedule bin width {} differs from {}", s.dt(), self.schedule.dt()));
        }
        Ok(())
    }

    /// Builds the initial and target objects. The Heisenberg target comes
    /// from a DMRG run at the problem's bond cap.
    pub fn endpoints(&self) -> Result<Endpoints> {
        let n = self.n;
        Ok(match self.task {
            Task::ParallelX => Endpoints::Gate { target: Mpo::parallel_x(n)? },
            Task::ParallelCnot => Endpoints::Gate { target: Mpo::parallel_cnot(n)? },
            Task::GhzPrep => Endpoints::State {
                initial: Mps::product_state(&vec![0; n])?,
                target: Mps::ghz_state(n)?,
            },
            Task::HeisenbergGroundPrep => {
                let h = heisenberg_mpo(n)?;
                let ground = dmrg(&h, &DmrgSettings::new(self.d_max, 40, 1e-11))?;
                Endpoints::State {
                    initial: Mps::product_state(&vec![0; n])?,
                    target: ground.state,
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes() {
        let p = build_problem(Task::ParallelX, 50, 0.05, &Overrides::default()).unwrap();
        assert_eq!((p.d_max, p.bins()), (20, 10));
        assert!((p.duration() - PI / 2.0).abs() < 1e-12);
        assert_eq!(p.ensemble.m, 6 * 49);
        assert_eq!(p.verification_ensemble().m, 5 * 6 * 49);

        let p = build_problem(Task::GhzPrep, 30, 0.05, &Overrides::default()).unwrap();
        assert_eq!((p.d_max, p.bins()), (10, 600));
        assert!((p.duration() - 30.0 * p.tau_g / 8.0).abs() < 1e-9);

        let p = build_problem(Task::ParallelCnot, 4, 0.0, &Overrides::default()).unwrap();
        assert_eq!(p.coupling.g, vec![1.0, 0.0, 1.0]);
        assert_eq!(p.bins(), 20);
    }

    #[test]
    fn parity_and_range_checks() {
        let o = Overrides::default();
        assert!(build_problem(Task::ParallelCnot, 3, 0.05, &o).is_err());
        assert!(build_problem(Task::HeisenbergGroundPrep, 5, 0.05, &o).is_err());
        assert!(build_problem(Task::GhzPrep, 1, 0.05, &o).is_err());
        assert!(build_problem(Task::ParallelX, 4, -0.1, &o).is_err());
        let bad = Overrides { d_max: Some(1), ..o };
        assert!(build_problem(Task::ParallelX, 4, 0.0, &bad).is_err());
    }

    #[test]
    fn overrides_apply() {
        let o = Overrides {
            duration: Some(2.0),
            bins: Some(4),
            d_max: Some(8),
            ensemble_size: Some(3),
            ..Overrides::default()
        };
        let p = build_problem(Task::GhzPrep, 6, 0.01, &o).unwrap();
        assert_eq!((p.bins(), p.d_max, p.ensemble.m), (4, 8, 3));
        assert!((p.schedule.dt() - 0.5).abs() < 1e-15);
        assert_eq!(p.samples().unwrap().len(), 3);
        assert_eq!(p.verification_samples().unwrap().len(), 15);
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.name()));
        }
        assert!("cnot".parse::<Task>().is_err());
    }
}
