//! Control problems: schedules, couplings, disorder ensembles and targets.

pub mod dmrg;
pub mod ensemble;
pub mod hamiltonian;
pub mod problem;
pub mod schedule;

pub use dmrg::{dmrg, dmrg_ground_state, energy_variance, DmrgResult, DmrgSettings};
pub use ensemble::{parasitic_terms, sample_at, sample_ensemble, EnsembleSpec, ParasiticSample};
pub use hamiltonian::heisenberg_mpo;
pub use problem::{build_problem, tau_g, tau_pi, ControlProblem, Endpoints, Overrides, Task};
pub use schedule::{CouplingPattern, PulseSchedule};
