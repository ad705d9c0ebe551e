//! Tensor-network robust quantum optimal control.

mod chain;
pub mod dense;
pub mod error;
pub mod model;
pub mod mpo;
pub mod mps;
pub mod objective;
pub mod optimizer;
pub mod tebd;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{ControlProblem, CouplingPattern, EnsembleSpec, ParasiticSample, PulseSchedule, Task};
pub use mpo::Mpo;
pub use mps::Mps;
pub use tebd::TrotterSettings;
pub use tensor::{DenseTensor, TruncationReport, C64};
