//! Gradient-based pulse optimization and warm-start ladders.

pub mod guess;
pub mod ladder;
pub mod lbfgs;

pub use guess::initial_guess;
pub use ladder::{adapt_seed, extend_schedule, ladder_optimize, optimize_schedule, LadderCell, LadderPlan, Optimized, SeedSource};
pub use lbfgs::{lbfgs_minimize, IterationRecord, LbfgsResult, LineSearchConfig, OptimizerConfig, Termination};
