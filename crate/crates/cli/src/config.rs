//! Run configuration, read from TOML.
//!
//! Energies are in units of the task's energy scale (drive strength for
//! the X gate, coupling strength otherwise). Durations are given in
//! `time_unit`, which defaults to `tau-pi` for the X gate and `tau-g` for
//! the other tasks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tnqc_core::model::{build_problem, tau_g, tau_pi, ControlProblem, Overrides, Task};
use tnqc_core::optimizer::{LadderPlan, OptimizerConfig};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeUnit {
    /// Duration of a π pulse at unit drive.
    TauPi,
    /// `2π/g`.
    TauG,
    /// Raw scaled time.
    Scaled,
}

impl TimeUnit {
    pub fn default_for(task: Task) -> Self {
        match task {
            Task::ParallelX => TimeUnit::TauPi,
            _ => TimeUnit::TauG,
        }
    }

    pub fn scale(self) -> f64 {
        match self {
            TimeUnit::TauPi => tau_pi(),
            TimeUnit::TauG => tau_g(),
            TimeUnit::Scaled => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TimeUnit::TauPi => "tau-pi",
            TimeUnit::TauG => "tau-g",
            TimeUnit::Scaled => "scaled",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    /// Single system size. Exclusive with `sizes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Increasing system sizes for ladders and sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    /// Largest parasitic strength, as a fraction of the energy scale.
    #[serde(default)]
    pub delta_j: f64,
    /// Increment of the error ladder from 0 to `delta_j`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_unit: Option<TimeUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp_cap: Option<f64>,
    /// Optimization ensemble size; defaults to `6(n-1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification_factor: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

pub const DEFAULT_ERROR_STEP: f64 = 0.01;

impl RunConfig {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            n: None,
            sizes: None,
            delta_j: 0.0,
            error_step: None,
            duration: None,
            time_unit: None,
            bins: None,
            amp_cap: None,
            m: None,
            verification_factor: None,
            seed: 0,
            d_max: None,
            substeps: None,
            output_dir: None,
            checkpoint: None,
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display()))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        let sizes = self.sizes()?;
        if !(self.delta_j.is_finite() && self.delta_j >= 0.0) {
            return Err(CliError::Config(format!("delta_j must be finite and non-negative, got {}", self.delta_j)));
        }
        if let Some(step) = self.error_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(CliError::Config(format!("error_step must be positive, got {step}")));
            }
        }
        self.optimizer.validate().map_err(CliError::from)?;
        // Shape checks (parity, minimum size) happen here so that bad input
        // never reaches a long computation. A zero-bin grid is left to the
        // commands: only gradcheck accepts it.
        if self.bins == Some(0) {
            return Ok(());
        }
        for &n in &sizes {
            self.problem(n, self.delta_j)?;
        }
        Ok(())
    }

    pub fn sizes(&self) -> CliResult<Vec<usize>> {
        match (self.n, &self.sizes) {
            (Some(_), Some(_)) => Err(CliError::Config("give either n or sizes, not both".into())),
            (None, None) => Err(CliError::Config("no system size given (n or sizes)".into())),
            (Some(n), None) => Ok(vec![n]),
            (None, Some(s)) if s.is_empty() => Err(CliError::Config("sizes must not be empty".into())),
            (None, Some(s)) => {
                if s.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::Config(format!("sizes must be strictly increasing: {s:?}")));
                }
                Ok(s.clone())
            }
        }
    }

    /// Error magnitudes `0, step, ..., delta_j`.
    pub fn errors(&self) -> CliResult<Vec<f64>> {
        LadderPlan::error_ramp(self.delta_j, self.error_step.unwrap_or(DEFAULT_ERROR_STEP)).map_err(CliError::from)
    }

    pub fn plan(&self) -> CliResult<LadderPlan> {
        LadderPlan::new(self.sizes()?, self.errors()?).map_err(CliError::from)
    }

    pub fn time_unit(&self) -> TimeUnit {
        self.time_unit.unwrap_or(TimeUnit::default_for(self.task))
    }

    pub fn overrides(&self) -> Overrides {
        Overrides {
            duration: self.duration.map(|d| d * self.time_unit().scale()),
            bins: self.bins,
            d_max: self.d_max,
            ensemble_size: self.m,
            verification_factor: self.verification_factor,
            seed: Some(self.seed),
            substeps: self.substeps,
            amp_cap: self.amp_cap,
        }
    }

    pub fn problem(&self, n: usize, delta_j: f64) -> CliResult<ControlProblem> {
        build_problem(self.task, n, delta_j, &self.overrides()).map_err(|e| CliError::from(e).context(format!("n={n}")))
    }

    /// Hash of every field that influences numerical results. Output
    /// location and checkpoint path are excluded.
    pub fn fingerprint(&self) -> CliResult<String> {
        let mut c = self.clone();
        c.output_dir = None;
        c.checkpoint = None;
        Ok(hex::encode(Sha256::digest(c.to_toml()?.as_bytes())))
    }
}

/// Hash identifying the shape of a control problem: task, size, bin grid
/// and couplings. Schedules carry it so they are only evaluated on problems
/// they were made for. The parasitic strength is not part of it.
pub fn problem_fingerprint(p: &ControlProblem) -> String {
    let mut h = Sha256::new();
    h.update(p.task.name().as_bytes());
    h.update((p.n as u64).to_le_bytes());
    h.update((p.bins() as u64).to_le_bytes());
    h.update(p.schedule.dt().to_le_bytes());
    for g in &p.coupling.g {
        h.update(g.to_le_bytes());
    }
    hex::encode(h.finalize())
}
