use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::Quadrature;

/// Piecewise-constant control amplitudes on the X and Y quadratures.
///
/// Amplitudes are stored row-major by qubit, then bin. The flat parameter
/// vector used by the optimizer is all `x` amplitudes followed by all `y`
/// amplitudes in that same layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    n: usize,
    bins: usize,
    dt: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amp_cap: Option<f64>,
}

impl PulseSchedule {
    /// All-zero schedule.
    pub fn zeros(n: usize, bins: usize, dt: f64) -> Result<Self> {
        Self::from_amplitudes(n, bins, dt, vec![0.0; n * bins], vec![0.0; n * bins])
    }

    pub fn from_amplitudes(n: usize, bins: usize, dt: f64, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid!("schedule needs at least one qubit"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid!("bin width must be positive and finite, got {dt}"));
        }
        if x.len() != n * bins || y.len() != n * bins {
            return Err(invalid!("amplitude arrays must have n*bins = {} entries", n * bins));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(invalid!("amplitudes must be finite"));
        }
        Ok(Self { n, bins, dt, x, y, amp_cap: None })
    }

    /// Every qubit driven with the same constant amplitudes.
    pub fn constant(n: usize, bins: usize, dt: f64, x: f64, y: f64) -> Result<Self> {
        Self::from_amplitudes(n, bins, dt, vec![x; n * bins], vec![y; n * bins])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn total_time(&self) -> f64 {
        self.bins as f64 * self.dt
    }

    pub fn x(&self, qubit: usize, bin: usize) -> f64 {
        self.x[qubit * self.bins + bin]
    }

    pub fn y(&self, qubit: usize, bin: usize) -> f64 {
        self.y[qubit * self.bins + bin]
    }

    pub fn amplitude(&self, axis: Quadrature, qubit: usize, bin: usize) -> f64 {
        match axis {
            Quadrature::X => self.x(qubit, bin),
            Quadrature::Y => self.y(qubit, bin),
        }
    }

    pub fn set(&mut self, axis: Quadrature, qubit: usize, bin: usize, value: f64) {
        let k = qubit * self.bins + bin;
        match axis {
            Quadrature::X => self.x[k] = value,
            Quadrature::Y => self.y[k] = value,
        }
    }

    pub fn x_row(&self, qubit: usize) -> &[f64] {
        &self.x[qubit * self.bins..(qubit + 1) * self.bins]
    }

    pub fn y_row(&self, qubit: usize) -> &[f64] {
        &self.y[qubit * self.bins..(qubit + 1) * self.bins]
    }

    pub fn x_all(&self) -> &[f64] {
        &self.x
    }

    pub fn y_all(&self) -> &[f64] {
        &self.y
    }

    pub fn num_params(&self) -> usize {
        2 * self.n * self.bins
    }

    pub fn to_params(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    /// Same shape, amplitudes taken from a flat parameter vector.
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.num_params() {
            return Err(invalid!("expected {} parameters, got {}", self.num_params(), params.len()));
        }
        let half = self.n * self.bins;
        let mut out = Self::from_amplitudes(self.n, self.bins, self.dt, params[..half].to_vec(), params[half..].to_vec())?;
        out.amp_cap = self.amp_cap;
        Ok(out)
    }

    pub fn amp_cap(&self) -> Option<f64> {
        self.amp_cap
    }

    pub fn with_amp_cap(mut self, cap: Option<f64>) -> Result<Self> {
        if let Some(c) = cap {
            if !(c > 0.0) {
                return Err(invalid!("amplitude cap must be positive, got {c}"));
            }
        }
        self.amp_cap = cap;
        Ok(self)
    }

    pub fn max_amplitude(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rows appended by copying the last existing row.
    pub(crate) fn push_row_copy(&mut self) {
        let last = self.n - 1;
        let xr = self.x_row(last).to_vec();
        let yr = self.y_row(last).to_vec();
        self.x.extend(xr);
        self.y.extend(yr);
        self.n += 1;
    }
}

/// Tunable ZZ coupling strength on each bond, constant in time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPattern {
    pub g: Vec<f64>,
}

impl CouplingPattern {
    pub fn zero(n: usize) -> Self {
        Self { g: vec![0.0; n.saturating_sub(1)] }
    }

    /// `g` on bonds (0,1), (2,3), ... and zero on the bonds between pairs.
    pub fn alternating(n: usize, g: f64) -> Self {
        Self {
            g: (0..n.saturating_sub(1)).map(|b| if b % 2 == 0 { g } else { 0.0 }).collect(),
        }
    }

    pub fn uniform(n: usize, g: f64) -> Self {
        Self { g: vec![g; n.saturating_sub(1)] }
    }

    pub fn bonds(&self) -> usize {
        self.g.len()
    }
}
