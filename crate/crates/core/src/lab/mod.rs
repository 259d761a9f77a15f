//! Shot-level emulation of a thermal photon-subtraction experiment.
//!
//! Each laser shot draws a Bose-Einstein photon number, splits it on a beam
//! splitter, detects each arm with a Bernoulli counter and converts the count
//! into a voltage with a per-detector gain `gamma`. Analysis works on the
//! voltages: they are re-binned into integer counts and then conditioned on
//! the reflected arm.

mod analysis;
mod calibrate;
mod io;
mod sampling;

pub use analysis::{
    condition_counts, condition_records, counts_from_voltages, predicted_distribution, summarize, ArmSummary, ConditionMode,
    ConditionSummary, ConditionedHistogram, RunSummary,
};
pub use calibrate::{calibrate_gamma, comb_score, rebin_voltages, MIN_CALIBRATION_SAMPLES};
pub use io::{
    read_shot_file, write_shot_file, ShotFile, ShotFileHeader, ShotFormat, BINARY_MAGIC, FORMAT_VERSION,
    RECORD_BYTES,
};
pub use sampling::{run_experiment, simulate_shot, ShotStream};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest detected count inside the linear range of a detector.
pub const SATURATION_LIMIT: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub eta: f64,
    /// Volts per detected photon.
    pub gamma: f64,
    /// Standard deviation of additive Gaussian voltage noise, in volts.
    #[serde(default)]
    pub noise_sigma: f64,
}

impl DetectorModel {
    pub fn new(eta: f64, gamma: f64) -> Self {
        Self { eta, gamma, noise_sigma: 0.0 }
    }

    pub fn with_noise(mut self, noise_sigma: f64) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    fn validate(&self, arm: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("{arm} efficiency must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!("{arm} gamma must be positive, got {}", self.gamma)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "{arm} noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_th: f64,
    pub tau: f64,
    pub det_t: DetectorModel,
    pub det_r: DetectorModel,
    pub shots: u64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    /// Balanced splitter, `N_th = 5`, efficiencies giving `M_T ≈ 1.254` and
    /// `M_R ≈ 1.679`, 30 000 shots.
    fn default() -> Self {
        Self {
            n_th: 5.0,
            tau: 0.5,
            det_t: DetectorModel::new(0.5016, 0.093),
            det_r: DetectorModel::new(0.6716, 0.104),
            shots: 30_000,
            seed: 0x5eed,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_th.is_finite() && self.n_th >= 0.0) {
            return Err(Error::Config(format!("n_th must be finite and >= 0, got {}", self.n_th)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        self.det_t.validate("transmitted-arm")?;
        self.det_r.validate("reflected-arm")
    }

    /// Mean detected photons `(M_T, M_R) = (τ η_T N, (1-τ) η_R N)`.
    pub fn detected_means(&self) -> (f64, f64) {
        (
            self.tau * self.det_t.eta * self.n_th,
            (1.0 - self.tau) * self.det_r.eta * self.n_th,
        )
    }
}

/// One laser shot: true photon numbers, detected counts and voltages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub n_true: u32,
    pub s_r: u32,
    pub s_t: u32,
    pub m_r: u32,
    pub m_t: u32,
    pub v_r: f64,
    pub v_t: f64,
}
