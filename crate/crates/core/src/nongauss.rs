//! Non-Gaussianity of photon-number-diagonal states.
//!
//! For a diagonal state the reference Gaussian state is the thermal state with
//! the same mean photon number, so the measure reduces to an entropy gap:
//! `delta[p] = S[nu(N)] - S(p)` with `N = sum n p_n`. Evaluated on a detected
//! (loss-smeared) distribution the same functional gives `eps`, which never
//! exceeds `delta` of the state before detection because the pure-loss
//! channel is Gaussian and the measure is monotone under Gaussian maps.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Result};
use crate::fock::{mean, shannon_entropy, thermal_entropy, DiagonalState};
use crate::photon_ops::lossy_channel;

/// Numerical slack allowed in `eps <= delta` and `eps >= 0`.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NongReport {
    /// Non-Gaussianity of the state itself.
    pub delta: f64,
    /// Lower bound obtained from the detected distribution.
    pub eps: f64,
    pub eta_used: f64,
}

impl NongReport {
    pub fn bound_holds(&self) -> bool {
        self.eps <= self.delta + BOUND_SLACK && self.eps >= -BOUND_SLACK
    }
}

/// `S[nu(mean(p))] - S(p)` in nats.
pub fn nong_delta(p: &DiagonalState) -> f64 {
    let n = mean(p).max(0.0);
    // thermal_entropy only fails on negative input, excluded above
    thermal_entropy(n).unwrap_or(0.0) - shannon_entropy(p)
}

/// The same functional applied to a detected-photon distribution.
pub fn nong_eps(detected: &DiagonalState) -> f64 {
    nong_delta(detected)
}

/// Computes `delta[p]` and `eps = delta[E_eta(p)]` and reports whether
/// `eps <= delta` holds within [`BOUND_SLACK`].
pub fn verify_monotonicity(p: &DiagonalState, eta: f64) -> Result<(NongReport, bool)> {
    check_probability("quantum efficiency", eta)?;
    let detected = lossy_channel(p, eta)?;
    let report = NongReport { delta: nong_delta(p), eps: nong_eps(&detected), eta_used: eta };
    Ok((report, report.bound_holds()))
}
