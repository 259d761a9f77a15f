//! Photon-number-diagonal states on a truncated Fock basis.
//!
//! A [`DiagonalState`] stores the occupation probabilities `p_0 ..= p_{n_max}`
//! together with the probability mass known to lie beyond the cutoff. Moments
//! are accumulated over the stored entries only; `tail_mass` bounds the bias.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, Error, Result};
use crate::table::{fmt_f64, write_csv};

/// Allowed deviation of `sum(probs) + tail_mass` from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Target tail mass used by [`thermal_cutoff`].
pub const DEFAULT_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState")]
pub struct DiagonalState {
    probs: Vec<f64>,
    tail_mass: f64,
}

#[derive(Deserialize)]
struct RawState {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl TryFrom<RawState> for DiagonalState {
    type Error = Error;

    fn try_from(raw: RawState) -> Result<Self> {
        DiagonalState::new(raw.probs, raw.tail_mass)
    }
}

impl DiagonalState {
    /// Validates and wraps a probability vector with its analytic tail.
    pub fn new(probs: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("a diagonal state needs at least one entry"));
        }
        if let Some((n, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::domain(format!("probability p_{n} = {p} is negative or not finite")));
        }
        check_non_negative("tail_mass", tail_mass)?;
        let total = probs.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::domain(format!(
                "state is not normalized: sum(probs) + tail_mass = {total}"
            )));
        }
        Ok(Self { probs, tail_mass })
    }

    /// Normalizes non-negative weights into an exact (tail-free) state.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::domain(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::domain("weights sum to zero"));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect(), 0.0)
    }

    /// The Fock state `|n><n|`.
    pub fn fock(n: usize) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        Self { probs, tail_mass: 0.0 }
    }

    pub fn vacuum() -> Self {
        Self::fock(0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Largest stored photon number.
    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Probability of `n` photons; zero beyond the cutoff.
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Two-column CSV `(n, p)` preceded by a metadata comment line.
    pub fn write_csv<W: Write>(&self, out: W, metadata: &str) -> Result<()> {
        let rows = self
            .probs
            .iter()
            .enumerate()
            .map(|(n, p)| [n.to_string(), fmt_f64(*p)]);
        write_csv(out, metadata, &["n", "p"], rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub n_th: f64,
}

impl ThermalParams {
    pub fn new(n_th: f64) -> Result<Self> {
        check_non_negative("n_th", n_th)?;
        Ok(Self { n_th })
    }
}

/// Ratio `N/(1+N)` of consecutive thermal probabilities.
pub(crate) fn thermal_ratio(n: f64) -> f64 {
    n / (1.0 + n)
}

/// Thermal probability `nu_k(N) = (1/(1+N)) (N/(1+N))^k`.
pub fn thermal_pmf(k: usize, mean: f64) -> f64 {
    thermal_ratio(mean).powi(k as i32) / (1.0 + mean)
}

/// Bose-Einstein distribution with mean `n_th`, truncated at `n_max`.
pub fn thermal_state(params: ThermalParams, n_max: usize) -> Result<DiagonalState> {
    let n_th = params.n_th;
    check_non_negative("n_th", n_th)?;
    let probs: Vec<f64> = (0..=n_max).map(|k| thermal_pmf(k, n_th)).collect();
    let tail_mass = thermal_ratio(n_th).powi(n_max as i32 + 1);
    DiagonalState::new(probs, tail_mass)
}

/// Cutoff whose thermal tail mass is below `1e-12` (never less than 16).
pub fn thermal_cutoff(n_th: f64) -> usize {
    cutoff_for_tail(n_th, DEFAULT_TAIL)
}

/// `n_max = ceil(ln(tail) / ln(N/(1+N)))`, at least 16, so that the mass
/// beyond the cutoff, `(N/(1+N))^(n_max+1)`, is below `tail`.
pub fn cutoff_for_tail(n_th: f64, tail: f64) -> usize {
    let ratio = thermal_ratio(n_th);
    if ratio <= 0.0 {
        return 16;
    }
    let n = (tail.ln() / ratio.ln()).ceil();
    (n as usize).max(16)
}

/// Mean over the stored entries.
pub fn mean(state: &DiagonalState) -> f64 {
    moments(state).0
}

pub fn variance(state: &DiagonalState) -> f64 {
    moments(state).1
}

/// Single pass over the entries accumulating the first two moments.
fn moments(state: &DiagonalState) -> (f64, f64) {
    let (m1, m2) = state.probs.iter().enumerate().fold((0.0, 0.0), |(m1, m2), (n, p)| {
        let n = n as f64;
        (m1 + n * p, m2 + n * n * p)
    });
    (m1, (m2 - m1 * m1).max(0.0))
}

/// Variance-to-mean ratio.
pub fn fano(state: &DiagonalState) -> Result<f64> {
    let (m, v) = moments(state);
    if !(m > 0.0) {
        return Err(Error::UndefinedStatistic(
            "Fano factor of a zero-mean distribution".into(),
        ));
    }
    Ok(v / m)
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn shannon_entropy(state: &DiagonalState) -> f64 {
    entropy_of(&state.probs)
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    -probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Entropy of the thermal state with mean `n`: `n ln(1 + 1/n) + ln(1 + n)`.
pub fn thermal_entropy(n: f64) -> Result<f64> {
    check_non_negative("mean photon number", n)?;
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(n * n.recip().ln_1p() + n.ln_1p())
}

/// Bhattacharyya overlap `sum_m sqrt(p_m q_m)`; the shorter support is zero-padded.
pub fn fidelity(p: &DiagonalState, q: &DiagonalState) -> f64 {
    overlap(&p.probs, &q.probs)
}

pub(crate) fn overlap(p: &[f64], q: &[f64]) -> f64 {
    let f: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    f.min(1.0)
}
