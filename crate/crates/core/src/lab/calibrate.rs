//! Voltage re-binning and gain self-calibration.
//!
//! The calibration score of a trial gain `g` is the mean comb likelihood
//! `exp(-d^2 / (2 w^2))`, `d = |v - g round(v/g)|`, with the width `w` fixed
//! in volts. A comb with spacing `g/k` fits every sample that `g` fits, so
//! sub-multiples of the true gain score just as well; the largest gain whose
//! score is within 5% of the best is therefore taken.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MIN_CALIBRATION_SAMPLES: usize = 1000;

const GRID_POINTS: usize = 4000;
const WIDTH_FRACTION: f64 = 0.05;
const NEAR_MAX: f64 = 0.95;
const FLAT_TOLERANCE: f64 = 1e-6;
const GOLDEN_ITERATIONS: usize = 80;

/// `round(v / gamma)` clamped at zero.
pub fn rebin_voltages(voltages: &[f64], gamma: f64) -> Result<Vec<u32>> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
    }
    Ok(voltages.iter().map(|v| (v / gamma).round().max(0.0) as u32).collect())
}

/// Mean comb likelihood of `voltages` for gain `gamma` and width `width` volts.
pub fn comb_score(voltages: &[f64], gamma: f64, width: f64) -> f64 {
    weighted_comb_score(&distinct_levels(voltages), gamma, width) / voltages.len() as f64
}

fn comb_term(v: f64, gamma: f64, scale: f64) -> f64 {
    let d = v - gamma * (v / gamma).round();
    (scale * d * d).exp()
}

/// Distinct voltages with their multiplicities; noiseless data collapses to
/// a handful of levels.
fn distinct_levels(voltages: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = voltages.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut levels: Vec<(f64, f64)> = Vec::new();
    for v in sorted {
        match levels.last_mut() {
            Some((last, count)) if *last == v => *count += 1.0,
            _ => levels.push((v, 1.0)),
        }
    }
    levels
}

fn weighted_comb_score(levels: &[(f64, f64)], gamma: f64, width: f64) -> f64 {
    let scale = -0.5 / (width * width);
    levels.iter().map(|(v, count)| count * comb_term(*v, gamma, scale)).sum()
}

/// Gain in `range` best explaining the voltages as a comb of integer counts.
pub fn calibrate_gamma(voltages: &[f64], range: (f64, f64)) -> Result<f64> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
        return Err(Error::domain(format!("invalid gamma range [{lo}, {hi}]")));
    }
    if voltages.len() < MIN_CALIBRATION_SAMPLES {
        return Err(Error::domain(format!(
            "calibration needs at least {MIN_CALIBRATION_SAMPLES} samples, got {}",
            voltages.len()
        )));
    }
    if let Some(v) = voltages.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite voltage {v}")));
    }

    let width = WIDTH_FRACTION * lo;
    let levels = distinct_levels(voltages);
    let score = |g: f64| weighted_comb_score(&levels, g, width) / voltages.len() as f64;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let scores: Vec<f64> = grid.par_iter().map(|&g| score(g)).collect();

    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst = scores.iter().copied().fold(f64::INFINITY, f64::min);
    if best - worst < FLAT_TOLERANCE {
        return Err(Error::FlatScore { lo, hi });
    }

    let is_peak = |i: usize| {
        let left = if i == 0 { f64::NEG_INFINITY } else { scores[i - 1] };
        let right = scores.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
        scores[i] >= left && scores[i] >= right
    };
    let pick = (0..GRID_POINTS)
        .rev()
        .find(|&i| scores[i] >= NEAR_MAX * best && is_peak(i))
        .unwrap_or(0);

    let a = (grid[pick] - step).max(lo);
    let b = (grid[pick] + step).min(hi);
    Ok(golden_max(score, a, b))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERATIONS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
