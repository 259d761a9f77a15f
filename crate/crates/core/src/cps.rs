//! Conclusive photon subtraction: the transmitted beam is kept only when the
//! reflected-arm counter registers exactly `m_R` photons.

use std::io::Write;
use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{check_condition, check_non_negative, check_probability, Error, Result};
use crate::fock::{cutoff_for_tail, fano, mean, thermal_pmf, thermal_state, DiagonalState, ThermalParams};
use crate::nongauss::nong_eps;
use crate::photon_ops::{binomial_pmf, lossy_channel, two_mode_table};
use crate::table::{fmt_f64, write_csv};

/// Conditioning values swept by default.
pub const DEFAULT_SWEEP: RangeInclusive<usize> = 0..=6;

/// A conditional state together with the probability of its heralding event.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioned {
    pub state: DiagonalState,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpsResult {
    /// Detected-photon distribution of the transmitted arm given `m_r`.
    pub state: DiagonalState,
    pub p_condition: f64,
    pub m_r: usize,
    pub m_cps: f64,
    pub fano_cps: f64,
    pub eps_nong: f64,
}

/// Photon-number distribution of the transmitted mode after the reflected
/// counter (efficiency `eta_r`) registered `m_r` photons:
/// `p_n ∝ sum_{s >= m_r} B_{s,m_r}(eta_r) rho_{s+n} C(s+n, s) tau^n (1-tau)^s`.
///
/// The result is truncated at `n_max`; the conditional mass beyond it is
/// reported as the tail.
pub fn cps_photon_state(
    input: &DiagonalState,
    tau: f64,
    eta_r: f64,
    m_r: usize,
    n_max: usize,
) -> Result<Conditioned> {
    check_probability("transmissivity", tau)?;
    check_probability("reflected-arm efficiency", eta_r)?;
    let photons = two_mode_table(input, tau);
    let weights: Vec<f64> = photons
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .skip(m_r)
                .map(|(s, p)| if *p == 0.0 { 0.0 } else { p * binomial_pmf(s, m_r, eta_r, 1.0 - eta_r) })
                .sum()
        })
        .collect();
    let probability: f64 = weights.iter().sum();
    check_condition(probability)?;
    let mut probs: Vec<f64> = weights.iter().take(n_max + 1).map(|w| w / probability).collect();
    probs.resize(n_max + 1, 0.0);
    let tail = weights.iter().skip(n_max + 1).sum::<f64>() / probability;
    Ok(Conditioned { state: DiagonalState::new(probs, tail)?, probability })
}

/// CPS state as seen by the transmitted-arm counter, with its statistics.
pub fn cps_detected(
    input: &DiagonalState,
    tau: f64,
    eta_r: f64,
    eta_t: f64,
    m_r: usize,
) -> Result<CpsResult> {
    check_probability("transmitted-arm efficiency", eta_t)?;
    let photon = cps_photon_state(input, tau, eta_r, m_r, input.n_max())?;
    let state = lossy_channel(&photon.state, eta_t)?;
    summarize(state, photon.probability, m_r)
}

fn summarize(state: DiagonalState, p_condition: f64, m_r: usize) -> Result<CpsResult> {
    let fano_cps = fano(&state)?;
    Ok(CpsResult {
        m_cps: mean(&state),
        eps_nong: nong_eps(&state),
        fano_cps,
        state,
        p_condition,
        m_r,
    })
}

/// Thermal input whose ideal-detector statistics reproduce the detected
/// means `(M_T, M_R)`: `N = M_T + M_R`, `tau = M_T / N`.
pub fn equivalent_thermal_input(big_mt: f64, big_mr: f64) -> Result<(DiagonalState, f64)> {
    check_non_negative("M_T", big_mt)?;
    check_non_negative("M_R", big_mr)?;
    let n = big_mt + big_mr;
    let tau = if n > 0.0 { big_mt / n } else { 1.0 };
    let state = thermal_state(ThermalParams::new(n)?, cutoff_for_tail(n, 1e-16))?;
    Ok((state, tau))
}

/// [`cps_detected`] for thermal light parameterized by detected means.
pub fn cps_detected_thermal(big_mt: f64, big_mr: f64, m_r: usize) -> Result<CpsResult> {
    let (input, tau) = equivalent_thermal_input(big_mt, big_mr)?;
    cps_detected(&input, tau, 1.0, 1.0, m_r)
}

/// `m_r`-independent CPS Fano factor `(1 + M_T + M_R) / (1 + M_R)`.
pub fn cps_fano_closed(big_mt: f64, big_mr: f64) -> f64 {
    (1.0 + big_mt + big_mr) / (1.0 + big_mr)
}

/// Mean detected photons of the CPS state, `(m_R + 1) M_T / (1 + M_R)`.
pub fn cps_mean_closed(big_mt: f64, big_mr: f64, m_r: usize) -> f64 {
    (m_r as f64 + 1.0) * big_mt / (1.0 + big_mr)
}

/// Heralding probability for thermal light: the thermal marginal `nu_{m_R}(M_R)`.
pub fn cps_condition_probability_closed(big_mr: f64, m_r: usize) -> f64 {
    thermal_pmf(m_r, big_mr)
}

/// Lower bound on the non-Gaussianity of the CPS state from its detected distribution.
pub fn cps_nong_bound(detected: &DiagonalState) -> Result<f64> {
    if !(mean(detected) > 0.0) {
        return Err(Error::UndefinedStatistic("nonG bound of a zero-mean distribution".into()));
    }
    Ok(nong_eps(detected))
}

/// Evaluates [`cps_detected_thermal`] for every conditioning value in `m_rs`.
pub fn cps_sweep(big_mt: f64, big_mr: f64, m_rs: RangeInclusive<usize>) -> Result<Vec<CpsResult>> {
    let (input, tau) = equivalent_thermal_input(big_mt, big_mr)?;
    m_rs.map(|m_r| cps_detected(&input, tau, 1.0, 1.0, m_r)).collect()
}

/// One CPS sweep row: the detected means together with the result.
#[derive(Debug, Clone)]
pub struct CpsRow {
    pub big_mt: f64,
    pub big_mr: f64,
    pub result: CpsResult,
}

pub const CPS_COLUMNS: [&str; 10] =
    ["M_T", "M_R", "M_T+M_R", "m_R", "p_R", "M_CPS", "F_CPS", "F_T", "eps", "F_CPS_closed"];

impl CpsRow {
    pub fn fields(&self) -> [String; 10] {
        let r = &self.result;
        [
            fmt_f64(self.big_mt),
            fmt_f64(self.big_mr),
            fmt_f64(self.big_mt + self.big_mr),
            r.m_r.to_string(),
            fmt_f64(r.p_condition),
            fmt_f64(r.m_cps),
            fmt_f64(r.fano_cps),
            fmt_f64(1.0 + self.big_mt),
            fmt_f64(r.eps_nong),
            fmt_f64(cps_fano_closed(self.big_mt, self.big_mr)),
        ]
    }
}

pub fn write_cps_csv<W: Write>(out: W, metadata: &str, rows: &[CpsRow]) -> Result<()> {
    write_csv(out, metadata, &CPS_COLUMNS, rows.iter().map(CpsRow::fields))
}
