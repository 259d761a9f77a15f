//! Conditioning of shot data and comparison with the analytic predictions.

use serde::{Deserialize, Serialize};

use super::calibrate::rebin_voltages;
use super::{ExperimentConfig, ShotRecord};
use crate::cps::{cps_detected_thermal, DEFAULT_SWEEP};
use crate::error::{Error, Result};
use crate::fock::{cutoff_for_tail, fano, fidelity, mean, thermal_state, DiagonalState, ThermalParams};
use crate::ips::ips_state;
use crate::nongauss::nong_eps;

/// Which shots of the transmitted arm are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ConditionMode {
    Unconditional,
    /// Exactly `m_r` counts in the reflected arm.
    Cps { m_r: u32 },
    /// Any nonzero count in the reflected arm.
    Ips,
}

impl ConditionMode {
    fn accepts(&self, m_r: u32) -> bool {
        match *self {
            ConditionMode::Unconditional => true,
            ConditionMode::Cps { m_r: wanted } => m_r == wanted,
            ConditionMode::Ips => m_r > 0,
        }
    }

    fn describe(&self) -> String {
        match self {
            ConditionMode::Unconditional => "any shot".into(),
            ConditionMode::Cps { m_r } => format!("m_R = {m_r}"),
            ConditionMode::Ips => "m_R >= 1".into(),
        }
    }
}

/// Normalized histogram of the transmitted counts over the selected shots.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedHistogram {
    pub state: DiagonalState,
    pub selected: u64,
    pub total: u64,
    /// Empirical probability of the selection, `selected / total`.
    pub probability: f64,
}

/// Conditions `(m_r, m_t)` count pairs.
pub fn condition_counts(counts: &[(u32, u32)], mode: ConditionMode) -> Result<ConditionedHistogram> {
    let mut hist: Vec<u64> = Vec::new();
    let mut selected = 0u64;
    for &(m_r, m_t) in counts {
        if !mode.accepts(m_r) {
            continue;
        }
        let m_t = m_t as usize;
        if hist.len() <= m_t {
            hist.resize(m_t + 1, 0);
        }
        hist[m_t] += 1;
        selected += 1;
    }
    if selected == 0 {
        return Err(Error::EmptySelection(mode.describe()));
    }
    let state = DiagonalState::from_weights(hist.iter().map(|c| *c as f64).collect())?;
    let total = counts.len() as u64;
    Ok(ConditionedHistogram { state, selected, total, probability: selected as f64 / total as f64 })
}

/// Conditions records on their detected counts.
pub fn condition_records(records: &[ShotRecord], mode: ConditionMode) -> Result<ConditionedHistogram> {
    let counts: Vec<(u32, u32)> = records.iter().map(|r| (r.m_r, r.m_t)).collect();
    condition_counts(&counts, mode)
}

/// `(m_r, m_t)` recovered from the voltages with the configured gains.
pub fn counts_from_voltages(records: &[ShotRecord], cfg: &ExperimentConfig) -> Result<Vec<(u32, u32)>> {
    let v_r: Vec<f64> = records.iter().map(|r| r.v_r).collect();
    let v_t: Vec<f64> = records.iter().map(|r| r.v_t).collect();
    let m_r = rebin_voltages(&v_r, cfg.det_r.gamma)?;
    let m_t = rebin_voltages(&v_t, cfg.det_t.gamma)?;
    Ok(m_r.into_iter().zip(m_t).collect())
}

/// Empirical statistics of one conditioned histogram next to the theory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    #[serde(flatten)]
    pub mode: ConditionMode,
    pub selected: u64,
    pub probability: f64,
    pub mean: Option<f64>,
    pub fano: Option<f64>,
    /// Delta-method standard error of `fano`.
    pub fano_stderr: Option<f64>,
    pub eps: Option<f64>,
    pub probability_theory: Option<f64>,
    pub mean_theory: Option<f64>,
    pub fano_theory: Option<f64>,
    pub eps_theory: Option<f64>,
    /// Overlap between the empirical histogram and the predicted distribution.
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub mean: f64,
    pub fano: Option<f64>,
    pub fidelity: f64,
}

/// Everything the analysis of a run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub shots: u64,
    pub big_mt: f64,
    pub big_mr: f64,
    pub reflected: ArmSummary,
    pub unconditional: ConditionSummary,
    pub cps: Vec<ConditionSummary>,
    pub ips: ConditionSummary,
}

struct Theory {
    state: DiagonalState,
    probability: f64,
    mean: f64,
    fano: f64,
    eps: f64,
}

fn theory(cfg: &ExperimentConfig, mode: ConditionMode) -> Option<Theory> {
    let (big_mt, big_mr) = cfg.detected_means();
    match mode {
        ConditionMode::Unconditional => {
            let state = thermal_state(ThermalParams::new(big_mt).ok()?, cutoff_for_tail(big_mt, 1e-16)).ok()?;
            Some(Theory { probability: 1.0, mean: big_mt, fano: 1.0 + big_mt, eps: nong_eps(&state), state })
        }
        ConditionMode::Cps { m_r } => {
            let r = cps_detected_thermal(big_mt, big_mr, m_r as usize).ok()?;
            Some(Theory { probability: r.p_condition, mean: r.m_cps, fano: r.fano_cps, eps: r.eps_nong, state: r.state })
        }
        ConditionMode::Ips => {
            let mt_max = cutoff_for_tail(big_mt, 1e-16);
            let r = ips_state(cfg.n_th, cfg.tau, cfg.det_r.eta, cfg.det_t.eta, mt_max).ok()?;
            Some(Theory { probability: r.p_on, mean: r.m_ips, fano: r.fano_ips, eps: r.eps_nong, state: r.detected })
        }
    }
}

/// Predicted transmitted-arm distribution for a selection, when defined.
pub fn predicted_distribution(cfg: &ExperimentConfig, mode: ConditionMode) -> Option<DiagonalState> {
    theory(cfg, mode).map(|t| t.state)
}

/// Delta-method standard error of the sample variance-to-mean ratio.
fn fano_stderr(state: &DiagonalState, n: u64) -> Option<f64> {
    let mu = mean(state);
    if !(mu > 0.0) || n < 2 {
        return None;
    }
    let central = |k: i32| -> f64 {
        state.probs().iter().enumerate().map(|(m, p)| p * (m as f64 - mu).powi(k)).sum()
    };
    let (v, m3, m4) = (central(2), central(3), central(4));
    let var = ((m4 - v * v) / (mu * mu) + v.powi(3) / mu.powi(4) - 2.0 * v * m3 / mu.powi(3)) / n as f64;
    Some(var.max(0.0).sqrt())
}

fn summarize_histogram(cfg: &ExperimentConfig, mode: ConditionMode, hist: &ConditionedHistogram) -> ConditionSummary {
    let t = theory(cfg, mode);
    let state = &hist.state;
    let has_mean = mean(state) > 0.0;
    ConditionSummary {
        mode,
        selected: hist.selected,
        probability: hist.probability,
        mean: Some(mean(state)),
        fano: fano(state).ok(),
        fano_stderr: fano_stderr(state, hist.selected),
        eps: has_mean.then(|| nong_eps(state)),
        probability_theory: t.as_ref().map(|t| t.probability),
        mean_theory: t.as_ref().map(|t| t.mean),
        fano_theory: t.as_ref().map(|t| t.fano),
        eps_theory: t.as_ref().map(|t| t.eps),
        fidelity: t.as_ref().map(|t| fidelity(state, &t.state)),
    }
}

fn empty_summary(cfg: &ExperimentConfig, mode: ConditionMode) -> ConditionSummary {
    let t = theory(cfg, mode);
    ConditionSummary {
        mode,
        selected: 0,
        probability: 0.0,
        mean: None,
        fano: None,
        fano_stderr: None,
        eps: None,
        probability_theory: t.as_ref().map(|t| t.probability),
        mean_theory: t.as_ref().map(|t| t.mean),
        fano_theory: t.as_ref().map(|t| t.fano),
        eps_theory: t.as_ref().map(|t| t.eps),
        fidelity: None,
    }
}

impl ConditionSummary {
    /// Summary of one selection; an empty selection is an error.
    pub fn from_counts(cfg: &ExperimentConfig, counts: &[(u32, u32)], mode: ConditionMode) -> Result<Self> {
        let hist = condition_counts(counts, mode)?;
        Ok(summarize_histogram(cfg, mode, &hist))
    }
}

/// Full report for a run, computed from the re-binned voltages. Selections
/// with no shots are reported with `selected = 0` and no empirical statistics.
pub fn summarize(cfg: &ExperimentConfig, records: &[ShotRecord]) -> Result<RunSummary> {
    cfg.validate()?;
    let counts = counts_from_voltages(records, cfg)?;
    let (big_mt, big_mr) = cfg.detected_means();
    let condition = |mode: ConditionMode| match ConditionSummary::from_counts(cfg, &counts, mode) {
        Err(Error::EmptySelection(_)) => Ok(empty_summary(cfg, mode)),
        other => other,
    };

    let reflected_counts: Vec<(u32, u32)> = counts.iter().map(|&(m_r, _)| (0, m_r)).collect();
    let reflected = condition_counts(&reflected_counts, ConditionMode::Unconditional)?.state;
    let reflected_theory = thermal_state(ThermalParams::new(big_mr)?, cutoff_for_tail(big_mr, 1e-16))?;

    Ok(RunSummary {
        config: *cfg,
        shots: records.len() as u64,
        big_mt,
        big_mr,
        reflected: ArmSummary {
            mean: mean(&reflected),
            fano: fano(&reflected).ok(),
            fidelity: fidelity(&reflected, &reflected_theory),
        },
        unconditional: condition(ConditionMode::Unconditional)?,
        cps: DEFAULT_SWEEP
            .map(|m_r| condition(ConditionMode::Cps { m_r: m_r as u32 }))
            .collect::<Result<_>>()?,
        ips: condition(ConditionMode::Ips)?,
    })
}
