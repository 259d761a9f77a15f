//! Beam-splitter splitting, inefficient photon counting and the joint
//! detected-photon distribution of the two beam-splitter outputs.
//!
//! All binomial weights are evaluated through log-factorials so that photon
//! numbers in the thousands stay finite.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{check_non_negative, check_probability, Error, Result};
use crate::fock::{thermal_ratio, DiagonalState};
use crate::table::{fmt_f64, write_csv};

/// Stored input mass at the top of the photon-number range that is ignored.
pub const SOURCE_TAIL_CUTOFF: f64 = 1e-18;

/// `C(n,k) p^k q^(n-k)` with `q = 1 - p` supplied by the caller, so that
/// either probability can be formed without cancellation.
#[inline]
pub(crate) fn binomial_pmf(n: usize, k: usize, p: f64, q: f64) -> f64 {
    debug_assert!(k <= n);
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let (n, k) = (n as u64, k as u64);
    (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * q.ln()).exp()
}

/// Squared splitting amplitude `C(n,s) tau^(n-s) (1-tau)^s`: the probability
/// that `s` of `n` photons are reflected.
pub fn split_weight(n: usize, s: usize, tau: f64) -> Result<f64> {
    check_probability("transmissivity", tau)?;
    if s > n {
        return Err(Error::domain(format!("reflected photons s = {s} exceed n = {n}")));
    }
    Ok(binomial_pmf(n, s, 1.0 - tau, tau))
}

/// POVM weight `B_{s,m}(eta)`: probability of registering `m` of `s` photons.
pub fn bernoulli_weight(s: usize, m: usize, eta: f64) -> Result<f64> {
    check_probability("quantum efficiency", eta)?;
    if m > s {
        return Err(Error::domain(format!("detected photons m = {m} exceed s = {s}")));
    }
    Ok(binomial_pmf(s, m, eta, 1.0 - eta))
}

/// Lossy (pure-loss) channel with transmissivity `eta` acting on a diagonal state.
///
/// The output keeps the input cutoff; the input tail is carried over unchanged
/// since its image can land anywhere at or below its photon numbers.
pub fn lossy_channel(state: &DiagonalState, eta: f64) -> Result<DiagonalState> {
    check_probability("quantum efficiency", eta)?;
    let probs = attenuate(state.probs(), eta, state.n_max());
    DiagonalState::new(probs, state.tail_mass())
}

/// `q_m = sum_{n >= m} p_n B_{n,m}(eta)` for `m <= m_max`.
pub(crate) fn attenuate(probs: &[f64], eta: f64, m_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; m_max + 1];
    for (n, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (m, q) in out.iter_mut().enumerate().take(n.min(m_max) + 1) {
            *q += p * binomial_pmf(n, m, eta, 1.0 - eta);
        }
    }
    out
}

/// Photon-number table `P[t][s] = rho_{s+t} C(s+t, s) tau^t (1-tau)^s` of the
/// two output modes for a diagonal input mixed with vacuum.
pub(crate) fn two_mode_table(input: &DiagonalState, tau: f64) -> Vec<Vec<f64>> {
    let n_top = source_cutoff(input);
    let mut table = vec![vec![0.0; n_top + 1]; n_top + 1];
    for n in 0..=n_top {
        let rho = input.prob(n);
        if rho == 0.0 {
            continue;
        }
        for s in 0..=n {
            table[n - s][s] = rho * binomial_pmf(n, s, 1.0 - tau, tau);
        }
    }
    table
}

/// Largest source photon number beyond which the stored mass is below
/// [`SOURCE_TAIL_CUTOFF`], summed from the far end.
fn source_cutoff(input: &DiagonalState) -> usize {
    let mut beyond = 0.0;
    for (n, p) in input.probs().iter().enumerate().rev() {
        if beyond + p >= SOURCE_TAIL_CUTOFF {
            return n;
        }
        beyond += p;
    }
    0
}

/// Dense table of detected-photon probabilities `p_TR(m_T, m_R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    mt_max: usize,
    mr_max: usize,
    table: Vec<f64>,
    tail_mass: f64,
    means: Option<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct JointJson {
    mt_max: usize,
    mr_max: usize,
    table: Vec<Vec<f64>>,
}

impl JointDistribution {
    fn from_rows(rows: Vec<Vec<f64>>, mr_max: usize, means: Option<(f64, f64)>) -> Self {
        let mt_max = rows.len() - 1;
        let table: Vec<f64> = rows.into_iter().flatten().collect();
        let mass: f64 = table.iter().sum();
        Self { mt_max, mr_max, table, tail_mass: (1.0 - mass).max(0.0), means }
    }

    /// Closed-form table for thermal input with detected means `M_T`, `M_R`.
    pub fn thermal(big_mt: f64, big_mr: f64, mt_max: usize, mr_max: usize) -> Result<Self> {
        check_non_negative("M_T", big_mt)?;
        check_non_negative("M_R", big_mr)?;
        let rows: Vec<Vec<f64>> = (0..=mt_max)
            .into_par_iter()
            .map(|mt| (0..=mr_max).map(|mr| thermal_cell(mt, mr, big_mt, big_mr)).collect())
            .collect();
        Ok(Self::from_rows(rows, mr_max, Some((big_mt, big_mr))))
    }

    pub fn mt_max(&self) -> usize {
        self.mt_max
    }

    pub fn mr_max(&self) -> usize {
        self.mr_max
    }

    /// Detected means `(M_T, M_R)` when the table was built from thermal light.
    pub fn means(&self) -> Option<(f64, f64)> {
        self.means
    }

    /// Mass outside the stored grid, `1 - sum(table)`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn get(&self, mt: usize, mr: usize) -> f64 {
        if mt > self.mt_max || mr > self.mr_max {
            return 0.0;
        }
        self.table[mt * (self.mr_max + 1) + mr]
    }

    pub fn total_mass(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.table.chunks(self.mr_max + 1)
    }

    /// Marginal over `m_R`, indexed by `m_T`.
    pub fn marginal_t(&self) -> Vec<f64> {
        self.rows().map(|row| row.iter().sum()).collect()
    }

    /// Marginal over `m_T`, indexed by `m_R`.
    pub fn marginal_r(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.mr_max + 1];
        for row in self.rows() {
            for (acc, p) in out.iter_mut().zip(row) {
                *acc += p;
            }
        }
        out
    }

    /// Column `m_R` as a function of `m_T`.
    pub fn column(&self, mr: usize) -> Vec<f64> {
        (0..=self.mt_max).map(|mt| self.get(mt, mr)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let json = JointJson {
            mt_max: self.mt_max,
            mr_max: self.mr_max,
            table: self.rows().map(<[f64]>::to_vec).collect(),
        };
        Ok(serde_json::to_string(&json)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: JointJson = serde_json::from_str(text)?;
        if json.table.len() != json.mt_max + 1
            || json.table.iter().any(|row| row.len() != json.mr_max + 1)
        {
            return Err(Error::domain("table shape does not match mt_max/mr_max"));
        }
        if json.table.iter().flatten().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::domain("joint table holds a negative or non-finite entry"));
        }
        Ok(Self::from_rows(json.table, json.mr_max, None))
    }

    /// Long-format CSV `(m_T, m_R, p)`.
    pub fn write_csv<W: Write>(&self, out: W, metadata: &str) -> Result<()> {
        let rows = (0..=self.mt_max).flat_map(|mt| {
            (0..=self.mr_max).map(move |mr| (mt, mr))
        });
        let records = rows.map(|(mt, mr)| [mt.to_string(), mr.to_string(), fmt_f64(self.get(mt, mr))]);
        write_csv(out, metadata, &["m_T", "m_R", "p"], records)
    }
}

/// Joint detected-photon distribution for an arbitrary diagonal input.
///
/// `p_TR(m_T, m_R) = sum_{t,s} B_{s,m_R}(eta_r) B_{t,m_T}(eta_t) C(s+t,s) tau^t (1-tau)^s rho_{s+t}`.
/// Source photon numbers are summed until the cumulative input mass exceeds
/// `1 - 1e-12`.
pub fn joint_general(
    input: &DiagonalState,
    tau: f64,
    eta_t: f64,
    eta_r: f64,
    mt_max: usize,
    mr_max: usize,
) -> Result<JointDistribution> {
    check_probability("transmissivity", tau)?;
    check_probability("transmitted-arm efficiency", eta_t)?;
    check_probability("reflected-arm efficiency", eta_r)?;
    let photons = two_mode_table(input, tau);
    let n_top = photons.len() - 1;

    // reflected arm: R[t][m_R] = sum_s P[t][s] B_{s,m_R}(eta_r)
    let reflected: Vec<Vec<f64>> = photons
        .par_iter()
        .map(|row| attenuate(row, eta_r, mr_max))
        .collect();

    // transmitted arm, one output row per m_T
    let rows: Vec<Vec<f64>> = (0..=mt_max)
        .into_par_iter()
        .map(|mt| {
            let mut out = vec![0.0; mr_max + 1];
            for (t, row) in reflected.iter().enumerate().take(n_top + 1).skip(mt) {
                let w = binomial_pmf(t, mt, eta_t, 1.0 - eta_t);
                if w == 0.0 {
                    continue;
                }
                for (acc, p) in out.iter_mut().zip(row) {
                    *acc += w * p;
                }
            }
            out
        })
        .collect();
    Ok(JointDistribution::from_rows(rows, mr_max, None))
}

fn thermal_cell(mt: usize, mr: usize, big_mt: f64, big_mr: f64) -> f64 {
    let pow = |k: usize, base: f64| if k == 0 { 0.0 } else { k as f64 * base.ln() };
    if (big_mt == 0.0 && mt > 0) || (big_mr == 0.0 && mr > 0) {
        return 0.0;
    }
    let total = (mt + mr) as u64;
    let log = ln_binomial(total, mr as u64) + pow(mt, big_mt) + pow(mr, big_mr)
        - (total + 1) as f64 * (big_mt + big_mr).ln_1p();
    log.exp()
}

/// Closed-form thermal joint probability
/// `C(m_T+m_R, m_R) M_T^m_T M_R^m_R / (1+M_T+M_R)^(m_T+m_R+1)`.
pub fn joint_thermal(mt: usize, mr: usize, big_mt: f64, big_mr: f64) -> Result<f64> {
    check_non_negative("M_T", big_mt)?;
    check_non_negative("M_R", big_mr)?;
    Ok(thermal_cell(mt, mr, big_mt, big_mr))
}

/// Upper bound on the thermal joint mass outside `[0, mt_max] x [0, mr_max]`:
/// the two thermal marginal tails added together.
pub fn thermal_grid_tail_bound(big_mt: f64, big_mr: f64, mt_max: usize, mr_max: usize) -> f64 {
    thermal_ratio(big_mt).powi(mt_max as i32 + 1) + thermal_ratio(big_mr).powi(mr_max as i32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{mean, thermal_cutoff, thermal_pmf, thermal_state, ThermalParams};

    fn thermal(n: f64, n_max: usize) -> DiagonalState {
        thermal_state(ThermalParams::new(n).unwrap(), n_max).unwrap()
    }

    #[test]
    fn split_weight_examples() {
        assert_eq!(split_weight(1, 0, 0.5).unwrap(), 0.5);
        for n in [0, 1, 7, 300] {
            assert_eq!(split_weight(n, 0, 1.0).unwrap(), 1.0);
        }
        // exact rational: 210 * 3^6 * 7^4 / 10^10
        let exact = (210u128 * 3u128.pow(6) * 7u128.pow(4)) as f64 / 1e10;
        let got = split_weight(10, 4, 0.3).unwrap();
        assert!((got - exact).abs() < 1e-15 * exact.max(1.0), "{got} vs {exact}");
    }

    #[test]
    fn bernoulli_examples() {
        assert_eq!(bernoulli_weight(9, 9, 1.0).unwrap(), 1.0);
        assert_eq!(bernoulli_weight(9, 0, 0.0).unwrap(), 1.0);
        assert!((bernoulli_weight(3, 1, 0.5).unwrap() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn weight_domain_errors() {
        assert!(split_weight(2, 3, 0.5).is_err());
        assert!(split_weight(2, 1, 1.5).is_err());
        assert!(split_weight(2, 1, -0.1).is_err());
        assert!(bernoulli_weight(2, 3, 0.5).is_err());
        assert!(bernoulli_weight(2, 1, f64::NAN).is_err());
    }

    #[test]
    fn large_photon_numbers_stay_finite() {
        let w = split_weight(1000, 500, 0.5).unwrap();
        assert!(w.is_finite() && w > 0.0);
        let total: f64 = (0..=1000).map(|s| split_weight(1000, s, 0.3).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one() {
        for &x in &[0.0, 0.25, 0.5, 0.9, 1.0] {
            for n in (0..=300).step_by(13) {
                let a: f64 = (0..=n).map(|s| split_weight(n, s, x).unwrap()).sum();
                let b: f64 = (0..=n).map(|m| bernoulli_weight(n, m, x).unwrap()).sum();
                assert!((a - 1.0).abs() < 1e-12, "split n={n} x={x}: {a}");
                assert!((b - 1.0).abs() < 1e-12, "bernoulli n={n} x={x}: {b}");
            }
        }
    }

    #[test]
    fn lossy_identity_and_blind() {
        let s = thermal(1.5, 40);
        assert_eq!(lossy_channel(&s, 1.0).unwrap().probs(), s.probs());
        let blind = lossy_channel(&s, 0.0).unwrap();
        assert!((blind.prob(0) - s.probs().iter().sum::<f64>()).abs() < 1e-15);
        assert!(blind.probs()[1..].iter().all(|p| *p == 0.0));
        assert!(lossy_channel(&s, 1.2).is_err());
    }

    #[test]
    fn lossy_thermal_stays_thermal() {
        let s = thermal(2.0, thermal_cutoff(2.0) + 40);
        let out = lossy_channel(&s, 0.5).unwrap();
        for (m, q) in out.probs().iter().enumerate().take(60) {
            assert!((q - thermal_pmf(m, 1.0)).abs() < 1e-10, "m = {m}");
        }
        assert!((mean(&out) - 0.5 * mean(&s)).abs() < 1e-10);
    }

    #[test]
    fn lossy_channel_composes() {
        let s = DiagonalState::from_weights((0..50).map(|n| ((n * 7919) % 13) as f64 + 0.5).collect()).unwrap();
        for &(a, b) in &[(0.3, 0.8), (0.9, 0.9), (0.15, 0.5)] {
            let two = lossy_channel(&lossy_channel(&s, a).unwrap(), b).unwrap();
            let one = lossy_channel(&s, a * b).unwrap();
            for (x, y) in two.probs().iter().zip(one.probs()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn joint_general_vacuum_and_full_transmission() {
        let j = joint_general(&DiagonalState::vacuum(), 0.4, 0.7, 0.6, 5, 5).unwrap();
        assert_eq!(j.get(0, 0), 1.0);
        assert_eq!(j.total_mass(), 1.0);

        let s = thermal(1.0, 60);
        let j = joint_general(&s, 1.0, 1.0, 1.0, 10, 4).unwrap();
        for mt in 0..=10 {
            assert!((j.get(mt, 0) - s.prob(mt)).abs() < 1e-15);
            for mr in 1..=4 {
                assert_eq!(j.get(mt, mr), 0.0);
            }
        }
    }

    #[test]
    fn joint_thermal_examples() {
        assert!((joint_thermal(0, 0, 1.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for mt in 0..20 {
            let p = joint_thermal(mt, 0, 1.7, 0.0).unwrap();
            assert!((p - thermal_pmf(mt, 1.7)).abs() < 1e-15);
            assert_eq!(joint_thermal(mt, 1, 1.7, 0.0).unwrap(), 0.0);
        }
        assert_eq!(joint_thermal(0, 0, 0.0, 0.0).unwrap(), 1.0);
        assert!(joint_thermal(0, 0, -1.0, 0.0).is_err());
    }

    #[test]
    fn joint_general_reduces_to_thermal_closed_form() {
        // tau = 0.5, eta_t = 0.5016, eta_r = 0.6716, N = 5 gives (M_T, M_R) = (1.254, 1.679)
        let s = thermal(5.0, 400);
        let (tau, eta_t, eta_r) = (0.5, 0.5016, 0.6716);
        let general = joint_general(&s, tau, eta_t, eta_r, 39, 39).unwrap();
        let closed = JointDistribution::thermal(tau * eta_t * 5.0, (1.0 - tau) * eta_r * 5.0, 39, 39).unwrap();
        let mut worst = 0.0f64;
        for mt in 0..40 {
            for mr in 0..40 {
                worst = worst.max((general.get(mt, mr) - closed.get(mt, mr)).abs());
            }
        }
        assert!(worst < 1e-10, "max deviation {worst}");
    }

    #[test]
    fn thermal_joint_marginals_and_mass() {
        let (mt, mr) = (1.254, 1.679);
        let j = JointDistribution::thermal(mt, mr, 120, 120).unwrap();
        let bound = thermal_grid_tail_bound(mt, mr, 120, 120);
        assert!(j.total_mass() <= 1.0 + 1e-12);
        assert!(j.total_mass() + bound >= 1.0 - 1e-12);

        // row sums over a wide m_R range recover the thermal marginal of M_T
        let wide = JointDistribution::thermal(mt, mr, 20, 400).unwrap();
        for (k, p) in wide.marginal_t().iter().enumerate() {
            assert!((p - thermal_pmf(k, mt)).abs() < 1e-10, "m_T = {k}");
        }
        let tall = JointDistribution::thermal(mt, mr, 400, 20).unwrap();
        for (k, p) in tall.marginal_r().iter().enumerate() {
            assert!((p - thermal_pmf(k, mr)).abs() < 1e-10, "m_R = {k}");
        }
    }

    #[test]
    fn joint_serialization() {
        let j = JointDistribution::thermal(0.0, 0.0, 0, 0).unwrap();
        assert_eq!(j.to_json().unwrap(), r#"{"mt_max":0,"mr_max":0,"table":[[1.0]]}"#);
        let j = JointDistribution::thermal(1.0, 1.0, 2, 1).unwrap();
        let back = JointDistribution::from_json(&j.to_json().unwrap()).unwrap();
        for mt in 0..=2 {
            for mr in 0..=1 {
                assert_eq!(back.get(mt, mr), j.get(mt, mr));
            }
        }
        assert!(JointDistribution::from_json(r#"{"mt_max":1,"mr_max":0,"table":[[1.0]]}"#).is_err());

        let mut buf = Vec::new();
        JointDistribution::thermal(0.0, 0.0, 1, 0).unwrap().write_csv(&mut buf, "vacuum").unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# vacuum\nm_T,m_R,p\n0,0,1.0\n1,0,0.0\n");
    }
}
