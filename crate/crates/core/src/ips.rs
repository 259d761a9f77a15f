//! Inconclusive photon subtraction: the transmitted beam is kept whenever an
//! on/off detector in the reflected arm clicks.
//!
//! The derivation runs in phase space. The beam splitter acts on the
//! thermal-plus-vacuum covariance matrix, the no-click outcome is a Gaussian
//! operator, and the click-conditioned Wigner function is the difference of
//! two Gaussians. Both Gaussians are thermal, so the conditional state is a
//! signed mixture `(nu(N_a) - p_off nu(N_b)) / p_on` of two thermal states.
//!
//! Conventions: quadratures with `[x, p] = i`, vacuum covariance `I/2`,
//! thermal covariance `(1 + 2N)/2 I`.

use std::io::Write;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector2};
use rayon::prelude::*;
use serde::Serialize;

use crate::cps::Conditioned;
use crate::error::{check_condition, check_non_negative, check_probability, Error, Result};
use crate::fock::{fano, thermal_pmf, DiagonalState};
use crate::nongauss::nong_eps;
use crate::photon_ops::{attenuate, two_mode_table};
use crate::table::{fmt_f64, write_csv};

/// Agreement required between the determinant and closed-form click probabilities.
pub const ROUTE_TOLERANCE: f64 = 1e-12;

/// Zero-mean Gaussian state described by its covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    cm: DMatrix<f64>,
    mean: Vec<f64>,
}

impl GaussianState {
    /// Validates a single-mode (2x2) or two-mode (4x4) covariance matrix.
    pub fn new(cm: DMatrix<f64>) -> Result<Self> {
        let dim = cm.nrows();
        if cm.ncols() != dim || (dim != 2 && dim != 4) {
            return Err(Error::DegenerateCovariance(format!(
                "expected a 2x2 or 4x4 matrix, got {}x{}",
                dim,
                cm.ncols()
            )));
        }
        if (&cm - cm.transpose()).amax() > 1e-12 {
            return Err(Error::DegenerateCovariance("covariance matrix is not symmetric".into()));
        }
        for mode in 0..dim / 2 {
            let block = cm.view((2 * mode, 2 * mode), (2, 2));
            let det = block[(0, 0)] * block[(1, 1)] - block[(0, 1)] * block[(1, 0)];
            if block[(0, 0)] <= 0.0 || det < 0.25 - 1e-12 {
                return Err(Error::DegenerateCovariance(format!(
                    "mode {mode} violates the uncertainty relation (det = {det})"
                )));
            }
        }
        Ok(Self { cm, mean: vec![0.0; dim] })
    }

    /// Thermal state with mean photon number `n`: covariance `(1 + 2n)/2 I`.
    pub fn thermal(n: f64) -> Result<Self> {
        check_non_negative("mean photon number", n)?;
        Self::new(DMatrix::identity(2, 2) * ((1.0 + 2.0 * n) / 2.0))
    }

    pub fn vacuum() -> Self {
        Self { cm: DMatrix::identity(2, 2) * 0.5, mean: vec![0.0; 2] }
    }

    /// Two-mode product state `a ⊗ b`.
    pub fn product(a: &GaussianState, b: &GaussianState) -> Result<Self> {
        if a.modes() != 1 || b.modes() != 1 {
            return Err(Error::domain("product expects two single-mode states"));
        }
        let mut cm = DMatrix::zeros(4, 4);
        cm.view_mut((0, 0), (2, 2)).copy_from(&a.cm);
        cm.view_mut((2, 2), (2, 2)).copy_from(&b.cm);
        Ok(Self { cm, mean: vec![0.0; 4] })
    }

    pub fn modes(&self) -> usize {
        self.cm.nrows() / 2
    }

    pub fn cm(&self) -> &DMatrix<f64> {
        &self.cm
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `S^T sigma S` for a two-mode symplectic matrix `S`.
    pub fn evolve(&self, s: &Matrix4<f64>) -> Result<Self> {
        if self.modes() != 2 {
            return Err(Error::domain("evolve expects a two-mode state"));
        }
        let s = DMatrix::from_iterator(4, 4, s.iter().copied());
        Self::new(s.transpose() * &self.cm * s)
    }

    /// Blocks `(A, B, C)` of a two-mode covariance `[[A, C], [C^T, B]]`.
    pub fn blocks(&self) -> Result<(Matrix2<f64>, Matrix2<f64>, Matrix2<f64>)> {
        if self.modes() != 2 {
            return Err(Error::domain("blocks expects a two-mode state"));
        }
        let block = |r: usize, c: usize| Matrix2::from_fn(|i, j| self.cm[(r + i, c + j)]);
        Ok((block(0, 0), block(2, 2), block(0, 2)))
    }
}

/// Beam-splitter symplectic matrix `[[√τ I, √(1-τ) I], [-√(1-τ) I, √τ I]]`.
pub fn bs_symplectic(tau: f64) -> Result<Matrix4<f64>> {
    check_probability("transmissivity", tau)?;
    let (t, r) = (tau.sqrt(), (1.0 - tau).sqrt());
    Ok(Matrix4::new(
        t, 0.0, r, 0.0, //
        0.0, t, 0.0, r, //
        -r, 0.0, t, 0.0, //
        0.0, -r, 0.0, t,
    ))
}

/// Covariance of the no-click Gaussian operator, `(2 - η)/(2η) I`.
pub fn no_click_covariance(eta_r: f64) -> Result<Matrix2<f64>> {
    check_probability("reflected-arm efficiency", eta_r)?;
    if eta_r == 0.0 {
        return Err(Error::DegenerateDetector(
            "an on/off detector with zero efficiency never clicks".into(),
        ));
    }
    Ok(Matrix2::identity() * ((2.0 - eta_r) / (2.0 * eta_r)))
}

/// Output covariance blocks after mixing thermal light with vacuum.
fn split_blocks(n_th: f64, tau: f64) -> Result<(Matrix2<f64>, Matrix2<f64>, Matrix2<f64>)> {
    let input = GaussianState::product(&GaussianState::thermal(n_th)?, &GaussianState::vacuum())?;
    input.evolve(&bs_symplectic(tau)?)?.blocks()
}

/// No-click probability through the covariance route, `1 / (η √Det[B + σ_M])`.
pub fn p_off_determinant(n_th: f64, tau: f64, eta_r: f64) -> Result<f64> {
    let sigma_m = no_click_covariance(eta_r)?;
    let (_, b, _) = split_blocks(n_th, tau)?;
    Ok(1.0 / (eta_r * (b + sigma_m).determinant().sqrt()))
}

/// No-click probability in closed form, `1 / (1 + η (1-τ) N)`.
pub fn p_off_closed(n_th: f64, tau: f64, eta_r: f64) -> f64 {
    1.0 / (1.0 + eta_r * (1.0 - tau) * n_th)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClickProbability {
    pub p_on: f64,
    pub p_off: f64,
}

/// Click and no-click probabilities of the reflected on/off detector.
///
/// Both the determinant and the closed-form routes are evaluated; a
/// disagreement above [`ROUTE_TOLERANCE`] is reported as an error.
pub fn ips_click_probability(n_th: f64, tau: f64, eta_r: f64) -> Result<ClickProbability> {
    check_non_negative("n_th", n_th)?;
    let via_det = p_off_determinant(n_th, tau, eta_r)?;
    let x = eta_r * (1.0 - tau) * n_th;
    let p_off = 1.0 / (1.0 + x);
    if (via_det - p_off).abs() > ROUTE_TOLERANCE {
        return Err(Error::domain(format!(
            "determinant route p_off = {via_det} disagrees with closed form {p_off}"
        )));
    }
    Ok(ClickProbability { p_on: x / (1.0 + x), p_off })
}

/// Covariances `(Σ_a, Σ_b)` of the two Gaussians in the click-conditioned
/// Wigner function: `Σ_a = A`, `Σ_b = A - C (B + σ_M)^{-1} C^T`.
pub fn conditional_covariances(n_th: f64, tau: f64, eta_r: f64) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    let sigma_m = no_click_covariance(eta_r)?;
    let (a, b, c) = split_blocks(n_th, tau)?;
    let inv = (b + sigma_m)
        .try_inverse()
        .ok_or_else(|| Error::DegenerateCovariance("B + σ_M is singular".into()))?;
    Ok((a, a - c * inv * c.transpose()))
}

/// Statistics of the IPS state seen by the transmitted-arm counter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IpsResult {
    pub n_a: f64,
    pub n_b: f64,
    pub p_on: f64,
    pub p_off: f64,
    pub m_ips: f64,
    pub var_ips: f64,
    pub fano_ips: f64,
    pub eps_nong: f64,
    pub detected: DiagonalState,
}

/// Thermal means `(N_a, N_b) = (τN, τN / (1 + η_R (1-τ) N))` of the two components.
pub fn ips_component_means(n_th: f64, tau: f64, eta_r: f64) -> (f64, f64) {
    let n_a = tau * n_th;
    (n_a, n_a * p_off_closed(n_th, tau, eta_r))
}

/// Fano factor `1 + M_b + 2 M_a (M_a - M_b)/(M_a - p_off M_b) - (M_a - M_b)/(1 - p_off)`.
pub fn ips_fano_closed(m_a: f64, m_b: f64, p_off: f64) -> f64 {
    1.0 + m_b + 2.0 * m_a * (m_a - m_b) / (m_a - p_off * m_b) - (m_a - m_b) / (1.0 - p_off)
}

/// Click-conditioned state for thermal input, truncated at `mt_max` detected photons.
pub fn ips_state(n_th: f64, tau: f64, eta_r: f64, eta_t: f64, mt_max: usize) -> Result<IpsResult> {
    check_probability("transmitted-arm efficiency", eta_t)?;
    let ClickProbability { p_on, p_off } = ips_click_probability(n_th, tau, eta_r)?;
    check_condition(p_on)?;
    let (n_a, n_b) = ips_component_means(n_th, tau, eta_r);
    let (m_a, m_b) = (eta_t * n_a, eta_t * n_b);

    // (nu_m(M_a) - p_off nu_m(M_b)) / p_on factorizes as
    // nu_m(M_a) [1 - ((1 + M_a)/(K + M_a))^(m+1)] / p_on with K = 1/p_off,
    // which stays free of cancellation when the click probability is tiny.
    let x = eta_r * (1.0 - tau) * n_th;
    let log_ratio = -(x / (1.0 + m_a)).ln_1p();
    let mut probs: Vec<f64> = (0..=mt_max)
        .map(|m| thermal_pmf(m, m_a) * -((m as f64 + 1.0) * log_ratio).exp_m1() / p_on)
        .collect();
    let mass: f64 = probs.iter().sum();
    if mass > 1.0 {
        probs.iter_mut().for_each(|q| *q /= mass);
    }
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    let detected = DiagonalState::new(probs, tail)?;

    let m_ips = (m_a - p_off * m_b) / p_on;
    let var_ips = (m_a * (1.0 + m_a) - p_off * m_b * (1.0 + m_b)) / p_on
        - p_off * (m_a - m_b).powi(2) / (p_on * p_on);
    if !(m_ips > 0.0) {
        return Err(Error::UndefinedStatistic("IPS state has zero detected mean".into()));
    }
    Ok(IpsResult {
        n_a,
        n_b,
        p_on,
        p_off,
        m_ips,
        var_ips,
        fano_ips: var_ips / m_ips,
        eps_nong: nong_eps(&detected),
        detected,
    })
}

/// Builds the click-conditioned detected distribution directly in the Fock
/// basis, for any diagonal input.
///
/// The click projector is `I - Π_0(η_R)` with `Π_0 = Σ_s (1-η_R)^s |s><s|`, so
/// the transmitted photon weight is `c(t) = Σ_s [1 - (1-η_R)^s] P(t, s)` where
/// `P` is the two-mode photon table after the beam splitter.
pub fn ips_state_fock_oracle(
    input: &DiagonalState,
    tau: f64,
    eta_r: f64,
    eta_t: f64,
    mt_max: usize,
) -> Result<Conditioned> {
    check_probability("transmissivity", tau)?;
    check_probability("reflected-arm efficiency", eta_r)?;
    check_probability("transmitted-arm efficiency", eta_t)?;
    let miss = (-eta_r).ln_1p();
    let click = |s: usize| if s == 0 { 0.0 } else { -(s as f64 * miss).exp_m1() };
    let weights: Vec<f64> = two_mode_table(input, tau)
        .iter()
        .map(|row| row.iter().enumerate().map(|(s, p)| p * click(s)).sum())
        .collect();
    let p_on: f64 = weights.iter().sum();
    check_condition(p_on)?;
    let photons: Vec<f64> = weights.iter().map(|w| w / p_on).collect();
    let detected = attenuate(&photons, eta_t, mt_max);
    let tail = (1.0 - detected.iter().sum::<f64>()).max(0.0);
    Ok(Conditioned { state: DiagonalState::new(detected, tail)?, probability: p_on })
}

/// Fano factor of an IPS result recomputed from its truncated distribution.
pub fn distribution_fano(result: &IpsResult) -> Result<f64> {
    fano(&result.detected)
}

pub const IPS_COLUMNS: [&str; 15] = [
    "N_th", "tau", "eta_R", "eta_T", "M_T", "M_R", "M_T+M_R", "p_on", "N_a", "N_b", "M_IPS", "F_IPS",
    "F_T", "eps", "var_IPS",
];

/// One IPS sweep row with its input parameters.
#[derive(Debug, Clone)]
pub struct IpsRow {
    pub n_th: f64,
    pub tau: f64,
    pub eta_r: f64,
    pub eta_t: f64,
    pub result: IpsResult,
}

impl IpsRow {
    pub fn fields(&self) -> [String; 15] {
        let r = &self.result;
        let big_mt = self.tau * self.eta_t * self.n_th;
        let big_mr = (1.0 - self.tau) * self.eta_r * self.n_th;
        [
            fmt_f64(self.n_th),
            fmt_f64(self.tau),
            fmt_f64(self.eta_r),
            fmt_f64(self.eta_t),
            fmt_f64(big_mt),
            fmt_f64(big_mr),
            fmt_f64(big_mt + big_mr),
            fmt_f64(r.p_on),
            fmt_f64(r.n_a),
            fmt_f64(r.n_b),
            fmt_f64(r.m_ips),
            fmt_f64(r.fano_ips),
            fmt_f64(1.0 + big_mt),
            fmt_f64(r.eps_nong),
            fmt_f64(r.var_ips),
        ]
    }
}

pub fn write_ips_csv<W: Write>(out: W, metadata: &str, rows: &[IpsRow]) -> Result<()> {
    write_csv(out, metadata, &IPS_COLUMNS, rows.iter().map(IpsRow::fields))
}

/// Normalized zero-mean Gaussian `exp(-X^T Σ^{-1} X / 2) / (2π √Det Σ)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianWigner {
    inv: Matrix2<f64>,
    norm: f64,
}

impl GaussianWigner {
    pub fn new(sigma: &Matrix2<f64>) -> Result<Self> {
        let det = sigma.determinant();
        if !(det > 0.0) || sigma[(0, 0)] <= 0.0 {
            return Err(Error::DegenerateCovariance(format!("Wigner covariance has determinant {det}")));
        }
        let inv = sigma.try_inverse().ok_or_else(|| Error::DegenerateCovariance("singular covariance".into()))?;
        Ok(Self { inv, norm: 1.0 / (2.0 * std::f64::consts::PI * det.sqrt()) })
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        let v = Vector2::new(x, p);
        self.norm * (-0.5 * v.dot(&(self.inv * v))).exp()
    }
}

/// Wigner function of the IPS state, `(W_a - p_off W_b) / p_on`.
#[derive(Debug, Clone, Copy)]
pub struct IpsWigner {
    pub a: GaussianWigner,
    pub b: GaussianWigner,
    pub p_on: f64,
    pub p_off: f64,
    pub sigma_a: Matrix2<f64>,
    pub sigma_b: Matrix2<f64>,
}

impl IpsWigner {
    pub fn new(n_th: f64, tau: f64, eta_r: f64) -> Result<Self> {
        let ClickProbability { p_on, p_off } = ips_click_probability(n_th, tau, eta_r)?;
        check_condition(p_on)?;
        let (sigma_a, sigma_b) = conditional_covariances(n_th, tau, eta_r)?;
        Ok(Self {
            a: GaussianWigner::new(&sigma_a)?,
            b: GaussianWigner::new(&sigma_b)?,
            p_on,
            p_off,
            sigma_a,
            sigma_b,
        })
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        (self.a.eval(x, p) - self.p_off * self.b.eval(x, p)) / self.p_on
    }
}

/// Sampled Wigner function on a rectangular grid, stored row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ps.len() + j]
    }

    /// Trapezoidal integral of `W(x, p) f(x, p)` over the grid.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let weights = |axis: &[f64]| -> Vec<f64> {
            let n = axis.len();
            (0..n)
                .map(|k| {
                    let left = if k > 0 { axis[k] - axis[k - 1] } else { 0.0 };
                    let right = if k + 1 < n { axis[k + 1] - axis[k] } else { 0.0 };
                    0.5 * (left + right)
                })
                .collect()
        };
        let (wx, wp) = (weights(&self.xs), weights(&self.ps));
        let mut total = 0.0;
        for (i, x) in self.xs.iter().enumerate() {
            for (j, p) in self.ps.iter().enumerate() {
                total += wx[i] * wp[j] * self.get(i, j) * f(*x, *p);
            }
        }
        total
    }

    pub fn write_csv<W: Write>(&self, out: W, metadata: &str) -> Result<()> {
        let rows = self.xs.iter().enumerate().flat_map(|(i, x)| {
            self.ps.iter().enumerate().map(move |(j, p)| (i, j, *x, *p))
        });
        let records = rows.map(|(i, j, x, p)| [fmt_f64(x), fmt_f64(p), fmt_f64(self.get(i, j))]);
        write_csv(out, metadata, &["x", "p", "W"], records)
    }
}

/// Header written alongside Wigner grids.
#[derive(Debug, Clone, Serialize)]
pub struct WignerHeader {
    pub convention: &'static str,
    pub n_th: f64,
    pub tau: f64,
    pub eta_r: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub p_on: f64,
    pub nx: usize,
    pub np: usize,
}

pub const WIGNER_CONVENTION: &str =
    "[x,p]=i, vacuum covariance I/2, W normalized to unit integral over dx dp";

/// Symmetric axis `[-6σ_max, 6σ_max]` with `points` samples, where
/// `σ_max² = (1 + 2τN)/2` is the wider component's variance.
pub fn wigner_default_axis(n_th: f64, tau: f64, points: usize) -> Vec<f64> {
    let sigma = ((1.0 + 2.0 * tau * n_th) / 2.0).sqrt();
    let half = 6.0 * sigma;
    let steps = points.max(2) - 1;
    (0..=steps).map(|k| -half + 2.0 * half * k as f64 / steps as f64).collect()
}

pub const WIGNER_DEFAULT_POINTS: usize = 256;

/// Evaluates the IPS Wigner function on the grid `xs × ps`.
pub fn wigner_ips_grid(n_th: f64, tau: f64, eta_r: f64, xs: &[f64], ps: &[f64]) -> Result<WignerGrid> {
    if xs.iter().chain(ps).any(|v| !v.is_finite()) {
        return Err(Error::domain("Wigner grid coordinates must be finite"));
    }
    let w = IpsWigner::new(n_th, tau, eta_r)?;
    let values: Vec<f64> = xs
        .par_iter()
        .flat_map_iter(|x| ps.iter().map(move |p| w.eval(*x, *p)))
        .collect();
    Ok(WignerGrid { xs: xs.to_vec(), ps: ps.to_vec(), values })
}

pub fn wigner_header(n_th: f64, tau: f64, eta_r: f64, grid: &WignerGrid) -> Result<WignerHeader> {
    let ClickProbability { p_on, .. } = ips_click_probability(n_th, tau, eta_r)?;
    let (n_a, n_b) = ips_component_means(n_th, tau, eta_r);
    Ok(WignerHeader {
        convention: WIGNER_CONVENTION,
        n_th,
        tau,
        eta_r,
        n_a,
        n_b,
        p_on,
        nx: grid.xs.len(),
        np: grid.ps.len(),
    })
}
