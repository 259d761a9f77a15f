//! Per-shot sampling. Every shot owns a ChaCha8 substream selected by its
//! index, so shot `i` can be regenerated on its own and parallel runs are
//! bit-identical to sequential ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;

use super::{DetectorModel, ExperimentConfig, ShotRecord, SATURATION_LIMIT};
use crate::error::{Error, Result};

/// Largest trial count sampled by direct CDF inversion.
const INVERSION_MAX_TRIALS: u32 = 64;

fn shot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Bose-Einstein photon number by inversion, `floor(ln U / ln(N/(1+N)))`.
fn sample_thermal(rng: &mut ChaCha8Rng, n_th: f64) -> u32 {
    let u = 1.0 - rng.random::<f64>();
    if n_th == 0.0 {
        return 0;
    }
    let log_ratio = -(1.0 / n_th).ln_1p();
    (u.ln() / log_ratio).floor() as u32
}

fn sample_binomial(rng: &mut ChaCha8Rng, n: u32, p: f64) -> u32 {
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    if n > INVERSION_MAX_TRIALS {
        // p lies strictly inside (0, 1) here, which Binomial::new accepts
        return Binomial::new(n as u64, p).map(|b| b.sample(rng) as u32).unwrap_or(0);
    }
    if p > 0.5 {
        return n - invert_binomial(rng, n, 1.0 - p);
    }
    invert_binomial(rng, n, p)
}

/// Sequential CDF search; `p <= 1/2` keeps `(1-p)^n` well above underflow.
fn invert_binomial(rng: &mut ChaCha8Rng, n: u32, p: f64) -> u32 {
    let u: f64 = rng.random();
    let odds = p / (1.0 - p);
    let mut pk = (1.0 - p).powi(n as i32);
    let mut cdf = pk;
    let mut k = 0;
    while u >= cdf && k < n {
        pk *= odds * f64::from(n - k) / f64::from(k + 1);
        k += 1;
        cdf += pk;
    }
    k
}

fn detect(rng: &mut ChaCha8Rng, photons: u32, det: &DetectorModel, arm: &'static str) -> Result<u32> {
    let m = sample_binomial(rng, photons, det.eta);
    if m > SATURATION_LIMIT {
        return Err(Error::Saturation { arm, count: m, limit: SATURATION_LIMIT });
    }
    Ok(m)
}

fn voltage(rng: &mut ChaCha8Rng, m: u32, det: &DetectorModel) -> f64 {
    let v = det.gamma * f64::from(m);
    if det.noise_sigma > 0.0 {
        // noise_sigma is validated finite and positive
        let noise = Normal::new(0.0, det.noise_sigma).map(|d| d.sample(rng)).unwrap_or(0.0);
        return v + noise;
    }
    v
}

/// Regenerates shot `index` of the run described by `cfg`.
pub fn simulate_shot(cfg: &ExperimentConfig, index: u64) -> Result<ShotRecord> {
    let mut rng = shot_rng(cfg.seed, index);
    let n_true = sample_thermal(&mut rng, cfg.n_th);
    let s_r = sample_binomial(&mut rng, n_true, 1.0 - cfg.tau);
    let s_t = n_true - s_r;
    let m_t = detect(&mut rng, s_t, &cfg.det_t, "transmitted")?;
    let m_r = detect(&mut rng, s_r, &cfg.det_r, "reflected")?;
    let v_t = voltage(&mut rng, m_t, &cfg.det_t);
    let v_r = voltage(&mut rng, m_r, &cfg.det_r);
    Ok(ShotRecord { n_true, s_r, s_t, m_r, m_t, v_r, v_t })
}

/// All shots of a run, generated in parallel and returned in index order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ShotRecord>> {
    cfg.validate()?;
    (0..cfg.shots).into_par_iter().map(|i| simulate_shot(cfg, i)).collect()
}

/// Sequential iterator over the shots of a run.
#[derive(Debug, Clone)]
pub struct ShotStream {
    cfg: ExperimentConfig,
    next: u64,
}

impl ShotStream {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, next: 0 })
    }
}

impl Iterator for ShotStream {
    type Item = Result<ShotRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.cfg.shots {
            return None;
        }
        let shot = simulate_shot(&self.cfg, self.next);
        self.next += 1;
        Some(shot)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.cfg.shots - self.next) as usize;
        (left, Some(left))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_ops::split_weight;

    fn cfg(n_th: f64, tau: f64, eta: f64, shots: u64) -> ExperimentConfig {
        ExperimentConfig {
            n_th,
            tau,
            det_t: DetectorModel::new(eta, 0.093),
            det_r: DetectorModel::new(eta, 0.104),
            shots,
            seed: 11,
        }
    }

    #[test]
    fn dark_source_gives_zero_records() {
        for r in run_experiment(&cfg(0.0, 0.5, 0.8, 500)).unwrap() {
            assert_eq!(r, ShotRecord { n_true: 0, s_r: 0, s_t: 0, m_r: 0, m_t: 0, v_r: 0.0, v_t: 0.0 });
        }
    }

    #[test]
    fn ideal_full_transmission() {
        for r in run_experiment(&cfg(3.0, 1.0, 1.0, 2000)).unwrap() {
            assert_eq!(r.m_t, r.n_true);
            assert_eq!(r.m_r, 0);
            assert_eq!(r.v_t, 0.093 * f64::from(r.n_true));
        }
    }

    #[test]
    fn record_invariants() {
        let c = cfg(5.0, 0.3, 0.7, 5000);
        for r in run_experiment(&c).unwrap() {
            assert_eq!(r.s_r + r.s_t, r.n_true);
            assert!(r.m_r <= r.s_r && r.m_t <= r.s_t);
            assert_eq!(r.v_r, 0.104 * f64::from(r.m_r));
        }
    }

    #[test]
    fn parallel_matches_stream_and_isolated_shots() {
        let c = cfg(4.0, 0.5, 0.6, 3000);
        let par = run_experiment(&c).unwrap();
        let seq: Vec<ShotRecord> = ShotStream::new(c).unwrap().map(|r| r.unwrap()).collect();
        assert_eq!(par, seq);
        assert_eq!(simulate_shot(&c, 1234).unwrap(), par[1234]);
    }

    #[test]
    fn different_seeds_differ() {
        let a = run_experiment(&cfg(4.0, 0.5, 0.6, 200)).unwrap();
        let mut c = cfg(4.0, 0.5, 0.6, 200);
        c.seed = 12;
        assert_ne!(a, run_experiment(&c).unwrap());
    }

    #[test]
    fn small_binomial_matches_pmf() {
        let mut rng = shot_rng(3, 0);
        let (n, p, draws) = (9u32, 0.3, 200_000);
        let mut hist = [0u32; 10];
        for _ in 0..draws {
            hist[sample_binomial(&mut rng, n, p) as usize] += 1;
        }
        for (k, &c) in hist.iter().enumerate() {
            let expect = split_weight(n as usize, k, 1.0 - p).unwrap();
            let sd = (expect * (1.0 - expect) / draws as f64).sqrt();
            assert!((f64::from(c) / draws as f64 - expect).abs() < 5.0 * sd + 1e-12, "k = {k}");
        }
    }

    #[test]
    fn binomial_edges_and_reflection() {
        let mut rng = shot_rng(5, 0);
        assert_eq!(sample_binomial(&mut rng, 0, 0.4), 0);
        assert_eq!(sample_binomial(&mut rng, 30, 0.0), 0);
        assert_eq!(sample_binomial(&mut rng, 30, 1.0), 30);
        let draws = 50_000;
        let mean: f64 = (0..draws).map(|_| f64::from(sample_binomial(&mut rng, 40, 0.9))).sum::<f64>() / draws as f64;
        assert!((mean - 36.0).abs() < 5.0 * (40.0 * 0.09 / draws as f64).sqrt());
        let mean: f64 = (0..draws).map(|_| f64::from(sample_binomial(&mut rng, 200, 0.25))).sum::<f64>() / draws as f64;
        assert!((mean - 50.0).abs() < 5.0 * (200.0 * 0.1875 / draws as f64).sqrt());
    }

    #[test]
    fn thermal_sampler_moments() {
        let mut rng = shot_rng(9, 0);
        let draws = 200_000;
        let xs: Vec<f64> = (0..draws).map(|_| f64::from(sample_thermal(&mut rng, 2.0))).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws as f64;
        assert!((mean - 2.0).abs() < 5.0 * (6.0 / draws as f64).sqrt());
        assert!((var - 6.0).abs() < 0.25);
    }

    #[test]
    fn saturation_is_a_hard_error() {
        let c = cfg(400.0, 1.0, 1.0, 200);
        assert!(matches!(run_experiment(&c), Err(Error::Saturation { arm: "transmitted", .. })));
    }

    #[test]
    fn noise_is_opt_in() {
        let mut c = cfg(3.0, 0.5, 0.8, 1000);
        let clean = run_experiment(&c).unwrap();
        c.det_t = c.det_t.with_noise(0.002);
        let noisy = run_experiment(&c).unwrap();
        let mut moved = 0;
        for (a, b) in clean.iter().zip(&noisy) {
            assert_eq!((a.n_true, a.m_t, a.m_r, a.v_r), (b.n_true, b.m_t, b.m_r, b.v_r));
            moved += usize::from(a.v_t != b.v_t);
        }
        assert_eq!(moved, 1000);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(matches!(run_experiment(&cfg(1.0, 1.5, 0.5, 10)), Err(Error::Config(_))));
        assert!(matches!(run_experiment(&cfg(1.0, 0.5, 0.5, 0)), Err(Error::Config(_))));
        let mut c = cfg(1.0, 0.5, 0.5, 10);
        c.det_r.gamma = 0.0;
        assert!(ShotStream::new(c).is_err());
    }
}
