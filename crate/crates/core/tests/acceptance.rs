//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the report is printed on every `cargo test`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use photosub::cps::{cps_detected, cps_detected_thermal, cps_fano_closed};
use photosub::fock::{cutoff_for_tail, fano, mean, thermal_state, DiagonalState, ThermalParams};
use photosub::ips::{ips_state, ips_state_fock_oracle};
use photosub::lab::{calibrate_gamma, run_experiment, summarize, ExperimentConfig, ShotFile, ShotFormat};
use photosub::nongauss::{nong_eps, verify_monotonicity};
use photosub::photon_ops::{joint_general, joint_thermal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MT: f64 = 1.254;
const MR: f64 = 1.679;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn thermal(n: f64) -> DiagonalState {
    thermal_state(ThermalParams::new(n).unwrap(), cutoff_for_tail(n, 1e-16)).unwrap()
}

/// The `N_th × τ × η` grid shared by criteria 3 and 4.
fn ips_grid() -> Vec<(f64, f64, f64)> {
    let mut grid = Vec::new();
    for n_th in [0.5, 1.0, 2.0, 5.0] {
        for tau in [0.3, 0.5, 0.7] {
            for eta in [0.3, 0.6, 1.0] {
                grid.push((n_th, tau, eta));
            }
        }
    }
    grid
}

fn fano_reproduction() -> Outcome {
    let closed = cps_fano_closed(MT, MR);
    let mut worst: f64 = (closed - 1.468).abs();
    for m_r in 0..=6 {
        match cps_detected_thermal(MT, MR, m_r) {
            Ok(r) => worst = worst.max((r.fano_cps - 1.468).abs()),
            Err(e) => return outcome(false, format!("m_R = {m_r}: {e}")),
        }
    }
    outcome(worst <= 1e-3, format!("F_CPS = {closed:.6}, max |F - 1.468| = {worst:.2e}"))
}

fn closed_vs_brute_force() -> Outcome {
    let (n_th, tau) = (5.0, 0.5);
    let (eta_t, eta_r) = (MT / (tau * n_th), MR / ((1.0 - tau) * n_th));
    let input = thermal_state(ThermalParams::new(n_th).unwrap(), 400).unwrap();
    let brute = match joint_general(&input, tau, eta_t, eta_r, 39, 39) {
        Ok(b) => b,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut worst: f64 = 0.0;
    for mt in 0..40 {
        for mr in 0..40 {
            worst = worst.max((brute.get(mt, mr) - joint_thermal(mt, mr, MT, MR).unwrap()).abs());
        }
    }
    outcome(worst < 1e-10, format!("40x40 max abs error {worst:.2e}"))
}

fn ips_cross_representation() -> Outcome {
    let mut worst: f64 = 0.0;
    for (n_th, tau, eta) in ips_grid() {
        let mt_max = cutoff_for_tail(tau * eta * n_th, 1e-16);
        let phase = ips_state(n_th, tau, eta, eta, mt_max);
        let fock = ips_state_fock_oracle(&thermal(n_th), tau, eta, eta, mt_max);
        let (phase, fock) = match (phase, fock) {
            (Ok(p), Ok(f)) => (p, f),
            (Err(e), _) | (_, Err(e)) => return outcome(false, format!("({n_th}, {tau}, {eta}): {e}")),
        };
        for (a, b) in phase.detected.probs().iter().zip(fock.state.probs()) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst < 1e-9, format!("36 points, max entrywise difference {worst:.2e}"))
}

fn sandwich() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (n_th, tau, eta) in ips_grid() {
        let f_t = 1.0 + tau * eta * n_th;
        let input = thermal(n_th);
        for m_r in 0..=6 {
            let f = cps_detected(&input, tau, eta, eta, m_r).map(|r| r.fano_cps);
            checked += 1;
            match f {
                Ok(f) if (1.0..=f_t + 1e-12).contains(&f) => {}
                other => failures.push(format!("CPS ({n_th}, {tau}, {eta}, m_R={m_r}): {other:?}")),
            }
        }
        let mt_max = cutoff_for_tail(tau * eta * n_th, 1e-16);
        let f = ips_state(n_th, tau, eta, eta, mt_max).map(|r| r.fano_ips);
        checked += 1;
        match f {
            Ok(f) if (1.0..=f_t + 1e-12).contains(&f) => {}
            other => failures.push(format!("IPS ({n_th}, {tau}, {eta}): {other:?}")),
        }
    }
    let detail = match failures.first() {
        None => format!("{checked} grid points within [1, F_T]"),
        Some(first) => format!("{} of {checked} violate, first {first}", failures.len()),
    };
    outcome(failures.is_empty(), detail)
}

fn nong_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let etas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let len = rng.random_range(1..=40);
        let weights: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let Ok(p) = DiagonalState::from_weights(weights) else { continue };
        for &eta in &etas {
            match verify_monotonicity(&p, eta) {
                Ok((report, ok)) => {
                    worst = worst.max(report.eps - report.delta);
                    if !ok {
                        return outcome(false, format!("eta = {eta}: {report:?}"));
                    }
                }
                Err(e) => return outcome(false, e.to_string()),
            }
        }
    }
    outcome(worst <= 1e-9, format!("9000 cases, max(eps - delta) = {worst:.3e}"))
}

fn eps_calibration() -> Outcome {
    let thermal_eps = [0.5, 1.254, 2.933, 5.0].iter().map(|n| nong_eps(&thermal(*n)).abs()).fold(0.0, f64::max);
    let eps: Vec<f64> = match (0..=6).map(|m| cps_detected_thermal(MT, MR, m).map(|r| r.eps_nong)).collect() {
        Ok(e) => e,
        Err(e) => return outcome(false, format!("{e}")),
    };
    let increasing = eps.windows(2).all(|w| w[1] > w[0]);
    outcome(
        thermal_eps <= 1e-8 && increasing,
        format!("|eps[thermal]| <= {thermal_eps:.1e}, eps(m_R=0..6) strictly increasing: {increasing}"),
    )
}

fn monte_carlo_fidelity() -> Outcome {
    let cfg = ExperimentConfig::default();
    let summary = match run_experiment(&cfg).and_then(|r| summarize(&cfg, &r)) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let fids: Vec<f64> = summary.cps[..5].iter().map(|c| c.fidelity.unwrap_or(0.0)).collect();
    let lowest = fids.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        lowest > 0.99 && summary.shots == 30_000,
        format!("M_T = {:.4}, M_R = {:.4}, min fidelity over m_R = 0..4 is {lowest:.5}", summary.big_mt, summary.big_mr),
    )
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig { shots: 5000, seed: 77, ..ExperimentConfig::default() };
    let encode = |format| -> photosub::Result<Vec<u8>> {
        let mut buf = Vec::new();
        ShotFile::new(cfg, run_experiment(&cfg)?).write(&mut buf, format)?;
        Ok(buf)
    };
    let mut same = true;
    for format in [ShotFormat::JsonLines, ShotFormat::Binary] {
        match (encode(format), encode(format)) {
            (Ok(a), Ok(b)) => same &= a == b,
            (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
        }
    }
    outcome(same, "same seed gives byte-identical JSON-lines and binary files")
}

fn gamma_recovery() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (gamma, seed) in [(0.093, 5), (0.104, 6)] {
        let mut cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
        cfg.det_t.gamma = gamma;
        let voltages: Vec<f64> = match run_experiment(&cfg) {
            Ok(r) => r.iter().map(|s| s.v_t).collect(),
            Err(e) => return outcome(false, e.to_string()),
        };
        match calibrate_gamma(&voltages, (0.05, 0.2)) {
            Ok(g) => {
                let rel = (g / gamma - 1.0).abs();
                pass &= rel < 0.005;
                details.push(format!("{gamma} -> {g:.6} ({rel:.1e})"));
            }
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    outcome(pass, details.join(", "))
}

fn ips_closed_numbers() -> Outcome {
    let r = match ips_state(2.0, 0.5, 1.0, 1.0, 120) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let oracle = match ips_state_fock_oracle(&thermal(2.0), 0.5, 1.0, 1.0, 120) {
        Ok(o) => o,
        Err(e) => return outcome(false, e.to_string()),
    };
    let entry = r.detected.probs().iter().zip(oracle.state.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let oracle_fano = fano(&oracle.state).unwrap_or(f64::NAN);
    let pass = (r.p_on - 0.5).abs() < 1e-12
        && (r.m_ips - 1.5).abs() < 1e-12
        && (r.fano_ips - 11.0 / 6.0).abs() < 1e-12
        && (oracle.probability - 0.5).abs() < 1e-9
        && (mean(&oracle.state) - 1.5).abs() < 1e-9
        && (oracle_fano - 11.0 / 6.0).abs() < 1e-9
        && entry < 1e-9;
    outcome(
        pass,
        format!(
            "p_on = {}, M_IPS = {}, F_IPS = {}, oracle F = {oracle_fano:.12}, max entry diff {entry:.1e}",
            r.p_on, r.m_ips, r.fano_ips
        ),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, Check, Option<Duration>); 10] = [
        (1, "Fano reproduction", fano_reproduction, Some(Duration::from_secs(1))),
        (2, "closed form vs brute force", closed_vs_brute_force, Some(Duration::from_secs(10))),
        (3, "IPS cross-representation", ips_cross_representation, Some(Duration::from_secs(30))),
        (4, "sandwich inequalities", sandwich, None),
        (5, "non-Gaussianity bound", nong_bound, Some(Duration::from_secs(30))),
        (6, "eps calibration points", eps_calibration, None),
        (7, "Monte Carlo fidelity", monte_carlo_fidelity, Some(Duration::from_secs(5))),
        (8, "determinism", determinism, None),
        (9, "gamma recovery", gamma_recovery, None),
        (10, "IPS closed numbers", ips_closed_numbers, None),
    ];
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let pass = result.pass && in_time;
        failed += usize::from(!pass);
        let budget = budget.map(|b| format!(" (limit {}s)", b.as_secs())).unwrap_or_default();
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.3}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
