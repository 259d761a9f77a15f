use std::fs;
use std::path::{Path, PathBuf};

use photosub::lab::{
    calibrate_gamma, condition_counts, counts_from_voltages, predicted_distribution, read_shot_file,
    run_experiment, summarize, write_shot_file, ConditionMode, ConditionSummary, ExperimentConfig, ShotFile,
    ShotFormat,
};
use photosub::table::{fmt_f64, write_csv};
use photosub::Error;
use serde_json::json;

use crate::output::{emit, write_json, Format};
use crate::theory::metadata;
use crate::{AnalyzeArgs, AnalyzeMode, Arm, CalibrateArgs, Failure, ShotFormatArg, SimulateArgs, OUT_DIR_ENV};

const SUMMARY_COLUMNS: [&str; 13] = [
    "mode",
    "m_R",
    "selected",
    "probability",
    "mean",
    "fano",
    "fano_stderr",
    "eps",
    "fidelity",
    "probability_theory",
    "mean_theory",
    "fano_theory",
    "eps_theory",
];

fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })
}

fn apply_overrides(mut cfg: ExperimentConfig, a: &SimulateArgs) -> ExperimentConfig {
    let set = |field: &mut f64, value: Option<f64>| {
        if let Some(v) = value {
            *field = v;
        }
    };
    set(&mut cfg.n_th, a.nth);
    set(&mut cfg.tau, a.tau);
    set(&mut cfg.det_t.eta, a.eta_t);
    set(&mut cfg.det_r.eta, a.eta_r);
    set(&mut cfg.det_t.gamma, a.gamma_t);
    set(&mut cfg.det_r.gamma, a.gamma_r);
    set(&mut cfg.det_t.noise_sigma, a.noise_t);
    set(&mut cfg.det_r.noise_sigma, a.noise_r);
    cfg.shots = a.shots.unwrap_or(cfg.shots);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg
}

fn default_dir() -> Result<PathBuf, Error> {
    let dir = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
    fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    Ok(dir)
}

pub fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let base = match &a.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    let cfg = apply_overrides(base, &a);
    cfg.validate()?;
    let (format, ext) = match a.shot_format {
        ShotFormatArg::Jsonl => (ShotFormat::JsonLines, "jsonl"),
        ShotFormatArg::Binary => (ShotFormat::Binary, "bin"),
    };
    let shot_path = match a.out.clone() {
        Some(p) => p,
        None => default_dir()?.join(format!("shots-{}.{ext}", cfg.seed)),
    };
    let summary_path = match a.summary.clone() {
        Some(p) => p,
        None => default_dir()?.join(format!("summary-{}.json", cfg.seed)),
    };

    let records = run_experiment(&cfg)?;
    let summary = summarize(&cfg, &records)?;
    write_shot_file(&shot_path, &ShotFile::new(cfg, records), format)?;
    emit(Some(&summary_path), |out| write_json(out, &summary))?;
    emit(None, |out| write_json(out, &summary))?;
    eprintln!("wrote {} and {}", shot_path.display(), summary_path.display());
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn summary_fields(s: &ConditionSummary) -> [String; 13] {
    let (mode, m_r) = match s.mode {
        ConditionMode::Unconditional => ("unconditional", String::new()),
        ConditionMode::Cps { m_r } => ("cps", m_r.to_string()),
        ConditionMode::Ips => ("ips", String::new()),
    };
    [
        mode.to_string(),
        m_r,
        s.selected.to_string(),
        fmt_f64(s.probability),
        opt(s.mean),
        opt(s.fano),
        opt(s.fano_stderr),
        opt(s.eps),
        opt(s.fidelity),
        opt(s.probability_theory),
        opt(s.mean_theory),
        opt(s.fano_theory),
        opt(s.eps_theory),
    ]
}

pub fn analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let file = read_shot_file(&a.file)?;
    let cfg = *file.config();
    let meta = metadata(
        "analyze",
        json!({ "file": a.file.display().to_string(), "config": cfg, "seed": cfg.seed }),
    );
    let mode = match a.mode {
        AnalyzeMode::All => {
            let summary = summarize(&cfg, &file.records)?;
            emit(a.out.as_deref(), |out| match a.format {
                Format::Json => write_json(out, &summary),
                Format::Csv => {
                    let rows = std::iter::once(&summary.unconditional)
                        .chain(&summary.cps)
                        .chain(std::iter::once(&summary.ips))
                        .map(summary_fields);
                    write_csv(out, &meta.to_string(), &SUMMARY_COLUMNS, rows)
                }
            })?;
            return Ok(());
        }
        AnalyzeMode::Unconditional => ConditionMode::Unconditional,
        AnalyzeMode::Cps => ConditionMode::Cps { m_r: a.m_r },
        AnalyzeMode::Ips => ConditionMode::Ips,
    };

    let counts = counts_from_voltages(&file.records, &cfg)?;
    let summary = ConditionSummary::from_counts(&cfg, &counts, mode)?;
    let hist = condition_counts(&counts, mode)?;
    let theory = predicted_distribution(&cfg, mode);
    let empirical = hist.state.probs();
    emit(a.out.as_deref(), |out| match a.format {
        Format::Json => write_json(
            out,
            &json!({
                "metadata": meta,
                "summary": summary,
                "histogram": empirical,
                "theory": theory.as_ref().map(|t| t.probs()),
            }),
        ),
        Format::Csv => {
            let rows = empirical.iter().enumerate().map(|(m, p)| {
                [
                    m.to_string(),
                    (p * hist.selected as f64).round().to_string(),
                    fmt_f64(*p),
                    theory.as_ref().map(|t| fmt_f64(t.prob(m))).unwrap_or_default(),
                ]
            });
            write_csv(out, &meta.to_string(), &["m_T", "count", "p_empirical", "p_theory"], rows)
        }
    })?;
    Ok(())
}

pub fn calibrate(a: CalibrateArgs) -> Result<(), Failure> {
    let file = read_shot_file(&a.file)?;
    let cfg = file.config();
    let (name, det, voltages): (&str, _, Vec<f64>) = match a.arm {
        Arm::T => ("transmitted", cfg.det_t, file.records.iter().map(|r| r.v_t).collect()),
        Arm::R => ("reflected", cfg.det_r, file.records.iter().map(|r| r.v_r).collect()),
    };
    let gamma = calibrate_gamma(&voltages, (a.range.0, a.range.1))?;
    let report = json!({
        "metadata": metadata(
            "calibrate",
            json!({ "file": a.file.display().to_string(), "range": [a.range.0, a.range.1], "seed": cfg.seed }),
        ),
        "arm": name,
        "samples": voltages.len(),
        "gamma": gamma,
        "configured_gamma": det.gamma,
        "relative_deviation": gamma / det.gamma - 1.0,
    });
    emit(a.out.as_deref(), |out| write_json(out, &report))?;
    Ok(())
}
