use photosub::cps::{cps_sweep as sweep_cps, write_cps_csv, CpsRow, CPS_COLUMNS};
use photosub::fock::cutoff_for_tail;
use photosub::ips::{
    ips_state, wigner_default_axis, wigner_header, wigner_ips_grid, write_ips_csv, IpsRow, IPS_COLUMNS,
};
use photosub::JointDistribution;
use serde_json::{json, Value};

use crate::output::{emit, write_json, write_json_table, Format};
use crate::{CpsSweepArgs, Failure, IpsSweepArgs, JointArgs, WignerArgs};

/// Tail mass left beyond the default joint-table cutoff in each arm.
const JOINT_TAIL: f64 = 1e-12;

/// Metadata object carried by every table: tool, version, command, parameters.
pub fn metadata(command: &str, params: Value) -> Value {
    let mut meta = json!({
        "tool": "photosub",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
    });
    if let (Some(m), Value::Object(p)) = (meta.as_object_mut(), params) {
        m.extend(p);
    }
    meta
}

fn joint_cutoff(mean: f64) -> usize {
    if mean == 0.0 {
        0
    } else {
        cutoff_for_tail(mean, JOINT_TAIL)
    }
}

pub fn joint(a: JointArgs) -> Result<(), Failure> {
    let mt_max = a.mt_max.unwrap_or_else(|| joint_cutoff(a.big_mt));
    let mr_max = a.mr_max.unwrap_or_else(|| joint_cutoff(a.big_mr));
    let dist = JointDistribution::thermal(a.big_mt, a.big_mr, mt_max, mr_max)?;
    let meta = metadata(
        "theory joint",
        json!({ "M_T": a.big_mt, "M_R": a.big_mr, "mt_max": mt_max, "mr_max": mr_max, "tail_mass": dist.tail_mass() }),
    );
    emit(a.output.out.as_deref(), |out| match a.output.format {
        Format::Csv => dist.write_csv(out, &meta.to_string()),
        Format::Json => {
            let table: Vec<&[f64]> = dist.rows().collect();
            write_json(out, &json!({ "metadata": meta, "mt_max": mt_max, "mr_max": mr_max, "table": table }))
        }
    })?;
    Ok(())
}

pub fn cps_sweep(a: CpsSweepArgs) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for &big_mt in &a.big_mt.0 {
        for &big_mr in &a.big_mr.0 {
            for result in sweep_cps(big_mt, big_mr, a.m_r.0.clone())? {
                rows.push(CpsRow { big_mt, big_mr, result });
            }
        }
    }
    let meta = metadata(
        "theory cps-sweep",
        json!({
            "M_T": a.big_mt.0,
            "M_R": a.big_mr.0,
            "m_R": [a.m_r.0.start(), a.m_r.0.end()],
        }),
    );
    emit(a.output.out.as_deref(), |out| match a.output.format {
        Format::Csv => write_cps_csv(out, &meta.to_string(), &rows),
        Format::Json => write_json_table(out, &meta, &CPS_COLUMNS, rows.iter().map(CpsRow::fields)),
    })?;
    Ok(())
}

pub fn ips_sweep(a: IpsSweepArgs) -> Result<(), Failure> {
    let efficiencies: Vec<(f64, f64)> = match &a.eta {
        Some(eta) => eta.0.iter().map(|e| (*e, *e)).collect(),
        None => {
            let eta_r = a.eta_r.as_ref().map_or(vec![1.0], |l| l.0.clone());
            let eta_t = a.eta_t.as_ref().map_or(vec![1.0], |l| l.0.clone());
            eta_r.iter().flat_map(|r| eta_t.iter().map(move |t| (*r, *t))).collect()
        }
    };
    let mut rows = Vec::new();
    for &n_th in &a.nth.0 {
        for &tau in &a.tau.0 {
            for &(eta_r, eta_t) in &efficiencies {
                let mt_max = a.mt_max.unwrap_or_else(|| cutoff_for_tail(tau * eta_t * n_th, 1e-16));
                let result = ips_state(n_th, tau, eta_r, eta_t, mt_max)?;
                rows.push(IpsRow { n_th, tau, eta_r, eta_t, result });
            }
        }
    }
    let meta = metadata(
        "theory ips-sweep",
        json!({
            "N_th": a.nth.0,
            "tau": a.tau.0,
            "eta_R_eta_T": efficiencies,
            "mt_max": a.mt_max,
        }),
    );
    emit(a.output.out.as_deref(), |out| match a.output.format {
        Format::Csv => write_ips_csv(out, &meta.to_string(), &rows),
        Format::Json => write_json_table(out, &meta, &IPS_COLUMNS, rows.iter().map(IpsRow::fields)),
    })?;
    Ok(())
}

pub fn wigner(a: WignerArgs) -> Result<(), Failure> {
    if a.points < 2 {
        return Err(Failure::Usage("--points must be at least 2".into()));
    }
    let axis = match a.extent {
        Some(e) if e.is_finite() && e > 0.0 => {
            (0..a.points).map(|k| -e + 2.0 * e * k as f64 / (a.points - 1) as f64).collect()
        }
        Some(e) => return Err(Failure::Usage(format!("--extent must be positive, got {e}"))),
        None => wigner_default_axis(a.nth, a.tau, a.points),
    };
    let grid = wigner_ips_grid(a.nth, a.tau, a.eta_r, &axis, &axis)?;
    let header = wigner_header(a.nth, a.tau, a.eta_r, &grid)?;
    let meta = metadata("theory wigner", serde_json::to_value(&header).map_err(photosub::Error::from)?);
    emit(a.output.out.as_deref(), |out| match a.output.format {
        Format::Csv => grid.write_csv(out, &meta.to_string()),
        Format::Json => write_json(
            out,
            &json!({ "metadata": meta, "xs": grid.xs, "ps": grid.ps, "values": grid.values }),
        ),
    })?;
    Ok(())
}
