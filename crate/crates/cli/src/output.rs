//! CSV and JSON emission. CSV numbers are written with 12 significant
//! digits; the result JSON keeps full precision so it round-trips exactly.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use gridiag_core::case_io::{NetworkCase, Status};
use gridiag_core::diagnosis::{BaselineReport, DiagnosisResult};
use gridiag_core::network_model::CircuitModel;
use gridiag_core::reference_oracles::PowerFlowStatus;

use crate::{CliError, PowerflowReport};

pub(crate) fn sig12(v: f64) -> String {
    format!("{:.11e}", v)
}

fn violation_set(violations: &[gridiag_core::diagnosis::Violation]) -> HashSet<u32> {
    violations.iter().map(|v| v.bus).collect()
}

fn graph_csv(case: &NetworkCase) -> String {
    let mut out = String::from("from_bus,to_bus\n");
    for br in case.branches.iter().filter(|br| br.status == Status::On) {
        writeln!(out, "{},{}", br.from_bus, br.to_bus).expect("writing to a string");
    }
    out
}

fn nodes_csv(model: &CircuitModel, n_mag: &[f64], before: &HashSet<u32>, after: &HashSet<u32>) -> String {
    let mut out = String::from("bus,x,y,n_mag,violated_before,violated_after\n");
    for (i, &id) in model.bus_ids.iter().enumerate() {
        writeln!(
            out,
            "{id},,,{},{},{}",
            sig12(n_mag[i]),
            u8::from(before.contains(&id)),
            u8::from(after.contains(&id)),
        )
        .expect("writing to a string");
    }
    out
}

fn voltages_csv(
    model: &CircuitModel,
    baseline_v_mag: &[f64],
    result_v_mag: Option<&[f64]>,
) -> String {
    let mut out = String::from("bus,v_baseline,v_result,v_min,v_max\n");
    for (i, &id) in model.bus_ids.iter().enumerate() {
        let base = baseline_v_mag.get(i).map(|&v| sig12(v)).unwrap_or_default();
        let res = result_v_mag
            .and_then(|m| m.get(i))
            .map(|&v| sig12(v))
            .unwrap_or_default();
        writeln!(
            out,
            "{id},{base},{res},{},{}",
            sig12(model.bounds[i].v_min),
            sig12(model.bounds[i].v_max),
        )
        .expect("writing to a string");
    }
    out
}

/// Histogram of compensation magnitudes over the support, 0.01 pu bins.
/// Only occupied bins appear, so an empty support gives a header-only file.
fn hist_csv(n_mag: &[f64], support_ids: &HashSet<u32>, bus_ids: &[u32]) -> String {
    const BIN: f64 = 0.01;
    let mut bins: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, &id) in bus_ids.iter().enumerate() {
        if support_ids.contains(&id) {
            *bins.entry((n_mag[i] / BIN).floor() as usize).or_insert(0) += 1;
        }
    }
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (k, count) in bins {
        writeln!(out, "{},{},{count}", sig12(k as f64 * BIN), sig12((k + 1) as f64 * BIN))
            .expect("writing to a string");
    }
    out
}

fn buses_csv(
    bus_ids: &[u32],
    v: Option<(&[f64], &[f64])>,
    n_real: &[f64],
    n_imag: &[f64],
    before: &HashSet<u32>,
) -> String {
    let mut out = String::from("bus,v_mag,v_ang_deg,n_mag,n_real,n_imag,violated_before\n");
    for (i, &id) in bus_ids.iter().enumerate() {
        let (mag, ang) = match v {
            Some((vr, vi)) => {
                let m = (vr[i] * vr[i] + vi[i] * vi[i]).sqrt();
                (sig12(m), sig12(vi[i].atan2(vr[i]).to_degrees()))
            }
            None => (String::new(), String::new()),
        };
        let nm = (n_real[i] * n_real[i] + n_imag[i] * n_imag[i]).sqrt();
        writeln!(
            out,
            "{id},{mag},{ang},{},{},{},{}",
            sig12(nm),
            sig12(n_real[i]),
            sig12(n_imag[i]),
            u8::from(before.contains(&id)),
        )
        .expect("writing to a string");
    }
    out
}

pub(crate) fn write_result_files(
    out_dir: &Path,
    case: &NetworkCase,
    model: &CircuitModel,
    result: &DiagnosisResult,
) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(result)
        .expect("diagnosis results always serialize");
    std::fs::write(out_dir.join("result.json"), json)?;

    let n_mag: Vec<f64> = result
        .n_real
        .iter()
        .zip(&result.n_imag)
        .map(|(r, i)| (r * r + i * i).sqrt())
        .collect();
    let result_v_mag: Vec<f64> = result
        .v_real
        .iter()
        .zip(&result.v_imag)
        .map(|(r, i)| (r * r + i * i).sqrt())
        .collect();
    let before = violation_set(&result.violations_before);
    let after = violation_set(&result.violations_after);
    let support: HashSet<u32> = result.support.iter().copied().collect();

    std::fs::write(
        out_dir.join("buses.csv"),
        buses_csv(
            &result.bus_ids,
            Some((&result.v_real, &result.v_imag)),
            &result.n_real,
            &result.n_imag,
            &before,
        ),
    )?;
    std::fs::write(
        out_dir.join("voltages.csv"),
        voltages_csv(model, &result.baseline_v_mag, Some(&result_v_mag)),
    )?;
    std::fs::write(
        out_dir.join("compensation_hist.csv"),
        hist_csv(&n_mag, &support, &result.bus_ids),
    )?;
    std::fs::write(out_dir.join("graph.csv"), graph_csv(case))?;
    std::fs::write(out_dir.join("nodes.csv"), nodes_csv(model, &n_mag, &before, &after))?;
    Ok(())
}

pub(crate) fn write_powerflow_files(
    out_dir: &Path,
    case: &NetworkCase,
    model: &CircuitModel,
    baseline: &BaselineReport,
    report: &PowerflowReport,
) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report)
        .expect("power-flow reports always serialize");
    std::fs::write(out_dir.join("result.json"), json)?;

    let zeros = vec![0.0; model.n_bus];
    let before = violation_set(&baseline.violations);
    let v = match baseline.outcome.status {
        PowerFlowStatus::Converged => {
            Some((baseline.outcome.v_real.as_slice(), baseline.outcome.v_imag.as_slice()))
        }
        PowerFlowStatus::Diverged => None,
    };
    std::fs::write(
        out_dir.join("buses.csv"),
        buses_csv(&model.bus_ids, v, &zeros, &zeros, &before),
    )?;
    std::fs::write(
        out_dir.join("voltages.csv"),
        voltages_csv(model, &baseline.v_mag, Some(&baseline.v_mag)),
    )?;
    std::fs::write(
        out_dir.join("compensation_hist.csv"),
        hist_csv(&zeros, &HashSet::new(), &model.bus_ids),
    )?;
    std::fs::write(out_dir.join("graph.csv"), graph_csv(case))?;
    std::fs::write(out_dir.join("nodes.csv"), nodes_csv(model, &zeros, &before, &before))?;
    Ok(())
}
