//! Result files. Every file is rendered from an [`ExperimentResult`] alone,
//! so a reloaded `result.json` reproduces the CSVs byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentResult, Scenario, SchemeResult};
use crate::{Error, Result};

pub const SWEEP_SUMMARY_HEADER: &str =
    "power_dbm,scheme,mean_sum_rate_bpshz,mean_sum_rate_bps,ci95";

pub fn render_config(scenario: &Scenario) -> Result<String> {
    scenario.to_toml()
}

pub fn render_slot_utilities(scheme: &SchemeResult, bandwidth_hz: f64) -> String {
    let mut out = String::from("slot,utility_bpshz,utility_bps,dropped_users\n");
    for (t, (u, d)) in scheme
        .slot_utilities
        .iter()
        .zip(&scheme.dropped_per_slot)
        .enumerate()
    {
        let _ = writeln!(out, "{t},{u},{},{d}", u * bandwidth_hz);
    }
    out
}

/// One row per (power, scheme), in the given order. `ci95` is in bits/s/Hz.
pub fn render_sweep_summary(results: &[ExperimentResult]) -> String {
    let mut out = format!("{SWEEP_SUMMARY_HEADER}\n");
    for r in results {
        for s in &r.schemes {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.tx_power_dbm(),
                s.scheme,
                s.mean_sum_rate_bpshz,
                s.mean_sum_rate_bps,
                s.ci95_bpshz
            );
        }
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `config.resolved`, per-scheme coefficient and utility CSVs,
/// `sweep_summary.csv` and `result.json`. Returns the written paths.
pub fn emit_results(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let bandwidth = result.metadata.scenario.noise.bandwidth_hz;
    let mut paths = vec![write(
        dir,
        "config.resolved",
        &render_config(&result.metadata.scenario)?,
    )?];
    for s in &result.schemes {
        paths.push(write(
            dir,
            &format!("association_coeffs_{}.csv", s.scheme),
            &s.association.to_csv(),
        )?);
        paths.push(write(
            dir,
            &format!("slot_utilities_{}.csv", s.scheme),
            &render_slot_utilities(s, bandwidth),
        )?);
    }
    paths.push(write(
        dir,
        "sweep_summary.csv",
        &render_sweep_summary(std::slice::from_ref(result)),
    )?);
    paths.push(write(dir, "result.json", &result.to_json()?)?);
    Ok(paths)
}

/// Subdirectory name of one sweep point.
pub fn sweep_point_dir(power_dbm: f64) -> String {
    format!("power_{power_dbm}dBm")
}

/// Writes the sweep's `config.resolved` and `sweep_summary.csv`, and each
/// point's files into `power_<p>dBm/`.
pub fn emit_sweep(
    scenario: &Scenario,
    results: &[ExperimentResult],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut paths = vec![
        write(dir, "config.resolved", &render_config(scenario)?)?,
        write(dir, "sweep_summary.csv", &render_sweep_summary(results))?,
    ];
    for r in results {
        paths.extend(emit_results(
            r,
            &dir.join(sweep_point_dir(r.tx_power_dbm())),
        )?);
    }
    Ok(paths)
}
