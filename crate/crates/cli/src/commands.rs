//! Small commands: noise sampling and parameter validation.

use std::path::Path;

use sqg_core::engine::{validate_params, ValidationReport};
use sqg_core::noise::{make_forcing, sample_white_noise};
use sqg_core::spectral::io as fio;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::runner::params_of;

/// Samples `Lambda^alpha xi` with `xi` white noise truncated at `truncation`
/// and writes it to `out`. Returns a one-line summary.
pub fn sample_noise(seed: u64, truncation: usize, alpha: f64, out: &Path) -> Result<String, CliError> {
    let xi = sample_white_noise(truncation, seed)?;
    let zeta = make_forcing(&xi, alpha)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    fio::save(out, &zeta)?;
    Ok(format!("seed={seed} truncation={truncation} alpha={alpha} l2={:.12e} -> {}", zeta.l2_norm(), out.display()))
}

/// Evaluates the admissibility system for the config's parameters. Strict
/// schedules that violate a condition are a config error naming it.
pub fn validate(cfg: &RunConfig) -> Result<ValidationReport, CliError> {
    cfg.check()?;
    let report = validate_params(&params_of(cfg));
    if !report.accepted() {
        let names: Vec<&str> = report.violations().iter().map(|c| c.name.as_str()).collect();
        return Err(CliError::Config(format!("parameter system violates: {}\n{report}", names.join("; "))));
    }
    Ok(report)
}
