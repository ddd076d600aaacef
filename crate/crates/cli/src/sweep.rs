//! `sweep`: one run per value of a config axis, in parallel, plus ensemble checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use sqg_core::verification::{coming_down_check, gaussianity_test, write_csv, write_text, Record, Samples, Verdict};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::runner::{execute, theta_of, Capture};

pub const SWEEP_INDEX: &str = "sweep_index.txt";
pub const ENSEMBLE_TXT: &str = "ensemble.txt";
pub const ENSEMBLE_CSV: &str = "ensemble.csv";
/// Environment variable giving the default worker count.
pub const JOBS_ENV: &str = "SQGCI_JOBS";

/// Outcome of one sweep member.
#[derive(Clone, Debug)]
pub struct Member {
    pub value: String,
    pub dir: PathBuf,
    /// `Err` holds the first hard error of the run.
    pub status: Result<(), String>,
    /// Top-level `theta` at retained nodes from `[verify] coming_from` on
    /// (only for the coming-down check).
    pub theta: Samples,
    /// `Re thetahat(mode)` at the last retained node (only for the Gaussianity check).
    pub draw: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub members: Vec<Member>,
    pub ensemble: Vec<Record>,
}

impl SweepResult {
    pub fn failed_runs(&self) -> usize {
        self.members.iter().filter(|m| m.status.is_err()).count()
    }
}

/// Worker count: explicit value, else `SQGCI_JOBS`, else the available cores.
pub fn jobs(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(JOBS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Expands `a..b` (inclusive integer ranges) inside a value list.
pub fn expand_values(values: &[String]) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for v in values {
        match v.split_once("..") {
            Some((a, b)) => {
                let bad = || CliError::Usage(format!("bad range `{v}`"));
                let a: i64 = a.trim().parse().map_err(|_| bad())?;
                let b: i64 = b.trim().parse().map_err(|_| bad())?;
                if b < a {
                    return Err(bad());
                }
                out.extend((a..=b).map(|x| x.to_string()));
            }
            None => out.push(v.clone()),
        }
    }
    Ok(out)
}

/// Runs `template` once per value of `axis` (`section.key`) into `out/run_NNN`.
/// A failing member is recorded and the others continue.
pub fn sweep(template: &RunConfig, base: &Path, axis: &str, values: &[String], out: &Path, jobs: usize) -> Result<SweepResult, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    // unknown axes and bad values fail before any run starts
    let configs: Vec<RunConfig> = values.iter().map(|v| template.with_override(axis, v)).collect::<Result<_, _>>()?;
    fs::create_dir_all(out)?;
    let checks = &template.verify.checks;
    let coming = checks.iter().any(|c| c == "coming_down");
    let gaussian = checks.iter().any(|c| c == "gaussian");
    let (k1, k2) = template.verify.mode;
    let mode_box = k1.unsigned_abs().max(k2.unsigned_abs()) as usize;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    let members: Vec<Member> = pool.install(|| {
        configs
            .par_iter()
            .zip(values.par_iter())
            .enumerate()
            .map(|(i, (cfg, value))| {
                let dir = out.join(format!("run_{i:03}"));
                let capture = Capture {
                    top: coming || gaussian,
                    index: None,
                };
                match execute("sweep", cfg, base, &dir, capture) {
                    Ok(r) => Member {
                        value: value.clone(),
                        dir,
                        status: Ok(()),
                        theta: if coming {
                            r.top.iter().filter(|(t, _)| *t >= cfg.verify.coming_from - 1e-12).map(|(t, f)| (*t, Arc::new(theta_of(f)))).collect()
                        } else {
                            Vec::new()
                        },
                        draw: if gaussian { r.top.last().map(|(_, f)| theta_of(&f.truncated(mode_box)).get(k1, k2).re) } else { None },
                    },
                    Err(e) => Member {
                        value: value.clone(),
                        dir,
                        status: Err(e.to_string()),
                        theta: Vec::new(),
                        draw: None,
                    },
                }
            })
            .collect()
    });

    let mut index = format!("# axis {axis}\n# run value manifest status\n");
    for (i, m) in members.iter().enumerate() {
        let status = match &m.status {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("error: {}", e.replace('\n', " ")),
        };
        index.push_str(&format!("{i} {} {} {}\n", m.value, m.dir.join(crate::manifest::MANIFEST_FILE).display(), status));
    }
    fs::write(out.join(SWEEP_INDEX), index)?;

    let ok: Vec<&Member> = members.iter().filter(|m| m.status.is_ok()).collect();
    let mut ensemble = Vec::new();
    if coming && !ok.is_empty() {
        let runs: Vec<Samples> = ok.iter().map(|m| m.theta.clone()).collect();
        // varying only the initial data must not change the state once it has come down
        let coincide = axis.starts_with("noise.theta0");
        let v = &template.verify;
        let r = coming_down_check(&runs, v.coming_from, v.delta, v.coming_eps, coincide, template.grid.oversample)?;
        let region = format!("t>={} runs={}", r.from, runs.len());
        ensemble.push(Record::new("coming_down", region.clone(), r.sup_norm, r.eps, if r.passed { "pass" } else { "FAIL" }));
        if coincide {
            ensemble.push(Record::new("coming_down_discrepancy", region, r.max_discrepancy, 0.0, "info"));
        }
    }
    if gaussian && !ok.is_empty() {
        let draws: Vec<f64> = ok.iter().filter_map(|m| m.draw).collect();
        let g = gaussianity_test(&draws, template.verify.witness)?;
        let region = format!("mode=({k1},{k2}) n={}", g.n);
        ensemble.push(Record::new("gaussian_kurtosis", region.clone(), g.excess_kurtosis, g.kurtosis_ci, Verdict::ReportOnly));
        ensemble.push(Record::new("gaussian_flagged", region, if g.flagged { 1.0 } else { 0.0 }, f64::NAN, Verdict::ReportOnly));
    }
    if !ensemble.is_empty() {
        let mut txt = Vec::new();
        write_text(&mut txt, &ensemble)?;
        fs::write(out.join(ENSEMBLE_TXT), txt)?;
        let mut csv = Vec::new();
        write_csv(&mut csv, &ensemble)?;
        fs::write(out.join(ENSEMBLE_CSV), csv)?;
    }
    Ok(SweepResult { members, ensemble })
}
