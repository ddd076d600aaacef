//! `verify`: checks over a finished run directory.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use sqg_core::engine::{Engine, Scheme, TimeGrid, Trajectory};
use sqg_core::spectral::{fractional_laplacian, io as fio, x_norm_os, SpectralField};
use sqg_core::verification::{
    bound_sample, check_bounds, ergodic_average, level_forcing, reynolds_residual, weak_residual, write_csv, write_text, Record, Verdict,
    REYNOLDS_TOLERANCE,
};

use crate::config::{RunConfig, Schedule, ENSEMBLE_CHECKS};
use crate::error::CliError;
use crate::manifest::{sha256_file, Manifest};
use crate::runner::{self, read_index, IndexEntry, XI_FILE};

pub const REPORT_TXT: &str = "verify.txt";
pub const REPORT_CSV: &str = "verify.csv";

/// Relative slack on the weak-residual bound for roundoff in the integrals.
const WEAK_ROUNDOFF: f64 = 1e-9;

/// Largest number of quadrature intervals of the ergodic averages.
pub const ERGODIC_INTERVALS: usize = 256;

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn load(dir: &Path, rel: &Option<String>) -> Result<SpectralField, CliError> {
    let rel = rel.as_ref().ok_or_else(|| CliError::Data("run was written without snapshots".into()))?;
    fio::load(dir.join(rel)).map_err(|e| CliError::Data(format!("{rel}: {e}")))
}

/// Runs `checks` (or the manifest's `[verify] checks`) on the run in `dir` and
/// writes `verify.txt` / `verify.csv`. Fails with a verification error when
/// any pass/fail record fails.
pub fn verify(dir: &Path, checks: Option<Vec<String>>) -> Result<Vec<Record>, CliError> {
    let m = Manifest::read(dir)?;
    let checks = checks.unwrap_or_else(|| m.config.verify.checks.clone());
    if let Some(c) = checks.iter().find(|c| ENSEMBLE_CHECKS.contains(&c.as_str())) {
        return Err(CliError::Usage(format!("`{c}` is an ensemble check; use it with sweep")));
    }
    let has = |c: &str| checks.iter().any(|x| x == c);
    let mut recs = Vec::new();
    if has("checksums") {
        recs.extend(checksums(dir, &m)?);
    }
    let entries = if has("reynolds") || has("bounds") || has("weak") || has("ergodic") {
        read_index(dir)?
    } else {
        Vec::new()
    };
    if has("reynolds") {
        recs.extend(reynolds(dir, &m.config, &entries)?);
    }
    if has("bounds") {
        recs.extend(bounds(dir, &m.config, &entries)?);
    }
    if has("weak") || has("ergodic") {
        recs.extend(replay(dir, &m.config, &entries, has("weak"), has("ergodic"))?);
    }
    let mut txt = Vec::new();
    write_text(&mut txt, &recs)?;
    fs::write(dir.join(REPORT_TXT), txt)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &recs)?;
    fs::write(dir.join(REPORT_CSV), csv)?;
    let failed: Vec<&Record> = recs.iter().filter(|r| r.failed()).collect();
    if let Some(first) = failed.first() {
        return Err(CliError::Verification(format!("{} of {} checks failed, first: {} {}", failed.len(), recs.len(), first.name, first.region)));
    }
    Ok(recs)
}

fn checksums(dir: &Path, m: &Manifest) -> Result<Vec<Record>, CliError> {
    let mut out = Vec::new();
    for (file, sum) in &m.files {
        let ok = match sha256_file(&dir.join(file)) {
            Ok(s) => &s == sum,
            Err(_) => false,
        };
        out.push(Record::new("checksum", file.clone(), if ok { 0.0 } else { 1.0 }, 0.0, verdict(ok)));
    }
    Ok(out)
}

fn reynolds(dir: &Path, cfg: &RunConfig, entries: &[IndexEntry]) -> Result<Vec<Record>, CliError> {
    let p = runner::params_of(cfg);
    let xi = fio::load(dir.join(XI_FILE))?;
    let mut out = Vec::new();
    for e in entries {
        let (f, df, q) = (load(dir, &e.f)?, load(dir, &e.df)?, load(dir, &e.q)?);
        let r = reynolds_residual(&f, &df, &q, &xi, &p, e.level, cfg.scheme.profile)?;
        out.push(Record::new("reynolds", format!("L{} t={}", e.level, e.t), r.rel, REYNOLDS_TOLERANCE, verdict(r.passed)));
    }
    Ok(out)
}

fn bounds(dir: &Path, cfg: &RunConfig, entries: &[IndexEntry]) -> Result<Vec<Record>, CliError> {
    let p = runner::params_of(cfg);
    let by_key: HashMap<(usize, usize), &IndexEntry> = entries.iter().map(|e| ((e.level, e.index), e)).collect();
    let mut samples = Vec::new();
    for e in entries {
        let (f, df, q) = (load(dir, &e.f)?, load(dir, &e.df)?, load(dir, &e.q)?);
        let prev = match e.level.checked_sub(1).and_then(|l| by_key.get(&(l, e.index))) {
            Some(pe) => Some(load(dir, &pe.f)?),
            None => None,
        };
        samples.push(bound_sample(e.level, e.t, &f, &df, &q, prev.as_ref(), cfg.verify.delta, cfg.grid.oversample)?);
    }
    let strict = matches!(cfg.params.schedule, Schedule::Strict);
    let reports = check_bounds(&samples, &p, cfg.scheme.kind, cfg.scheme.horizon, cfg.verify.delta, strict);
    Ok(reports
        .into_iter()
        .map(|b| {
            let region = format!("L{} [{}, {}] n={}", b.level, b.region.0, b.region.1, b.samples);
            Record::new(format!("bound:{}", b.name), region, b.measured, b.target, b.verdict)
        })
        .collect())
}

/// Default weak-residual window: `[4, 8]` clipped to the horizon.
pub fn default_window(horizon: f64) -> (f64, f64) {
    if horizon > 4.0 {
        (4.0, horizon.min(8.0))
    } else {
        (0.0, horizon)
    }
}

/// Test functions `cos(k.x)` and `sin(k.x)` for `0 < |k| <= kmax`, one `k` per
/// `+-k` pair, with `||Delta psi||_{L^1} = 8 pi |k|^2`.
pub fn test_functions(kmax: usize) -> Vec<(String, SpectralField, f64)> {
    let km = kmax as i64;
    let mut out = Vec::new();
    for k1 in 0..=km {
        for k2 in -km..=km {
            let r2 = k1 * k1 + k2 * k2;
            if r2 == 0 || r2 > km * km || (k1 == 0 && k2 < 0) {
                continue;
            }
            let l1 = 8.0 * std::f64::consts::PI * r2 as f64;
            out.push((format!("cos({k1},{k2})"), SpectralField::cosine(kmax, k1, k2, 1.0), l1));
            out.push((format!("sin({k1},{k2})"), SpectralField::sine(kmax, k1, k2, 1.0), l1));
        }
    }
    out
}

/// Recomputes the top level from the manifest, checks it against the stored
/// snapshots, then evaluates the weak residual and the ergodic averages.
fn replay(dir: &Path, cfg: &RunConfig, entries: &[IndexEntry], weak: bool, ergodic: bool) -> Result<Vec<Record>, CliError> {
    let resolved = runner::resolve(cfg, dir)?;
    let spec = &resolved.spec;
    let top = spec.levels;
    let grid: TimeGrid = spec.time_grid()?;
    let mut engine = Engine::new(spec, &resolved.inputs)?;
    let steady = spec.scheme == Scheme::Steady;
    let (s, t) = cfg.verify.window.unwrap_or_else(|| default_window(grid.horizon));
    let (ws, wt) = if steady { (0, grid.nodes - 1) } else { (grid.ceil_index(s - 1e-9), grid.floor_index(t + 1e-9)) };
    let ebox = cfg.verify.functionals.iter().map(|f| f.support_box()).max().unwrap_or(0).max(1);
    let stored: HashMap<usize, &IndexEntry> = entries.iter().filter(|e| e.level == top).map(|e| (e.index, e)).collect();

    // ergodic averages use every `stride`-th node, at most ERGODIC_INTERVALS intervals
    let intervals = grid.nodes - 1;
    let stride = (1..=intervals).find(|d| intervals % d == 0 && intervals / d <= ERGODIC_INTERVALS).unwrap_or(1);
    let mut visit: BTreeSet<usize> = stored.keys().copied().collect();
    if weak {
        visit.extend(ws..=wt);
    }
    if ergodic {
        visit.extend((0..=intervals).step_by(stride));
    }
    if steady {
        visit = BTreeSet::from([0]);
    }

    let zero = Arc::new(SpectralField::zeros(1));
    let mut window_theta = vec![zero.clone(); grid.nodes];
    let mut erg_theta = Vec::new();
    let mut qx_sup = 0.0f64;
    let mut last_e: Option<(Arc<SpectralField>, Arc<SpectralField>)> = None;
    let mut last_w: Option<(Arc<SpectralField>, Arc<SpectralField>)> = None;
    let mut last_q: Option<Arc<SpectralField>> = None;
    let mut replay_diff = 0.0f64;
    let mut replay_count = 0usize;
    for &i in &visit {
        let node = engine.node(top, i)?;
        if let Some(e) = stored.get(&i) {
            if e.f.is_some() {
                replay_diff = replay_diff.max(load(dir, &e.f)?.max_abs_diff(&node.f));
                replay_count += 1;
            }
        }
        if ergodic && i % stride == 0 {
            let eth = match &last_e {
                Some((f, eth)) if Arc::ptr_eq(f, &node.f) => eth.clone(),
                _ => {
                    let eth = Arc::new(fractional_laplacian(&node.f.truncated(ebox), 1.0)?);
                    last_e = Some((node.f.clone(), eth.clone()));
                    eth
                }
            };
            erg_theta.push(eth);
        }
        if weak && (steady || (ws..=wt).contains(&i)) {
            window_theta[i] = match &last_w {
                Some((f, th)) if Arc::ptr_eq(f, &node.f) => th.clone(),
                _ => {
                    let th = Arc::new(fractional_laplacian(&node.f, 1.0)?);
                    last_w = Some((node.f.clone(), th.clone()));
                    th
                }
            };
            if !last_q.as_ref().is_some_and(|q| Arc::ptr_eq(q, &node.q)) {
                qx_sup = qx_sup.max(x_norm_os(&node.q, cfg.grid.oversample)?);
                last_q = Some(node.q.clone());
            }
        }
    }
    engine.clear();
    if steady {
        // one node stands for every time
        window_theta = vec![window_theta[0].clone(); grid.nodes];
        erg_theta = vec![erg_theta.first().cloned().unwrap_or(zero); intervals / stride + 1];
    }

    let mut out = vec![Record::new(
        "replay",
        format!("L{top} nodes={replay_count}"),
        replay_diff,
        0.0,
        verdict(replay_diff == 0.0),
    )];
    if weak {
        let theta = Trajectory::new(grid, window_theta)?;
        let p = &spec.params;
        let zeta = level_forcing(&resolved.inputs.xi, p, top, spec.profile)?;
        let (s, t) = (grid.t(ws), grid.t(wt));
        for (name, psi, l1) in test_functions(cfg.verify.psi_max) {
            let w = weak_residual(&theta, &zeta, &psi, s, t, p.nu, p.gamma)?;
            let target = qx_sup * l1 * (t - s) + w.quadrature_error;
            let ok = w.value <= target * (1.0 + WEAK_ROUNDOFF) + 1e-12;
            out.push(Record::new(format!("weak:{name}"), format!("L{top} [{s}, {t}]"), w.value, target, verdict(ok)));
        }
    }
    if ergodic {
        let coarse = TimeGrid::new(grid.horizon, grid.dt * stride as f64)?;
        let theta = Trajectory::new(coarse, erg_theta)?;
        let horizons = if cfg.verify.horizons.is_empty() {
            let h = coarse.horizon;
            [h / 4.0, h / 2.0, h].iter().map(|&x| coarse.t(coarse.floor_index(x + 1e-9))).filter(|&x| x > 0.0).collect()
        } else {
            cfg.verify.horizons.clone()
        };
        for f in &cfg.verify.functionals {
            let r = ergodic_average(&theta, f, &horizons)?;
            for (h, a) in r.horizons.iter().zip(&r.averages) {
                out.push(Record::new(format!("ergodic:{f}"), format!("T={h}"), *a, f64::NAN, Verdict::ReportOnly));
            }
            let spread = r.cauchy.iter().fold(0.0f64, |m, c| m.max(*c));
            // a time-independent output has exactly T-independent averages
            let v = if steady { verdict(spread == 0.0).to_string() } else { Verdict::ReportOnly.to_string() };
            out.push(Record::new(format!("ergodic_cauchy:{f}"), format!("L{top}"), spread, 0.0, v));
        }
    }
    Ok(out)
}
