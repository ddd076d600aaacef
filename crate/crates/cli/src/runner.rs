//! `run` and `branch`: input resolution, snapshot files, diagnostics and manifests.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sqg_core::engine::{
    run_with, Blend, BranchSignature, DiagOptions, DiagRecord, EngineError, NodeSink, ParamSchedule, RetainedNode, Retention, RunInputs, RunOutput,
    RunSpec, ScheduleMode, Scheme,
};
use sqg_core::noise::{sample_initial_condition_eps, ForcingSource, ForcingSpec};
use sqg_core::spectral::{fractional_laplacian, io as fio, SpectralField};
use sqg_core::verification::{branch_separation, write_csv, write_text, Record, SeparationReport};

use crate::config::{Bound, RunConfig, Schedule, Source};
use crate::error::CliError;
use crate::manifest::{self, Measured};

pub const INDEX_FILE: &str = "index.txt";
pub const DIAG_FILE: &str = "diagnostics.csv";
pub const SNAP_DIR: &str = "snapshots";
pub const THETA0_FILE: &str = "snapshots/theta0.sqgf";
pub const XI_FILE: &str = "snapshots/xi.sqgf";
pub const THETA_T_FILE: &str = "snapshots/theta_t.sqgf";

/// Engine inputs resolved from a config.
#[derive(Clone, Debug)]
pub struct Resolved {
    /// The config with `auto` bounds filled in and file paths made absolute.
    pub config: RunConfig,
    pub spec: RunSpec,
    pub inputs: RunInputs,
    pub measured: Measured,
}

fn load_source(src: &Source, base: &Path, what: &str) -> Result<Option<SpectralField>, CliError> {
    match src {
        Source::File(p) => {
            let path = base.join(p);
            fio::load(&path).map(Some).map_err(|e| CliError::Config(format!("{what} {}: {e}", path.display())))
        }
        _ => Ok(None),
    }
}

fn absolute(src: &Source, base: &Path) -> Source {
    match src {
        Source::File(p) => {
            let path = base.join(p);
            Source::File(fs::canonicalize(&path).unwrap_or(path).display().to_string())
        }
        other => other.clone(),
    }
}

/// Builds the run spec and input fields. Relative file paths are taken from `base`.
pub fn resolve(cfg: &RunConfig, base: &Path) -> Result<Resolved, CliError> {
    cfg.check()?;
    let n = &cfg.noise;
    let pc = &cfg.params;
    let theta0 = match &n.theta0 {
        Source::Zero => SpectralField::zeros(1),
        Source::Random => sample_initial_condition_eps(pc.eta, n.theta0_k0, n.theta0_seed, n.theta0_eps)?,
        src => load_source(src, base, "theta0")?.expect("file source"),
    }
    .scale(n.theta0_scale);
    let forcing = ForcingSpec {
        source: match &n.xi {
            Source::Zero => ForcingSource::Zero,
            Source::Random => ForcingSource::WhiteNoise {
                seed: n.seed,
                truncation: n.truncation,
            },
            Source::File(p) => ForcingSource::File(base.join(p)),
        },
        alpha: pc.alpha,
        kappa: pc.kappa,
        scale: n.scale,
    };
    let xi = forcing.resolve_xi(n.truncation).map_err(|e| CliError::Config(format!("xi: {e}")))?;
    let theta_t = load_source(&n.theta_t, base, "theta_t")?.unwrap_or_else(|| SpectralField::zeros(1));
    if !theta0.is_mean_free() || !theta_t.is_mean_free() {
        return Err(CliError::Config("initial and terminal data must be mean-free".into()));
    }
    let inputs = RunInputs { theta0, theta_t, xi };
    let (nm, lm) = inputs.bounds(pc.eta, pc.kappa);
    let mut config = cfg.clone();
    let pick = |b: Bound, m: f64| match b {
        Bound::Auto => m,
        Bound::Value(v) => v,
    };
    config.params.n_bound = Bound::Value(pick(pc.n_bound, nm));
    config.params.l_bound = Bound::Value(pick(pc.l_bound, lm));
    config.noise.xi = absolute(&n.xi, base);
    config.noise.theta0 = absolute(&n.theta0, base);
    config.noise.theta_t = absolute(&n.theta_t, base);
    let spec = spec_of(&config);
    Ok(Resolved {
        config,
        spec,
        inputs,
        measured: Measured { n: nm, l: lm },
    })
}

/// Schedule of a config whose bounds are resolved (`auto` counts as 1).
pub fn params_of(cfg: &RunConfig) -> ParamSchedule {
    let p = &cfg.params;
    let v = |b: Bound| match b {
        Bound::Auto => 1.0,
        Bound::Value(v) => v,
    };
    ParamSchedule {
        a: p.a,
        b: p.b,
        beta: p.beta,
        gamma: p.gamma,
        alpha: p.alpha,
        kappa: p.kappa,
        eta: p.eta,
        nu: p.nu,
        n_bound: v(p.n_bound),
        l_bound: v(p.l_bound),
        ml_constant: p.ml_constant,
        c0: p.c0,
        m0: p.m0,
        positivity_floor: p.positivity_floor,
        mode: match &p.schedule {
            Schedule::Strict => ScheduleMode::Strict,
            Schedule::Relaxed(l) => ScheduleMode::Relaxed(l.clone()),
        },
    }
}

pub fn spec_of(cfg: &RunConfig) -> RunSpec {
    let s = &cfg.scheme;
    RunSpec {
        scheme: s.kind,
        params: params_of(cfg),
        levels: s.levels,
        horizon: s.horizon,
        dt: s.dt,
        bridge: s.bridge,
        profile: s.profile,
        branch: cfg.branch.signature.clone(),
        blend: Blend {
            start: s.blend_start,
            end: s.blend_end,
        },
        grid_cap: s.grid_cap,
    }
}

pub fn retention_of(cfg: &RunConfig, dt: f64) -> Retention {
    let g = &cfg.grid;
    Retention {
        stride: if g.snapshot_every > 0.0 { (g.snapshot_every / dt).round().max(1.0) as usize } else { 0 },
        dense_from: g.snapshot_from,
        breakpoints: g.breakpoints,
        probes: g.probes.clone(),
        all_levels: g.all_levels,
    }
}

pub fn diag_of(cfg: &RunConfig) -> DiagOptions {
    DiagOptions {
        x_norm: cfg.grid.x_norm,
        oversample: cfg.grid.oversample,
        decompose: cfg.grid.decompose,
        m0: true,
    }
}

/// One line of `index.txt`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub level: usize,
    pub index: usize,
    pub t: f64,
    /// Paths relative to the run directory (`None` when snapshots are off).
    pub f: Option<String>,
    pub df: Option<String>,
    pub q: Option<String>,
}

impl IndexEntry {
    fn line(&self) -> String {
        let p = |s: &Option<String>| s.clone().unwrap_or_else(|| "-".into());
        format!("{} {} {} {} {} {}", self.level, self.index, self.t, p(&self.f), p(&self.df), p(&self.q))
    }

    fn parse(line: &str) -> Result<Self, CliError> {
        let bad = || CliError::Data(format!("bad index line `{line}`"));
        let w: Vec<&str> = line.split_whitespace().collect();
        if w.len() != 6 {
            return Err(bad());
        }
        let p = |s: &str| (s != "-").then(|| s.to_string());
        Ok(IndexEntry {
            level: w[0].parse().map_err(|_| bad())?,
            index: w[1].parse().map_err(|_| bad())?,
            t: w[2].parse().map_err(|_| bad())?,
            f: p(w[3]),
            df: p(w[4]),
            q: p(w[5]),
        })
    }
}

pub fn read_index(dir: &Path) -> Result<Vec<IndexEntry>, CliError> {
    let text = fs::read_to_string(dir.join(INDEX_FILE))?;
    text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).map(IndexEntry::parse).collect()
}

/// Writes retained nodes as SQGF1 files; a field shared with the previous
/// retained node of the same level points at the same file.
struct SnapshotSink<'a> {
    dir: &'a Path,
    write: bool,
    entries: Vec<IndexEntry>,
    last: Vec<[Option<(Arc<SpectralField>, String)>; 3]>,
    /// Keep the top-level potential at every retained node.
    capture_top: Option<usize>,
    top: Vec<(f64, Arc<SpectralField>)>,
    /// Keep every level at this node index.
    capture_index: Option<usize>,
    at_index: Vec<(usize, Arc<SpectralField>)>,
}

impl SnapshotSink<'_> {
    fn file(&mut self, level: usize, kind: usize, index: usize, field: &Arc<SpectralField>) -> Result<Option<String>, CliError> {
        if !self.write {
            return Ok(None);
        }
        if let Some((prev, name)) = &self.last[level][kind] {
            if Arc::ptr_eq(prev, field) {
                return Ok(Some(name.clone()));
            }
        }
        let tag = ["f", "df", "q"][kind];
        let name = format!("{SNAP_DIR}/L{level}_n{index:06}_{tag}.sqgf");
        fio::save(self.dir.join(&name), field)?;
        self.last[level][kind] = Some((field.clone(), name.clone()));
        Ok(Some(name))
    }
}

impl NodeSink for SnapshotSink<'_> {
    fn accept(&mut self, r: RetainedNode) -> Result<(), EngineError> {
        let io = |e: CliError| EngineError::Data(e.to_string());
        if self.capture_top == Some(r.level) {
            self.top.push((r.t, r.node.f.clone()));
        }
        if self.capture_index == Some(r.index) {
            self.at_index.push((r.level, r.node.f.clone()));
        }
        let f = self.file(r.level, 0, r.index, &r.node.f).map_err(io)?;
        let df = self.file(r.level, 1, r.index, &r.node.df).map_err(io)?;
        let q = self.file(r.level, 2, r.index, &r.node.q).map_err(io)?;
        self.entries.push(IndexEntry {
            level: r.level,
            index: r.index,
            t: r.t,
            f,
            df,
            q,
        });
        Ok(())
    }
}

fn write_diagnostics(path: &Path, recs: &[DiagRecord]) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let names = ["q_M", "q_T", "q_D", "q_I", "q_com", "q_N"];
    write!(
        w,
        "level,index,t,chi_tilde,chi,positivity_min,f_l2,df_l2,q_l2,q_x,f_support,q_support,osc_inner,osc_outer,piece_mismatch,piece_identity_defect"
    )?;
    for n in names {
        write!(w, ",{n}_l2,{n}_x")?;
    }
    writeln!(w)?;
    for d in recs {
        write!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            d.level,
            d.index,
            d.t,
            d.chi_tilde,
            d.chi,
            d.positivity_min,
            d.f_l2,
            d.df_l2,
            d.q_l2,
            d.q_x,
            d.f_support,
            d.q_support,
            d.osc_inner,
            d.osc_outer,
            d.piece_mismatch,
            d.piece_identity_defect
        )?;
        for n in names {
            match d.pieces.iter().find(|p| p.0 == n) {
                Some((_, l2, x)) => write!(w, ",{l2},{x}")?,
                None => write!(w, ",NaN,NaN")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// What a finished run hands back besides its files.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub dir: PathBuf,
    pub resolved: Resolved,
    pub output: RunOutput,
    pub entries: Vec<IndexEntry>,
    /// Top-level `f` at every retained node (when requested).
    pub top: Vec<(f64, Arc<SpectralField>)>,
    /// `f` of every level at the requested node index.
    pub at_index: Vec<(usize, Arc<SpectralField>)>,
}

/// Extra in-memory captures of a run.
#[derive(Clone, Copy, Debug, Default)]
pub struct Capture {
    pub top: bool,
    pub index: Option<usize>,
}

/// Runs `cfg` into `dir`: input snapshots, retained nodes, `index.txt`,
/// `diagnostics.csv` and `manifest.txt`.
pub fn execute(command: &str, cfg: &RunConfig, base: &Path, dir: &Path, capture: Capture) -> Result<RunResult, CliError> {
    let resolved = resolve(cfg, base)?;
    let spec = &resolved.spec;
    let grid = spec.time_grid()?;
    fs::create_dir_all(dir.join(SNAP_DIR))?;
    fio::save(dir.join(THETA0_FILE), &resolved.inputs.theta0)?;
    fio::save(dir.join(XI_FILE), &resolved.inputs.xi)?;
    fio::save(dir.join(THETA_T_FILE), &resolved.inputs.theta_t)?;
    let mut retention = retention_of(cfg, grid.dt);
    if let Some(i) = capture.index {
        retention.probes.push(grid.t(i));
        retention.all_levels = true;
    }
    let mut sink = SnapshotSink {
        dir,
        write: cfg.grid.write_snapshots,
        entries: Vec::new(),
        last: vec![[None, None, None]; spec.levels + 1],
        capture_top: capture.top.then_some(spec.levels),
        top: Vec::new(),
        capture_index: capture.index,
        at_index: Vec::new(),
    };
    let output = run_with(spec, &resolved.inputs, &retention, &diag_of(cfg), &mut sink)?;
    let mut entries = std::mem::take(&mut sink.entries);
    entries.sort_by_key(|e| (e.level, e.index));
    let mut idx = String::from("# level index t f df q\n");
    for e in &entries {
        idx.push_str(&e.line());
        idx.push('\n');
    }
    fs::write(dir.join(INDEX_FILE), idx)?;
    write_diagnostics(&dir.join(DIAG_FILE), &output.diagnostics)?;
    let mut files = vec![INDEX_FILE.to_string(), DIAG_FILE.to_string(), THETA0_FILE.to_string(), XI_FILE.to_string(), THETA_T_FILE.to_string()];
    let mut snaps: Vec<String> = entries.iter().flat_map(|e| [&e.f, &e.df, &e.q]).flatten().cloned().collect();
    snaps.sort();
    snaps.dedup();
    files.extend(snaps);
    let m = manifest::build(command, &resolved.config, &output, resolved.measured, dir, &files)?;
    manifest::write(dir, &m)?;
    Ok(RunResult {
        dir: dir.to_path_buf(),
        resolved,
        output,
        entries,
        top: sink.top,
        at_index: sink.at_index,
    })
}

/// Signature `sig` with `sigma(level)` switched between 1 and 2.
pub fn toggled(sig: &BranchSignature, level: usize) -> BranchSignature {
    let mut p: Vec<u8> = (1..=level.max(sig.prefix().len())).map(|l| sig.sigma(l)).collect();
    p[level - 1] = 3 - p[level - 1];
    BranchSignature::from_prefix(p).expect("values stay in {1, 2}")
}

#[derive(Clone, Debug)]
pub struct BranchResult {
    pub a: RunResult,
    pub b: RunResult,
    pub report: SeparationReport,
}

/// Runs the config's signature and the one toggled at `flip` (or the same one
/// again), then compares the top-level potentials at `[branch] time`.
pub fn branch(cfg: &RunConfig, base: &Path, flip: Option<usize>, dir: &Path) -> Result<BranchResult, CliError> {
    let levels = cfg.scheme.levels;
    if let Some(n) = flip {
        if n == 0 || n > levels {
            return Err(CliError::Usage(format!("flip level {n} outside 1..={levels}")));
        }
    }
    let spec = spec_of(cfg);
    let grid = spec.time_grid()?;
    let t = match cfg.scheme.kind {
        Scheme::Steady => 0.0,
        _ => cfg.branch.time,
    };
    if !(0.0..=grid.horizon).contains(&t) {
        return Err(CliError::Config(format!("[branch] time {t} outside [0, {}]", grid.horizon)));
    }
    let index = grid.floor_index(t + 0.5 * grid.dt);
    let mut other = cfg.clone();
    if let Some(n) = flip {
        other.branch.signature = toggled(&cfg.branch.signature, n);
    }
    let capture = Capture { top: false, index: Some(index) };
    let a = execute("branch", cfg, base, &dir.join("a"), capture)?;
    let b = execute("branch", &other, base, &dir.join("b"), capture)?;
    let pick = |r: &RunResult, level: usize| r.at_index.iter().find(|(l, _)| *l == level).map(|(_, f)| f.clone());
    let (fa, fb) = (pick(&a, levels).expect("top level captured"), pick(&b, levels).expect("top level captured"));
    let first = cfg.branch.signature.first_difference(&other.branch.signature);
    let at_flip = first.map(|n| (pick(&a, n).expect("flip level captured"), pick(&b, n).expect("flip level captured")));
    let report = branch_separation(&fa, &fb, &a.resolved.spec.params, first, levels, at_flip.as_ref().map(|(x, y)| (&**x, &**y)), grid.t(index))?;
    let recs = separation_records(&report);
    let mut txt = Vec::new();
    write_text(&mut txt, &recs)?;
    fs::write(dir.join("separation.txt"), txt)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &recs)?;
    fs::write(dir.join("separation.csv"), csv)?;
    Ok(BranchResult { a, b, report })
}

pub fn separation_records(r: &SeparationReport) -> Vec<Record> {
    let region = format!("t={} flip={}", r.t, r.flip_level.map_or("none".into(), |n| n.to_string()));
    let verdict = if r.passed { "pass" } else { "FAIL" };
    let margin = r.leading - r.measured_tail;
    vec![
        Record::new("separation", region.clone(), r.distance, margin.max(0.0), verdict),
        Record::new("separation_phys", region.clone(), r.distance_phys, r.distance, "info"),
        Record::new("leading_term", region.clone(), r.leading, f64::NAN, "info"),
        Record::new("tail_sum", region.clone(), r.tail_sum, f64::NAN, "info"),
        Record::new("measured_tail", region, r.measured_tail, f64::NAN, "info"),
    ]
}

/// `theta = Lambda f`.
pub fn theta_of(f: &SpectralField) -> SpectralField {
    fractional_laplacian(f, 1.0).expect("Lambda is total")
}
