//! Run configuration: INI text with sections `[params]`, `[scheme]`, `[noise]`,
//! `[grid]`, `[branch]` and `[verify]`. Every key is optional; unknown sections
//! and keys are rejected. [`RunConfig::to_ini_string`] writes every key, and
//! parsing that text gives back the same value.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use ini::{EscapePolicy, Ini, ParseOption, WriteOption};
use sqg_core::engine::{BranchSignature, CutoffBridge, ParamSchedule, ScheduleMode, Scheme};
use sqg_core::spectral::CutoffProfile;
use sqg_core::verification::Functional;

use crate::error::CliError;

/// Sections of a config file, in output order.
pub const SECTIONS: [&str; 6] = ["params", "scheme", "noise", "grid", "branch", "verify"];

/// Checks understood by `verify` (run directory) and `sweep` (ensembles).
pub const RUN_CHECKS: [&str; 5] = ["checksums", "reynolds", "bounds", "weak", "ergodic"];
pub const ENSEMBLE_CHECKS: [&str; 2] = ["gaussian", "coming_down"];

/// `N` or `L`: measured from the inputs or given.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    Auto,
    Value(f64),
}

impl Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Auto => f.write_str("auto"),
            Bound::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Strict,
    Relaxed(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamsConfig {
    pub a: f64,
    pub b: u32,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub eta: f64,
    pub nu: f64,
    pub c0: f64,
    pub m0: f64,
    pub ml_constant: f64,
    pub n_bound: Bound,
    pub l_bound: Bound,
    pub positivity_floor: f64,
    pub schedule: Schedule,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = ParamSchedule::default();
        let ScheduleMode::Relaxed(list) = p.mode.clone() else { unreachable!("default schedule is relaxed") };
        ParamsConfig {
            a: p.a,
            b: p.b,
            beta: p.beta,
            gamma: p.gamma,
            alpha: p.alpha,
            kappa: p.kappa,
            eta: p.eta,
            nu: p.nu,
            c0: p.c0,
            m0: p.m0,
            ml_constant: p.ml_constant,
            n_bound: Bound::Auto,
            l_bound: Bound::Auto,
            positivity_floor: p.positivity_floor,
            schedule: Schedule::Relaxed(list),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub kind: Scheme,
    pub levels: usize,
    pub horizon: f64,
    /// `None` picks the dt resolving the finest level.
    pub dt: Option<f64>,
    pub bridge: CutoffBridge,
    pub profile: CutoffProfile,
    pub blend_start: f64,
    pub blend_end: f64,
    pub grid_cap: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        let s = sqg_core::engine::RunSpec::default();
        SchemeConfig {
            kind: s.scheme,
            levels: s.levels,
            horizon: s.horizon,
            dt: s.dt,
            bridge: s.bridge,
            profile: s.profile,
            blend_start: s.blend.start,
            blend_end: s.blend.end,
            grid_cap: s.grid_cap,
        }
    }
}

/// Origin of an input field.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Zero,
    /// White noise for `xi`, the random `C^eta` datum for `theta0`.
    Random,
    File(String),
}

impl Source {
    fn write(&self, random: &str) -> String {
        match self {
            Source::Zero => "zero".into(),
            Source::Random => random.into(),
            Source::File(p) => format!("file:{p}"),
        }
    }

    fn read(s: &str, random: &str) -> Result<Self, String> {
        match s {
            "zero" => Ok(Source::Zero),
            _ if s == random => Ok(Source::Random),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Source::File(p.to_string())),
                _ => Err(format!("expected zero, {random} or file:<path>, got `{s}`")),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    pub xi: Source,
    pub seed: u64,
    pub truncation: usize,
    pub scale: f64,
    pub theta0: Source,
    pub theta0_seed: u64,
    pub theta0_k0: usize,
    pub theta0_eps: f64,
    pub theta0_scale: f64,
    /// Terminal value (terminal scheme); `Random` is not accepted.
    pub theta_t: Source,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            xi: Source::Random,
            seed: 7,
            truncation: 64,
            scale: 1.0,
            theta0: Source::Random,
            theta0_seed: 1,
            theta0_k0: 8,
            theta0_eps: sqg_core::noise::DEFAULT_EPSILON,
            theta0_scale: 1.0,
            theta_t: Source::Zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    /// Time between retained nodes (`0` keeps only the ends).
    pub snapshot_every: f64,
    /// Keep every node from this time on.
    pub snapshot_from: Option<f64>,
    /// Retain all levels, or only the top one.
    pub all_levels: bool,
    /// Retain the nodes next to cutoff breakpoints.
    pub breakpoints: bool,
    pub probes: Vec<f64>,
    pub oversample: f64,
    pub x_norm: bool,
    pub decompose: bool,
    /// Write SQGF1 files for the retained nodes.
    pub write_snapshots: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            snapshot_every: 1.0,
            snapshot_from: None,
            all_levels: true,
            breakpoints: false,
            probes: Vec::new(),
            oversample: 2.0,
            x_norm: true,
            decompose: false,
            write_snapshots: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchConfig {
    pub signature: BranchSignature,
    /// Time at which branch pairs are compared.
    pub time: f64,
}

impl Default for BranchConfig {
    fn default() -> Self {
        BranchConfig {
            signature: BranchSignature::none(),
            time: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub checks: Vec<String>,
    /// Besov margin `delta` of the weak norms.
    pub delta: f64,
    /// Test functions `cos(k.x)`, `sin(k.x)` with `0 < |k| <= psi_max`.
    pub psi_max: usize,
    /// Weak-residual window; `None` uses `[4, 8]` clipped to the horizon.
    pub window: Option<(f64, f64)>,
    pub functionals: Vec<Functional>,
    /// Ergodic horizons; empty uses `T/4, T/2, T`.
    pub horizons: Vec<f64>,
    /// Coming-down window start and tolerance.
    pub coming_from: f64,
    pub coming_eps: f64,
    /// Mode whose real part forms the Gaussianity ensemble.
    pub mode: (i64, i64),
    /// Interval known to contain every ensemble draw.
    pub witness: Option<(f64, f64)>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            checks: Vec::new(),
            delta: 0.1,
            psi_max: 4,
            window: None,
            functionals: vec![
                Functional::SinModeRe { k1: 1, k2: 0, scale: 1.0 },
                Functional::ClippedL2 { radius: 8.0, clip: 100.0 },
            ],
            horizons: Vec::new(),
            coming_from: 4.0,
            coming_eps: 1.0,
            mode: (1, 0),
            witness: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub params: ParamsConfig,
    pub scheme: SchemeConfig,
    pub noise: NoiseConfig,
    pub grid: GridConfig,
    pub branch: BranchConfig,
    pub verify: VerifyConfig,
}

fn list<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("none".into(), |x| x.to_string())
}

fn pair<T: Display>(v: &Option<(T, T)>) -> String {
    v.as_ref().map_or("none".into(), |(a, b)| format!("{a},{b}"))
}

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: Display,
{
    s.trim().parse::<T>().map_err(|e| format!("cannot parse `{s}`: {e}"))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: Display,
{
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse).collect()
}

fn parse_opt<T: FromStr>(s: &str) -> Result<Option<T>, String>
where
    T::Err: Display,
{
    if s.trim() == "none" {
        Ok(None)
    } else {
        parse(s).map(Some)
    }
}

fn parse_pair<T: FromStr + Copy>(s: &str) -> Result<Option<(T, T)>, String>
where
    T::Err: Display,
{
    if s.trim() == "none" {
        return Ok(None);
    }
    match parse_list::<T>(s)?.as_slice() {
        &[a, b] => Ok(Some((a, b))),
        _ => Err(format!("expected two comma-separated values, got `{s}`")),
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

impl RunConfig {
    /// `(section, key, value)` for every key, in output order.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let p = &self.params;
        let s = &self.scheme;
        let n = &self.noise;
        let g = &self.grid;
        let b = &self.branch;
        let v = &self.verify;
        let schedule = match &p.schedule {
            Schedule::Strict => ("strict".to_string(), String::new()),
            Schedule::Relaxed(l) => ("relaxed".to_string(), list(l)),
        };
        vec![
            ("params", "schedule", schedule.0),
            ("params", "lambdas", schedule.1),
            ("params", "a", p.a.to_string()),
            ("params", "b", p.b.to_string()),
            ("params", "beta", p.beta.to_string()),
            ("params", "gamma", p.gamma.to_string()),
            ("params", "alpha", p.alpha.to_string()),
            ("params", "kappa", p.kappa.to_string()),
            ("params", "eta", p.eta.to_string()),
            ("params", "nu", p.nu.to_string()),
            ("params", "c0", p.c0.to_string()),
            ("params", "m0", p.m0.to_string()),
            ("params", "ml_constant", p.ml_constant.to_string()),
            ("params", "n_bound", p.n_bound.to_string()),
            ("params", "l_bound", p.l_bound.to_string()),
            ("params", "positivity_floor", p.positivity_floor.to_string()),
            ("scheme", "kind", s.kind.to_string()),
            ("scheme", "levels", s.levels.to_string()),
            ("scheme", "horizon", s.horizon.to_string()),
            ("scheme", "dt", s.dt.map_or("auto".into(), |d| d.to_string())),
            ("scheme", "bridge", s.bridge.to_string()),
            ("scheme", "profile", s.profile.to_string()),
            ("scheme", "blend_start", s.blend_start.to_string()),
            ("scheme", "blend_end", s.blend_end.to_string()),
            ("scheme", "grid_cap", s.grid_cap.to_string()),
            ("noise", "xi", n.xi.write("white")),
            ("noise", "seed", n.seed.to_string()),
            ("noise", "truncation", n.truncation.to_string()),
            ("noise", "scale", n.scale.to_string()),
            ("noise", "theta0", n.theta0.write("sample")),
            ("noise", "theta0_seed", n.theta0_seed.to_string()),
            ("noise", "theta0_k0", n.theta0_k0.to_string()),
            ("noise", "theta0_eps", n.theta0_eps.to_string()),
            ("noise", "theta0_scale", n.theta0_scale.to_string()),
            ("noise", "theta_t", n.theta_t.write("sample")),
            ("grid", "snapshot_every", g.snapshot_every.to_string()),
            ("grid", "snapshot_from", opt(&g.snapshot_from)),
            ("grid", "snapshot_levels", if g.all_levels { "all" } else { "top" }.into()),
            ("grid", "breakpoints", g.breakpoints.to_string()),
            ("grid", "probes", list(&g.probes)),
            ("grid", "oversample", g.oversample.to_string()),
            ("grid", "x_norm", g.x_norm.to_string()),
            ("grid", "decompose", g.decompose.to_string()),
            ("grid", "write_snapshots", g.write_snapshots.to_string()),
            ("branch", "signature", b.signature.to_string()),
            ("branch", "time", b.time.to_string()),
            ("verify", "checks", v.checks.join(",")),
            ("verify", "delta", v.delta.to_string()),
            ("verify", "psi_max", v.psi_max.to_string()),
            ("verify", "window", pair(&v.window)),
            ("verify", "functionals", v.functionals.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(";")),
            ("verify", "horizons", list(&v.horizons)),
            ("verify", "coming_from", v.coming_from.to_string()),
            ("verify", "coming_eps", v.coming_eps.to_string()),
            ("verify", "mode", format!("{},{}", v.mode.0, v.mode.1)),
            ("verify", "witness", pair(&v.witness)),
        ]
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |msg: String| CliError::Config(format!("[{section}] {key}: {msg}"));
        self.set_inner(section, key, value).map_err(bad)
    }

    fn set_inner(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let p = &mut self.params;
        let s = &mut self.scheme;
        let n = &mut self.noise;
        let g = &mut self.grid;
        let b = &mut self.branch;
        let v = &mut self.verify;
        match (section, key) {
            ("params", "schedule") => {
                p.schedule = match value {
                    "strict" => Schedule::Strict,
                    "relaxed" => match &p.schedule {
                        Schedule::Relaxed(l) => Schedule::Relaxed(l.clone()),
                        Schedule::Strict => Schedule::Relaxed(Vec::new()),
                    },
                    _ => return Err(format!("expected strict or relaxed, got `{value}`")),
                }
            }
            ("params", "lambdas") => {
                let l: Vec<f64> = parse_list(value)?;
                match &mut p.schedule {
                    Schedule::Relaxed(old) => *old = l,
                    // the list is kept for a later `schedule = relaxed`
                    Schedule::Strict if l.is_empty() => {}
                    Schedule::Strict => return Err("a lambda list needs schedule = relaxed (set schedule first)".into()),
                }
            }
            ("params", "a") => p.a = parse(value)?,
            ("params", "b") => p.b = parse(value)?,
            ("params", "beta") => p.beta = parse(value)?,
            ("params", "gamma") => p.gamma = parse(value)?,
            ("params", "alpha") => p.alpha = parse(value)?,
            ("params", "kappa") => p.kappa = parse(value)?,
            ("params", "eta") => p.eta = parse(value)?,
            ("params", "nu") => p.nu = parse(value)?,
            ("params", "c0") => p.c0 = parse(value)?,
            ("params", "m0") => p.m0 = parse(value)?,
            ("params", "ml_constant") => p.ml_constant = parse(value)?,
            ("params", "n_bound") => p.n_bound = if value == "auto" { Bound::Auto } else { Bound::Value(parse(value)?) },
            ("params", "l_bound") => p.l_bound = if value == "auto" { Bound::Auto } else { Bound::Value(parse(value)?) },
            ("params", "positivity_floor") => p.positivity_floor = parse(value)?,
            ("scheme", "kind") => s.kind = parse(value)?,
            ("scheme", "levels") => s.levels = parse(value)?,
            ("scheme", "horizon") => s.horizon = parse(value)?,
            ("scheme", "dt") => s.dt = if value == "auto" { None } else { Some(parse(value)?) },
            ("scheme", "bridge") => s.bridge = parse(value)?,
            ("scheme", "profile") => s.profile = parse(value)?,
            ("scheme", "blend_start") => s.blend_start = parse(value)?,
            ("scheme", "blend_end") => s.blend_end = parse(value)?,
            ("scheme", "grid_cap") => s.grid_cap = parse(value)?,
            ("noise", "xi") => n.xi = Source::read(value, "white")?,
            ("noise", "seed") => n.seed = parse(value)?,
            ("noise", "truncation") => n.truncation = parse(value)?,
            ("noise", "scale") => n.scale = parse(value)?,
            ("noise", "theta0") => n.theta0 = Source::read(value, "sample")?,
            ("noise", "theta0_seed") => n.theta0_seed = parse(value)?,
            ("noise", "theta0_k0") => n.theta0_k0 = parse(value)?,
            ("noise", "theta0_eps") => n.theta0_eps = parse(value)?,
            ("noise", "theta0_scale") => n.theta0_scale = parse(value)?,
            ("noise", "theta_t") => {
                n.theta_t = match Source::read(value, "sample")? {
                    Source::Random => return Err("the terminal value is zero or file:<path>".into()),
                    other => other,
                }
            }
            ("grid", "snapshot_every") => g.snapshot_every = parse(value)?,
            ("grid", "snapshot_from") => g.snapshot_from = parse_opt(value)?,
            ("grid", "snapshot_levels") => {
                g.all_levels = match value {
                    "all" => true,
                    "top" => false,
                    _ => return Err(format!("expected all or top, got `{value}`")),
                }
            }
            ("grid", "breakpoints") => g.breakpoints = parse_bool(value)?,
            ("grid", "probes") => g.probes = parse_list(value)?,
            ("grid", "oversample") => g.oversample = parse(value)?,
            ("grid", "x_norm") => g.x_norm = parse_bool(value)?,
            ("grid", "decompose") => g.decompose = parse_bool(value)?,
            ("grid", "write_snapshots") => g.write_snapshots = parse_bool(value)?,
            ("branch", "signature") => {
                let vals: Vec<u8> = parse_list(value)?;
                b.signature = BranchSignature::from_prefix(vals)?;
            }
            ("branch", "time") => b.time = parse(value)?,
            ("verify", "checks") => v.checks = parse_checks(value)?,
            ("verify", "delta") => v.delta = parse(value)?,
            ("verify", "psi_max") => v.psi_max = parse(value)?,
            ("verify", "window") => v.window = parse_pair(value)?,
            ("verify", "functionals") => {
                v.functionals = value
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| Functional::parse(s).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?
            }
            ("verify", "horizons") => v.horizons = parse_list(value)?,
            ("verify", "coming_from") => v.coming_from = parse(value)?,
            ("verify", "coming_eps") => v.coming_eps = parse(value)?,
            ("verify", "mode") => v.mode = parse_pair(value)?.ok_or("expected k1,k2")?,
            ("verify", "witness") => v.witness = parse_pair(value)?,
            _ if SECTIONS.contains(&section) => return Err("unknown key".into()),
            _ => return Err("unknown section".into()),
        }
        Ok(())
    }

    /// Parses config text. Sections named in `skip` are ignored (used for manifests).
    pub fn parse_with(text: &str, skip: &dyn Fn(&str) -> bool) -> Result<Self, CliError> {
        let opt = ParseOption {
            enabled_quote: false,
            enabled_escape: false,
            ..ParseOption::default()
        };
        let ini = Ini::load_from_str_opt(text, opt).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        // schedule before lambdas, whatever the file order
        let mut deferred = Vec::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(CliError::Config(format!("key `{k}` outside any section")));
                }
                continue;
            };
            if skip(name) {
                continue;
            }
            if !SECTIONS.contains(&name) {
                return Err(CliError::Config(format!("unknown section [{name}]")));
            }
            for (k, v) in props.iter() {
                if !seen.insert((name.to_string(), k.to_string())) {
                    return Err(CliError::Config(format!("[{name}] {k}: duplicate key")));
                }
                if name == "params" && k == "lambdas" {
                    deferred.push(v.to_string());
                } else {
                    cfg.set(name, k, v)?;
                }
            }
        }
        for v in deferred {
            cfg.set("params", "lambdas", &v)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::parse_with(text, &|_| false)
    }

    /// Reads a config file, or the config embedded in a run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if crate::manifest::is_manifest(&text) {
            Self::parse_with(&text, &|s| !SECTIONS.contains(&s))
        } else {
            Self::parse(&text)
        }
    }

    /// Consistency checks that do not need the input fields.
    pub fn check(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::Config(m));
        if let Schedule::Relaxed(l) = &self.params.schedule {
            if l.is_empty() {
                return err("[params] lambdas: relaxed schedule needs a lambda list".into());
            }
            if l.len() <= self.scheme.levels {
                return err(format!("[params] lambdas: {} values cannot reach level {}", l.len(), self.scheme.levels));
            }
        }
        if !(self.scheme.horizon > 0.0) {
            return err("[scheme] horizon: must be positive".into());
        }
        if self.grid.snapshot_every < 0.0 || !(self.grid.oversample >= 1.0) {
            return err("[grid] snapshot_every >= 0 and oversample >= 1 required".into());
        }
        if self.noise.truncation == 0 {
            return err("[noise] truncation: must be positive".into());
        }
        Ok(())
    }

    pub fn to_ini(&self) -> Ini {
        let mut ini = Ini::new();
        for (s, k, v) in self.entries() {
            ini.with_section(Some(s)).set(k, v);
        }
        ini
    }

    pub fn to_ini_string(&self) -> String {
        write_ini(&self.to_ini())
    }

    /// Applies a `section.key` override, as used by sweeps.
    pub fn with_override(&self, axis: &str, value: &str) -> Result<Self, CliError> {
        let (section, key) = axis.split_once('.').ok_or_else(|| CliError::Usage(format!("axis `{axis}` is not section.key")))?;
        if !self.entries().iter().any(|(s, k, _)| *s == section && *k == key) {
            return Err(CliError::Usage(format!("unknown sweep axis `{axis}`")));
        }
        let mut out = self.clone();
        out.set(section, key, value)?;
        out.check()?;
        Ok(out)
    }
}

/// Writes INI text without escaping, so values read back verbatim.
pub fn write_ini(ini: &Ini) -> String {
    let mut buf = Vec::new();
    let opt = WriteOption {
        escape_policy: EscapePolicy::Nothing,
        ..WriteOption::default()
    };
    ini.write_to_opt(&mut buf, opt).expect("write to memory");
    String::from_utf8(buf).expect("utf-8")
}

fn parse_checks(s: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for c in s.split(',').map(str::trim).filter(|c| !c.is_empty()) {
        if !RUN_CHECKS.contains(&c) && !ENSEMBLE_CHECKS.contains(&c) {
            return Err(format!("unknown check `{c}`"));
        }
        out.push(c.to_string());
    }
    Ok(out)
}

/// Parses a `--checks` list.
pub fn checks_from_arg(s: &str) -> Result<Vec<String>, CliError> {
    parse_checks(s).map_err(CliError::Usage)
}
