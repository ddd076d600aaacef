//! Run manifests: resolved config, derived constants, per-level summaries and
//! file checksums, as INI text. The config sections of a manifest are a valid
//! config file on their own.

use std::fs;
use std::io::Read;
use std::path::Path;

use ini::{Ini, ParseOption};
use sha2::{Digest, Sha256};
use sqg_core::engine::{LevelSummary, RunOutput};

use crate::config::{write_ini, RunConfig};
use crate::error::CliError;

pub const MANIFEST_FORMAT: &str = "sqgci-manifest-1";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn is_manifest(text: &str) -> bool {
    text.lines().any(|l| l.trim() == "[manifest]")
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn join<T: std::fmt::Display>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Measured input bounds, before `auto` was replaced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measured {
    pub n: f64,
    pub l: f64,
}

/// Builds the manifest for a finished run. `files` are paths relative to `dir`.
pub fn build(command: &str, cfg: &RunConfig, out: &RunOutput, measured: Measured, dir: &Path, files: &[String]) -> Result<Ini, CliError> {
    let mut m = Ini::new();
    m.with_section(Some("manifest"))
        .set("format", MANIFEST_FORMAT)
        .set("version", env!("CARGO_PKG_VERSION"))
        .set("command", command);
    for (s, k, v) in cfg.entries() {
        m.with_section(Some(s)).set(k, v);
    }
    let p = &out.spec.params;
    let top = out.spec.levels;
    let levels = 0..=top;
    {
        let mut d = m.with_section(Some("derived"));
        d.set("m_l", p.m_l().to_string())
            .set("n_measured", measured.n.to_string())
            .set("l_measured", measured.l.to_string())
            .set("dt", out.grid.dt.to_string())
            .set("nodes", out.grid.nodes.to_string())
            .set("lambda", join(levels.clone().map(|n| p.lambda(n))))
            .set("r", join(levels.clone().map(|n| p.r(n))))
            .set("ell", join(levels.clone().map(|n| p.ell(n))))
            .set("mu", join(levels.clone().map(|n| if n == 0 { f64::NAN } else { p.mu(n) })))
            .set("box_f", join(out.levels.iter().map(|l| l.box_f)))
            .set("box_q", join(out.levels.iter().map(|l| l.box_q)))
            .set("validation_mode", if out.validation.strict { "strict" } else { "relaxed" })
            .set("validation_all_hold", out.validation.all_hold().to_string());
        for (i, c) in out.validation.checks.iter().enumerate() {
            d.set(format!("validation_{i}"), format!("{} | {} | {} | {}", c.name, c.lhs, c.rhs, if c.holds { "ok" } else { "violated" }));
        }
    }
    for l in &out.levels {
        write_level(&mut m, l);
    }
    for (n, r) in out.fin_ranges.iter().enumerate() {
        if let Some((a, b)) = r {
            m.with_section(Some(format!("level.{}", n + 1))).set("fin_annulus", format!("{a},{b}"));
        }
    }
    for f in files {
        let sum = sha256_file(&dir.join(f))?;
        m.with_section(Some("files")).set(f.as_str(), sum);
    }
    Ok(m)
}

fn write_level(m: &mut Ini, l: &LevelSummary) {
    m.with_section(Some(format!("level.{}", l.level)))
        .set("lambda", l.lambda.to_string())
        .set("r", l.r.to_string())
        .set("ell", l.ell.to_string())
        .set("mu", l.mu.to_string())
        .set("box_f", l.box_f.to_string())
        .set("box_q", l.box_q.to_string())
        .set("computed", l.computed.to_string())
        .set("reused", l.reused.to_string())
        .set("retained", l.retained.to_string())
        .set("min_positivity", l.min_positivity.to_string())
        .set("max_q_l2", l.max_q_l2.to_string())
        .set("max_q_x", l.max_q_x.to_string())
        .set("plateau_q_x", l.plateau_q_x.to_string())
        .set("m0_empirical", l.m0_empirical.to_string());
}

pub fn write(dir: &Path, ini: &Ini) -> Result<(), CliError> {
    fs::write(dir.join(MANIFEST_FILE), write_ini(ini))?;
    Ok(())
}

/// A manifest read back from a run directory.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub config: RunConfig,
    pub command: String,
    /// `(relative path, sha256)`.
    pub files: Vec<(String, String)>,
    pub ini: Ini,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if !is_manifest(&text) {
            return Err(CliError::Config(format!("{} is not a run manifest", path.display())));
        }
        let config = RunConfig::parse_with(&text, &|s| !crate::config::SECTIONS.contains(&s))?;
        let opt = ParseOption {
            enabled_quote: false,
            enabled_escape: false,
            ..ParseOption::default()
        };
        let ini = Ini::load_from_str_opt(&text, opt).map_err(|e| CliError::Config(e.to_string()))?;
        let command = ini.get_from(Some("manifest"), "command").unwrap_or("").to_string();
        let files = ini
            .section(Some("files"))
            .map(|p| p.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
            .unwrap_or_default();
        Ok(Manifest { config, command, files, ini })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.get_from(Some(section), key)
    }
}
