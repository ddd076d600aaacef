//! One-record-per-check report files: structured text and CSV.

use std::fmt;
use std::io::{self, Write};

/// One check outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    pub region: String,
    pub measured: f64,
    pub target: f64,
    /// `pass`, `FAIL`, `report-only` or `info`.
    pub verdict: String,
}

impl Record {
    pub fn new(name: impl Into<String>, region: impl Into<String>, measured: f64, target: f64, verdict: impl fmt::Display) -> Self {
        Record {
            name: name.into(),
            region: region.into(),
            measured,
            target,
            verdict: verdict.to_string(),
        }
    }

    pub fn failed(&self) -> bool {
        self.verdict == "FAIL"
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} region={} measured={:.9e} target={:.9e} verdict={}",
            self.name, self.region, self.measured, self.target, self.verdict
        )
    }
}

pub fn write_text(w: &mut impl Write, records: &[Record]) -> io::Result<()> {
    for r in records {
        writeln!(w, "{r}")?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv(w: &mut impl Write, records: &[Record]) -> io::Result<()> {
    writeln!(w, "name,region,measured,target,verdict")?;
    for r in records {
        writeln!(
            w,
            "{},{},{:e},{:e},{}",
            csv_field(&r.name),
            csv_field(&r.region),
            r.measured,
            r.target,
            csv_field(&r.verdict)
        )?;
    }
    Ok(())
}
