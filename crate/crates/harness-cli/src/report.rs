//! Report envelope, CSV and gnuplot helpers.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::{BetaSource, Scenario};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointDisclosure {
    pub distance_km: f64,
    pub beta: f64,
    pub beta_source: BetaSource,
}

/// Enough to reproduce a run: a rerun with the same digest and seed
/// yields byte-identical report bodies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub seed: u64,
    pub config_digest: String,
    /// Assumed fibre loss model.
    pub attenuation_db_per_km: f64,
    pub insertion_loss_db: f64,
    pub points: Vec<PointDisclosure>,
}

impl Provenance {
    pub fn of(s: &Scenario) -> Self {
        Self {
            tool: "cvqkd",
            version: env!("CARGO_PKG_VERSION"),
            scenario: s.name.clone(),
            seed: s.seed,
            config_digest: s.digest(),
            attenuation_db_per_km: s.channel.attenuation_db_per_km,
            insertion_loss_db: s.channel.insertion_loss_db,
            points: s
                .points
                .iter()
                .map(|p| {
                    let (beta, beta_source) = s.beta_for(p);
                    PointDisclosure { distance_km: p.distance_km, beta, beta_source }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport<T: Serialize> {
    pub command: &'static str,
    pub provenance: Provenance,
    pub body: T,
}

/// A command's result: the report, extra files and a terminal summary.
#[derive(Debug, Clone)]
pub struct Output {
    pub report_json: String,
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
}

impl Output {
    pub fn new<T: Serialize>(command: &'static str, s: &Scenario, body: T) -> Self {
        let r = RunReport { command, provenance: Provenance::of(s), body };
        Self {
            report_json: serde_json::to_string_pretty(&r).expect("report is plain data"),
            files: Vec::new(),
            summary: String::new(),
        }
    }

    pub fn file(mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) -> Self {
        self.files.push((name.into(), contents.into()));
        self
    }

    pub fn summary(mut self, text: String) -> Self {
        self.summary = text;
        self
    }

    /// Writes `report.json` and every file under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), &self.report_json)?;
        for (name, data) in &self.files {
            std::fs::write(dir.join(name), data)?;
        }
        Ok(())
    }
}

/// CSV text from a header and rows of already formatted cells. Cells
/// holding commas or quotes are quoted.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let quote = |c: &str| {
        if c.contains([',', '"', '\n']) {
            format!("\"{}\"", c.replace('"', "\"\""))
        } else {
            c.to_string()
        }
    };
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub struct GnuplotSeries {
    pub column: usize,
    pub title: String,
}

/// Script plotting columns of `data` against its first column, with
/// optional horizontal reference lines `(y, label)`.
pub fn gnuplot_script(
    data: &str,
    output_png: &str,
    xlabel: &str,
    ylabel: &str,
    logy: bool,
    series: &[GnuplotSeries],
    hlines: &[(f64, String)],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{output_png}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let _ = writeln!(s, "set key top right");
    let _ = writeln!(s, "set grid");
    if logy {
        let _ = writeln!(s, "set logscale y");
    }
    let mut parts: Vec<String> = series
        .iter()
        .map(|c| format!("'{data}' using 1:{} skip 1 with linespoints title '{}'", c.column, c.title))
        .collect();
    parts.extend(hlines.iter().map(|(y, t)| format!("{y:e} with lines dashtype 2 title '{t}'")));
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

pub fn mean_and_sem(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, f64::NAN);
    }
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
