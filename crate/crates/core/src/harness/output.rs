//! Curve CSVs, the summary document and the run manifest.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::CampaignConfig;
use crate::analysis::{FermiFitResult, ScalingFit};
use crate::echo::EchoCurve;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["t", "F", "F_a", "F_std"];

/// Seventeen significant digits: enough to round-trip an f64 exactly.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `t,F,F_a,F_std`, one row per sample. `std` may be empty, in
/// which case the column is zero.
pub fn emit_curve_csv(curve: &EchoCurve, std: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if curve.is_empty() {
        return Err(Error::param("cannot write an empty curve"));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_io(path, e))?;
    for i in 0..curve.len() {
        let s = std.get(i).copied().unwrap_or(0.0);
        w.write_record([
            fmt(curve.times[i]),
            fmt(curve.fidelity[i]),
            fmt(curve.amplitude_fidelity[i]),
            fmt(s),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Columns of a curve CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveTable {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub amplitude_fidelity: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<CurveTable> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let header = r.headers().map_err(|e| csv_io(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Csv {
            line: 1,
            message: format!("expected header {}, found {}", CSV_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut table = CurveTable::default();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Csv { line, message: e.to_string() })?;
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            let field = rec.get(k).ok_or_else(|| Error::Csv {
                line,
                message: format!("missing column {}", CSV_HEADER[k]),
            })?;
            *v = field.trim().parse().map_err(|_| Error::Csv {
                line,
                message: format!("cannot parse {:?} in column {}", field, CSV_HEADER[k]),
            })?;
        }
        table.times.push(vals[0]);
        table.fidelity.push(vals[1]);
        table.amplitude_fidelity.push(vals[2]);
        table.std.push(vals[3]);
    }
    Ok(table)
}

/// Fit outcome of one echo run. Fields that could not be computed are `None`
/// (serialized as `null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub parameter: Option<String>,
    pub value: Option<f64>,
    pub epsilon: f64,
    pub n_atoms: f64,
    pub displacement: f64,
    pub g_eff: f64,
    pub seeds: Vec<u64>,
    pub status: RunStatus,
    pub tau_c_crossing: Option<f64>,
    pub tau_c_fit: Option<f64>,
    #[serde(rename = "T")]
    pub width: Option<f64>,
    pub f_inf: Option<f64>,
    pub residual_rms: Option<f64>,
    #[serde(rename = "T_was_fixed")]
    pub width_was_fixed: Option<bool>,
    pub fit_error: Option<String>,
    /// Largest pairwise standard deviation of F before the crossing.
    pub plateau_std: Option<f64>,
    pub curve_csv: Option<String>,
}

impl RunRecord {
    pub fn set_fit(&mut self, fit: &FermiFitResult) {
        self.tau_c_fit = Some(fit.tau_c);
        self.width = Some(fit.width);
        self.f_inf = Some(fit.f_inf);
        self.residual_rms = Some(fit.residual_rms);
        self.width_was_fixed = Some(fit.width_was_fixed);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub parameter: String,
    /// `-ln ε` or `ln N_A`.
    pub abscissa: String,
    pub fit: Option<ScalingFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub n_atoms: f64,
    pub g_eff: f64,
    pub energy: f64,
    pub chemical_potential: f64,
    pub half_length: f64,
    pub thomas_fermi_radius: f64,
    pub steps: u64,
    pub checkpoint: Option<String>,
}

/// Everything in `summary.json`. Contains nothing that depends on the
/// machine, the worker count or the output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub code_version: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub ground_states: Vec<GroundStateReport>,
    pub runs: Vec<RunRecord>,
    pub scaling: Option<ScalingRecord>,
}

pub fn emit_summary_json(summary: &Summary, path: impl AsRef<Path>) -> Result<()> {
    write_json(summary, path.as_ref())
}

/// Config echo for the summary: the resolved config minus worker count and
/// output directory.
pub fn portable_config(config: &CampaignConfig) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(config)?;
    if let Some(map) = v.as_object_mut() {
        map.remove("workers");
        map.remove("output_dir");
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub status: RunStatus,
    pub outputs: Vec<String>,
}

/// Written last; lists every file the campaign produced (paths relative to
/// the output directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config: CampaignConfig,
    pub master_seed: u64,
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub host_threads: usize,
    pub runs: Vec<ManifestEntry>,
    pub outputs: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        write_json(self, &path)?;
        Ok(path)
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn code_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}
