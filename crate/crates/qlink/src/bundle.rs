//! Result bundles: metrics JSON, CSV tables and input snapshots.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qlink_core::integrator::Trajectory;
use qlink_core::linalg::CMat;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const METRICS_SCHEMA: &str = "qlink-metrics/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// File names inside a bundle directory.
pub const METRICS_FILE: &str = "metrics.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const DEVICE_SNAPSHOT: &str = "device.toml";
pub const T1_TABLE_SNAPSHOT: &str = "loaded_t1.csv";

pub const BASIS_PAULI: &str = "I,X,Y,Z";
pub const BASIS_TWO_QUBIT: &str = "gg,ge,eg,ee";
pub const LAYOUT_ROW_MAJOR: &str = "row-major";

/// A complex matrix as separate real and imaginary row lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrix {
    /// Comma-separated basis labels, one per row.
    pub basis: String,
    pub layout: String,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ComplexMatrix {
    pub fn from_cmat(m: &CMat, basis: &str) -> Self {
        let rows = |f: fn(&qlink_core::linalg::C64) -> f64| {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Self { basis: basis.to_owned(), layout: LAYOUT_ROW_MAJOR.to_owned(), re: rows(|z| z.re), im: rows(|z| z.im) }
    }

    pub fn to_cmat(&self) -> Result<CMat> {
        if self.layout != LAYOUT_ROW_MAJOR {
            return Err(HarnessError::Schema(format!("unsupported matrix layout {:?}", self.layout)));
        }
        let n = self.re.len();
        if self.basis.split(',').count() != n {
            return Err(HarnessError::Schema(format!("basis {:?} does not match dimension {n}", self.basis)));
        }
        if self.im.len() != n || self.re.iter().chain(&self.im).any(|r| r.len() != n) {
            return Err(HarnessError::Schema(String::from("matrix must be square with matching re/im parts")));
        }
        Ok(CMat::from_fn(n, n, |i, j| qlink_core::linalg::c(self.re[i][j], self.im[i][j])))
    }
}

/// Summary of one protocol's sweep curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSummaryJson {
    pub protocol: String,
    pub parameter: String,
    pub metric: String,
    pub argmax: Option<f64>,
    pub max: Option<f64>,
    /// `[value, metric]` pairs.
    pub local_maxima: Vec<[f64; 2]>,
    pub rows: usize,
    pub failures: usize,
}

/// The metrics document. Keys serialize in declaration order; `metrics`
/// is sorted by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<String>,
    pub seed: u64,
    /// Command-line switches that changed the run beyond the config snapshot.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1r_ns: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
    /// Process matrix in the {I, X, Y, Z} basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<ComplexMatrix>,
    /// Two-qubit density matrix in the (gg, ge, eg, ee) basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<ComplexMatrix>,
    /// ⟨σᵢ⊗σⱼ⟩ for i, j ∈ {I, X, Y, Z}.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<[[f64; 4]; 4]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepSummaryJson>,
}

impl MetricsFile {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            schema: METRICS_SCHEMA.to_owned(),
            tool_version: TOOL_VERSION.to_owned(),
            command: command.to_owned(),
            protocol: None,
            seed,
            flags: Vec::new(),
            t1r_ns: None,
            metrics: BTreeMap::new(),
            chi: None,
            state: None,
            pauli: None,
            sweeps: Vec::new(),
        }
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_owned(), value);
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and checks a metrics document against the schema.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: MetricsFile = serde_json::from_str(text).map_err(|e| HarnessError::Schema(e.to_string()))?;
        if m.schema != METRICS_SCHEMA {
            return Err(HarnessError::Schema(format!("schema {:?}, expected {METRICS_SCHEMA:?}", m.schema)));
        }
        if let Some((k, v)) = m.metrics.iter().find(|(_, v)| !v.is_finite()) {
            return Err(HarnessError::Schema(format!("metric {k} is not finite ({v})")));
        }
        for mat in [&m.chi, &m.state].into_iter().flatten() {
            mat.to_cmat()?;
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| HarnessError::Read { path: path.into(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| HarnessError::Write { path: path.into(), source })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Write { path: dir.into(), source })
}

/// RFC 4180 writer with a header row.
pub struct Table {
    writer: csv::Writer<fs::File>,
    path: PathBuf,
}

impl Table {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(header)?;
        Ok(Self { writer, path: path.into() })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|source| HarnessError::Write { path: self.path.clone(), source })?;
        Ok(self.path)
    }
}

/// Shortest representation that parses back to the same `f64`, with an
/// exponent for very small or large magnitudes.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Columns `time_ns, pe_q1, pe_q2, p_mode_<n>…, trace_error`.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<PathBuf> {
    let layout = traj.space.layout();
    let mut header = vec![String::from("time_ns"), String::from("pe_q1"), String::from("pe_q2")];
    header.extend(layout.mode_numbers().map(|n| format!("p_mode_{n}")));
    header.push(String::from("trace_error"));
    let mut t = Table::create(path, &header)?;
    for k in 0..traj.len() {
        let mut row = vec![num(traj.times[k]), num(traj.pe_q1[k]), num(traj.pe_q2[k])];
        row.extend(traj.modes[k].iter().map(|&p| num(p)));
        row.push(num(traj.trace_error[k]));
        t.row(&row)?;
    }
    t.finish()
}
