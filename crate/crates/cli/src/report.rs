//! Report documents and matrix files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hyperinv_core::ComplexMatrix;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const REPORT_SCHEMA: &str = "hyperinv.report.v1";
pub const MATRIX_SCHEMA: &str = "hyperinv.matrix.v1";

/// One value of the machine section. Non-finite numbers are written as the
/// strings `"inf"`, `"-inf"` and `"nan"` and read back as numbers.
#[derive(Debug, Clone, PartialEq)]
pub enum MachineValue {
    Flag(bool),
    Count(u64),
    Number(f64),
    Text(String),
}

impl Serialize for MachineValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            MachineValue::Flag(b) => serializer.serialize_bool(*b),
            MachineValue::Count(n) => serializer.serialize_u64(*n),
            MachineValue::Number(x) if x.is_finite() => serializer.serialize_f64(*x),
            MachineValue::Number(x) if x.is_nan() => serializer.serialize_str("nan"),
            MachineValue::Number(x) if *x > 0.0 => serializer.serialize_str("inf"),
            MachineValue::Number(_) => serializer.serialize_str("-inf"),
            MachineValue::Text(s) => serializer.serialize_str(s),
        }
    }
}

impl<'de> Deserialize<'de> for MachineValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        match value {
            serde_json::Value::Bool(b) => Ok(MachineValue::Flag(b)),
            serde_json::Value::Number(n) => match n.as_u64() {
                Some(u) => Ok(MachineValue::Count(u)),
                None => n
                    .as_f64()
                    .map(MachineValue::Number)
                    .ok_or_else(|| de::Error::custom("number out of range")),
            },
            serde_json::Value::String(s) => Ok(match s.as_str() {
                "inf" => MachineValue::Number(f64::INFINITY),
                "-inf" => MachineValue::Number(f64::NEG_INFINITY),
                "nan" => MachineValue::Number(f64::NAN),
                _ => MachineValue::Text(s),
            }),
            other => Err(de::Error::custom(format!("unsupported machine value {other}"))),
        }
    }
}

impl std::fmt::Display for MachineValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MachineValue::Flag(b) => write!(f, "{b}"),
            MachineValue::Count(n) => write!(f, "{n}"),
            MachineValue::Number(x) => write!(f, "{x:.6e}"),
            MachineValue::Text(s) => write!(f, "{s}"),
        }
    }
}

/// Flat key → value map with dotted keys, ordered for stable output.
pub type Machine = BTreeMap<String, MachineValue>;

pub trait MachineExt {
    fn flag(&mut self, key: impl Into<String>, value: bool);
    fn count(&mut self, key: impl Into<String>, value: usize);
    fn number(&mut self, key: impl Into<String>, value: f64);
    fn text(&mut self, key: impl Into<String>, value: impl Into<String>);
}

impl MachineExt for Machine {
    fn flag(&mut self, key: impl Into<String>, value: bool) {
        self.insert(key.into(), MachineValue::Flag(value));
    }

    fn count(&mut self, key: impl Into<String>, value: usize) {
        self.insert(key.into(), MachineValue::Count(value as u64));
    }

    fn number(&mut self, key: impl Into<String>, value: f64) {
        self.insert(key.into(), MachineValue::Number(value));
    }

    fn text(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.insert(key.into(), MachineValue::Text(value.into()));
    }
}

/// SHA-256 of the serialized machine section.
pub fn machine_digest(machine: &Machine) -> String {
    hex::encode(Sha256::digest(machine_json(machine)))
}

/// Machine section as pretty JSON with a trailing newline.
pub fn machine_json(machine: &Machine) -> String {
    let mut s = serde_json::to_string_pretty(machine).expect("machine section serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub version: String,
    pub command: String,
    pub scenario: String,
    pub config_digest: String,
    pub exit_status: i32,
    pub machine: Machine,
    /// Free-form remarks in the order they were produced.
    pub notes: Vec<String>,
}

impl ReportDocument {
    pub fn new(command: &str, scenario: &str, config_digest: &str) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scenario: scenario.into(),
            config_digest: config_digest.into(),
            exit_status: 0,
            machine: Machine::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} ({})", self.command, self.scenario, status_label(self.exit_status));
        let _ = writeln!(out, "version {}  config {}", self.version, &self.config_digest[..12.min(self.config_digest.len())]);
        let mut section = "";
        for (key, value) in &self.machine {
            let head = key.split('.').next().unwrap_or("");
            if head != section {
                section = head;
                let _ = writeln!(out, "\n[{section}]");
            }
            let _ = writeln!(out, "  {:<48} {value}", key[head.len()..].trim_start_matches('.'));
        }
        if !self.notes.is_empty() {
            let _ = writeln!(out, "\nnotes:");
            for note in &self.notes {
                let _ = writeln!(out, "  - {note}");
            }
        }
        out
    }
}

pub fn status_label(code: i32) -> &'static str {
    match code {
        0 => "pass",
        1 => "baseline drift",
        2 => "config error",
        3 => "hypothesis failure",
        4 => "singular node",
        5 => "trivial subspace",
        6 => "verification or convergence failure",
        _ => "error",
    }
}

/// Row-major matrix of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub schema: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixFile {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        Self {
            schema: MATRIX_SCHEMA.into(),
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> anyhow::Result<ComplexMatrix> {
        anyhow::ensure!(
            self.data.len() == self.rows * self.cols,
            "{} entries for a {}×{} matrix",
            self.data.len(),
            self.rows,
            self.cols
        );
        Ok(ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            hyperinv_core::Complex64::new(re, im)
        }))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("matrix serializes");
        s.push('\n');
        s
    }
}
