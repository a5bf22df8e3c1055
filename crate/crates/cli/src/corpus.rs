//! Regression corpus: one directory per entry holding `config.toml`,
//! `baseline.json` and `note.md`. Baselines keep only the machine section.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{command_name, run};
use crate::config::ScenarioConfig;
use crate::report::{machine_digest, Machine};

pub const BASELINE_SCHEMA: &str = "hyperinv.baseline.v1";
pub const CONFIG_FILE: &str = "config.toml";
pub const BASELINE_FILE: &str = "baseline.json";
pub const NOTE_FILE: &str = "note.md";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baseline {
    pub schema: String,
    pub command: String,
    pub exit_status: i32,
    pub config_digest: String,
    pub machine_digest: String,
    pub machine: Machine,
}

impl Baseline {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("baseline serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntryStatus {
    Match,
    /// Baseline written where none existed.
    Created,
    /// Differences from the stored baseline, one line each.
    Drift(Vec<String>),
    /// Config could not be read or parsed.
    ConfigError(String),
    /// Baseline missing, unreadable, or entry incomplete.
    Broken(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryResult {
    pub name: String,
    pub status: EntryStatus,
}

/// Entry directories (those holding a config file), sorted by name.
pub fn entries(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for item in fs::read_dir(dir)? {
        let path = item?.path();
        if path.join(CONFIG_FILE).is_file() {
            found.push(path);
        }
    }
    found.sort();
    Ok(found)
}

/// Runs the entry's baseline command and returns the fresh baseline.
pub fn evaluate(entry: &Path) -> Result<Baseline, String> {
    let config = ScenarioConfig::load(&entry.join(CONFIG_FILE)).map_err(|e| e.to_string())?;
    let command = config.outputs.baseline_command;
    let out = run(command, &config, false);
    Ok(Baseline {
        schema: BASELINE_SCHEMA.into(),
        command: command_name(command).into(),
        exit_status: out.status.code(),
        config_digest: out.report.config_digest,
        machine_digest: machine_digest(&out.report.machine),
        machine: out.report.machine,
    })
}

fn compare(stored: &Baseline, fresh: &Baseline) -> Vec<String> {
    let mut diffs = Vec::new();
    for (what, a, b) in [
        ("command", stored.command.clone(), fresh.command.clone()),
        ("exit_status", stored.exit_status.to_string(), fresh.exit_status.to_string()),
        ("config_digest", stored.config_digest.clone(), fresh.config_digest.clone()),
    ] {
        if a != b {
            diffs.push(format!("{what}: {a} -> {b}"));
        }
    }
    for (key, value) in &fresh.machine {
        match stored.machine.get(key) {
            Some(old) if old == value => {}
            Some(old) => diffs.push(format!("{key}: {old} -> {value}")),
            None => diffs.push(format!("{key}: added")),
        }
    }
    for key in stored.machine.keys() {
        if !fresh.machine.contains_key(key) {
            diffs.push(format!("{key}: removed"));
        }
    }
    diffs
}

fn read_baseline(entry: &Path) -> Result<Option<Baseline>, String> {
    let path = entry.join(BASELINE_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn process(entry: &Path, write: bool) -> EntryResult {
    let name = entry
        .file_name()
        .map_or_else(|| entry.display().to_string(), |n| n.to_string_lossy().into_owned());
    let status = (|| {
        if !entry.join(NOTE_FILE).is_file() {
            return EntryStatus::Broken(format!("missing {NOTE_FILE}"));
        }
        let fresh = match evaluate(entry) {
            Ok(b) => b,
            Err(e) => return EntryStatus::ConfigError(e),
        };
        let stored = match read_baseline(entry) {
            Ok(b) => b,
            Err(e) if !write => return EntryStatus::Broken(e),
            Err(_) => None,
        };
        let status = match &stored {
            Some(stored) => {
                let diffs = compare(stored, &fresh);
                if diffs.is_empty() {
                    EntryStatus::Match
                } else {
                    EntryStatus::Drift(diffs)
                }
            }
            None if write => EntryStatus::Created,
            None => EntryStatus::Broken(format!("missing {BASELINE_FILE}")),
        };
        if write && status != EntryStatus::Match {
            if let Err(e) = fs::write(entry.join(BASELINE_FILE), fresh.to_json()) {
                return EntryStatus::Broken(e.to_string());
            }
        }
        status
    })();
    EntryResult { name, status }
}

/// Re-runs every entry and compares with the stored baselines.
pub fn check(dir: &Path) -> std::io::Result<Vec<EntryResult>> {
    Ok(entries(dir)?.par_iter().map(|e| process(e, false)).collect())
}

/// Re-runs every entry, rewrites drifted or missing baselines, and reports
/// what changed.
pub fn regenerate(dir: &Path) -> std::io::Result<Vec<EntryResult>> {
    Ok(entries(dir)?.par_iter().map(|e| process(e, true)).collect())
}
