//! manifest.json: what was run, what was written, which checks passed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cr_yamabe::{Error, GridDims, Result, TerminalEvent};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotRun,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotRun => "not run",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// Worst attained value of the monitored quantity.
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ tol`.
    pub fn at_most(name: &str, value: f64, tol: f64) -> Self {
        Self { name: name.into(), status: Status::from_bool(value <= tol), value: Some(value), tolerance: Some(tol), detail: String::new() }
    }

    /// Passes when `value ≥ −tol`.
    pub fn at_least_minus(name: &str, value: f64, tol: f64) -> Self {
        Self { name: name.into(), status: Status::from_bool(value >= -tol), value: Some(value), tolerance: Some(tol), detail: String::new() }
    }

    pub fn flag(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), status: Status::from_bool(ok), value: None, tolerance: None, detail: detail.into() }
    }

    pub fn not_run(name: &str, why: &str) -> Self {
        Self { name: name.into(), status: Status::NotRun, value: None, tolerance: None, detail: why.into() }
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommands that contributed, in order.
    pub commands: Vec<String>,
    pub code_version: String,
    /// Echo of each subcommand's configuration, keyed by subcommand.
    pub config: BTreeMap<String, serde_json::Value>,
    /// Rayon worker count, when pinned on the command line.
    pub threads: Option<usize>,
    pub grid: Option<GridDims>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub terminal: Option<TerminalEvent>,
    /// Paths relative to the manifest's directory.
    pub outputs: Vec<PathBuf>,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self::new()
    }
}

impl RunManifest {
    pub fn new() -> Self {
        Self {
            commands: Vec::new(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            config: BTreeMap::new(),
            threads: None,
            grid: None,
            t_start: None,
            t_end: None,
            terminal: None,
            outputs: Vec::new(),
            tolerances: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    /// The manifest already in `dir`, or a fresh one.
    pub fn open(dir: &Path) -> Result<Self> {
        if dir.join(MANIFEST).exists() {
            Self::load(dir)
        } else {
            Ok(Self::new())
        }
    }

    pub fn record_command(&mut self, name: &str, config: serde_json::Value, threads: Option<usize>) {
        self.commands.push(name.into());
        self.config.insert(name.into(), config);
        if threads.is_some() {
            self.threads = threads;
        }
    }

    /// Adds a check, replacing an earlier one of the same name.
    pub fn push(&mut self, c: Check) {
        if let Some(t) = c.tolerance {
            self.tolerances.insert(c.name.clone(), t);
        }
        self.checks.retain(|o| o.name != c.name);
        self.checks.push(c);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    /// Records output files; stored relative to `dir` when possible.
    pub fn add_outputs(&mut self, dir: &Path, files: impl IntoIterator<Item = PathBuf>) {
        for f in files {
            let rel = f.strip_prefix(dir).map(Path::to_path_buf).unwrap_or(f);
            if !self.outputs.contains(&rel) {
                self.outputs.push(rel);
            }
        }
    }

    /// Writes `dir/manifest.json` after checking that every listed output exists.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        for f in &self.outputs {
            let p = dir.join(f);
            if !p.exists() {
                return Err(Error::Data(format!("manifest lists missing output {}", p.display())));
            }
        }
        std::fs::create_dir_all(dir)?;
        let p = dir.join(MANIFEST);
        std::fs::write(&p, serde_json::to_string_pretty(self)?)?;
        Ok(p)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::Usage(format!("no manifest at {}: {e}", p.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}
