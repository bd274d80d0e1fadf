//! Result files: CSV series, JSON summaries and gnuplot data.
//!
//! Every file starts with `#` lines carrying the tool version and the exact
//! run configuration as compact JSON; CSV readers should treat `#` as a
//! comment character. Numbers are written as `{:.9e}` (ten significant digits).

use super::CliError;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TIMESERIES_COLUMNS: [&str; 3] = ["t", "mean_n", "stderr_n"];
pub const SCAN_COLUMNS: [&str; 4] = ["strength", "steady_n", "steady_err", "unstable_flag"];

pub fn num(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Writes result files into one directory, stamping each with the config.
#[derive(Debug, Clone)]
pub struct ResultWriter {
    dir: PathBuf,
    header: String,
    gnuplot: bool,
    written: Vec<PathBuf>,
}

impl ResultWriter {
    pub fn new(
        dir: &Path,
        command: &str,
        config: &impl Serialize,
        gnuplot: bool,
    ) -> Result<Self, CliError> {
        let config = serde_json::to_string(config)
            .map_err(|e| CliError::Io(format!("serializing config: {e}")))?;
        let header = format!("# levicool {VERSION} {command}\n# config: {config}\n");
        Ok(Self {
            dir: dir.to_path_buf(),
            header,
            gnuplot,
            written: Vec::new(),
        })
    }

    pub fn gnuplot(&self) -> bool {
        self.gnuplot
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn put(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.dir.display())))?;
        let path = self.dir.join(name);
        std::fs::write(&path, body)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn csv(
        &mut self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let mut out = self.header.clone();
        out.push_str(&columns.join(","));
        out.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.put(name, &out)
    }

    /// Whitespace-separated two-column file; skipped unless gnuplot output is on.
    pub fn dat(
        &mut self,
        name: &str,
        labels: (&str, &str),
        rows: &[(f64, f64)],
    ) -> Result<Option<PathBuf>, CliError> {
        if !self.gnuplot {
            return Ok(None);
        }
        let mut out = self.header.clone();
        let _ = writeln!(out, "# {} {}", labels.0, labels.1);
        for (a, b) in rows {
            let _ = writeln!(out, "{} {}", num(*a), num(*b));
        }
        self.put(name, &out).map(Some)
    }

    /// Pretty JSON. The config is embedded in the value itself.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut body = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("serializing {name}: {e}")))?;
        body.push('\n');
        self.put(name, &body)
    }
}

/// Strip `#` comment lines and split a CSV produced by [`ResultWriter::csv`].
pub fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}
