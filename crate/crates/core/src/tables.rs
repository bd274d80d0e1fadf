//! Reference cooling limits bundled with the crate.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::OnceLock;
use thiserror::Error;

const RAW: &str = include_str!("../data/reference_tables.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTable {
    /// `"force"` or `"parametric"`.
    pub scheme: String,
    /// Allowed relative deviation of a reproduced cell.
    pub tolerance: f64,
    pub eta: Vec<f64>,
    pub delta_n: Vec<f64>,
    /// `min_n[row][col]` for `eta[row]`, `delta_n[col]`.
    pub min_n: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceData {
    pub version: u32,
    pub description: String,
    pub tables: BTreeMap<String, ReferenceTable>,
}

/// One `(η, Δn)` entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub eta: f64,
    pub delta_n: f64,
    pub min_n: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellError {
    #[error("no table {0} (available: 2, 3)")]
    UnknownTable(u32),
    #[error("cannot parse cell `{0}`; expected e.g. `eta=0.4,dn=0.01`")]
    Syntax(String),
    #[error("table {table} has no entry at eta = {eta}, delta_n = {delta_n}")]
    Missing { table: u32, eta: f64, delta_n: f64 },
}

pub fn reference_data() -> &'static ReferenceData {
    static DATA: OnceLock<ReferenceData> = OnceLock::new();
    DATA.get_or_init(|| serde_json::from_str(RAW).expect("bundled reference tables parse"))
}

pub fn table(number: u32) -> Result<&'static ReferenceTable, CellError> {
    reference_data()
        .tables
        .get(&number.to_string())
        .ok_or(CellError::UnknownTable(number))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

impl ReferenceTable {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (r, &eta) in self.eta.iter().enumerate() {
            for (c, &delta_n) in self.delta_n.iter().enumerate() {
                if let Some(min_n) = self.min_n[r][c] {
                    out.push(Cell {
                        eta,
                        delta_n,
                        min_n,
                    });
                }
            }
        }
        out
    }

    pub fn lookup(&self, eta: f64, delta_n: f64) -> Option<Cell> {
        let r = self.eta.iter().position(|&e| close(e, eta))?;
        let c = self.delta_n.iter().position(|&d| close(d, delta_n))?;
        self.min_n[r][c].map(|min_n| Cell {
            eta,
            delta_n,
            min_n,
        })
    }
}

/// Parse `eta=0.4,dn=0.01;eta=0.1,dn=0.05` (also `η=`, `Δn=`, `delta_n=`).
pub fn parse_cells(table_number: u32, spec: &str) -> Result<Vec<Cell>, CellError> {
    let t = table(table_number)?;
    let mut cells = Vec::new();
    for item in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let mut eta = None;
        let mut delta_n = None;
        for part in item.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| CellError::Syntax(item.to_string()))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CellError::Syntax(item.to_string()))?;
            match key.trim() {
                "eta" | "η" => eta = Some(value),
                "dn" | "delta_n" | "Δn" => delta_n = Some(value),
                _ => return Err(CellError::Syntax(item.to_string())),
            }
        }
        let (Some(eta), Some(delta_n)) = (eta, delta_n) else {
            return Err(CellError::Syntax(item.to_string()));
        };
        cells.push(t.lookup(eta, delta_n).ok_or(CellError::Missing {
            table: table_number,
            eta,
            delta_n,
        })?);
    }
    if cells.is_empty() {
        return Err(CellError::Syntax(spec.to_string()));
    }
    Ok(cells)
}
