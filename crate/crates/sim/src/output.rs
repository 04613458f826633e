//! File formats written by the harness.
//!
//! * `metrics.csv`: `t,cardinality,reciprocity,min_ratio,d_ra,d_ar,step_delta`
//! * `allocation.json`: endowments, final matrix, parameters and seeds
//! * `graph.dot`: links above the threshold, edge `j -> i` for `x_ij`
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sparse_exchange::market::{AllocationMatrix, EndowmentVector, MarketState, SparsityParams};
use sparse_exchange::metrics::{link_mask, MetricsRecord};

use crate::error::SimError;
use crate::scenario_file::AlgorithmName;

/// Writes `contents` to `path` via a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), SimError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| SimError::Input(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| SimError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| SimError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: u64,
    pub cardinality: usize,
    pub reciprocity: usize,
    pub min_ratio: f64,
    pub d_ra: f64,
    pub d_ar: f64,
    pub step_delta: f64,
}

impl From<&MetricsRecord> for MetricsRow {
    fn from(m: &MetricsRecord) -> Self {
        Self {
            t: m.t,
            cardinality: m.cardinality,
            reciprocity: m.reciprocity,
            min_ratio: m.min_ratio,
            d_ra: m.d_ra,
            d_ar: m.d_ar,
            step_delta: m.step_delta,
        }
    }
}

/// Serializes rows with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, SimError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    writer
        .into_inner()
        .map_err(|e| SimError::Input(format!("csv buffer: {e}")))
}

pub fn metrics_csv(records: &[MetricsRecord]) -> Result<Vec<u8>, SimError> {
    let rows: Vec<MetricsRow> = records.iter().map(MetricsRow::from).collect();
    to_csv(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub endowments: Option<u64>,
    pub init: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub c: f64,
    pub eps: f64,
    pub tau: f64,
}

/// Contents of `allocation.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationFile {
    pub algorithm: AlgorithmName,
    pub t: u64,
    /// Change made by the last step; with the matrix this reproduces the
    /// final metrics row.
    pub step_delta: f64,
    pub params: ParamsRecord,
    pub seeds: Seeds,
    pub endowments: Vec<f64>,
    /// Row `i`, column `j`: amount peer `j` gives to peer `i`.
    pub allocation: Vec<Vec<f64>>,
}

impl AllocationFile {
    pub fn new(
        state: &MarketState,
        algorithm: AlgorithmName,
        params: &SparsityParams,
        seeds: Seeds,
        step_delta: f64,
    ) -> Self {
        Self {
            algorithm,
            t: state.t,
            step_delta,
            params: ParamsRecord {
                c: params.c,
                eps: params.eps,
                tau: params.tau,
            },
            seeds,
            endowments: state.endowments().as_slice().to_vec(),
            allocation: state.allocation().to_rows(),
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>, SimError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Rebuilds the market state, checking column feasibility.
    pub fn state(&self) -> Result<MarketState, SimError> {
        let a = EndowmentVector::new(self.endowments.clone())?;
        let x = AllocationMatrix::from_rows(&self.allocation)?;
        let mut state = MarketState::new(x, a)?;
        state.t = self.t;
        Ok(state)
    }

    pub fn metrics(&self) -> Result<MetricsRecord, SimError> {
        Ok(MetricsRecord::measure(
            &self.state()?,
            self.params.tau,
            self.step_delta,
        )?)
    }
}

/// Directed exchange graph in DOT. Nodes are labelled with endowments,
/// edges `j -> i` with `x_ij`, both rounded to two decimals.
pub fn graph_dot(x: &AllocationMatrix, a: &EndowmentVector, tau: f64) -> String {
    let n = x.dim();
    let mask = link_mask(x, a, tau);
    let mut out = String::from("digraph exchange {\n");
    for i in 0..n {
        let _ = writeln!(out, "  {i} [label=\"{:.2}\"];", a[i]);
    }
    for from in 0..n {
        for to in 0..n {
            if mask[to * n + from] {
                let _ = writeln!(out, "  {from} -> {to} [label=\"{:.2}\"];", x.get(to, from));
            }
        }
    }
    out.push_str("}\n");
    out
}
