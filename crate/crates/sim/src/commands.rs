//! The four harness commands. Each takes parsed inputs and an output
//! directory so tests can drive them without a subprocess.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sparse_exchange::dynamics::RunOutcome;
use sparse_exchange::metrics::MetricsRecord;
use sparse_exchange::scenario::{InitMode, ScenarioSpec};

use crate::error::SimError;
use crate::output::{ensure_dir, graph_dot, metrics_csv, to_csv, write_atomic, AllocationFile, Seeds};
use crate::scenario_file::{InitModeName, ScenarioFile};

pub const METRICS_FILE: &str = "metrics.csv";
pub const ALLOCATION_FILE: &str = "allocation.json";
pub const GRAPH_FILE: &str = "graph.dot";
pub const ENSEMBLE_FILE: &str = "ensemble.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Runs one scenario and writes `metrics.csv`, `allocation.json` and
/// `graph.dot` into `out`.
pub fn cmd_run(scenario: &ScenarioFile, out: &Path) -> Result<RunOutcome, SimError> {
    let spec = scenario.to_spec()?;
    let outcome = spec.execute()?;
    ensure_dir(out)?;
    write_atomic(&out.join(METRICS_FILE), &metrics_csv(&outcome.records)?)?;
    let seeds = Seeds {
        endowments: scenario.endowment_seed(),
        init: match scenario.init.mode {
            InitModeName::Random => Some(scenario.init.seed),
            InitModeName::Equal => None,
        },
    };
    let allocation = AllocationFile::new(
        &outcome.state,
        scenario.run.algorithm,
        &spec.run.params,
        seeds,
        outcome.final_metrics().step_delta,
    );
    write_atomic(&out.join(ALLOCATION_FILE), &allocation.to_json()?)?;
    let dot = graph_dot(
        outcome.state.allocation(),
        outcome.state.endowments(),
        spec.run.params.tau,
    );
    write_atomic(&out.join(GRAPH_FILE), dot.as_bytes())?;
    Ok(outcome)
}

/// Final metrics of one ensemble member. Metric fields are empty when the
/// run failed; `status` then holds the error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub seed: u64,
    pub cardinality: Option<usize>,
    pub reciprocity: Option<usize>,
    pub min_ratio: Option<f64>,
    pub d_ra: Option<f64>,
    pub status: String,
}

impl EnsembleRow {
    fn from_result(seed: u64, result: Result<MetricsRecord, SimError>) -> Self {
        match result {
            Ok(m) => Self {
                seed,
                cardinality: Some(m.cardinality),
                reciprocity: Some(m.reciprocity),
                min_ratio: Some(m.min_ratio),
                d_ra: Some(m.d_ra),
                status: "ok".to_owned(),
            },
            Err(e) => Self {
                seed,
                cardinality: None,
                reciprocity: None,
                min_ratio: None,
                d_ra: None,
                status: format!("error: {e}"),
            },
        }
    }

    pub fn reciprocal_fraction(&self) -> Option<f64> {
        match (self.cardinality, self.reciprocity) {
            (Some(0), Some(_)) => Some(0.0),
            (Some(c), Some(r)) => Some(r as f64 / c as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, SimError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SimError::Input(format!("thread pool: {e}")))
}

/// Runs the scenario once per seed in `seed0..seed0 + runs`, each seed
/// driving a random initial split over the scenario's endowments. Rows
/// come back in seed order whatever `jobs` is; `jobs = 0` lets the pool
/// pick.
pub fn run_ensemble(scenario: &ScenarioFile, runs: u64, seed0: u64, jobs: usize) -> Result<Vec<EnsembleRow>, SimError> {
    if runs == 0 {
        return Err(SimError::Input("ensemble needs at least one run".into()));
    }
    let end = seed0
        .checked_add(runs)
        .ok_or_else(|| SimError::Input("seed range overflows".into()))?;
    let spec = scenario.to_spec()?;
    // endowments are shared; draw them once up front so a bad draw is a
    // hard error rather than R identical failures
    spec.endowments()?;
    let seeds: Vec<u64> = (seed0..end).collect();
    let pool = thread_pool(jobs)?;
    Ok(pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| EnsembleRow::from_result(seed, ensemble_member(&spec, seed)))
            .collect()
    }))
}

fn ensemble_member(spec: &ScenarioSpec, seed: u64) -> Result<MetricsRecord, SimError> {
    let outcome = spec.with_init(InitMode::Random { seed }).execute()?;
    Ok(*outcome.final_metrics())
}

/// Mean, median and sample standard deviation of each final metric over
/// the successful runs.
pub fn summarize(rows: &[EnsembleRow]) -> Vec<SummaryRow> {
    type Getter = fn(&EnsembleRow) -> Option<f64>;
    let metrics: [(&str, Getter); 5] = [
        ("cardinality", |r| r.cardinality.map(|v| v as f64)),
        ("reciprocity", |r| r.reciprocity.map(|v| v as f64)),
        ("min_ratio", |r| r.min_ratio),
        ("d_ra", |r| r.d_ra),
        ("reciprocal_fraction", EnsembleRow::reciprocal_fraction),
    ];
    metrics
        .iter()
        .map(|(name, get)| {
            let values: Vec<f64> = rows.iter().filter_map(get).collect();
            SummaryRow {
                metric: (*name).to_owned(),
                mean: mean(&values),
                median: median(&values),
                std: sample_std(&values),
            }
        })
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

pub fn sample_std(values: &[f64]) -> f64 {
    match values.len() {
        0 => f64::NAN,
        1 => 0.0,
        n => {
            let m = mean(values);
            let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
            (ss / (n - 1) as f64).sqrt()
        }
    }
}

pub fn cmd_ensemble(
    scenario: &ScenarioFile,
    runs: u64,
    seed0: u64,
    jobs: usize,
    out: &Path,
) -> Result<Vec<EnsembleRow>, SimError> {
    let rows = run_ensemble(scenario, runs, seed0, jobs)?;
    ensure_dir(out)?;
    write_atomic(&out.join(ENSEMBLE_FILE), &to_csv(&rows)?)?;
    write_atomic(&out.join(SUMMARY_FILE), &to_csv(&summarize(&rows))?)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub cardinality: usize,
    pub d_ra: f64,
    pub min_ratio: f64,
    pub iterations: u64,
}

/// Runs the scenario once per penalty weight, in grid order.
pub fn run_sweep(scenario: &ScenarioFile, grid: &[f64], jobs: usize) -> Result<Vec<SweepRow>, SimError> {
    if grid.is_empty() {
        return Err(SimError::Input("the c grid is empty".into()));
    }
    let specs = grid
        .iter()
        .map(|&c| {
            let mut file = scenario.clone();
            file.params.c = c;
            file.to_spec()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pool = thread_pool(jobs)?;
    pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let outcome = spec.execute()?;
                let m = outcome.final_metrics();
                Ok(SweepRow {
                    c: spec.run.params.c,
                    cardinality: m.cardinality,
                    d_ra: m.d_ra,
                    min_ratio: m.min_ratio,
                    iterations: outcome.state.t,
                })
            })
            .collect()
    })
}

pub fn cmd_sweep(scenario: &ScenarioFile, grid: &[f64], jobs: usize, out: &Path) -> Result<Vec<SweepRow>, SimError> {
    let rows = run_sweep(scenario, grid, jobs)?;
    ensure_dir(out)?;
    write_atomic(&out.join(SWEEP_FILE), &to_csv(&rows)?)?;
    Ok(rows)
}
