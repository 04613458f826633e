//! Graph metrics of an allocation: link counts, reciprocity, fairness.
//!
//! An entry counts as a link when it exceeds `tau * mean(a) / (N - 1)`,
//! i.e. a fraction `tau` of the per-edge amount under an equal split.

use alloc::vec::Vec;

use crate::divergence::kl_divergence;
use crate::error::Result;
use crate::market::{exchange_ratios, receive_vector, AllocationMatrix, EndowmentVector, MarketState};

/// Absolute amount above which an entry is a link.
pub fn link_threshold(a: &EndowmentVector, tau: f64) -> f64 {
    tau * a.edge_scale()
}

/// Boolean link mask in row-major order.
pub fn link_mask(x: &AllocationMatrix, a: &EndowmentVector, tau: f64) -> Vec<bool> {
    let threshold = link_threshold(a, tau);
    let n = x.dim();
    x.as_row_major()
        .iter()
        .enumerate()
        .map(|(k, &v)| k / n != k % n && v > threshold)
        .collect()
}

/// Number of directed links.
pub fn cardinality(x: &AllocationMatrix, a: &EndowmentVector, tau: f64) -> usize {
    link_mask(x, a, tau).into_iter().filter(|&l| l).count()
}

/// Number of links whose reverse is also a link.
pub fn reciprocity(x: &AllocationMatrix, a: &EndowmentVector, tau: f64) -> usize {
    let n = x.dim();
    let mask = link_mask(x, a, tau);
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| mask[i * n + j] && mask[j * n + i])
        .count()
}

pub fn min_exchange_ratio(x: &AllocationMatrix, a: &EndowmentVector) -> Result<f64> {
    Ok(exchange_ratios(x, a)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Per-iteration summary of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub t: u64,
    pub cardinality: usize,
    pub reciprocity: usize,
    pub min_ratio: f64,
    /// `D(r, a)`
    pub d_ra: f64,
    /// `D(a, r)`
    pub d_ar: f64,
    /// Max-abs allocation change of the step that produced this state.
    pub step_delta: f64,
}

impl MetricsRecord {
    pub fn measure(state: &MarketState, tau: f64, step_delta: f64) -> Result<Self> {
        let x = state.allocation();
        let a = state.endowments();
        let r = receive_vector(x);
        let ratios = exchange_ratios(x, a)?;
        Ok(Self {
            t: state.t,
            cardinality: cardinality(x, a, tau),
            reciprocity: reciprocity(x, a, tau),
            min_ratio: ratios.into_iter().fold(f64::INFINITY, f64::min),
            d_ra: kl_divergence(&r, a.as_slice())?,
            d_ar: kl_divergence(a.as_slice(), &r)?,
            step_delta,
        })
    }

    /// Share of links that are reciprocated; zero for an empty graph.
    pub fn reciprocal_fraction(&self) -> f64 {
        if self.cardinality == 0 {
            0.0
        } else {
            self.reciprocity as f64 / self.cardinality as f64
        }
    }
}
