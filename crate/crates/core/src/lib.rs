//! Sparse resource-exchange network formation.
//!
//! Peers with endowments `a` repeatedly split their resource over the other
//! peers. The update rules in [`dynamics`] are proportional-response
//! variants with nonlinear pricing that penalize every active link, so the
//! complete exchange graph thins out while exchange ratios `r_i / a_i` stay
//! close to one. [`central`] holds centralized baselines built on the dense
//! simplex solver in [`lp`].
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod central;
pub mod divergence;
pub mod dynamics;
pub mod error;
pub mod lp;
pub mod market;
pub mod metrics;
pub mod scenario;

pub use divergence::{kl_divergence, matrix_divergence};
pub use dynamics::{
    egsparse_bids, egsparse_step, pr_step, run, solve_lambda, sparse_prices, sparse_step, Algorithm, RunConfig,
    RunOutcome,
};
pub use error::{Error, Result};
pub use market::{
    equal_split, exchange_ratios, receive_vector, AllocationMatrix, EndowmentVector, MarketState, SparsityParams,
};
pub use metrics::{cardinality, min_exchange_ratio, reciprocity, MetricsRecord};
