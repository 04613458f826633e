//! Decentralized update rules and the iteration driver.
//!
//! Three synchronous rules are provided, each mapping `X(t)` to `X(t+1)`:
//!
//! * [`pr_step`]: standard proportional response with linear pricing.
//! * [`sparse_step`]: proportional response with exponential nonlinear
//!   prices. Each peer `i` quotes `mu_ji = rho_i exp(c / (eps + x_ij))` to
//!   peer `j`, turns the payments it received into bids `b_ij = x_ji / mu_ij`,
//!   and splits its endowment in proportion to those bids. This is a
//!   majorization-minimization step on `D(r, a) + c sum ln(eps + x_ij)`.
//! * [`egsparse_step`]: bids `b_ij = (x_ji / rho_j) / (lambda_i + w(x_ji))`
//!   where `lambda_i` is found by bisection so that the bids exhaust `a_i`.
//!
//! With `c = 0` all three coincide.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::divergence::kl_divergence;
use crate::error::{Error, Result};
use crate::market::{receive_vector, AllocationMatrix, MarketState, SparsityParams};
use crate::metrics::MetricsRecord;

/// Exponents above this are handled in the log domain.
const EXP_LIMIT: f64 = 700.0;

/// Offset above the pole of the budget function used as the lower bracket.
const LAMBDA_POLE_OFFSET: f64 = 1e-12;
const MAX_BRACKET_DOUBLINGS: usize = 200;
/// Bisection stops once the budget residual is this small relative to `a_i`.
const LAMBDA_RESIDUAL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Standard proportional response.
    Pr,
    /// Exponentially priced sparse proportional response.
    Sparse,
    /// Budget-multiplier sparse proportional response.
    EgSparse,
}

/// Per-unit prices of the sparse rule. `get(j, i)` is what peer `i` charges
/// peer `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceMatrix {
    n: usize,
    mu: Vec<f64>,
}

impl PriceMatrix {
    #[inline]
    pub fn get(&self, buyer: usize, seller: usize) -> f64 {
        self.mu[buyer * self.n + seller]
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Bids in the same layout as allocations: `get(i, j)` is peer `j`'s bid
/// for peer `i`'s resource.
#[derive(Debug, Clone, PartialEq)]
pub struct BidMatrix {
    n: usize,
    b: Vec<f64>,
}

impl BidMatrix {
    #[inline]
    pub fn get(&self, seller: usize, bidder: usize) -> f64 {
        self.b[seller * self.n + bidder]
    }
}

/// Budget multipliers from one EGsPaRse step.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierVector(pub Vec<f64>);

/// Iteration driver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub max_iters: u64,
    /// The run stops once the max-abs step change is at most
    /// `conv_tol * mean(a)`.
    pub conv_tol: f64,
    pub algorithm: Algorithm,
    pub params: SparsityParams,
    pub record_every: u64,
}

impl RunConfig {
    pub const DEFAULT_CONV_TOL: f64 = 1e-8;

    pub fn new(algorithm: Algorithm, params: SparsityParams, max_iters: u64) -> Self {
        Self {
            max_iters,
            conv_tol: Self::DEFAULT_CONV_TOL,
            algorithm,
            params,
            record_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                reason: "must be at least 1",
            });
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "conv_tol",
                reason: "must be positive",
            });
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter {
                name: "record_every",
                reason: "must be at least 1",
            });
        }
        self.params.validate()
    }
}

/// Final state and recorded metrics of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: MarketState,
    pub records: Vec<MetricsRecord>,
    pub converged: bool,
}

impl RunOutcome {
    pub fn final_metrics(&self) -> &MetricsRecord {
        self.records.last().expect("a run records at least its final step")
    }
}

fn positive_receipts(state: &MarketState) -> Result<Vec<f64>> {
    let r = state.receive_vector();
    if let Some(peer) = r.iter().position(|&ri| !(ri > 0.0)) {
        return Err(Error::DegenerateState {
            peer,
            reason: "receives nothing",
        });
    }
    Ok(r)
}

/// Rescales each column's weights so the column sums to its endowment.
fn normalize_columns(state: &MarketState, mut weights: Vec<f64>) -> Result<AllocationMatrix> {
    let n = state.dim();
    let a = state.endowments();
    for col in 0..n {
        let total: f64 = (0..n).map(|row| weights[row * n + col]).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateState {
                peer: col,
                reason: "no positive bids to split the endowment over",
            });
        }
        let scale = a[col] / total;
        for row in 0..n {
            weights[row * n + col] *= scale;
        }
    }
    Ok(AllocationMatrix::from_raw(n, weights))
}

/// Column normalization for weights given by their logarithms.
fn normalize_log_columns(state: &MarketState, mut log_w: Vec<f64>) -> Result<AllocationMatrix> {
    let n = state.dim();
    for col in 0..n {
        let peak = (0..n)
            .filter(|&row| row != col)
            .map(|row| log_w[row * n + col])
            .fold(f64::NEG_INFINITY, f64::max);
        if peak == f64::NEG_INFINITY {
            return Err(Error::DegenerateState {
                peer: col,
                reason: "no positive bids to split the endowment over",
            });
        }
        for row in 0..n {
            let k = row * n + col;
            log_w[k] = if row == col { 0.0 } else { libm::exp(log_w[k] - peak) };
        }
    }
    normalize_columns(state, log_w)
}

/// One round of standard proportional response:
/// `x_ij <- a_j x_ij (a_i / r_i) / sum_k x_kj (a_k / r_k)`.
pub fn pr_step(state: &MarketState) -> Result<AllocationMatrix> {
    let n = state.dim();
    let r = positive_receipts(state)?;
    let a = state.endowments();
    let x = state.allocation();
    let mut w = vec![0.0; n * n];
    for (i, j, v) in x.off_diagonal() {
        w[i * n + j] = v * (a[i] / r[i]);
    }
    normalize_columns(state, w)
}

/// Nonlinear prices `mu_ji = (r_i / a_i) exp(c / (eps + x_ij))`.
///
/// The markup overflows to infinity once `c / eps` exceeds roughly 709;
/// [`sparse_step`] does not go through this matrix and stays finite there.
pub fn sparse_prices(state: &MarketState, params: &SparsityParams) -> Result<PriceMatrix> {
    let n = state.dim();
    let r = positive_receipts(state)?;
    let a = state.endowments();
    let x = state.allocation();
    let mut mu = vec![0.0; n * n];
    for (i, j, v) in x.off_diagonal() {
        // peer i sells to j, who paid x_ij
        mu[j * n + i] = (r[i] / a[i]) * libm::exp(params.weight(v));
    }
    Ok(PriceMatrix { n, mu })
}

/// Bids `b_ij = x_ji / mu_ij` received by every peer.
pub fn sparse_bids(state: &MarketState, prices: &PriceMatrix) -> BidMatrix {
    let n = state.dim();
    let x = state.allocation();
    let mut b = vec![0.0; n * n];
    for (j, i, v) in x.off_diagonal() {
        // x_ji: paid by i to j; j reciprocates at price mu_ij
        b[i * n + j] = v / prices.get(i, j);
    }
    BidMatrix { n, b }
}

/// One SPaRse round along the price/bid route: peer `i` gives
/// `x_ji(t+1) = a_i b_ij / sum_k b_ik`.
pub fn sparse_step(state: &MarketState, params: &SparsityParams) -> Result<AllocationMatrix> {
    let n = state.dim();
    if params.c / params.eps <= EXP_LIMIT {
        let prices = sparse_prices(state, params)?;
        let bids = sparse_bids(state, &prices);
        // allocation x_ji(t+1) sits at (j, i), the same slot as bid b_ij
        // transposed
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                w[j * n + i] = bids.get(i, j);
            }
        }
        normalize_columns(state, w)
    } else {
        let r = positive_receipts(state)?;
        let a = state.endowments();
        let mut log_b = vec![f64::NEG_INFINITY; n * n];
        for (j, i, v) in state.allocation().off_diagonal() {
            log_b[j * n + i] = libm::log(v) - libm::log(r[j] / a[j]) - params.weight(v);
        }
        normalize_log_columns(state, log_b)
    }
}

/// The same SPaRse round written as a multiplicative update,
/// `x_ij <- x_ij (a_i / r_i) exp(-c / (eps + x_ij))`, followed by column
/// normalization.
pub fn sparse_step_multiplicative(state: &MarketState, params: &SparsityParams) -> Result<AllocationMatrix> {
    let n = state.dim();
    let r = positive_receipts(state)?;
    let a = state.endowments();
    let x = state.allocation();
    let log_domain = x.off_diagonal().any(|(_, _, v)| params.weight(v) > EXP_LIMIT);
    if log_domain {
        let mut log_w = vec![f64::NEG_INFINITY; n * n];
        for (i, j, v) in x.off_diagonal() {
            log_w[i * n + j] = libm::log(v) + libm::log(a[i] / r[i]) - params.weight(v);
        }
        normalize_log_columns(state, log_w)
    } else {
        let mut w = vec![0.0; n * n];
        for (i, j, v) in x.off_diagonal() {
            w[i * n + j] = v * (a[i] / r[i]) * libm::exp(-params.weight(v));
        }
        normalize_columns(state, w)
    }
}

/// Objective minimized by SPaRse: `D(r, a) + c sum_{i != j} ln(eps + x_ij)`.
pub fn sparse_objective(state: &MarketState, params: &SparsityParams) -> Result<f64> {
    let x = state.allocation();
    let r = receive_vector(x);
    let divergence = kl_divergence(&r, state.endowments().as_slice())?;
    let penalty: f64 = x.off_diagonal().map(|(_, _, v)| libm::log(params.eps + v)).sum();
    Ok(divergence + params.c * penalty)
}

/// Bid of each peer `j` for peer `i`'s resource given multiplier
/// `lambda_i`. Entry `i` of the result is zero.
pub fn egsparse_bids(state: &MarketState, params: &SparsityParams, lambda: f64, i: usize) -> Result<Vec<f64>> {
    let rho = state.exchange_ratios();
    bids_for(state, params, &rho, lambda, i)
}

fn bids_for(state: &MarketState, params: &SparsityParams, rho: &[f64], lambda: f64, i: usize) -> Result<Vec<f64>> {
    let n = state.dim();
    let x = state.allocation();
    let mut bids = vec![0.0; n];
    for j in (0..n).filter(|&j| j != i) {
        if !(rho[j] > 0.0) {
            return Err(Error::DegenerateState {
                peer: j,
                reason: "receives nothing",
            });
        }
        let paid = x.get(j, i);
        let denom = lambda + params.weight(paid);
        if !(denom > 0.0) {
            return Err(Error::MultiplierDomain { peer: i });
        }
        bids[j] = (paid / rho[j]) / denom;
    }
    Ok(bids)
}

/// Sum of peer `i`'s bids at `lambda`, minus `budget`.
fn budget_gap(state: &MarketState, params: &SparsityParams, rho: &[f64], lambda: f64, i: usize, budget: f64) -> f64 {
    let x = state.allocation();
    let total: f64 = (0..state.dim())
        .filter(|&j| j != i)
        .map(|j| {
            let paid = x.get(j, i);
            (paid / rho[j]) / (lambda + params.weight(paid))
        })
        .sum();
    total - budget
}

/// Budget multiplier of peer `i`: the unique root of
/// `sum_j b_ij(lambda) = a_i` on `(-min_j w(x_ji), inf)`.
pub fn solve_lambda(state: &MarketState, params: &SparsityParams, i: usize) -> Result<f64> {
    let rho = state.exchange_ratios();
    if let Some(peer) = rho.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::DegenerateState {
            peer,
            reason: "receives nothing",
        });
    }
    solve_budget_root(state, params, &rho, i, state.endowments()[i])
}

/// Budget residual `sum_j b_ij(lambda) - a_i` of peer `i`.
pub fn budget_residual(state: &MarketState, params: &SparsityParams, lambda: f64, i: usize) -> f64 {
    let rho = state.exchange_ratios();
    budget_gap(state, params, &rho, lambda, i, state.endowments()[i])
}

fn solve_budget_root(state: &MarketState, params: &SparsityParams, rho: &[f64], i: usize, budget: f64) -> Result<f64> {
    let n = state.dim();
    let x = state.allocation();
    if !(0..n).any(|j| j != i && x.get(j, i) > 0.0) {
        return Err(Error::DegenerateState {
            peer: i,
            reason: "gives nothing",
        });
    }
    let min_weight = (0..n)
        .filter(|&j| j != i)
        .map(|j| params.weight(x.get(j, i)))
        .fold(f64::INFINITY, f64::min);
    let gap = |lambda: f64| budget_gap(state, params, rho, lambda, i, budget);

    // the gap decreases strictly from +inf at the pole to -budget
    let mut lo = -min_weight + LAMBDA_POLE_OFFSET;
    if !(gap(lo) > 0.0) {
        return Err(Error::BracketFailure { peer: i });
    }
    let mut hi = 1.0f64.max(lo + 1.0);
    let mut width = hi - lo;
    let mut doublings = 0;
    while gap(hi) > 0.0 {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(Error::BracketFailure { peer: i });
        }
        lo = hi;
        width *= 2.0;
        hi = lo + width;
        doublings += 1;
    }

    let tol = LAMBDA_RESIDUAL_TOL * budget;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = gap(mid);
        if g.abs() <= tol {
            return Ok(mid);
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // interval exhausted at machine precision
    Ok(if gap(lo).abs() <= gap(hi).abs() { lo } else { hi })
}

/// One EGsPaRse round, also returning the multipliers that were used.
pub fn egsparse_step_with_multipliers(
    state: &MarketState,
    params: &SparsityParams,
) -> Result<(AllocationMatrix, MultiplierVector)> {
    let n = state.dim();
    let rho = state.exchange_ratios();
    if let Some(peer) = rho.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::DegenerateState {
            peer,
            reason: "receives nothing",
        });
    }
    let mut next = vec![0.0; n * n];
    let mut lambdas = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = solve_budget_root(state, params, &rho, i, state.endowments()[i])?;
        let bids = bids_for(state, params, &rho, lambda, i)?;
        for (j, b) in bids.into_iter().enumerate() {
            if j != i {
                next[j * n + i] = b;
            }
        }
        lambdas.push(lambda);
    }
    Ok((AllocationMatrix::from_raw(n, next), MultiplierVector(lambdas)))
}

/// One EGsPaRse round: `x_ji(t+1) = b_ij(lambda_i)`.
pub fn egsparse_step(state: &MarketState, params: &SparsityParams) -> Result<AllocationMatrix> {
    egsparse_step_with_multipliers(state, params).map(|(x, _)| x)
}

/// Dispatches one step of the configured rule.
pub fn step(state: &MarketState, algorithm: Algorithm, params: &SparsityParams) -> Result<AllocationMatrix> {
    match algorithm {
        Algorithm::Pr => pr_step(state),
        Algorithm::Sparse => sparse_step(state, params),
        Algorithm::EgSparse => egsparse_step(state, params),
    }
}

/// Iterates the configured rule until the step change drops to
/// `conv_tol * mean(a)` or `max_iters` steps have been taken.
pub fn run(state0: MarketState, cfg: &RunConfig) -> Result<RunOutcome> {
    run_with(state0, cfg, |_| {})
}

/// Like [`run`], calling `observe` on every state after it is produced.
pub fn run_with<F>(state0: MarketState, cfg: &RunConfig, mut observe: F) -> Result<RunOutcome>
where
    F: FnMut(&MarketState),
{
    cfg.validate()?;
    let tol = cfg.conv_tol * state0.endowments().mean();
    let tau = cfg.params.tau;
    let mut state = state0;
    let mut records = Vec::new();
    let mut converged = false;
    let mut last_delta = 0.0;

    while state.t < cfg.max_iters {
        let t = state.t + 1;
        let next =
            step(&state, cfg.algorithm, &cfg.params).map_err(|e| Error::StepFailed { t, source: Box::new(e) })?;
        last_delta = next.max_abs_diff(state.allocation());
        state
            .advance(next)
            .map_err(|e| Error::StepFailed { t, source: Box::new(e) })?;
        observe(&state);
        converged = last_delta <= tol;
        if converged || state.t == cfg.max_iters {
            break;
        }
        if state.t.is_multiple_of(cfg.record_every) {
            records.push(MetricsRecord::measure(&state, tau, last_delta)?);
        }
    }
    records.push(MetricsRecord::measure(&state, tau, last_delta)?);
    Ok(RunOutcome {
        state,
        records,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{equal_split, EndowmentVector};
    use approx::assert_relative_eq;

    fn equal_state(a: &[f64]) -> MarketState {
        let a = EndowmentVector::new(a.to_vec()).unwrap();
        MarketState::new(equal_split(&a), a).unwrap()
    }

    fn params(c: f64) -> SparsityParams {
        SparsityParams::new(c, 0.01, 0.01).unwrap()
    }

    // Asymmetric N = 4 state; expected values below were evaluated
    // entry by entry at 40 digits, outside this crate.
    fn asym_state() -> MarketState {
        let x = AllocationMatrix::from_rows(&[
            vec![0.0, 0.6, 0.375, 0.05],
            vec![0.25, 0.0, 0.375, 0.3],
            vec![0.5, 0.2, 0.0, 0.15],
            vec![1.25, 0.2, 0.75, 0.0],
        ])
        .unwrap();
        let a = EndowmentVector::new(vec![2.0, 1.0, 1.5, 0.5]).unwrap();
        MarketState::new(x, a).unwrap()
    }

    const ASYM_PR: [[f64; 4]; 4] = [
        [
            0.0,
            0.746_103_653_214_745_8,
            0.839_391_595_772_106_2,
            0.071_047_355_490_921_41,
        ],
        [0.3762338887142408, 0.0, 0.465_068_316_576_437_2, 0.2361844520373874],
        [1.2282929896259038, 0.22492830721915132, 0.0, 0.192_768_192_471_691_2],
        [0.395_473_121_659_855_4, 0.028968039566102822, 0.19554008765145656, 0.0],
    ];
    const ASYM_SPARSE: [[f64; 4]; 4] = [
        [
            0.0,
            0.800_623_289_859_708_9,
            0.824_691_503_080_400_5,
            0.023324315383608402,
        ],
        [0.31404927036410898, 0.0, 0.45692367062562731, 0.29733185126096693],
        [1.2380050291140064, 0.1766290318021371, 0.0, 0.17934383335542466],
        [0.447_945_700_521_884_6, 0.02274767833815402, 0.21838482629397218, 0.0],
    ];
    const ASYM_EGSPARSE: [[f64; 4]; 4] = [
        [
            0.0,
            0.780_226_741_232_792_2,
            0.821_397_438_488_920_8,
            0.038_978_862_402_561_12,
        ],
        [0.298_191_837_371_321_6, 0.0, 0.455_098_580_784_402, 0.27987125060920603],
        [1.229200347552426, 0.194_698_457_431_351_8, 0.0, 0.18114988698823285],
        [0.4726078150762524, 0.025074801335855914, 0.22350398072667724, 0.0],
    ];
    const ASYM_LAMBDA: [f64; 4] = [
        0.521_748_359_787_577_8,
        1.3365674733430007,
        0.631_067_627_875_328_8,
        0.836_253_367_329_652,
    ];

    fn assert_matches(x: &AllocationMatrix, expected: &[[f64; 4]; 4], tol: f64) {
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(x.get(i, j), expected[i][j], max_relative = tol);
            }
        }
    }

    #[test]
    fn pr_fixed_points() {
        let s = equal_state(&[1.0, 1.0]);
        assert_eq!(pr_step(&s).unwrap(), *s.allocation());
        let s = equal_state(&[1.0, 1.0, 1.0]);
        assert_eq!(pr_step(&s).unwrap(), *s.allocation());
    }

    #[test]
    fn pr_unequal_endowments() {
        let next = pr_step(&equal_state(&[2.0, 1.0, 1.0])).unwrap();
        let expected = [[0.0, 0.75, 0.75], [1.0, 0.0, 0.25], [1.0, 0.25, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(next.get(i, j), expected[i][j], max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn pr_asymmetric_oracle() {
        assert_matches(&pr_step(&asym_state()).unwrap(), &ASYM_PR, 1e-13);
    }

    #[test]
    fn pr_reports_degenerate_rows() {
        let x = AllocationMatrix::from_rows(&[vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 1.0], vec![0.5, 1.0, 0.0]]).unwrap();
        let s = MarketState::new(x, EndowmentVector::uniform(3, 1.0).unwrap()).unwrap();
        assert!(matches!(pr_step(&s), Err(Error::DegenerateState { peer: 0, .. })));
    }

    #[test]
    fn prices() {
        let s = equal_state(&[1.0, 1.0, 1.0]);
        let linear = sparse_prices(&s, &params(0.0)).unwrap();
        assert_eq!(linear.get(0, 1), 1.0);
        let mu = sparse_prices(&s, &params(0.1)).unwrap();
        assert_relative_eq!(mu.get(0, 1), libm::exp(0.1 / 0.51), max_relative = 1e-15);
        assert_relative_eq!(mu.get(2, 1), 1.216622, max_relative = 1e-6);

        let s = asym_state();
        let mu = sparse_prices(&s, &params(0.1)).unwrap();
        let rho = s.exchange_ratios();
        // peer 1 charges peer 3, who paid x_13 = 0.3
        assert_relative_eq!(mu.get(3, 1), rho[1] * libm::exp(0.1 / 0.31), max_relative = 1e-15);
        // larger payment, lower price
        assert!(mu.get(2, 0) < mu.get(3, 0));
    }

    #[test]
    fn price_at_zero_payment_is_the_max_markup() {
        let x = AllocationMatrix::from_rows(&[vec![0.0, 1.0, 0.5], vec![0.0, 0.0, 0.5], vec![1.0, 0.0, 0.0]]).unwrap();
        let s = MarketState::new(x, EndowmentVector::uniform(3, 1.0).unwrap()).unwrap();
        let mu = sparse_prices(&s, &params(0.1)).unwrap();
        let rho = s.exchange_ratios();
        assert_relative_eq!(mu.get(0, 1), rho[1] * libm::exp(10.0), max_relative = 1e-15);
    }

    #[test]
    fn sparse_matches_oracles() {
        let s = equal_state(&[2.0, 1.0, 1.0]);
        let next = sparse_step(&s, &params(0.1)).unwrap();
        assert_relative_eq!(next.get(0, 1), 0.75, max_relative = 1e-14);
        assert_relative_eq!(next.get(2, 1), 0.25, max_relative = 1e-14);
        assert_relative_eq!(next.get(1, 0), 1.0, max_relative = 1e-14);

        assert_matches(&sparse_step(&asym_state(), &params(0.1)).unwrap(), &ASYM_SPARSE, 1e-13);
        assert_matches(
            &sparse_step_multiplicative(&asym_state(), &params(0.1)).unwrap(),
            &ASYM_SPARSE,
            1e-13,
        );
    }

    #[test]
    fn sparse_symmetric_fixed_point() {
        let s = equal_state(&[1.0, 1.0, 1.0]);
        for c in [0.0, 0.1, 3.0] {
            let next = sparse_step(&s, &params(c)).unwrap();
            assert!(next.max_abs_diff(s.allocation()) < 1e-15);
        }
    }

    #[test]
    fn sparse_survives_huge_markups() {
        // c / eps = 1000 would overflow exp on the price route
        let p = SparsityParams::new(10.0, 0.01, 0.01).unwrap();
        let s = asym_state();
        let bid_route = sparse_step(&s, &p).unwrap();
        let mult_route = sparse_step_multiplicative(&s, &p).unwrap();
        bid_route.check_columns(s.endowments()).unwrap();
        assert!(bid_route.max_abs_diff(&mult_route) < 1e-12);
        assert!(bid_route.off_diagonal().all(|(_, _, v)| v.is_finite()));
    }

    #[test]
    fn egsparse_bids_examples() {
        let s = equal_state(&[1.0, 1.0, 1.0]);
        let p = params(0.1);
        let lambda = 1.0 - 0.1 / 0.51;
        let bids = egsparse_bids(&s, &p, lambda, 0).unwrap();
        assert_relative_eq!(bids[1], 0.5, max_relative = 1e-15);
        assert_relative_eq!(bids[2], 0.5, max_relative = 1e-15);

        let s = asym_state();
        let rho = s.exchange_ratios();
        let p0 = params(0.0);
        let lambda0: f64 = (1..4).map(|j| s.allocation().get(j, 0) / rho[j]).sum::<f64>() / 2.0;
        let total: f64 = egsparse_bids(&s, &p0, lambda0, 0).unwrap().iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);

        let big: f64 = egsparse_bids(&s, &p, 1e12, 0).unwrap().iter().sum();
        assert!(big < 1e-10);
        let lo: f64 = egsparse_bids(&s, &p, 1.0, 0).unwrap().iter().sum();
        let hi: f64 = egsparse_bids(&s, &p, 2.0, 0).unwrap().iter().sum();
        assert!(hi < lo);
        assert!(matches!(
            egsparse_bids(&s, &p, -100.0, 0),
            Err(Error::MultiplierDomain { peer: 0 })
        ));
    }

    #[test]
    fn lambda_examples() {
        let s = equal_state(&[1.0, 1.0, 1.0]);
        let lambda = solve_lambda(&s, &params(0.1), 0).unwrap();
        assert_relative_eq!(lambda, 1.0 - 0.1 / 0.51, max_relative = 1e-12);
        assert_relative_eq!(lambda, 0.80392, max_relative = 1e-5);

        let s = asym_state();
        let rho = s.exchange_ratios();
        for i in 0..4 {
            let closed: f64 = (0..4)
                .filter(|&j| j != i)
                .map(|j| s.allocation().get(j, i) / rho[j])
                .sum::<f64>()
                / s.endowments()[i];
            assert_relative_eq!(solve_lambda(&s, &params(0.0), i).unwrap(), closed, max_relative = 1e-12);
            assert_relative_eq!(
                solve_lambda(&s, &params(0.1), i).unwrap(),
                ASYM_LAMBDA[i],
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn larger_endowment_lowers_lambda() {
        let s = asym_state();
        let p = params(0.1);
        let rho = s.exchange_ratios();
        for i in 0..4 {
            let a_i = s.endowments()[i];
            let base = solve_budget_root(&s, &p, &rho, i, a_i).unwrap();
            let doubled = solve_budget_root(&s, &p, &rho, i, 2.0 * a_i).unwrap();
            assert!(doubled < base);
        }
    }

    #[test]
    fn egsparse_matches_oracles() {
        let s = equal_state(&[1.0, 1.0, 1.0]);
        let next = egsparse_step(&s, &params(0.1)).unwrap();
        assert!(next.max_abs_diff(s.allocation()) < 1e-12);

        let s = equal_state(&[2.0, 1.0, 1.0]);
        let next = egsparse_step(&s, &params(0.1)).unwrap();
        assert_relative_eq!(next.get(0, 1), 0.75, max_relative = 1e-12);
        assert_relative_eq!(next.get(2, 0), 1.0, max_relative = 1e-12);

        let (next, lambdas) = egsparse_step_with_multipliers(&asym_state(), &params(0.1)).unwrap();
        assert_matches(&next, &ASYM_EGSPARSE, 1e-11);
        for i in 0..4 {
            assert_relative_eq!(lambdas.0[i], ASYM_LAMBDA[i], max_relative = 1e-11);
        }
    }

    #[test]
    fn c_zero_reductions() {
        let s = asym_state();
        let pr = pr_step(&s).unwrap();
        for other in [
            sparse_step(&s, &params(0.0)).unwrap(),
            egsparse_step(&s, &params(0.0)).unwrap(),
        ] {
            for (i, j, v) in pr.off_diagonal() {
                assert_relative_eq!(other.get(i, j), v, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn run_stops_at_a_fixed_point() {
        for algorithm in [Algorithm::Pr, Algorithm::Sparse, Algorithm::EgSparse] {
            let cfg = RunConfig::new(algorithm, params(0.1), 100);
            let out = run(equal_state(&[1.0, 1.0, 1.0]), &cfg).unwrap();
            assert!(out.converged);
            assert_eq!(out.state.t, 1);
            assert!(out.final_metrics().step_delta < 1e-12);
            assert_eq!(out.records.len(), 1);
        }
    }

    #[test]
    fn run_records_on_schedule() {
        let a = crate::scenario::sample_endowments(12, 4.5, 0.25, 3).unwrap();
        let x = crate::scenario::init_allocation(&a, crate::scenario::InitMode::Random { seed: 1 });
        let mut cfg = RunConfig::new(Algorithm::Sparse, params(0.01), 250);
        cfg.record_every = 100;
        cfg.conv_tol = 1e-300;
        let out = run(MarketState::new(x, a).unwrap(), &cfg).unwrap();
        let ts: Vec<u64> = out.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![100, 200, 250]);
        assert!(!out.converged);
    }

    #[test]
    fn run_rejects_bad_config() {
        let mut cfg = RunConfig::new(Algorithm::Pr, params(0.0), 0);
        assert!(run(asym_state(), &cfg).is_err());
        cfg.max_iters = 10;
        cfg.conv_tol = 0.0;
        assert!(run(asym_state(), &cfg).is_err());
    }

    #[test]
    fn run_reports_failing_iteration() {
        // peer 0 receives nothing
        let x = AllocationMatrix::from_rows(&[vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 1.0], vec![0.5, 1.0, 0.0]]).unwrap();
        let s = MarketState::new(x, EndowmentVector::uniform(3, 1.0).unwrap()).unwrap();
        let cfg = RunConfig::new(Algorithm::Pr, params(0.0), 10);
        assert!(matches!(run(s, &cfg), Err(Error::StepFailed { t: 1, .. })));
    }
}
