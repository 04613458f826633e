//! Centralized baselines for the sparsest allocation meeting a minimum
//! exchange ratio `theta`:
//!
//! * [`p0_brute_force`]: exact search over link sets, smallest first.
//! * [`p1_reweighted_lp`]: successive linearization of the concave proxy
//!   `sum ln(eps + x_ij)`, one LP per round.
//! * [`p2_irls`]: successive quadratic majorizers of the same proxy, each
//!   solved approximately by dual coordinate ascent.
//!
//! All three share the constraint set `sum_i x_ij = a_j`,
//! `sum_j x_ij >= theta a_i`, `x >= 0`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::lp::{feasible_point, lp_solve, LpStatus, RowSense, StandardFormLp};
use crate::market::{equal_split, receive_vector, AllocationMatrix, EndowmentVector, SparsityParams};
use crate::metrics::link_threshold;
use crate::scenario::{init_allocation, InitMode};

/// Default size limit for [`p0_brute_force`].
pub const P0_DEFAULT_MAX_N: usize = 4;

/// Minimum acceptable exchange ratio, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocityTarget(f64);

impl ReciprocityTarget {
    pub fn new(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta <= 1.0 {
            Ok(Self(theta))
        } else {
            Err(Error::InvalidParameter {
                name: "theta",
                reason: "must lie in (0, 1]",
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct P0Solution {
    pub cardinality: usize,
    pub witness: AllocationMatrix,
}

/// Output of the iterative baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralSolution {
    pub allocation: AllocationMatrix,
    /// `sum ln(eps + x_ij)` at the start and after every outer round.
    pub trace: Vec<f64>,
    pub outer_iters: usize,
    pub converged: bool,
}

/// Off-diagonal `(to, from)` pairs in row-major order; the variable
/// ordering used by every LP built here.
pub fn off_diagonal_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

/// Constraint rows over the variables in `support`.
pub fn allocation_constraints(
    a: &EndowmentVector,
    theta: ReciprocityTarget,
    support: &[(usize, usize)],
) -> StandardFormLp {
    let n = a.len();
    let mut lp = StandardFormLp::new(support.len());
    for col in 0..n {
        let coeffs = support.iter().map(|&(_, j)| if j == col { 1.0 } else { 0.0 }).collect();
        lp.add_row(coeffs, RowSense::Eq, a[col]);
    }
    for row in 0..n {
        let coeffs = support.iter().map(|&(i, _)| if i == row { 1.0 } else { 0.0 }).collect();
        lp.add_row(coeffs, RowSense::Geq, theta.get() * a[row]);
    }
    lp
}

fn to_matrix(n: usize, support: &[(usize, usize)], values: &[f64]) -> AllocationMatrix {
    let mut x = AllocationMatrix::zeros(n);
    for (&(i, j), &v) in support.iter().zip(values) {
        x.set(i, j, v.max(0.0));
    }
    x
}

/// Rescales columns to their endowments exactly.
fn restore_columns(x: &mut AllocationMatrix, a: &EndowmentVector) {
    let n = x.dim();
    for col in 0..n {
        let sum = x.column_sum(col);
        if sum > 0.0 {
            let scale = a[col] / sum;
            for row in (0..n).filter(|&r| r != col) {
                let v = x.get(row, col) * scale;
                x.set(row, col, v);
            }
        }
    }
}

fn ensure_feasible(a: &EndowmentVector, theta: ReciprocityTarget) -> Result<()> {
    let support = off_diagonal_pairs(a.len());
    match feasible_point(&allocation_constraints(a, theta, &support))? {
        Some(_) => Ok(()),
        None => Err(Error::InfeasibleTarget { theta: theta.get() }),
    }
}

/// `sum_{i != j} ln(eps + x_ij)`.
pub fn log_proxy(x: &AllocationMatrix, eps: f64) -> f64 {
    x.off_diagonal().map(|(_, _, v)| libm::log(eps + v)).sum()
}

/// Advances `idx` to the next k-combination of `0..n` in lexicographic
/// order. Returns false after the last one.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut pos = k;
    while pos > 0 {
        pos -= 1;
        if idx[pos] < n - k + pos {
            idx[pos] += 1;
            for q in pos + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Constraint rows over every off-diagonal pair, with each pair outside
/// `links` capped at `cap` so it cannot count as a link.
pub fn capped_constraints(
    a: &EndowmentVector,
    theta: ReciprocityTarget,
    links: &[(usize, usize)],
    cap: f64,
) -> StandardFormLp {
    let pairs = off_diagonal_pairs(a.len());
    let mut lp = allocation_constraints(a, theta, &pairs);
    for (k, pair) in pairs.iter().enumerate() {
        if !links.contains(pair) {
            let mut coeffs = vec![0.0; pairs.len()];
            coeffs[k] = 1.0;
            lp.add_row(coeffs, RowSense::Leq, cap);
        }
    }
    lp
}

/// Fewest links, at the default threshold, of any feasible allocation.
/// See [`p0_min_links`].
pub fn p0_brute_force(a: &EndowmentVector, theta: ReciprocityTarget, max_n: usize) -> Result<P0Solution> {
    p0_min_links(a, theta, max_n, SparsityParams::DEFAULT_TAU)
}

/// Fewest links of any feasible allocation, by exhaustive search over
/// link sets.
///
/// A link is an entry above `tau * mean(a) / (N - 1)`, as in
/// [`cardinality`](crate::metrics::cardinality). Link sets are tried by
/// increasing size and, within a size, lexicographically over
/// [`off_diagonal_pairs`]; the first one that passes a phase-one LP wins.
/// Entries outside the set may be positive up to the threshold. The witness
/// is zero off the set whenever that is feasible too.
pub fn p0_min_links(a: &EndowmentVector, theta: ReciprocityTarget, max_n: usize, tau: f64) -> Result<P0Solution> {
    let n = a.len();
    if n > max_n {
        return Err(Error::ProblemTooLarge { n, max_n });
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: "must be positive",
        });
    }
    let pairs = off_diagonal_pairs(n);
    ensure_feasible(a, theta)?;
    let cap = link_threshold(a, tau);
    let slack = (n - 1) as f64 * cap;
    // peers whose budget or quota cannot be met by sub-threshold entries
    let must_give: Vec<bool> = (0..n).map(|j| a[j] > slack).collect();
    let must_get: Vec<bool> = (0..n).map(|i| theta.get() * a[i] > slack).collect();

    for k in 0..=pairs.len() {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let links: Vec<(usize, usize)> = idx.iter().map(|&q| pairs[q]).collect();
            if covers(n, &links, &must_give, &must_get) {
                if let Some(witness) = link_witness(a, theta, &links, cap)? {
                    return Ok(P0Solution {
                        cardinality: k,
                        witness,
                    });
                }
            }
            if !next_combination(&mut idx, pairs.len()) {
                break;
            }
        }
    }
    Err(Error::InfeasibleTarget { theta: theta.get() })
}

fn link_witness(
    a: &EndowmentVector,
    theta: ReciprocityTarget,
    links: &[(usize, usize)],
    cap: f64,
) -> Result<Option<AllocationMatrix>> {
    let n = a.len();
    let exact = allocation_constraints(a, theta, links);
    if let Some(values) = feasible_point(&exact)? {
        let mut witness = to_matrix(n, links, &values);
        restore_columns(&mut witness, a);
        return Ok(Some(witness));
    }
    let pairs = off_diagonal_pairs(n);
    let mut lp = capped_constraints(a, theta, links, cap);
    for (k, pair) in pairs.iter().enumerate() {
        lp.cost[k] = if links.contains(pair) { 0.0 } else { 1.0 };
    }
    let sol = lp_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    // no rescaling here: it could lift a capped entry over the threshold
    let mut witness = AllocationMatrix::zeros(n);
    for (&(i, j), &v) in pairs.iter().zip(&sol.x) {
        let v = if links.contains(&(i, j)) {
            v.max(0.0)
        } else {
            v.clamp(0.0, cap)
        };
        witness.set(i, j, v);
    }
    Ok(Some(witness))
}

fn covers(n: usize, links: &[(usize, usize)], must_give: &[bool], must_get: &[bool]) -> bool {
    let mut gives = vec![false; n];
    let mut gets = vec![false; n];
    for &(i, j) in links {
        gets[i] = true;
        gives[j] = true;
    }
    (0..n).all(|p| (gives[p] || !must_give[p]) && (gets[p] || !must_get[p]))
}

/// Reweighted-LP local search. Each round solves
/// `min sum x_ij / (eps + x_ij(t))` over the constraint set, starting from
/// the equal split. With `perturb_seed`, every weight gets seeded uniform
/// noise of size up to `1e-6 * mean(a)` added to break ties.
pub fn p1_reweighted_lp(
    a: &EndowmentVector,
    theta: ReciprocityTarget,
    eps: f64,
    max_outer: usize,
    perturb_seed: Option<u64>,
) -> Result<CentralSolution> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: "must be positive",
        });
    }
    ensure_feasible(a, theta)?;
    let n = a.len();
    let pairs = off_diagonal_pairs(n);
    let base = allocation_constraints(a, theta, &pairs);
    let mut rng = perturb_seed.map(ChaCha20Rng::seed_from_u64);
    let noise = 1e-6 * a.mean();
    let tol = 1e-9 * a.mean();

    let mut x = equal_split(a);
    let mut trace = vec![log_proxy(&x, eps)];
    let mut converged = false;
    let mut outer = 0;
    while outer < max_outer {
        let mut lp = base.clone();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let mut w = 1.0 / (eps + x.get(i, j));
            if let Some(rng) = rng.as_mut() {
                w += noise * rng.gen::<f64>();
            }
            lp.cost[k] = w;
        }
        let sol = lp_solve(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Lp(sol.status));
        }
        let mut next = to_matrix(n, &pairs, &sol.x);
        restore_columns(&mut next, a);
        outer += 1;
        let delta = next.max_abs_diff(&x);
        x = next;
        trace.push(log_proxy(&x, eps));
        if delta <= tol {
            converged = true;
            break;
        }
    }
    Ok(CentralSolution {
        allocation: x,
        trace,
        outer_iters: outer,
        converged,
    })
}

/// Settings for [`p2_irls`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P2Params {
    /// Knee of the quadratic majorizer.
    pub delta: f64,
    pub eps: f64,
    pub max_outer: usize,
    /// Dual sweeps per outer round.
    pub inner_iters: usize,
    /// Seed of the random split used as the first anchor.
    pub seed: u64,
}

impl P2Params {
    /// `delta = 1e-4 * mean(a) / (N - 1)`, 50 sweeps, 100 rounds, seed 0.
    pub fn for_endowments(a: &EndowmentVector, eps: f64) -> Self {
        Self {
            delta: 1e-4 * a.edge_scale(),
            eps,
            max_outer: 100,
            inner_iters: 50,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "must be positive",
            });
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

/// Curvature weight of the quadratic majorizer anchored at `anchor`:
/// `1 / (2 m (eps + m))` with `m = max(anchor, delta)`.
pub fn majorizer_weight(anchor: f64, delta: f64, eps: f64) -> f64 {
    let m = anchor.max(delta);
    1.0 / (2.0 * m * (eps + m))
}

/// Solves `sum_k s_k max(0, nu + e_k) = target` for `nu` (`s_k > 0`,
/// `target > 0`).
fn water_level(s: &[f64], e: &[f64], target: f64, order: &mut Vec<usize>) -> f64 {
    order.clear();
    order.extend(0..s.len());
    order.sort_by(|&p, &q| e[q].partial_cmp(&e[p]).unwrap_or(core::cmp::Ordering::Equal));
    let mut s_sum = 0.0;
    let mut se_sum = 0.0;
    let mut nu = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        s_sum += s[k];
        se_sum += s[k] * e[k];
        nu = (target - se_sum) / s_sum;
        let next_inactive = order.get(rank + 1).is_none_or(|&q| nu + e[q] <= 0.0);
        if nu + e[k] > 0.0 && next_inactive {
            break;
        }
    }
    nu
}

/// Dual coordinate ascent state for one quadratic subproblem
/// `min sum x_ij^2 / (2 s_ij)` over the constraint set. The primal point is
/// `x_ij = s_ij max(0, nu_j + eta_i)`.
struct DualQp<'a> {
    n: usize,
    a: &'a EndowmentVector,
    theta: f64,
    /// `s_ij = 1 / (2 weight)`, row-major, diagonal unused.
    s: Vec<f64>,
    nu: Vec<f64>,
    eta: Vec<f64>,
    order: Vec<usize>,
}

impl DualQp<'_> {
    fn column_pass(&mut self) {
        let n = self.n;
        let mut s = Vec::with_capacity(n - 1);
        let mut e = Vec::with_capacity(n - 1);
        for col in 0..n {
            s.clear();
            e.clear();
            for row in (0..n).filter(|&r| r != col) {
                s.push(self.s[row * n + col]);
                e.push(self.eta[row]);
            }
            self.nu[col] = water_level(&s, &e, self.a[col], &mut self.order);
        }
    }

    fn row_pass(&mut self) {
        let n = self.n;
        let mut s = Vec::with_capacity(n - 1);
        let mut e = Vec::with_capacity(n - 1);
        for row in 0..n {
            let target = self.theta * self.a[row];
            let at_zero: f64 = (0..n)
                .filter(|&c| c != row)
                .map(|c| self.s[row * n + c] * self.nu[c].max(0.0))
                .sum();
            if at_zero >= target {
                self.eta[row] = 0.0;
                continue;
            }
            s.clear();
            e.clear();
            for col in (0..n).filter(|&c| c != row) {
                s.push(self.s[row * n + col]);
                e.push(self.nu[col]);
            }
            self.eta[row] = water_level(&s, &e, target, &mut self.order).max(0.0);
        }
    }

    fn primal(&self) -> AllocationMatrix {
        let n = self.n;
        let mut x = AllocationMatrix::zeros(n);
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                x.set(i, j, self.s[i * n + j] * (self.nu[j] + self.eta[i]).max(0.0));
            }
        }
        x
    }

    /// Largest relative shortfall `max(0, theta a_i - r_i) / a_i`.
    fn row_deficit(&self, x: &AllocationMatrix) -> f64 {
        receive_vector(x)
            .iter()
            .enumerate()
            .map(|(i, &r)| (self.theta * self.a[i] - r).max(0.0) / self.a[i])
            .fold(0.0, f64::max)
    }

    /// Row then column sweeps; columns are exact after each sweep.
    fn sweep(&mut self, sweeps: usize, target_deficit: f64) -> AllocationMatrix {
        let mut x = self.primal();
        for _ in 0..sweeps {
            self.row_pass();
            self.column_pass();
            x = self.primal();
            if self.row_deficit(&x) <= target_deficit {
                break;
            }
        }
        x
    }
}

/// Sweeps allowed for the final feasibility polish of [`p2_irls`].
const P2_POLISH_SWEEPS: usize = 20_000;
const P2_DEFICIT_TOL: f64 = 1e-12;

/// Nearest feasible point to `target` in the L1 sense, by LP over
/// `x` and `d >= |x - target|`.
fn l1_projection(a: &EndowmentVector, theta: ReciprocityTarget, target: &AllocationMatrix) -> Result<AllocationMatrix> {
    let n = a.len();
    let pairs = off_diagonal_pairs(n);
    let m = pairs.len();
    let base = allocation_constraints(a, theta, &pairs);
    let mut lp = StandardFormLp::new(2 * m);
    for ((row, sense), rhs) in base.rows.iter().zip(&base.sense).zip(&base.rhs) {
        let mut coeffs = row.clone();
        coeffs.resize(2 * m, 0.0);
        lp.add_row(coeffs, *sense, *rhs);
    }
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let t = target.get(i, j);
        let mut above = vec![0.0; 2 * m];
        above[k] = -1.0;
        above[m + k] = 1.0;
        lp.add_row(above, RowSense::Geq, -t);
        let mut below = vec![0.0; 2 * m];
        below[k] = 1.0;
        below[m + k] = 1.0;
        lp.add_row(below, RowSense::Geq, t);
    }
    for k in 0..m {
        lp.cost[m + k] = 1.0;
    }
    let sol = lp_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    let mut x = to_matrix(n, &pairs, &sol.x[..m]);
    restore_columns(&mut x, a);
    Ok(x)
}

/// IRLS with quadratic majorizers of `sum ln(eps + x_ij)`.
///
/// The first anchor is a seeded random split: the equal split is a fixed
/// point of the reweighting and would never move. Each outer round
/// re-anchors the weights at the current point and runs `inner_iters` dual
/// sweeps. The returned allocation is the best (lowest proxy) feasible
/// iterate, or the last one after a final polish that drives the ratio
/// shortfall below `1e-12 a_i`. Badly conditioned weights can stall the
/// dual sweeps; the point is then replaced by its L1-nearest feasible
/// allocation. `converged` is false when `max_outer` rounds ran out first.
pub fn p2_irls(a: &EndowmentVector, theta: ReciprocityTarget, params: &P2Params) -> Result<CentralSolution> {
    params.validate()?;
    ensure_feasible(a, theta)?;
    let n = a.len();
    let tol = 1e-9 * a.mean();
    let mut x = init_allocation(a, InitMode::Random { seed: params.seed });
    let mut trace = vec![log_proxy(&x, params.eps)];
    let mut converged = false;
    let mut outer = 0;
    let mut qp = DualQp {
        n,
        a,
        theta: theta.get(),
        s: vec![0.0; n * n],
        nu: vec![0.0; n],
        eta: vec![0.0; n],
        order: Vec::with_capacity(n),
    };

    let reanchor = |qp: &mut DualQp, x: &AllocationMatrix| {
        for (i, j, v) in x.off_diagonal() {
            qp.s[i * n + j] = 0.5 / majorizer_weight(v, params.delta, params.eps);
        }
    };

    let mut best: Option<(f64, AllocationMatrix)> = None;
    while outer < params.max_outer {
        reanchor(&mut qp, &x);
        qp.column_pass();
        let next = qp.sweep(params.inner_iters, P2_DEFICIT_TOL);
        outer += 1;
        let delta = next.max_abs_diff(&x);
        x = next;
        let proxy = log_proxy(&x, params.eps);
        trace.push(proxy);
        if qp.row_deficit(&x) <= P2_DEFICIT_TOL && best.as_ref().is_none_or(|(b, _)| proxy < *b) {
            best = Some((proxy, x.clone()));
        }
        if delta <= tol {
            converged = true;
            break;
        }
    }

    let allocation = match best {
        Some((_, b)) if !converged => b,
        _ => {
            // finish the current subproblem to feasibility
            let polished = qp.sweep(P2_POLISH_SWEEPS, P2_DEFICIT_TOL);
            if qp.row_deficit(&polished) > P2_DEFICIT_TOL {
                l1_projection(a, theta, &polished)?
            } else {
                polished
            }
        }
    };
    let mut allocation = allocation;
    restore_columns(&mut allocation, a);
    Ok(CentralSolution {
        allocation,
        trace,
        outer_iters: outer,
        converged,
    })
}
