//! Market primitives: endowments, allocation matrices and the quantities
//! derived from them.
//!
//! Allocations are stored densely. Entry `(i, j)` is the amount of resource
//! peer `j` gives to peer `i`, so column `j` is peer `j`'s outflow and must
//! sum to its endowment, while row `i` sums to what peer `i` receives.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative tolerance on column sums.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Per-peer resource endowments, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EndowmentVector(Vec<f64>);

impl EndowmentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewPeers(values.len()));
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidEndowment { index, value });
            }
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.0.len() as f64
    }

    /// Equal-split allocation per directed edge, `mean / (N - 1)`.
    pub fn edge_scale(&self) -> f64 {
        self.mean() / (self.0.len() - 1) as f64
    }
}

impl core::ops::Index<usize> for EndowmentVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Dense `N x N` allocation matrix with a zero diagonal and nonnegative
/// entries. Column feasibility is checked separately by [`MarketState`].
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    n: usize,
    data: Vec<f64>,
}

impl AllocationMatrix {
    /// Builds a matrix from row-major data.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewPeers(n));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        for row in 0..n {
            for col in 0..n {
                let value = data[row * n + col];
                if row == col {
                    if value != 0.0 {
                        return Err(Error::NonZeroDiagonal(row));
                    }
                } else if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::InvalidEntry { row, col, value });
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Assembles a matrix from trusted row-major data produced by an update
    /// rule. Callers guarantee a zero diagonal and nonnegative entries.
    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Amount given by peer `from` to peer `to`.
    #[inline]
    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.data[to * self.n + from]
    }

    /// Sets an off-diagonal entry. Panics on the diagonal or on a negative
    /// value.
    pub fn set(&mut self, to: usize, from: usize, value: f64) {
        assert!(to != from, "diagonal entries are fixed at zero");
        assert!(value >= 0.0, "allocations are nonnegative");
        self.data[to * self.n + from] = value;
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Iterates `(to, from, value)` over off-diagonal entries in row-major
    /// order.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / n != k % n)
            .map(move |(k, &v)| (k / n, k % n, v))
    }

    pub fn column_sum(&self, col: usize) -> f64 {
        (0..self.n).map(|row| self.data[row * self.n + col]).sum()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Self { n, data }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks that each column sums to the matching endowment within
    /// [`FEASIBILITY_TOL`] relative.
    pub fn check_columns(&self, a: &EndowmentVector) -> Result<()> {
        if a.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: a.len(),
            });
        }
        for col in 0..self.n {
            let sum = self.column_sum(col);
            if (sum - a[col]).abs() > FEASIBILITY_TOL * a[col] {
                return Err(Error::ColumnInfeasible {
                    column: col,
                    sum,
                    endowment: a[col],
                });
            }
        }
        Ok(())
    }
}

/// Penalty weight `c`, smoothing `eps` and link threshold `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityParams {
    pub c: f64,
    pub eps: f64,
    pub tau: f64,
}

impl SparsityParams {
    pub const DEFAULT_TAU: f64 = 0.01;

    pub fn new(c: f64, eps: f64, tau: f64) -> Result<Self> {
        let params = Self { c, eps, tau };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: "must be finite and nonnegative",
            });
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: "must be finite and positive",
            });
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: "must be finite and positive",
            });
        }
        Ok(())
    }

    /// Link weight `c / (eps + x)`.
    #[inline]
    pub fn weight(&self, x: f64) -> f64 {
        self.c / (self.eps + x)
    }
}

impl Default for SparsityParams {
    fn default() -> Self {
        Self {
            c: 0.1,
            eps: 0.01,
            tau: Self::DEFAULT_TAU,
        }
    }
}

/// A column-feasible allocation together with its endowments and the
/// iteration index that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    x: AllocationMatrix,
    a: EndowmentVector,
    pub t: u64,
}

impl MarketState {
    pub fn new(x: AllocationMatrix, a: EndowmentVector) -> Result<Self> {
        x.check_columns(&a)?;
        Ok(Self { x, a, t: 0 })
    }

    pub fn allocation(&self) -> &AllocationMatrix {
        &self.x
    }

    pub fn endowments(&self) -> &EndowmentVector {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn receive_vector(&self) -> Vec<f64> {
        receive_vector(&self.x)
    }

    pub fn exchange_ratios(&self) -> Vec<f64> {
        let r = self.receive_vector();
        r.iter().zip(self.a.as_slice()).map(|(r, a)| r / a).collect()
    }

    /// Replaces the allocation with the output of one update and bumps `t`.
    pub fn advance(&mut self, next: AllocationMatrix) -> Result<()> {
        next.check_columns(&self.a)?;
        self.x = next;
        self.t += 1;
        Ok(())
    }

    pub fn into_parts(self) -> (AllocationMatrix, EndowmentVector) {
        (self.x, self.a)
    }
}

/// Row sums of `x`: what each peer receives.
pub fn receive_vector(x: &AllocationMatrix) -> Vec<f64> {
    x.as_row_major().chunks(x.dim()).map(|row| row.iter().sum()).collect()
}

/// `r_i / a_i` for each peer.
pub fn exchange_ratios(x: &AllocationMatrix, a: &EndowmentVector) -> Result<Vec<f64>> {
    if a.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: a.len(),
        });
    }
    for (index, &value) in a.as_slice().iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::InvalidEndowment { index, value });
        }
    }
    Ok(receive_vector(x).iter().zip(a.as_slice()).map(|(r, a)| r / a).collect())
}

/// Every peer splits its endowment evenly over the other `N - 1` peers.
pub fn equal_split(a: &EndowmentVector) -> AllocationMatrix {
    let n = a.len();
    let mut x = AllocationMatrix::zeros(n);
    for from in 0..n {
        let share = a[from] / (n - 1) as f64;
        for to in (0..n).filter(|&to| to != from) {
            x.set(to, from, share);
        }
    }
    x
}
