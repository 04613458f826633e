//! Dense two-phase primal simplex with Bland's rule.
//!
//! Problems have the form `min cost . x` subject to rowwise `A x (=|>=|<=) b`
//! and `x >= 0`. Every row gets an artificial variable in phase one, so no
//! starting basis needs to be supplied.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Eq,
    Geq,
    Leq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot budget exhausted.
    IterationLimit,
}

/// `min cost . x  s.t.  rows[k] . x (sense[k]) rhs[k],  x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLp {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub sense: Vec<RowSense>,
    pub cost: Vec<f64>,
}

impl StandardFormLp {
    pub fn new(num_vars: usize) -> Self {
        Self {
            rows: Vec::new(),
            rhs: Vec::new(),
            sense: Vec::new(),
            cost: vec![0.0; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: RowSense, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars());
        self.rows.push(coeffs);
        self.sense.push(sense);
        self.rhs.push(rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 || self.rows.is_empty() {
            return Err(Error::InvalidParameter {
                name: "lp",
                reason: "needs at least one variable and one row",
            });
        }
        if self.rhs.len() != self.rows.len() || self.sense.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                found: self.rhs.len().min(self.sense.len()),
            });
        }
        for row in &self.rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        let finite = self
            .rows
            .iter()
            .flatten()
            .chain(&self.rhs)
            .chain(&self.cost)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter {
                name: "lp",
                reason: "entries must be finite",
            });
        }
        Ok(())
    }

    /// Largest rowwise constraint violation scaled by `1 + |b_k|`.
    pub fn max_scaled_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .zip(&self.sense)
            .map(|((row, &b), sense)| {
                let lhs: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
                let v = match sense {
                    RowSense::Eq => (lhs - b).abs(),
                    RowSense::Geq => (b - lhs).max(0.0),
                    RowSense::Leq => (lhs - b).max(0.0),
                };
                v / (1.0 + b.abs())
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// `m` constraint rows followed by the objective row; the last column is
    /// the right-hand side.
    cells: Vec<f64>,
    width: usize,
    m: usize,
    basis: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.at(row, col);
        for c in 0..w {
            self.cells[row * w + c] /= p;
        }
        self.cells[row * w + col] = 1.0;
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let f = self.at(r, col);
            if f == 0.0 {
                continue;
            }
            for c in 0..w {
                let delta = f * self.cells[row * w + c];
                self.cells[r * w + c] -= delta;
            }
            self.cells[r * w + col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Loads the objective row `cost` (length `width - 1`) expressed in the
    /// current basis.
    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width;
        let obj = self.m * w;
        for c in 0..w {
            self.cells[obj + c] = if c < w - 1 { cost[c] } else { 0.0 };
        }
        for r in 0..self.m {
            let f = cost[self.basis[r]];
            if f != 0.0 {
                for c in 0..w {
                    let delta = f * self.cells[r * w + c];
                    self.cells[obj + c] -= delta;
                }
            }
        }
    }

    /// Runs simplex iterations over columns `< allowed`. Returns `Optimal`,
    /// `Unbounded` or `IterationLimit`.
    fn optimize(&mut self, allowed: usize) -> LpStatus {
        loop {
            if self.pivots >= self.max_pivots {
                return LpStatus::IterationLimit;
            }
            // Bland: lowest-index improving column
            let entering = (0..allowed).find(|&c| self.at(self.m, c) < -PIVOT_TOL);
            let Some(col) = entering else {
                return LpStatus::Optimal;
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, col);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((best, best_ratio)) => {
                            let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                            if ratio < best_ratio && !tie || tie && self.basis[r] < self.basis[best] {
                                Some((r, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            match leaving {
                None => return LpStatus::Unbounded,
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }
}

/// Phase one. Returns the tableau with a feasible basis free of
/// artificials (redundant rows dropped), or `None` when infeasible.
fn phase_one(lp: &StandardFormLp) -> Result<Option<(Tableau, usize)>> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.num_rows();
    let slack_count = lp.sense.iter().filter(|s| **s != RowSense::Eq).count();
    // columns: structural | slack/surplus | artificial | rhs
    let structural_and_slack = n + slack_count;
    let width = structural_and_slack + m + 1;
    let mut cells = vec![0.0; (m + 1) * width];
    let mut slack = n;
    for r in 0..m {
        let flip = if lp.rhs[r] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..n {
            cells[r * width + c] = flip * lp.rows[r][c];
        }
        match lp.sense[r] {
            RowSense::Eq => {}
            RowSense::Geq => {
                cells[r * width + slack] = -flip;
                slack += 1;
            }
            RowSense::Leq => {
                cells[r * width + slack] = flip;
                slack += 1;
            }
        }
        cells[r * width + structural_and_slack + r] = 1.0;
        cells[r * width + width - 1] = flip * lp.rhs[r];
    }
    let mut tableau = Tableau {
        cells,
        width,
        m,
        basis: (0..m).map(|r| structural_and_slack + r).collect(),
        pivots: 0,
        max_pivots: 10_000 * m.max(n),
    };
    let mut phase_cost = vec![0.0; width - 1];
    for c in phase_cost.iter_mut().skip(structural_and_slack) {
        *c = 1.0;
    }
    tableau.set_objective(&phase_cost);
    match tableau.optimize(width - 1) {
        LpStatus::Optimal => {}
        LpStatus::IterationLimit => return Err(Error::Lp(LpStatus::IterationLimit)),
        // the phase-one objective is bounded below by zero
        LpStatus::Unbounded | LpStatus::Infeasible => unreachable!(),
    }
    let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
    let infeasibility: f64 = (0..m)
        .filter(|&r| tableau.basis[r] >= structural_and_slack)
        .map(|r| tableau.rhs(r))
        .sum();
    if infeasibility > FEASIBILITY_TOL * scale {
        return Ok(None);
    }

    // drive remaining artificials out of the basis
    let mut r = 0;
    while r < tableau.m {
        if tableau.basis[r] >= structural_and_slack {
            let replacement = (0..structural_and_slack).find(|&c| tableau.at(r, c).abs() > PIVOT_TOL);
            match replacement {
                Some(c) => {
                    tableau.pivot(r, c);
                    r += 1;
                }
                None => {
                    // redundant row: drop it
                    let w = tableau.width;
                    tableau.cells.drain(r * w..(r + 1) * w);
                    tableau.basis.remove(r);
                    tableau.m -= 1;
                }
            }
        } else {
            r += 1;
        }
    }
    Ok(Some((tableau, structural_and_slack)))
}

fn extract(tableau: &Tableau, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for r in 0..tableau.m {
        let c = tableau.basis[r];
        if c < n {
            x[c] = tableau.rhs(r).max(0.0);
        }
    }
    x
}

/// Solves the LP. Fails only when the pivot budget `10_000 * max(m, n)`
/// runs out.
pub fn lp_solve(lp: &StandardFormLp) -> Result<LpSolution> {
    let n = lp.num_vars();
    let Some((mut tableau, real_cols)) = phase_one(lp)? else {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::NAN,
        });
    };
    let mut cost = vec![0.0; tableau.width - 1];
    cost[..n].copy_from_slice(&lp.cost);
    tableau.set_objective(&cost);
    let status = tableau.optimize(real_cols);
    match status {
        LpStatus::IterationLimit => Err(Error::Lp(LpStatus::IterationLimit)),
        LpStatus::Unbounded => Ok(LpSolution {
            status,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
        }),
        _ => {
            let x = extract(&tableau, n);
            let objective = lp.cost.iter().zip(&x).map(|(c, x)| c * x).sum();
            Ok(LpSolution { status, x, objective })
        }
    }
}

/// A basic feasible point of the constraints, or `None` if there is none.
pub fn feasible_point(lp: &StandardFormLp) -> Result<Option<Vec<f64>>> {
    Ok(phase_one(lp)?.map(|(tableau, _)| extract(&tableau, lp.num_vars())))
}

/// Whether the constraint polytope is nonempty. The cost is ignored.
pub fn lp_feasible(lp: &StandardFormLp) -> Result<bool> {
    Ok(phase_one(lp)?.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_lower_bound() {
        let mut lp = StandardFormLp::new(1);
        lp.cost[0] = 1.0;
        lp.add_row(vec![1.0], RowSense::Geq, 3.0);
        let sol = lp_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn contradictory_rows() {
        let mut lp = StandardFormLp::new(2);
        lp.add_row(vec![1.0, 1.0], RowSense::Eq, 1.0);
        lp.add_row(vec![1.0, 0.0], RowSense::Geq, 2.0);
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Infeasible);
        assert!(!lp_feasible(&lp).unwrap());
    }

    #[test]
    fn feasibility_examples() {
        let mut lp = StandardFormLp::new(1);
        lp.add_row(vec![1.0], RowSense::Eq, 1.0);
        assert!(lp_feasible(&lp).unwrap());
        let mut lp = StandardFormLp::new(1);
        lp.add_row(vec![1.0], RowSense::Eq, -1.0);
        assert!(!lp_feasible(&lp).unwrap());
    }

    #[test]
    fn unbounded() {
        let mut lp = StandardFormLp::new(2);
        lp.cost = vec![-1.0, 0.0];
        lp.add_row(vec![1.0, -1.0], RowSense::Leq, 1.0);
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = StandardFormLp::new(2);
        lp.cost = vec![-3.0, -5.0];
        lp.add_row(vec![1.0, 0.0], RowSense::Leq, 4.0);
        lp.add_row(vec![0.0, 2.0], RowSense::Leq, 12.0);
        lp.add_row(vec![3.0, 2.0], RowSense::Leq, 18.0);
        let sol = lp_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.objective, -36.0, epsilon = 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = StandardFormLp::new(2);
        lp.cost = vec![1.0, 2.0];
        lp.add_row(vec![1.0, 1.0], RowSense::Eq, 1.0);
        lp.add_row(vec![2.0, 2.0], RowSense::Eq, 2.0);
        let sol = lp_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_rhs_rows() {
        // -x <= -2  <=>  x >= 2
        let mut lp = StandardFormLp::new(1);
        lp.cost[0] = 1.0;
        lp.add_row(vec![-1.0], RowSense::Leq, -2.0);
        let sol = lp_solve(&lp).unwrap();
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook most-negative rule.
        let mut lp = StandardFormLp::new(4);
        lp.cost = vec![-0.75, 150.0, -0.02, 6.0];
        lp.add_row(vec![0.25, -60.0, -0.04, 9.0], RowSense::Leq, 0.0);
        lp.add_row(vec![0.5, -90.0, -0.02, 3.0], RowSense::Leq, 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], RowSense::Leq, 1.0);
        let sol = lp_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, -0.05, epsilon = 1e-12);
    }

    #[test]
    fn malformed_lp() {
        let lp = StandardFormLp::new(2);
        assert!(lp_solve(&lp).is_err());
    }
}
