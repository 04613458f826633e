//! The `solve` command: centralized baselines on a fixed endowment vector.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sparse_exchange::central::{
    p0_brute_force, p1_reweighted_lp, p2_irls, CentralSolution, P2Params, ReciprocityTarget, P0_DEFAULT_MAX_N,
};
use sparse_exchange::market::{exchange_ratios, AllocationMatrix, EndowmentVector, SparsityParams};
use sparse_exchange::metrics::cardinality;
use sparse_exchange::Error;

use crate::error::SimError;
use crate::output::{ensure_dir, write_atomic};

pub const SOLUTION_FILE: &str = "solution.json";

/// Largest `N` the exact search accepts, with a warning above
/// [`P0_DEFAULT_MAX_N`].
pub const P0_HARD_MAX_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    P0,
    P1,
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub theta: f64,
    pub method: Method,
    pub eps: f64,
    /// P1: perturbation seed (off when `None`). P2: first-anchor seed.
    pub seed: Option<u64>,
    pub max_outer: usize,
    pub tau: f64,
}

impl SolveOptions {
    pub fn new(theta: f64, method: Method) -> Self {
        Self {
            theta,
            method,
            eps: 0.01,
            seed: None,
            max_outer: 100,
            tau: SparsityParams::DEFAULT_TAU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Solved,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest `|sum_i x_ij - a_j|`.
    pub max_column_residual: f64,
    pub min_ratio: f64,
    /// `max(0, theta - min_ratio)`.
    pub ratio_shortfall: f64,
}

/// Contents of `solution.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub method: Method,
    pub theta: f64,
    pub endowments: Vec<f64>,
    pub status: SolveStatus,
    pub message: Option<String>,
    /// Support size for p0, links above the threshold for p1 and p2.
    pub cardinality: Option<usize>,
    pub witness: Option<Vec<Vec<f64>>>,
    pub residuals: Option<Residuals>,
    /// Log proxy per outer round; empty for p0.
    pub trace: Vec<f64>,
    pub outer_iters: usize,
    pub converged: bool,
}

impl SolutionFile {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Reads endowments separated by whitespace or commas; `#` starts a
/// comment.
pub fn parse_endowments(text: &str) -> Result<EndowmentVector, SimError> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for token in body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v: f64 = token
                .parse()
                .map_err(|_| SimError::Input(format!("line {}: not a number: {token:?}", lineno + 1)))?;
            values.push(v);
        }
    }
    Ok(EndowmentVector::new(values)?)
}

pub fn load_endowments(path: &Path) -> Result<EndowmentVector, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_endowments(&text).map_err(|e| match e {
        SimError::Input(msg) => SimError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn residuals(x: &AllocationMatrix, a: &EndowmentVector, theta: f64) -> Result<Residuals, SimError> {
    let max_column_residual = (0..a.len()).map(|j| (x.column_sum(j) - a[j]).abs()).fold(0.0, f64::max);
    let min_ratio = exchange_ratios(x, a)?.into_iter().fold(f64::INFINITY, f64::min);
    Ok(Residuals {
        max_column_residual,
        min_ratio,
        ratio_shortfall: (theta - min_ratio).max(0.0),
    })
}

/// Runs the chosen baseline. An unreachable `theta` gives an
/// `infeasible` solution rather than an error.
pub fn solve(a: &EndowmentVector, opts: &SolveOptions) -> Result<SolutionFile, SimError> {
    let theta = ReciprocityTarget::new(opts.theta)?;
    let mut file = SolutionFile {
        method: opts.method,
        theta: opts.theta,
        endowments: a.as_slice().to_vec(),
        status: SolveStatus::Solved,
        message: None,
        cardinality: None,
        witness: None,
        residuals: None,
        trace: Vec::new(),
        outer_iters: 0,
        converged: false,
    };
    let result = match opts.method {
        Method::P0 => {
            if a.len() > P0_DEFAULT_MAX_N && a.len() <= P0_HARD_MAX_N {
                eprintln!(
                    "warning: exact search with N = {} enumerates about 2^{} supports",
                    a.len(),
                    a.len() * (a.len() - 1)
                );
            }
            p0_brute_force(a, theta, P0_HARD_MAX_N).map(|sol| {
                file.converged = true;
                (sol.witness, Some(sol.cardinality))
            })
        }
        Method::P1 => {
            p1_reweighted_lp(a, theta, opts.eps, opts.max_outer, opts.seed).map(|sol| take_iterative(&mut file, sol))
        }
        Method::P2 => {
            let mut params = P2Params::for_endowments(a, opts.eps);
            params.max_outer = opts.max_outer;
            params.seed = opts.seed.unwrap_or(params.seed);
            p2_irls(a, theta, &params).map(|sol| take_iterative(&mut file, sol))
        }
    };
    match result {
        Ok((x, card)) => {
            file.cardinality = Some(card.unwrap_or_else(|| cardinality(&x, a, opts.tau)));
            file.residuals = Some(residuals(&x, a, opts.theta)?);
            file.witness = Some(x.to_rows());
        }
        Err(Error::InfeasibleTarget { .. }) => {
            file.status = SolveStatus::Infeasible;
            file.message = Some(format!("no allocation reaches exchange ratio {}", opts.theta));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(file)
}

fn take_iterative(file: &mut SolutionFile, sol: CentralSolution) -> (AllocationMatrix, Option<usize>) {
    file.trace = sol.trace;
    file.outer_iters = sol.outer_iters;
    file.converged = sol.converged;
    (sol.allocation, None)
}

pub fn cmd_solve(a: &EndowmentVector, opts: &SolveOptions, out: &Path) -> Result<SolutionFile, SimError> {
    let file = solve(a, opts)?;
    ensure_dir(out)?;
    let mut bytes = serde_json::to_vec_pretty(&file)?;
    bytes.push(b'\n');
    write_atomic(&out.join(SOLUTION_FILE), &bytes)?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endowment_files_allow_commas_and_comments() {
        let a = parse_endowments("# peers\n1, 2.5\n3 # last\n\n").unwrap();
        assert_eq!(a.as_slice(), &[1.0, 2.5, 3.0]);
        let err = parse_endowments("1\n2 x\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_endowments("1").is_err());
        assert!(parse_endowments("1 -2").is_err());
    }

    #[test]
    fn swap_for_two_peers() {
        let a = EndowmentVector::new(vec![1.0, 1.0]).unwrap();
        for method in [Method::P0, Method::P1, Method::P2] {
            let sol = solve(&a, &SolveOptions::new(1.0, method)).unwrap();
            assert_eq!(sol.status, SolveStatus::Solved);
            assert_eq!(sol.cardinality, Some(2));
            let w = sol.witness.unwrap();
            assert!((w[0][1] - 1.0).abs() < 1e-9 && (w[1][0] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_target_is_reported() {
        let a = EndowmentVector::new(vec![5.0, 1.0, 1.0]).unwrap();
        for method in [Method::P0, Method::P1, Method::P2] {
            let sol = solve(&a, &SolveOptions::new(1.0, method)).unwrap();
            assert_eq!(sol.status, SolveStatus::Infeasible);
            assert!(sol.witness.is_none());
        }
    }

    #[test]
    fn p0_size_limit() {
        let a = EndowmentVector::uniform(6, 1.0).unwrap();
        assert!(solve(&a, &SolveOptions::new(1.0, Method::P0)).is_err());
    }

    #[test]
    fn theta_out_of_range_is_an_error() {
        let a = EndowmentVector::uniform(3, 1.0).unwrap();
        assert!(solve(&a, &SolveOptions::new(1.5, Method::P1)).is_err());
        assert!(solve(&a, &SolveOptions::new(0.0, Method::P1)).is_err());
    }
}
