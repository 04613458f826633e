//! Generalized Kullback-Leibler divergence on nonnegative vectors.

use crate::error::{Error, Result};
use crate::market::AllocationMatrix;

/// `D(u, v) = sum u_i ln(u_i / v_i) - sum (u_i - v_i)`, with `0 ln 0 = 0`.
pub fn kl_divergence(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let mut total = 0.0;
    for (k, (&ui, &vi)) in u.iter().zip(v).enumerate() {
        if ui > 0.0 {
            if vi <= 0.0 {
                return Err(Error::DivergenceDomain(k));
            }
            total += ui * libm::log(ui / vi);
        }
        total -= ui - vi;
    }
    // Each term is nonnegative, so a negative total is rounding.
    Ok(total.max(0.0))
}

/// Divergence between two allocation matrices over off-diagonal entries.
pub fn matrix_divergence(x: &AllocationMatrix, y: &AllocationMatrix) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let mut total = 0.0;
    for ((i, j, xv), (_, _, yv)) in x.off_diagonal().zip(y.off_diagonal()) {
        if xv > 0.0 {
            if yv <= 0.0 {
                return Err(Error::DivergenceDomain(i * x.dim() + j));
            }
            total += xv * libm::log(xv / yv);
        }
        total -= xv - yv;
    }
    Ok(total.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_is_zero() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn scalar_example() {
        let expected = 2.0 * core::f64::consts::LN_2 - 1.0;
        assert_abs_diff_eq!(kl_divergence(&[2.0], &[1.0]).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.38629, epsilon = 1e-5);
    }

    #[test]
    fn zero_entries_drop_the_log_term() {
        assert_abs_diff_eq!(kl_divergence(&[0.0, 1.0], &[0.5, 1.0]).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn domain_error_when_support_escapes() {
        assert_eq!(kl_divergence(&[1.0, 1.0], &[1.0, 0.0]), Err(Error::DivergenceDomain(1)));
        assert!(kl_divergence(&[1.0], &[1.0, 2.0]).is_err());
    }
}
