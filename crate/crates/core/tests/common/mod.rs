#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparse_exchange::{AllocationMatrix, EndowmentVector, MarketState};

/// Endowments in `[0.1, 10]` and column weights in `[0.01, 1]`, so every
/// off-diagonal entry is strictly positive.
pub fn state_from_parts(a: Vec<f64>, weights: Vec<f64>) -> MarketState {
    let n = a.len();
    let mut x = AllocationMatrix::zeros(n);
    for col in 0..n {
        let total: f64 = (0..n).filter(|&r| r != col).map(|r| weights[r * n + col]).sum();
        for row in (0..n).filter(|&r| r != col) {
            x.set(row, col, a[col] * weights[row * n + col] / total);
        }
    }
    let a = EndowmentVector::new(a).unwrap();
    MarketState::new(x, a).unwrap()
}

pub fn arb_state(min_n: usize, max_n: usize) -> impl Strategy<Value = MarketState> {
    (min_n..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(0.1f64..10.0, n),
            prop::collection::vec(0.01f64..1.0, n * n),
        )
            .prop_map(|(a, w)| state_from_parts(a, w))
    })
}

/// Two feasible allocations over the same endowments.
pub fn arb_state_pair(min_n: usize, max_n: usize) -> impl Strategy<Value = (MarketState, MarketState)> {
    (min_n..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(0.1f64..10.0, n),
            prop::collection::vec(0.01f64..1.0, n * n),
            prop::collection::vec(0.01f64..1.0, n * n),
        )
            .prop_map(|(a, w1, w2)| (state_from_parts(a.clone(), w1), state_from_parts(a, w2)))
    })
}

/// Seeded random state for loops that do not need shrinking.
pub fn random_state(n: usize, seed: u64) -> MarketState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
    let w = (0..n * n).map(|_| rng.gen_range(0.01..1.0)).collect();
    state_from_parts(a, w)
}

pub fn random_endowments(n: usize, seed: u64) -> EndowmentVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EndowmentVector::new((0..n).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap()
}

/// Largest relative entrywise difference, scaled by the larger magnitude.
pub fn max_rel_diff(x: &AllocationMatrix, y: &AllocationMatrix) -> f64 {
    x.as_row_major()
        .iter()
        .zip(y.as_row_major())
        .map(|(&u, &v)| {
            let scale = u.abs().max(v.abs());
            if scale == 0.0 {
                0.0
            } else {
                (u - v).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

pub fn assert_columns_exact(x: &AllocationMatrix, a: &EndowmentVector) {
    for j in 0..a.len() {
        let sum = x.column_sum(j);
        assert!((sum - a[j]).abs() <= 1e-9 * a[j], "column {j}: {sum} vs {}", a[j]);
    }
}
