//! Differentiable sorting by a relaxed odd-even transposition network.
//!
//! Each stage visits adjacent pairs (even stages start at index 0, odd
//! stages at index 1) and soft-exchanges them: with swap probability
//! `e = sigmoid((a_i - a_{i+1}) * s)` the pair mixes to
//!
//! ```text
//! out_i     = a_i     + e * (a_{i+1} - a_i)
//! out_{i+1} = a_{i+1} - e * (a_{i+1} - a_i)
//! ```
//!
//! so large steepness yields an ascending sort and small steepness a
//! doubly-stochastic averaging. The mixing form above keeps each output
//! inside the pair's hull even in floating point, which makes the
//! max-deviation-from-mean of the vector non-increasing per exchange —
//! repeated low-steepness passes provably collapse every entry toward the
//! input mean.
//!
//! The composed mixing matrix is tracked in plain f64 alongside the tape:
//! `sorted_i = sum_j matrix[i][j] * input_j`, and an optional companion
//! vector rides through the identical mixes, which is how values can be
//! sorted by a separately learned key.

use serde::Serialize;

use super::{validate_steepness, validate_vector, OpsError};
use crate::autodiff::Scalar;

#[derive(Debug, Clone)]
pub struct SortOptions {
    pub steepness: f64,
    /// Stage count; defaults to n, enough for a full sort in the crisp
    /// limit. Fewer stages give a coarse partial sort.
    pub num_stages: Option<usize>,
    pub descending: bool,
}

impl SortOptions {
    pub fn new(steepness: f64) -> Self {
        SortOptions {
            steepness,
            num_stages: None,
            descending: false,
        }
    }
}

impl Default for SortOptions {
    fn default() -> Self {
        SortOptions::new(1.0)
    }
}

/// One soft exchange: `position` is the lower index of the compared pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExchangeRecord {
    pub stage: usize,
    pub position: usize,
    pub probability: f64,
}

#[derive(Debug)]
pub struct SortResult<'t> {
    pub sorted: Vec<Scalar<'t>>,
    pub companion: Option<Vec<Scalar<'t>>>,
    /// Doubly stochastic; rows are output coordinates.
    pub relaxation_matrix: Vec<Vec<f64>>,
    pub exchanges: Vec<ExchangeRecord>,
}

/// In the worst case (a reversed vector) odd-even transposition needs n
/// full stages, for even and odd n alike.
pub fn default_num_stages(n: usize) -> usize {
    n
}

pub fn soft_sort<'t>(
    values: &[Scalar<'t>],
    companion: Option<&[Scalar<'t>]>,
    options: &SortOptions,
) -> Result<SortResult<'t>, OpsError> {
    validate_vector(values)?;
    validate_steepness(options.steepness)?;
    if let Some(t) = companion {
        if t.len() != values.len() {
            return Err(OpsError::LengthMismatch {
                expected: values.len(),
                got: t.len(),
            });
        }
        validate_vector(t)?;
    }

    let n = values.len();
    let stages = options.num_stages.unwrap_or_else(|| default_num_stages(n));
    // Comparing with s < 0 flips every exchange, sorting descending.
    let signed_s = if options.descending {
        -options.steepness
    } else {
        options.steepness
    };

    let mut current = values.to_vec();
    let mut riding = companion.map(<[_]>::to_vec);
    let mut matrix: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let mut exchanges = Vec::new();

    for stage in 0..stages {
        let mut position = stage % 2;
        while position + 1 < n {
            let a = current[position];
            let b = current[position + 1];
            let e = ((a - b) * signed_s).sigmoid();
            let crossing = b - a;
            current[position] = a + e * crossing;
            current[position + 1] = b - e * crossing;
            if let Some(t) = riding.as_mut() {
                let (ta, tb) = (t[position], t[position + 1]);
                let t_crossing = tb - ta;
                t[position] = ta + e * t_crossing;
                t[position + 1] = tb - e * t_crossing;
            }

            let ev = e.value();
            let (upper, lower) = matrix.split_at_mut(position + 1);
            for (top, bottom) in upper[position].iter_mut().zip(lower[0].iter_mut()) {
                let (t, b) = (*top, *bottom);
                *top = (1.0 - ev) * t + ev * b;
                *bottom = ev * t + (1.0 - ev) * b;
            }
            exchanges.push(ExchangeRecord {
                stage,
                position,
                probability: ev,
            });
            position += 2;
        }
    }

    Ok(SortResult {
        sorted: current,
        companion: riding,
        relaxation_matrix: matrix,
        exchanges,
    })
}
