//! Soft medians: outlier-robust differentiable reductions.
//!
//! The precise variant sorts with the relaxed network and reads the middle
//! (for even lengths, the mean of the two middle entries). The fast
//! variant never sorts. It keeps a per-element weight vector, initially
//! all ones, and at each degree level lets a weighted softmin and softmax
//! locate the current extremes; their combined selection mass is then
//! inverted by an outer weighted softmin, which re-concentrates the
//! weights on elements that are neither minimal nor maximal. After `degree`
//! levels the weights form a probability vector over the central elements,
//! and the result is the weighted average of the input under it. Each
//! level discards one layer of extremes, shrinking the gradient that an
//! outlier can exert on the output.

use super::softmax::w_softmax_scalar_weights;
use super::{soft_sort, validate_steepness, validate_vector, OpsError, SortOptions};
use crate::autodiff::Scalar;

pub fn soft_median_precise<'t>(xs: &[Scalar<'t>], steepness: f64) -> Result<Scalar<'t>, OpsError> {
    validate_vector(xs)?;
    let sorted = soft_sort(xs, None, &SortOptions::new(steepness))?.sorted;
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) * 0.5
    })
}

/// `degree` counts the extreme-removal levels; degree 0 degenerates to the
/// mean. Steepness scales every weighted softmin/softmax input, acting as
/// the usual temperature.
pub fn soft_median_fast<'t>(
    xs: &[Scalar<'t>],
    degree: usize,
    steepness: f64,
) -> Result<Scalar<'t>, OpsError> {
    let weights = central_weights(xs, degree, steepness)?;
    let mut acc = weights[0] * xs[0];
    for (w, x) in weights.iter().zip(xs).skip(1) {
        acc = acc + *w * *x;
    }
    Ok(acc)
}

/// The fast median's selection vector: a probability distribution over
/// elements that survives `degree` rounds of soft extreme-removal.
fn central_weights<'t>(
    xs: &[Scalar<'t>],
    degree: usize,
    steepness: f64,
) -> Result<Vec<Scalar<'t>>, OpsError> {
    validate_vector(xs)?;
    validate_steepness(steepness)?;
    let tape = xs[0].tape();
    let scaled: Vec<Scalar<'t>> = xs.iter().map(|&x| x * steepness).collect();
    let negated: Vec<Scalar<'t>> = scaled.iter().map(|&x| -x).collect();

    let mut weights: Vec<Scalar<'t>> = vec![tape.constant(1.0); xs.len()];
    for _ in 0..degree {
        let minimal = w_softmax_scalar_weights(&negated, &weights);
        let maximal = w_softmax_scalar_weights(&scaled, &weights);
        let extremeness: Vec<Scalar<'t>> = minimal
            .iter()
            .zip(&maximal)
            .map(|(&mn, &mx)| -((mn + mx) * steepness))
            .collect();
        weights = w_softmax_scalar_weights(&extremeness, &weights);
    }
    if degree == 0 {
        // Ones are weights, not yet a distribution; normalize for the
        // averaging read-out.
        let share = 1.0 / xs.len() as f64;
        weights = weights.iter().map(|&w| w * share).collect();
    }
    Ok(weights)
}
