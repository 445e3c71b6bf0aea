//! Weighted softmax and softmin.
//!
//! `w_softmax(x, w)_i = exp(x_i) w_i / sum_j exp(x_j) w_j`, which equals
//! `softmax(x + log w)` since the weights live in (0, 1]. Weights damp an
//! entry's share of the mass without shifting where the mass concentrates,
//! which is what the soft median's recursive outlier removal relies on.
//!
//! Every variant subtracts the detached maximum of `x + log w` before
//! exponentiating. Softmax is shift invariant, so a detached shift changes
//! neither values nor gradients, and it bounds every exponent by 0.

use super::{validate_vector, validate_weights, OpsError};
use crate::autodiff::Scalar;

/// Plain softmax, max-stabilized.
pub fn softmax<'t>(xs: &[Scalar<'t>]) -> Result<Vec<Scalar<'t>>, OpsError> {
    validate_vector(xs)?;
    Ok(normalized_exp(xs, None))
}

/// Weighted softmax in product form: `exp(x_i - C) w_i`, normalized.
pub fn w_softmax<'t>(xs: &[Scalar<'t>], weights: &[f64]) -> Result<Vec<Scalar<'t>>, OpsError> {
    check_pair(xs, weights)?;
    Ok(normalized_exp(xs, Some(weights)))
}

/// Weighted softmax in log form: `softmax(x + log w)`. Agrees with
/// [`w_softmax`] to double-precision rounding; exposed so the agreement is
/// testable against the product form.
pub fn w_softmax_log_form<'t>(
    xs: &[Scalar<'t>],
    weights: &[f64],
) -> Result<Vec<Scalar<'t>>, OpsError> {
    check_pair(xs, weights)?;
    let shifted: Vec<Scalar<'t>> = xs.iter().zip(weights).map(|(&x, &w)| x + w.ln()).collect();
    Ok(normalized_exp(&shifted, None))
}

/// Weighted softmin: the weighted softmax of the negated input, so mass
/// concentrates on small entries.
pub fn w_softmin<'t>(xs: &[Scalar<'t>], weights: &[f64]) -> Result<Vec<Scalar<'t>>, OpsError> {
    check_pair(xs, weights)?;
    let negated: Vec<Scalar<'t>> = xs.iter().map(|&x| -x).collect();
    Ok(normalized_exp(&negated, Some(weights)))
}

fn check_pair(xs: &[Scalar], weights: &[f64]) -> Result<(), OpsError> {
    validate_vector(xs)?;
    if weights.len() != xs.len() {
        return Err(OpsError::LengthMismatch {
            expected: xs.len(),
            got: weights.len(),
        });
    }
    validate_weights(weights)
}

fn normalized_exp<'t>(xs: &[Scalar<'t>], weights: Option<&[f64]>) -> Vec<Scalar<'t>> {
    let shift = xs
        .iter()
        .enumerate()
        .map(|(i, x)| x.value() + weights.map_or(0.0, |w| w[i].ln()))
        .fold(f64::NEG_INFINITY, f64::max);
    let numerators: Vec<Scalar<'t>> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let e = (x - shift).exp();
            match weights {
                Some(w) => e * w[i],
                None => e,
            }
        })
        .collect();
    let total = numerators[1..]
        .iter()
        .fold(numerators[0], |acc, &n| acc + n);
    numerators.into_iter().map(|n| n / total).collect()
}

/// Weighted softmax whose weights are tape scalars, so gradients flow
/// through the weights as well. Weights are floored at 1e-300: a previous
/// recursion level can underflow a weight to an exact zero, and the
/// detached shift takes a log of the weight values.
pub(crate) fn w_softmax_scalar_weights<'t>(
    xs: &[Scalar<'t>],
    weights: &[Scalar<'t>],
) -> Vec<Scalar<'t>> {
    debug_assert_eq!(xs.len(), weights.len());
    let floored: Vec<Scalar<'t>> = weights.iter().map(|w| w.max_c(1e-300)).collect();
    let shift = xs
        .iter()
        .zip(&floored)
        .map(|(x, w)| x.value() + w.value().ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let numerators: Vec<Scalar<'t>> = xs
        .iter()
        .zip(&floored)
        .map(|(&x, &w)| (x - shift).exp() * w)
        .collect();
    let total = numerators[1..]
        .iter()
        .fold(numerators[0], |acc, &n| acc + n);
    numerators.into_iter().map(|n| n / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn lift<'t>(tape: &'t Tape, xs: &[f64]) -> Vec<Scalar<'t>> {
        xs.iter().map(|&x| tape.lift(x).unwrap()).collect()
    }

    fn values(xs: &[Scalar]) -> Vec<f64> {
        xs.iter().map(|x| x.value()).collect()
    }

    #[test]
    fn softmax_of_two_matches_the_logistic_split() {
        let tape = Tape::new();
        let out = softmax(&lift(&tape, &[1.0, 2.0])).unwrap();
        let e = 1.0f64.exp();
        assert!((out[0].value() - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((out[1].value() - e / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn softmax_is_overflow_safe() {
        let tape = Tape::new();
        let out = softmax(&lift(&tape, &[1000.0, 1000.5])).unwrap();
        let total: f64 = out.iter().map(|x| x.value()).sum();
        assert!(out.iter().all(|x| x.value().is_finite()));
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_weights_reproduce_plain_softmax_bit_for_bit() {
        let tape = Tape::new();
        let xs = lift(&tape, &[0.3, -1.7, 2.2, 0.0, 5.5]);
        let plain = softmax(&xs).unwrap();
        let weighted = w_softmax(&xs, &[1.0; 5]).unwrap();
        for (p, w) in plain.iter().zip(&weighted) {
            assert_eq!(p.value().to_bits(), w.value().to_bits());
        }
    }

    #[test]
    fn equal_inputs_split_mass_by_weight() {
        let tape = Tape::new();
        let out = w_softmax(&lift(&tape, &[0.0, 0.0]), &[1.0, 0.5]).unwrap();
        assert!((out[0].value() - 2.0 / 3.0).abs() < 1e-15);
        assert!((out[1].value() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn both_forms_agree_closely() {
        let tape = Tape::new();
        let xs = lift(&tape, &[0.9, -3.0, 250.0, 1e-4, -17.5]);
        let ws = [0.2, 1.0, 0.03, 0.77, 0.5];
        let product = w_softmax(&xs, &ws).unwrap();
        let log_form = w_softmax_log_form(&xs, &ws).unwrap();
        for (a, b) in product.iter().zip(&log_form) {
            assert!((a.value() - b.value()).abs() < 1e-12);
        }
    }

    #[test]
    fn softmin_prefers_the_smallest_entry() {
        let tape = Tape::new();
        let out = w_softmin(&lift(&tape, &[0.0, 10.0]), &[1.0, 1.0]).unwrap();
        let expected0 = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((out[0].value() - expected0).abs() < 1e-15);
        assert!(out[1].value() < 5e-5);
    }

    #[test]
    fn single_element_normalizes_to_exactly_one() {
        let tape = Tape::new();
        let out = w_softmin(&lift(&tape, &[3.7]), &[0.4]).unwrap();
        assert_eq!(out[0].value(), 1.0);
    }

    #[test]
    fn softmax_jacobian_at_the_symmetric_point() {
        let tape = Tape::new();
        let xs = lift(&tape, &[0.0, 0.0]);
        let out = softmax(&xs).unwrap();
        let grads = out[0].backward();
        assert!((grads.wrt(xs[0]) - 0.25).abs() < 1e-12);
        assert!((grads.wrt(xs[1]) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights_and_shapes() {
        let tape = Tape::new();
        let xs = lift(&tape, &[1.0, 2.0]);
        assert_eq!(
            w_softmax(&xs, &[1.0, 0.0]).unwrap_err(),
            OpsError::InvalidWeight {
                index: 1,
                value: 0.0
            }
        );
        assert!(matches!(
            w_softmax(&xs, &[1.0, 1.5]).unwrap_err(),
            OpsError::InvalidWeight { index: 1, .. }
        ));
        assert!(matches!(
            w_softmax(&xs, &[-0.1, 1.0]).unwrap_err(),
            OpsError::InvalidWeight { index: 0, .. }
        ));
        assert_eq!(
            w_softmax(&xs, &[1.0]).unwrap_err(),
            OpsError::LengthMismatch {
                expected: 2,
                got: 1
            }
        );
        assert_eq!(softmax(&[]).unwrap_err(), OpsError::EmptyInput);
    }

    #[test]
    fn scalar_weight_variant_survives_underflowed_weights() {
        let tape = Tape::new();
        let xs = lift(&tape, &[0.0, 1.0, 2.0]);
        let tiny = [
            tape.constant(0.0),
            tape.constant(1.0),
            tape.constant(1e-310),
        ];
        let out = w_softmax_scalar_weights(&xs, &tiny);
        let total: f64 = out.iter().map(|x| x.value()).sum();
        assert!(out.iter().all(|x| x.value().is_finite()));
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outputs_stay_on_the_probability_simplex() {
        let tape = Tape::new();
        let xs = lift(&tape, &[4.0, -2.5, 0.0, 19.0, -30.0, 4.0]);
        let ws = [0.9, 0.01, 1.0, 0.3, 0.5, 0.25];
        let out = w_softmax(&xs, &ws).unwrap();
        let vals = values(&out);
        assert!(vals.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let total: f64 = vals.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
