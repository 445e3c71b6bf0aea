//! Decision-smoothing primitives.
//!
//! A crisp `!= 0` test is replaced by an exit-probability function that maps
//! the loop variable to [0, 1). Two grades are provided: `phi0` is continuous
//! but kinked, `phi_inf` is infinitely differentiable with a steepness knob.

use crate::autodiff::Scalar;

/// Continuous exit probability: min(1, |x|). Equals 1 - max(0, 1 - |x|);
/// exactly 0 at 0 and exactly 1 once |x| >= 1, so runs over integers
/// reproduce the discrete semantics bit for bit.
pub fn phi0(x: Scalar<'_>) -> Scalar<'_> {
    x.abs().min_c(1.0)
}

/// Smooth exit probability: 1 - sech(s * x), algebraically equal to
/// (e^(sx) - 1)^2 / (e^(2sx) + 1). Zero at 0, saturating towards 1 as
/// |s * x| grows; `steepness` controls how fast.
pub fn phi_inf(x: Scalar<'_>, steepness: f64) -> Scalar<'_> {
    1.0 - (x * steepness).sech()
}

/// Logistic decision function with steepness: 1 / (1 + e^(-s x)).
pub fn logistic(x: Scalar<'_>, steepness: f64) -> Scalar<'_> {
    (x * steepness).sigmoid()
}

/// The crisp step the logistic relaxes: 0 for negative inputs, else 1.
pub fn heaviside(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        1.0
    }
}

/// C1 step on [0, 1]: clamps to the unit interval and applies
/// 3t^2 - 2t^3, giving value 0/1 and slope 0 at both ends.
pub fn smoothstep_c1(x: Scalar<'_>) -> Scalar<'_> {
    let t = x.max_c(0.0).min_c(1.0);
    t * t * (3.0 - t * 2.0)
}

/// Cubic variant t^2 - 2t^3 of the C1 step, kept for comparison. Note it
/// reaches -1 at t = 1, so it is not a unit step; [`smoothstep_c1`] is the
/// form used everywhere else.
pub fn smoothstep_c1_cubic(x: Scalar<'_>) -> Scalar<'_> {
    let t = x.max_c(0.0).min_c(1.0);
    t * t * (1.0 - t * 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn eval(f: impl Fn(Scalar<'_>) -> Scalar<'_>, x: f64) -> f64 {
        let tape = Tape::new();
        f(tape.lift(x).unwrap()).value()
    }

    #[test]
    fn phi0_values() {
        assert_eq!(eval(phi0, 0.0), 0.0);
        assert_eq!(eval(phi0, 0.5), 0.5);
        assert_eq!(eval(phi0, -3.0), 1.0);
        assert_eq!(eval(phi0, 1.0), 1.0);
    }

    #[test]
    fn phi_inf_matches_the_closed_form() {
        // Independent route: 1 - 2 / (e^2 + e^-2) at steepness 2, x = 1.
        let expected = 1.0 - 2.0 / (2.0f64.exp() + (-2.0f64).exp());
        let got = eval(|x| phi_inf(x, 2.0), 1.0);
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
        assert!((got - 0.734).abs() < 1e-3);
    }

    #[test]
    fn phi_inf_is_even_and_anchored_at_zero() {
        assert_eq!(eval(|x| phi_inf(x, 5.0), 0.0), 0.0);
        let a = eval(|x| phi_inf(x, 3.0), 0.7);
        let b = eval(|x| phi_inf(x, 3.0), -0.7);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn phi_inf_saturates_far_from_zero() {
        assert_eq!(eval(|x| phi_inf(x, 5.0), 400.0), 1.0);
    }

    #[test]
    fn smoothstep_endpoints_and_midpoint() {
        assert_eq!(eval(smoothstep_c1, -1.0), 0.0);
        assert_eq!(eval(smoothstep_c1, 0.0), 0.0);
        assert_eq!(eval(smoothstep_c1, 0.5), 0.5);
        assert_eq!(eval(smoothstep_c1, 1.0), 1.0);
        assert_eq!(eval(smoothstep_c1, 2.0), 1.0);
    }

    #[test]
    fn cubic_variant_differs_at_the_upper_end() {
        assert_eq!(eval(smoothstep_c1_cubic, 1.0), -1.0);
    }

    #[test]
    fn heaviside_is_the_crisp_limit() {
        assert_eq!(heaviside(-0.1), 0.0);
        assert_eq!(heaviside(0.0), 1.0);
        assert_eq!(heaviside(2.0), 1.0);
    }
}
