//! Central-difference gradient checking.
//!
//! The harness is deliberately agnostic of how the function under test is
//! evaluated: the caller supplies a closure that maps a point to a value
//! and, when asked, the analytic gradient (normally obtained by running the
//! computation on a fresh [`Tape`](super::Tape) and sweeping backward).

/// One evaluation of the function under test.
pub struct EvalOutput {
    pub value: f64,
    /// Analytic gradient; only requested at the base point.
    pub gradient: Option<Vec<f64>>,
}

impl EvalOutput {
    pub fn value_only(value: f64) -> Self {
        EvalOutput {
            value,
            gradient: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub h: f64,
    pub tol: f64,
    pub value: f64,
    pub entries: Vec<GradCheckEntry>,
    pub max_rel_error: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &GradCheckEntry> {
        let tol = self.tol;
        self.entries
            .iter()
            .filter(move |e| {
                e.rel_error.is_nan() || e.rel_error > tol || !e.numeric.is_finite()
            })
    }
}

/// Compares the analytic gradient of `f` at `point` against central
/// differences with step `h`.
///
/// The error measure per coordinate is |g - g_fd| / max(1, |g_fd|); the
/// check passes when every coordinate stays within `tol` and every
/// evaluation is finite. Non-finite intermediates are reported in the
/// entries rather than raised.
pub fn gradcheck<F>(mut f: F, point: &[f64], h: f64, tol: f64) -> GradCheckReport
where
    F: FnMut(&[f64], bool) -> EvalOutput,
{
    assert!(h > 0.0, "step size must be positive");
    let base = f(point, true);
    let analytic = base
        .gradient
        .expect("gradcheck closure must return a gradient at the base point");
    assert_eq!(
        analytic.len(),
        point.len(),
        "gradient/point length mismatch"
    );

    let mut entries = Vec::with_capacity(point.len());
    let mut max_rel_error = 0.0f64;
    let mut all_ok = base.value.is_finite();

    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let fp = f(&x, false).value;
        x[i] = point[i] - h;
        let fm = f(&x, false).value;
        x[i] = point[i];

        let numeric = (fp - fm) / (2.0 * h);
        let rel_error = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        let mut note = None;
        if !fp.is_finite() || !fm.is_finite() || !analytic[i].is_finite() {
            note = Some("non-finite evaluation".to_string());
            all_ok = false;
        } else if rel_error > tol {
            all_ok = false;
        }
        max_rel_error = max_rel_error.max(rel_error);
        entries.push(GradCheckEntry {
            index: i,
            analytic: analytic[i],
            numeric,
            rel_error,
            note,
        });
    }

    GradCheckReport {
        h,
        tol,
        value: base.value,
        entries,
        max_rel_error,
        passed: all_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn eval_exp_product(x: &[f64], want_grad: bool) -> EvalOutput {
        let tape = Tape::new();
        let a = tape.lift(x[0]).unwrap();
        let b = tape.lift(x[1]).unwrap();
        let out = (a * b).exp() + a.sigmoid();
        if want_grad {
            let g = out.backward();
            EvalOutput {
                value: out.value(),
                gradient: Some(vec![g.wrt(a), g.wrt(b)]),
            }
        } else {
            EvalOutput::value_only(out.value())
        }
    }

    #[test]
    fn accepts_correct_gradients() {
        let report = gradcheck(eval_exp_product, &[0.4, -0.9], 1e-5, 1e-6);
        assert!(report.passed, "max rel err {}", report.max_rel_error);
    }

    #[test]
    fn rejects_wrong_gradients() {
        let report = gradcheck(
            |x, want_grad| {
                let mut out = eval_exp_product(x, want_grad);
                if let Some(g) = out.gradient.as_mut() {
                    g[0] += 0.5;
                }
                out
            },
            &[0.4, -0.9],
            1e-5,
            1e-4,
        );
        assert!(!report.passed);
        assert_eq!(report.failures().count(), 1);
    }
}
