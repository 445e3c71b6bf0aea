//! Data-driven calibration of smoothed programs.
//!
//! Smoothing biases results: blended assignments and truncated loops pull
//! outputs away from the exact semantics. Calibration compensates by
//! learning one affine map `v -> w*v + b` per assignment statement,
//! minimizing squared error against reference outputs over a dataset of
//! input/output pairs. The whole pipeline is differentiated end to end, so
//! the weights train by plain gradient descent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{run_smooth_prepared, Calibration, Grade, InterpError, SmoothConfig};
use crate::autodiff::{Scalar, Tape};
use crate::optim::Adam;
use crate::while_lang::{Program, Var};

/// One supervised example: variable bindings and the output `x0` should
/// reach under the reference semantics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub inputs: Vec<(Var, f64)>,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    pub steps: usize,
    pub learning_rate: f64,
    /// Penalty weight on the distance from the identity calibration,
    /// `sum((w - 1)^2 + b^2)`.
    pub regularization: f64,
}

impl Default for OptimizerSettings {
    // The learning rate is deliberately tiny. A loop exits once its
    // probability falls below epsilon, and the probability at the near-zero
    // pass of a drifting counter scales like (steepness * drift)^2 / 2, so
    // the drift a counter tolerates before runs stop exiting crisply is
    // about sqrt(2 * epsilon) / steepness -- roughly 1e-4 at the default
    // epsilon of 1e-7. Calibration drift on a decrement compounds through
    // every iteration, amplifying it further by the loop trip count. Adam's
    // unit-scaled steps move each parameter by the full learning rate, so
    // the rate itself must sit well below that edge or the very first step
    // saturates the loops and the loss signal dies.
    fn default() -> Self {
        OptimizerSettings {
            steps: 500,
            learning_rate: 1e-5,
            regularization: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    /// The best-scoring parameter vector visited during training, not
    /// necessarily the final iterate.
    pub calibration: Calibration,
    /// Training loss at every parameter vector visited: the loss before
    /// each step plus the loss of the final iterate (`steps + 1` entries).
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("calibration needs at least one sample")]
    EmptyDataset,
    #[error("calibration trains on the infinitely differentiable grade; got {0:?}")]
    WrongGrade(Grade),
    #[error("invalid optimizer settings: {0}")]
    InvalidSettings(String),
    #[error("sample {index} contains a non-finite value")]
    NonFiniteSample { index: usize },
    #[error("training diverged at step {step} (loss became non-finite)")]
    Diverged { step: usize, loss_history: Vec<f64> },
    #[error(transparent)]
    Interp(#[from] InterpError),
}

/// Fits a [`Calibration`] for `program` to `dataset`. The interpreter runs
/// under `config` (grade must be [`Grade::CInf`]); any calibration already
/// present in `config` is ignored in favor of the trained parameters.
///
/// Training keeps the lowest-loss iterate seen, so a late excursion into a
/// bad region (for example one that stops loop counters from draining)
/// cannot spoil the returned calibration.
pub fn calibrate(
    program: &Program,
    dataset: &[CalibrationSample],
    config: &SmoothConfig,
    settings: &OptimizerSettings,
) -> Result<CalibrationOutcome, CalibrateError> {
    if dataset.is_empty() {
        return Err(CalibrateError::EmptyDataset);
    }
    if config.grade != Grade::CInf {
        return Err(CalibrateError::WrongGrade(config.grade));
    }
    if !settings.learning_rate.is_finite() || settings.learning_rate < 0.0 {
        return Err(CalibrateError::InvalidSettings(format!(
            "learning rate must be finite and non-negative, got {}",
            settings.learning_rate
        )));
    }
    if !settings.regularization.is_finite() || settings.regularization < 0.0 {
        return Err(CalibrateError::InvalidSettings(format!(
            "regularization must be finite and non-negative, got {}",
            settings.regularization
        )));
    }
    for (index, sample) in dataset.iter().enumerate() {
        let finite = sample.target.is_finite() && sample.inputs.iter().all(|(_, x)| x.is_finite());
        if !finite {
            return Err(CalibrateError::NonFiniteSample { index });
        }
    }

    let mut run_config = config.clone();
    run_config.calibration = None;
    run_config.record_p_history = false;

    // Interleaved (weight, bias) per assignment, starting at the identity.
    let assignments = program.assignment_count();
    let mut params: Vec<f64> = Vec::with_capacity(2 * assignments);
    for _ in 0..assignments {
        params.push(1.0);
        params.push(0.0);
    }

    let mut adam = Adam::new(settings.learning_rate, params.len());
    let mut loss_history = Vec::with_capacity(settings.steps + 1);
    let mut best_loss = f64::INFINITY;
    let mut best_params = params.clone();

    for step in 0..=settings.steps {
        let tape = Tape::new();
        let mut pairs: Vec<(Scalar, Scalar)> = Vec::with_capacity(assignments);
        for chunk in params.chunks_exact(2) {
            let lifted = tape
                .lift(chunk[0])
                .and_then(|w| tape.lift(chunk[1]).map(|b| (w, b)));
            match lifted {
                Ok(pair) => pairs.push(pair),
                Err(_) => {
                    return Err(CalibrateError::Diverged { step, loss_history });
                }
            }
        }

        let mut loss = tape.constant(0.0);
        for sample in dataset {
            let inputs: Vec<(Var, Scalar)> = sample
                .inputs
                .iter()
                .map(|&(var, x)| (var, tape.constant(x)))
                .collect();
            let run = run_smooth_prepared(&tape, program, &inputs, &run_config, Some(&pairs))?;
            let residual = run.output() - sample.target;
            loss = loss + residual * residual;
        }
        loss = loss / dataset.len() as f64;
        if settings.regularization > 0.0 {
            let mut drift = tape.constant(0.0);
            for &(w, b) in &pairs {
                let dw = w - 1.0;
                drift = drift + dw * dw + b * b;
            }
            loss = loss + settings.regularization * drift;
        }

        let loss_value = loss.value();
        if !loss_value.is_finite() {
            return Err(CalibrateError::Diverged { step, loss_history });
        }
        loss_history.push(loss_value);
        if loss_value < best_loss {
            best_loss = loss_value;
            best_params.copy_from_slice(&params);
        }
        if step == settings.steps {
            break;
        }

        let grads = loss.backward();
        let mut gradient = Vec::with_capacity(params.len());
        for &(w, b) in &pairs {
            gradient.push(grads.wrt(w));
            gradient.push(grads.wrt(b));
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(CalibrateError::Diverged { step, loss_history });
        }
        adam.step(&mut params, &gradient);
    }

    let pairs = best_params
        .chunks_exact(2)
        .map(|chunk| (chunk[0], chunk[1]))
        .collect();
    Ok(CalibrationOutcome {
        calibration: Calibration { pairs },
        loss_history,
    })
}
