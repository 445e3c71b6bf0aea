//! Gradient-based fitting of map parameters to a target image.
//!
//! Every step rebuilds the full pipeline — iterate, rasterize, mean squared
//! pixel error — on a fresh tape and sweeps backward to the 6·n parameters.
//! The footprint width anneals through a caller-given sigma schedule, coarse
//! to fine: wide footprints pull in gradients from distant pixels early on,
//! narrow ones sharpen detail at the end.

use thiserror::Error;

use crate::autodiff::{Scalar, Tape};
use crate::optim::Adam;

use super::{iterate_params, rasterize, IfsError, IfsModel};

#[derive(Debug, Clone)]
pub struct FitSettings {
    pub steps_per_sigma: usize,
    pub learning_rate: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            steps_per_sigma: 300,
            learning_rate: 0.01,
        }
    }
}

/// Loss before the step was taken, with the sigma it was measured under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub sigma: f64,
    pub loss: f64,
}

#[derive(Debug)]
pub struct FitResult {
    /// Fitted model; its sigma is the last schedule entry.
    pub model: IfsModel,
    pub history: Vec<LossRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Ifs(#[from] IfsError),
    #[error("fitting aborted at step {step}: loss became non-finite")]
    Diverged {
        step: usize,
        /// The last parameter set that still evaluated to a finite loss
        /// (boxed to keep the error variant small).
        model: Box<IfsModel>,
        history: Vec<LossRecord>,
    },
}

/// Minimizes the mean squared pixel error of `model0` rendered against
/// `target` (row-major probabilities matching the model's canvas).
pub fn fit(
    model0: &IfsModel,
    target: &[f64],
    sigma_schedule: &[f64],
    settings: &FitSettings,
) -> Result<FitResult, FitError> {
    model0.validate()?;
    let pixel_count = model0.canvas.width * model0.canvas.height;
    if target.len() != pixel_count {
        return Err(IfsError::TargetSizeMismatch {
            width: model0.canvas.width,
            height: model0.canvas.height,
            expected: pixel_count,
            got: target.len(),
        }
        .into());
    }
    if sigma_schedule.is_empty() {
        return Err(IfsError::InvalidSchedule("schedule is empty".into()).into());
    }
    if let Some(&sigma) = sigma_schedule
        .iter()
        .find(|s| !(s.is_finite() && **s > 0.0))
    {
        return Err(IfsError::InvalidSchedule(format!(
            "sigma must be a positive real, got {sigma}"
        ))
        .into());
    }
    if settings.steps_per_sigma == 0 {
        return Err(IfsError::InvalidSettings("steps_per_sigma must be at least 1".into()).into());
    }
    if !(settings.learning_rate.is_finite() && settings.learning_rate > 0.0) {
        return Err(IfsError::InvalidSettings(format!(
            "learning rate must be a positive real, got {}",
            settings.learning_rate
        ))
        .into());
    }

    let mut warnings = Vec::new();
    for pair in sigma_schedule.windows(2) {
        if pair[1] > pair[0] {
            warnings.push(format!(
                "sigma schedule increases from {} to {}; annealing normally runs coarse to fine",
                pair[0], pair[1]
            ));
        }
    }

    let mut params = model0.flat_params();
    let mut last_finite = params.clone();
    let mut adam = Adam::new(settings.learning_rate, params.len());
    let mut history: Vec<LossRecord> =
        Vec::with_capacity(sigma_schedule.len() * settings.steps_per_sigma);
    let mut tape = Tape::new();

    let diverged = |step: usize, params: &[f64], history: Vec<LossRecord>| FitError::Diverged {
        step,
        model: Box::new(with_params(model0, params, *sigma_schedule.last().unwrap())),
        history,
    };

    let mut step = 0;
    for &sigma in sigma_schedule {
        for _ in 0..settings.steps_per_sigma {
            tape.reset();
            let lifted: Result<Vec<Scalar>, _> = params.iter().map(|&p| tape.lift(p)).collect();
            let lifted = match lifted {
                Ok(lifted) => lifted,
                Err(_) => return Err(diverged(step, &last_finite, history)),
            };
            let cloud = iterate_params(
                &tape,
                &lifted,
                &model0.choice_sequence,
                model0.initial_point,
            )?;
            let image = rasterize(&tape, &cloud, sigma, &model0.canvas)?;

            let mut sum = tape.constant(0.0);
            for (pixel, &want) in image.pixels().iter().zip(target) {
                let residual = *pixel - want;
                sum = sum + residual * residual;
            }
            let loss = sum / pixel_count as f64;
            if !loss.value().is_finite() {
                return Err(diverged(step, &last_finite, history));
            }
            history.push(LossRecord {
                step,
                sigma,
                loss: loss.value(),
            });

            let grads = loss.backward();
            let gradient: Vec<f64> = lifted.iter().map(|&p| grads.wrt(p)).collect();
            if gradient.iter().any(|g| !g.is_finite()) {
                return Err(diverged(step, &last_finite, history));
            }
            adam.step(&mut params, &gradient);
            if params.iter().all(|p| p.is_finite()) {
                last_finite.copy_from_slice(&params);
            }
            step += 1;
        }
    }

    if params.iter().any(|p| !p.is_finite()) {
        return Err(diverged(step, &last_finite, history));
    }
    Ok(FitResult {
        model: with_params(model0, &params, *sigma_schedule.last().unwrap()),
        history,
        warnings,
    })
}

fn with_params(template: &IfsModel, flat: &[f64], sigma: f64) -> IfsModel {
    let mut model = template.clone();
    model.params = flat
        .chunks_exact(6)
        .map(|row| {
            let mut a = [0.0; 6];
            a.copy_from_slice(row);
            a
        })
        .collect();
    model.sigma = sigma;
    model
}
