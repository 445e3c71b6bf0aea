//! Differentiable iterated function systems.
//!
//! An IFS applies randomly chosen affine maps to a point over and over; the
//! visited points trace out a fractal. Three choices make the pipeline
//! differentiable end to end:
//!
//! * the random map choices are sampled once, up front, and then treated as
//!   constants, so reruns with the same sequence are bit-identical;
//! * every visited point is kept as a pair of tape [`Scalar`]s, making the
//!   whole cloud a function of the 6·n map parameters;
//! * rasterization correlates each point with nearby pixels through a
//!   Gaussian footprint and aggregates with a noisy-or, yielding an image of
//!   smooth per-pixel probabilities instead of hard point plots.
//!
//! [`fit`] closes the loop: gradient descent on the map parameters against a
//! target image, annealing the footprint width coarse to fine.
//!
//! [`Scalar`]: crate::autodiff::Scalar

mod fit;
mod iterate;
mod model;
mod pgm;
mod raster;
mod sample;

pub use fit::{fit, FitError, FitResult, FitSettings, LossRecord};
pub use iterate::{iterate, iterate_params, PointCloud};
pub use model::{Canvas, IfsModel, ModelFile};
pub use pgm::{GrayImage, PgmError};
pub use raster::{rasterize, rasterize_with_radius, ProbImage};
pub use sample::sample_choices;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IfsError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("choice {index} is map {value} but the model has only {maps} maps")]
    ChoiceOutOfRange {
        index: usize,
        value: u32,
        maps: usize,
    },
    #[error("expected {expected} map weights, got {got}")]
    WrongWeightCount { expected: usize, got: usize },
    #[error("map weights must be non-negative and finite; weight {index} is {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("map weights sum to {sum}, expected 1 within 1e-9")]
    WeightsDontSumToOne { sum: f64 },
    #[error("target has {got} pixels, the {width}x{height} canvas needs {expected}")]
    TargetSizeMismatch {
        width: usize,
        height: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid sigma schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid fit settings: {0}")]
    InvalidSettings(String),
}
