//! smoothlang: differentiable interpretation of WHILE-programs plus smooth
//! relaxations of classic algorithmic building blocks.
//!
//! The crate is organised around a scalar reverse-mode tape:
//!
//! * [`autodiff`] — the tape, scalar arithmetic, and a central-difference
//!   gradient checker;
//! * [`while_lang`] — parser, formatter, and exact (discrete) interpreter
//!   for a minimal Turing-complete WHILE language;
//! * [`interp`] — smooth interpretation of those programs, where loop exits
//!   become execution probabilities and assignments blend old and new
//!   values, with optional per-assignment calibration;
//! * [`smooth_ops`] — differentiable sorting, weighted soft max/min,
//!   medians, and finite differences;
//! * [`smooth_ifs`] — iterated function systems with Gaussian-smoothed
//!   rasterization and gradient-based parameter fitting;
//! * [`cli`] — the `smoothlang` command-line front end.

pub mod autodiff;
pub mod cli;
pub mod interp;
pub mod optim;
pub mod smooth_ifs;
pub mod smooth_ops;
pub mod while_lang;
