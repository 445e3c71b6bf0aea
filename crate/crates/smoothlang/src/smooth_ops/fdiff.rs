//! Finite differences as a differentiable layer: adjacent differences
//! along an axis, an optional mean-shift to zero, and optional trailing
//! zero-padding to restore the input shape. The processing order is fixed:
//! difference, then normalize, then pad (the appended zero is never part
//! of the normalized mass).

use super::OpsError;
use crate::autodiff::{Scalar, Tape};

pub fn finite_differences<'t>(
    xs: &[Scalar<'t>],
    normalize: bool,
    pad: bool,
) -> Result<Vec<Scalar<'t>>, OpsError> {
    if xs.len() < 2 {
        return Err(OpsError::TooShort {
            needed: 2,
            got: xs.len(),
        });
    }
    for (index, x) in xs.iter().enumerate() {
        if !x.value().is_finite() {
            return Err(OpsError::NonFiniteInput { index });
        }
    }
    let tape = xs[0].tape();
    let mut out: Vec<Scalar<'t>> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    if normalize {
        shift_mean_to_zero(&mut out);
    }
    if pad {
        out.push(tape.constant(0.0));
    }
    Ok(out)
}

fn shift_mean_to_zero(out: &mut [Scalar]) {
    let sum = out[1..].iter().fold(out[0], |acc, &d| acc + d);
    let mean = sum / out.len() as f64;
    for d in out.iter_mut() {
        *d = *d - mean;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Down the rows: `out[y][x] = in[y+1][x] - in[y][x]`.
    Rows,
    /// Across the columns: `out[y][x] = in[y][x+1] - in[y][x]`.
    Columns,
}

impl Axis {
    pub fn from_index(axis: usize) -> Result<Self, OpsError> {
        match axis {
            0 => Ok(Axis::Rows),
            1 => Ok(Axis::Columns),
            _ => Err(OpsError::AxisOutOfRange { axis, dims: 2 }),
        }
    }
}

/// Row-major rectangular grid of tape scalars.
#[derive(Debug, Clone)]
pub struct ScalarGrid<'t> {
    width: usize,
    height: usize,
    data: Vec<Scalar<'t>>,
}

impl<'t> ScalarGrid<'t> {
    pub fn from_rows(rows: Vec<Vec<Scalar<'t>>>) -> Result<Self, OpsError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(OpsError::EmptyInput);
        }
        let width = rows[0].len();
        let height = rows.len();
        let mut data = Vec::with_capacity(width * height);
        for row in rows {
            if row.len() != width {
                return Err(OpsError::LengthMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(ScalarGrid {
            width,
            height,
            data,
        })
    }

    pub fn lift(tape: &'t Tape, rows: &[Vec<f64>]) -> Result<Self, OpsError> {
        let lifted = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        tape.lift(v)
                            .map_err(|_| OpsError::NonFiniteInput { index: 0 })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        ScalarGrid::from_rows(lifted)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> Scalar<'t> {
        self.data[y * self.width + x]
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        (0..self.height)
            .map(|y| (0..self.width).map(|x| self.get(x, y).value()).collect())
            .collect()
    }
}

pub fn finite_differences_grid<'t>(
    grid: &ScalarGrid<'t>,
    axis: Axis,
    normalize: bool,
    pad: bool,
) -> Result<ScalarGrid<'t>, OpsError> {
    let extent = match axis {
        Axis::Rows => grid.height,
        Axis::Columns => grid.width,
    };
    if extent < 2 {
        return Err(OpsError::TooShort {
            needed: 2,
            got: extent,
        });
    }
    let tape = grid.data[0].tape();
    let (out_w, out_h) = match axis {
        Axis::Rows => (grid.width, grid.height - 1),
        Axis::Columns => (grid.width - 1, grid.height),
    };
    let mut data: Vec<Scalar<'t>> = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let d = match axis {
                Axis::Rows => grid.get(x, y + 1) - grid.get(x, y),
                Axis::Columns => grid.get(x + 1, y) - grid.get(x, y),
            };
            data.push(d);
        }
    }
    if normalize {
        shift_mean_to_zero(&mut data);
    }
    let (final_w, final_h, data) = if pad {
        let zero = tape.constant(0.0);
        match axis {
            Axis::Rows => {
                let mut padded = data;
                padded.extend(std::iter::repeat_n(zero, out_w));
                (out_w, out_h + 1, padded)
            }
            Axis::Columns => {
                let mut padded = Vec::with_capacity((out_w + 1) * out_h);
                for y in 0..out_h {
                    padded.extend_from_slice(&data[y * out_w..(y + 1) * out_w]);
                    padded.push(zero);
                }
                (out_w + 1, out_h, padded)
            }
        }
    } else {
        (out_w, out_h, data)
    };
    Ok(ScalarGrid {
        width: final_w,
        height: final_h,
        data,
    })
}
