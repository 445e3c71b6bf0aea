//! Forward generation of the point cloud.

use crate::autodiff::{Scalar, Tape};

use super::{IfsError, IfsModel};

/// Coordinates beyond this magnitude truncate the cloud: far outside any
/// reasonable canvas the points contribute nothing to the raster, and
/// cutting early keeps runaway parameter regions finite during fitting.
const DIVERGENCE_LIMIT: f64 = 1e6;

/// Every point the system visits, in visit order. The initial point is the
/// seed and is not part of the cloud; point `t` is `f_{c_t}(point_{t-1})`.
#[derive(Debug)]
pub struct PointCloud<'t> {
    pub points: Vec<(Scalar<'t>, Scalar<'t>)>,
    /// True when the divergence guard cut the walk short.
    pub truncated: bool,
}

/// Runs `model` with its parameters lifted as tape constants.
pub fn iterate<'t>(tape: &'t Tape, model: &IfsModel) -> Result<PointCloud<'t>, IfsError> {
    model.validate()?;
    let params: Vec<Scalar<'t>> = model
        .params
        .iter()
        .flatten()
        .map(|&a| tape.constant(a))
        .collect();
    iterate_params(tape, &params, &model.choice_sequence, model.initial_point)
}

/// Runs the system on caller-provided parameter scalars (flattened `6*n`,
/// row-major), so the cloud is differentiable w.r.t. them. The op order per
/// step is fixed, making repeated runs bit-identical.
pub fn iterate_params<'t>(
    tape: &'t Tape,
    params: &[Scalar<'t>],
    choices: &[u32],
    initial: (f64, f64),
) -> Result<PointCloud<'t>, IfsError> {
    if params.is_empty() || !params.len().is_multiple_of(6) {
        return Err(IfsError::InvalidModel(format!(
            "expected a positive multiple of 6 parameters, got {}",
            params.len()
        )));
    }
    let maps = params.len() / 6;
    if let Some((index, &value)) = choices
        .iter()
        .enumerate()
        .find(|(_, c)| **c as usize >= maps)
    {
        return Err(IfsError::ChoiceOutOfRange { index, value, maps });
    }

    let mut x = tape.constant(initial.0);
    let mut y = tape.constant(initial.1);
    let mut points = Vec::with_capacity(choices.len());
    let mut truncated = false;
    for &choice in choices {
        let a = &params[6 * choice as usize..6 * choice as usize + 6];
        let nx = ((x + a[0]) + a[1] * x) + a[2] * y;
        let ny = ((y + a[3]) + a[4] * x) + a[5] * y;
        // Written to catch NaN too: !(NaN <= limit) is true.
        let diverged =
            !(nx.value().abs() <= DIVERGENCE_LIMIT && ny.value().abs() <= DIVERGENCE_LIMIT);
        if diverged {
            truncated = true;
            break;
        }
        points.push((nx, ny));
        x = nx;
        y = ny;
    }
    Ok(PointCloud { points, truncated })
}
