//! Differentiable rasterization of a point cloud.
//!
//! Each point correlates with nearby pixels through an isotropic Gaussian:
//! the correlation probability is the density at the pixel center times the
//! unit pixel area, `q = exp(-r²/2σ²) / (2πσ²)`, clamped just below 1.
//! A pixel's value is the probability that at least one point lies in it,
//! the noisy-or `1 - ∏(1 - q)`, which keeps every pixel in [0, 1] and
//! differentiable in the point coordinates.

use std::f64::consts::PI;

use crate::autodiff::{Scalar, Tape};

use super::{Canvas, IfsError, PointCloud};

/// Footprints are cut off past this many sigmas from the point; see
/// [`rasterize_with_radius`] for the error this introduces.
const DEFAULT_TRUNCATION_SIGMAS: f64 = 4.0;

/// A height×width grid of per-pixel probabilities, row-major, row 0 on top.
#[derive(Debug)]
pub struct ProbImage<'t> {
    width: usize,
    height: usize,
    pixels: Vec<Scalar<'t>>,
}

impl<'t> ProbImage<'t> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> Scalar<'t> {
        assert!(row < self.height && col < self.width, "pixel out of range");
        self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[Scalar<'t>] {
        &self.pixels
    }

    pub fn values(&self) -> Vec<f64> {
        self.pixels.iter().map(|p| p.value()).collect()
    }
}

/// Rasterizes with the default footprint cutoff.
pub fn rasterize<'t>(
    tape: &'t Tape,
    cloud: &PointCloud<'t>,
    sigma: f64,
    canvas: &Canvas,
) -> Result<ProbImage<'t>, IfsError> {
    rasterize_with_radius(tape, cloud, sigma, canvas, DEFAULT_TRUNCATION_SIGMAS)
}

/// Rasterizes, truncating each footprint to a square window reaching
/// `radius_sigmas`·sigma from the point (the window contains the disk of
/// that radius, so the truncation error is at most the disk bound).
/// Untouched pixels stay exactly 0.
pub fn rasterize_with_radius<'t>(
    tape: &'t Tape,
    cloud: &PointCloud<'t>,
    sigma: f64,
    canvas: &Canvas,
    radius_sigmas: f64,
) -> Result<ProbImage<'t>, IfsError> {
    canvas.validate()?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(IfsError::InvalidModel(format!(
            "sigma must be a positive real, got {sigma}"
        )));
    }
    if !(radius_sigmas.is_finite() && radius_sigmas > 0.0) {
        return Err(IfsError::InvalidModel(format!(
            "truncation radius must be a positive real, got {radius_sigmas}"
        )));
    }

    let (sx, bx) = canvas.x_map();
    let (sy, by) = canvas.y_map();
    let neg_half_inv_var = -1.0 / (2.0 * sigma * sigma);
    let log_norm = -(2.0 * PI * sigma * sigma).ln();
    let radius = radius_sigmas * sigma;

    // survival[i] = ∏(1 - q) over the points whose window covers pixel i;
    // None means untouched.
    let mut survival: Vec<Option<Scalar<'t>>> = vec![None; canvas.width * canvas.height];
    for &(x, y) in &cloud.points {
        let px = x * sx + bx;
        let py = y * sy + by;
        // The window is chosen from the forward values; within it, q stays
        // a smooth function of the point.
        let cols = pixel_range(px.value(), radius, canvas.width);
        let rows = pixel_range(py.value(), radius, canvas.height);
        for row in rows.clone() {
            let dy = py - (row as f64 + 0.5);
            let dy2 = dy * dy;
            for col in cols.clone() {
                let dx = px - (col as f64 + 0.5);
                let r2 = dx * dx + dy2;
                let q = (r2 * neg_half_inv_var + log_norm).exp().min_c(1.0 - 1e-9);
                let factor = 1.0 - q;
                let cell = &mut survival[row * canvas.width + col];
                *cell = Some(match *cell {
                    None => factor,
                    Some(product) => product * factor,
                });
            }
        }
    }

    let pixels = survival
        .into_iter()
        .map(|cell| match cell {
            None => tape.constant(0.0),
            Some(product) => 1.0 - product,
        })
        .collect();
    Ok(ProbImage {
        width: canvas.width,
        height: canvas.height,
        pixels,
    })
}

/// Indices of pixels whose centers lie within `radius` of `center`.
fn pixel_range(center: f64, radius: f64, extent: usize) -> std::ops::Range<usize> {
    let lo = (center - radius - 0.5).ceil().max(0.0);
    let hi = (center + radius - 0.5).floor().min(extent as f64 - 1.0);
    if lo > hi || hi < 0.0 {
        return 0..0;
    }
    lo as usize..hi as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{gradcheck, EvalOutput};
    use crate::smooth_ifs::Canvas;

    fn lift_cloud<'t>(tape: &'t Tape, points: &[(f64, f64)]) -> PointCloud<'t> {
        PointCloud {
            points: points
                .iter()
                .map(|&(x, y)| (tape.lift(x).unwrap(), tape.lift(y).unwrap()))
                .collect(),
            truncated: false,
        }
    }

    /// 8x8 canvas over [0,8]² so world coordinates equal pixel coordinates.
    fn pixel_canvas() -> Canvas {
        Canvas::with_world(8, 8, [0.0, 0.0, 8.0, 8.0])
    }

    #[test]
    fn every_pixel_is_a_probability() {
        let tape = Tape::new();
        let cloud = lift_cloud(
            &tape,
            &[(1.2, 3.4), (1.2, 3.4), (6.5, 0.5), (-2.0, 9.0), (4.0, 4.0)],
        );
        let image = rasterize(&tape, &cloud, 1.5, &pixel_canvas()).unwrap();
        for value in image.values() {
            assert!((0.0..=1.0).contains(&value), "pixel {value} out of range");
        }
    }

    #[test]
    fn far_away_points_leave_the_canvas_blank() {
        let tape = Tape::new();
        let cloud = lift_cloud(&tape, &[(500.0, 500.0), (-300.0, 40.0)]);
        let image = rasterize(&tape, &cloud, 1.0, &pixel_canvas()).unwrap();
        assert!(image.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn a_point_on_a_pixel_center_concentrates_there() {
        let tape = Tape::new();
        // With this canvas the row coordinate is 8 - y, so world (4.5, 4.5)
        // sits exactly on the center of row 3, column 4.
        let cloud = lift_cloud(&tape, &[(4.5, 4.5)]);
        let image = rasterize(&tape, &cloud, 0.3, &pixel_canvas()).unwrap();
        let center = image.get(3, 4).value();
        let neighbor = image.get(3, 5).value();
        let corner = image.get(0, 0).value();
        // Density at distance 0 exceeds 1 for sigma = 0.3, so the center
        // pixel sits at the clamp.
        assert!((center - (1.0 - 1e-9)).abs() < 1e-12, "center {center}");
        assert!(neighbor < 0.01, "neighbor {neighbor}");
        assert_eq!(corner, 0.0);
    }

    #[test]
    fn coincident_points_reinforce_a_pixel() {
        let single_tape = Tape::new();
        let single = lift_cloud(&single_tape, &[(4.5, 4.5)]);
        let one = rasterize(&single_tape, &single, 1.0, &pixel_canvas()).unwrap();
        let double_tape = Tape::new();
        let double = lift_cloud(&double_tape, &[(4.5, 4.5), (4.5, 4.5)]);
        let two = rasterize(&double_tape, &double, 1.0, &pixel_canvas()).unwrap();
        let q = one.get(3, 4).value();
        let reinforced = two.get(3, 4).value();
        assert!(reinforced >= q);
        assert!((reinforced - (1.0 - (1.0 - q) * (1.0 - q))).abs() < 1e-15);
    }

    #[test]
    fn widening_the_cutoff_changes_pixels_by_under_1e_4() {
        // Per point, the heaviest dropped correlation is the density just
        // past the cutoff, exp(-8)/(2πσ²) ≈ 2.4e-5 at σ = 1.5, and a pixel
        // loses at most one such term per point, so three points stay well
        // under the 1e-4 budget. Dropped mass adds up linearly, so very
        // dense clouds need a wider window to honor the same bound.
        let canvas = Canvas::new(16, 16);
        let tape = Tape::new();
        let cloud = lift_cloud(&tape, &[(0.2, 0.3), (-0.4, 0.1), (0.1, -0.5)]);
        let narrow = rasterize(&tape, &cloud, 1.5, &canvas).unwrap();
        let wide = rasterize_with_radius(&tape, &cloud, 1.5, &canvas, 8.0).unwrap();
        let worst = narrow
            .values()
            .iter()
            .zip(wide.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "max cutoff error {worst}");
        assert!(worst > 0.0, "cutoff should actually bite");
    }

    #[test]
    fn pixel_gradient_matches_finite_differences() {
        // One pixel's value as a function of a single point, probed well
        // inside the truncation window so the window itself never moves.
        let canvas = pixel_canvas();
        let f = |inputs: &[f64], want_grad: bool| -> EvalOutput {
            let tape = Tape::new();
            let point = (tape.lift(inputs[0]).unwrap(), tape.lift(inputs[1]).unwrap());
            let cloud = PointCloud {
                points: vec![point],
                truncated: false,
            };
            let image = rasterize(&tape, &cloud, 1.0, &canvas).unwrap();
            let pixel = image.get(3, 4);
            if want_grad {
                let grads = pixel.backward();
                EvalOutput {
                    value: pixel.value(),
                    gradient: Some(vec![grads.wrt(point.0), grads.wrt(point.1)]),
                }
            } else {
                EvalOutput::value_only(pixel.value())
            }
        };
        let report = gradcheck(f, &[3.9, 4.3], 1e-5, 1e-4);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn empty_clouds_rasterize_to_zero() {
        let tape = Tape::new();
        let cloud = PointCloud {
            points: vec![],
            truncated: true,
        };
        let image = rasterize(&tape, &cloud, 1.0, &pixel_canvas()).unwrap();
        assert!(image.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bad_sigma_is_rejected() {
        let tape = Tape::new();
        let cloud = lift_cloud(&tape, &[(1.0, 1.0)]);
        assert!(rasterize(&tape, &cloud, 0.0, &pixel_canvas()).is_err());
        assert!(rasterize(&tape, &cloud, f64::NAN, &pixel_canvas()).is_err());
    }
}
