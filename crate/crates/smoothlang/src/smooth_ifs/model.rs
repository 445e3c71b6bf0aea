//! Model description and its JSON file format.

use serde::{Deserialize, Serialize};

use super::{sample_choices, IfsError};

/// Raster target: a pixel grid plus the world rectangle it covers.
///
/// World x maps left-to-right onto columns; world y maps bottom-to-top, so
/// row 0 is the top edge (`y_max`) as in common image formats.
#[derive(Debug, Clone, PartialEq)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    /// `[x_min, y_min, x_max, y_max]`.
    pub world: [f64; 4],
}

impl Canvas {
    pub fn new(width: usize, height: usize) -> Canvas {
        Canvas {
            width,
            height,
            world: [-1.0, -1.0, 1.0, 1.0],
        }
    }

    pub fn with_world(width: usize, height: usize, world: [f64; 4]) -> Canvas {
        Canvas {
            width,
            height,
            world,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), IfsError> {
        let [x0, y0, x1, y1] = self.world;
        if self.width == 0 || self.height == 0 {
            return Err(IfsError::InvalidModel("canvas has zero extent".into()));
        }
        if !self.world.iter().all(|v| v.is_finite()) || x1 <= x0 || y1 <= y0 {
            return Err(IfsError::InvalidModel(format!(
                "canvas world rectangle {:?} is degenerate",
                self.world
            )));
        }
        Ok(())
    }

    /// Affine world→pixel map for x: `col = x*scale + offset`.
    pub(crate) fn x_map(&self) -> (f64, f64) {
        let [x0, _, x1, _] = self.world;
        let scale = self.width as f64 / (x1 - x0);
        (scale, -x0 * scale)
    }

    /// Affine world→pixel map for y: `row = y*scale + offset` (flips).
    pub(crate) fn y_map(&self) -> (f64, f64) {
        let [_, y0, _, y1] = self.world;
        let scale = self.height as f64 / (y1 - y0);
        (-scale, y1 * scale)
    }
}

/// A fully specified system: map parameters, the pre-committed choice
/// sequence, and how to rasterize the resulting cloud.
///
/// Each map row holds `[a1..a6]` of
/// `f(x, y) = (x + a1 + a2*x + a3*y,  y + a4 + a5*x + a6*y)`.
#[derive(Debug, Clone)]
pub struct IfsModel {
    pub params: Vec<[f64; 6]>,
    pub choice_sequence: Vec<u32>,
    pub initial_point: (f64, f64),
    /// Gaussian footprint width for rasterization, in pixels.
    pub sigma: f64,
    pub canvas: Canvas,
}

impl IfsModel {
    pub fn validate(&self) -> Result<(), IfsError> {
        if self.params.is_empty() {
            return Err(IfsError::InvalidModel("need at least one map".into()));
        }
        if self.choice_sequence.is_empty() {
            return Err(IfsError::InvalidModel("need at least one iteration".into()));
        }
        let finite = self
            .params
            .iter()
            .flatten()
            .chain([&self.initial_point.0, &self.initial_point.1])
            .all(|v| v.is_finite());
        if !finite {
            return Err(IfsError::InvalidModel(
                "parameters and initial point must be finite".into(),
            ));
        }
        let maps = self.params.len();
        for (index, &value) in self.choice_sequence.iter().enumerate() {
            if value as usize >= maps {
                return Err(IfsError::ChoiceOutOfRange { index, value, maps });
            }
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(IfsError::InvalidModel(format!(
                "sigma must be a positive real, got {}",
                self.sigma
            )));
        }
        self.canvas.validate()
    }

    /// Map parameters flattened row-major, the optimizer's view.
    pub fn flat_params(&self) -> Vec<f64> {
        self.params.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanvasSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<[f64; 4]>,
}

/// On-disk model: the choice sequence is stored as `(T, seed)` and re-sampled
/// on load, keeping files small and runs reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    /// Row-major `6*n` map parameters.
    pub params: Vec<f64>,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub sigma: f64,
    pub canvas: CanvasSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_point: Option<(f64, f64)>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> serde_json::Result<ModelFile> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn into_model(&self) -> Result<IfsModel, IfsError> {
        if self.params.len() != 6 * self.n {
            return Err(IfsError::InvalidModel(format!(
                "expected {} parameters for {} maps, got {}",
                6 * self.n,
                self.n,
                self.params.len()
            )));
        }
        let params = self
            .params
            .chunks_exact(6)
            .map(|row| {
                let mut a = [0.0; 6];
                a.copy_from_slice(row);
                a
            })
            .collect();
        let choice_sequence = sample_choices(self.n, self.t, self.seed, self.weights.as_deref())?;
        let canvas = match self.canvas.world {
            Some(world) => Canvas::with_world(self.canvas.width, self.canvas.height, world),
            None => Canvas::new(self.canvas.width, self.canvas.height),
        };
        let model = IfsModel {
            params,
            choice_sequence,
            initial_point: self.initial_point.unwrap_or((0.0, 0.0)),
            sigma: self.sigma,
            canvas,
        };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{"n": 1, "params": [1, 0, 0, 0, 0, 0], "T": 3, "seed": 0,
            "sigma": 1.0, "canvas": {"width": 8, "height": 8}}"#
    }

    #[test]
    fn minimal_file_fills_in_defaults() {
        let file = ModelFile::from_json(minimal_json()).unwrap();
        let model = file.into_model().unwrap();
        assert_eq!(model.params, vec![[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]]);
        assert_eq!(model.choice_sequence, vec![0, 0, 0]);
        assert_eq!(model.initial_point, (0.0, 0.0));
        assert_eq!(model.canvas.world, [-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn json_roundtrips_through_the_file_struct() {
        let file = ModelFile::from_json(minimal_json()).unwrap();
        let again = ModelFile::from_json(&file.to_json()).unwrap();
        assert_eq!(file.params, again.params);
        assert_eq!(file.t, again.t);
        assert_eq!(file.seed, again.seed);
        assert!(again.weights.is_none());
    }

    #[test]
    fn param_count_must_match_map_count() {
        let mut file = ModelFile::from_json(minimal_json()).unwrap();
        file.params.pop();
        assert!(matches!(file.into_model(), Err(IfsError::InvalidModel(_))));
    }

    #[test]
    fn degenerate_canvases_are_rejected() {
        let canvas = Canvas::with_world(8, 8, [1.0, -1.0, -1.0, 1.0]);
        assert!(canvas.validate().is_err());
        assert!(Canvas::new(0, 8).validate().is_err());
    }

    #[test]
    fn out_of_range_choices_are_rejected() {
        let model = IfsModel {
            params: vec![[0.0; 6]],
            choice_sequence: vec![0, 1],
            initial_point: (0.0, 0.0),
            sigma: 1.0,
            canvas: Canvas::new(4, 4),
        };
        assert!(matches!(
            model.validate(),
            Err(IfsError::ChoiceOutOfRange {
                index: 1,
                value: 1,
                maps: 1
            })
        ));
    }

    #[test]
    fn pixel_maps_hit_the_canvas_corners() {
        let canvas = Canvas::with_world(10, 20, [-3.0, 0.0, 3.0, 10.0]);
        let (sx, bx) = canvas.x_map();
        let (sy, by) = canvas.y_map();
        assert_eq!(-3.0 * sx + bx, 0.0);
        assert_eq!(3.0 * sx + bx, 10.0);
        assert_eq!(10.0 * sy + by, 0.0);
        assert_eq!(0.0 * sy + by, 20.0);
    }
}
