//! Plain (text) portable graymap I/O.
//!
//! The P2 format is used for golden files: byte-exact, diffable, and
//! readable by standard tooling. Probabilities quantize to 8 bits only at
//! write time.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PgmError {
    #[error("not a plain graymap: expected magic P2, got {0:?}")]
    BadMagic(String),
    #[error("malformed graymap: {0}")]
    Malformed(String),
}

/// 8-bit grayscale image, row-major, row 0 on top.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> GrayImage {
        assert_eq!(pixels.len(), width * height, "pixel count mismatch");
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    /// Quantizes probabilities to gray levels: `round(p * 255)`, clamped.
    pub fn from_probabilities(width: usize, height: usize, probabilities: &[f64]) -> GrayImage {
        assert_eq!(probabilities.len(), width * height, "pixel count mismatch");
        let pixels = probabilities
            .iter()
            .map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn to_probabilities(&self) -> Vec<f64> {
        self.pixels.iter().map(|&v| v as f64 / 255.0).collect()
    }

    /// Renders the P2 text form, sample lines wrapped at 70 columns.
    pub fn to_pgm_string(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        let mut line = String::new();
        for &value in &self.pixels {
            let token_len = if value >= 100 {
                3
            } else if value >= 10 {
                2
            } else {
                1
            };
            if !line.is_empty() && line.len() + 1 + token_len > 70 {
                out.push_str(&line);
                out.push('\n');
                line.clear();
            }
            if !line.is_empty() {
                line.push(' ');
            }
            let _ = write!(line, "{value}");
        }
        if !line.is_empty() {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Parses P2 text; `#` starts a comment running to end of line. Samples
    /// are rescaled from the declared maxval to 0..=255.
    pub fn from_pgm_str(text: &str) -> Result<GrayImage, PgmError> {
        let mut tokens = text.lines().flat_map(|line| {
            let content = line.split('#').next().unwrap_or("");
            content.split_whitespace()
        });
        let magic = tokens
            .next()
            .ok_or_else(|| PgmError::Malformed("empty file".into()))?;
        if magic != "P2" {
            return Err(PgmError::BadMagic(magic.to_string()));
        }
        let mut header = |name: &str| -> Result<usize, PgmError> {
            tokens
                .next()
                .ok_or_else(|| PgmError::Malformed(format!("missing {name}")))?
                .parse::<usize>()
                .map_err(|_| PgmError::Malformed(format!("unreadable {name}")))
        };
        let width = header("width")?;
        let height = header("height")?;
        let maxval = header("maxval")?;
        if width == 0 || height == 0 {
            return Err(PgmError::Malformed("zero image extent".into()));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(PgmError::Malformed(format!("maxval {maxval} out of range")));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for token in tokens.by_ref() {
            let value: usize = token
                .parse()
                .map_err(|_| PgmError::Malformed(format!("unreadable sample {token:?}")))?;
            if value > maxval {
                return Err(PgmError::Malformed(format!(
                    "sample {value} exceeds maxval {maxval}"
                )));
            }
            pixels.push(((value * 255 + maxval / 2) / maxval) as u8);
            if pixels.len() == width * height {
                break;
            }
        }
        if pixels.len() != width * height {
            return Err(PgmError::Malformed(format!(
                "expected {} samples, got {}",
                width * height,
                pixels.len()
            )));
        }
        if tokens.next().is_some() {
            return Err(PgmError::Malformed("trailing samples".into()));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_the_golden_text_form() {
        let image = GrayImage::new(4, 2, vec![0, 9, 120, 255, 42, 7, 0, 200]);
        assert_eq!(
            image.to_pgm_string(),
            "P2\n4 2\n255\n0 9 120 255 42 7 0 200\n"
        );
    }

    #[test]
    fn text_form_roundtrips() {
        let probabilities: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let image = GrayImage::from_probabilities(8, 8, &probabilities);
        let parsed = GrayImage::from_pgm_str(&image.to_pgm_string()).unwrap();
        assert_eq!(parsed, image);
    }

    #[test]
    fn long_rows_wrap_before_70_columns() {
        let image = GrayImage::new(40, 2, vec![255; 80]);
        let text = image.to_pgm_string();
        assert!(text.lines().all(|line| line.len() <= 70));
        assert_eq!(GrayImage::from_pgm_str(&text).unwrap(), image);
    }

    #[test]
    fn comments_and_odd_whitespace_parse() {
        let text = "P2 # magic\n# a comment line\n 2 2\n15\n0 15\n\t7 1 # done\n";
        let image = GrayImage::from_pgm_str(text).unwrap();
        assert_eq!(image.width, 2);
        // maxval 15 rescales to the 8-bit range.
        assert_eq!(image.pixels, vec![0, 255, 119, 17]);
    }

    #[test]
    fn quantization_rounds_and_clamps() {
        let image = GrayImage::from_probabilities(4, 1, &[0.0, 0.5, 1.0, 1.7]);
        assert_eq!(image.pixels, vec![0, 128, 255, 255]);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert_eq!(
            GrayImage::from_pgm_str("P5\n1 1\n255\n0\n"),
            Err(PgmError::BadMagic("P5".into()))
        );
        assert!(GrayImage::from_pgm_str("P2\n2 2\n255\n1 2 3\n").is_err());
        assert!(GrayImage::from_pgm_str("P2\n1 1\n255\n1 2\n").is_err());
        assert!(GrayImage::from_pgm_str("P2\n1 1\n10\n11\n").is_err());
        assert!(GrayImage::from_pgm_str("").is_err());
    }
}
