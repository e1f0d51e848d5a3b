//! Color-attribute lookup table.
//!
//! Resource layout: 32768 rows x 10 columns of little-endian `f32`, row-major.
//! Row index for an RGB triple is `(r >> 3) + 32 * (g >> 3) + 1024 * (b >> 3)`.
//! Each row holds the probabilities of the first ten basic color names
//! (black, blue, brown, grey, green, orange, pink, purple, red, white); the
//! eleventh (yellow) is implied by the remainder.
//!
//! The bundled table is produced by [`ColorNameTable::prototype`], a soft
//! nearest-prototype assignment in RGB space.

use std::fs;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

pub const CN_CHANNELS: usize = 10;
pub const CN_ROWS: usize = 32 * 32 * 32;
pub const CN_BYTES: usize = CN_ROWS * CN_CHANNELS * 4;

static BUNDLED: &[u8] = include_bytes!("../../resources/color_names.bin");

const PROTOTYPES: [[f64; 3]; 11] = [
    [0.0, 0.0, 0.0],       // black
    [30.0, 60.0, 220.0],   // blue
    [130.0, 80.0, 40.0],   // brown
    [128.0, 128.0, 128.0], // grey
    [40.0, 170.0, 50.0],   // green
    [245.0, 140.0, 20.0],  // orange
    [245.0, 160.0, 200.0], // pink
    [130.0, 40.0, 160.0],  // purple
    [215.0, 30.0, 30.0],   // red
    [255.0, 255.0, 255.0], // white
    [240.0, 230.0, 40.0],  // yellow
];
const PROTOTYPE_SIGMA: f64 = 55.0;

#[derive(Clone, PartialEq)]
pub struct ColorNameTable {
    rows: Vec<[f32; CN_CHANNELS]>,
}

impl std::fmt::Debug for ColorNameTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ColorNameTable").field("rows", &self.rows.len()).finish()
    }
}

impl ColorNameTable {
    /// The table compiled into the library, shared process-wide.
    pub fn bundled() -> Arc<ColorNameTable> {
        static TABLE: OnceLock<Arc<ColorNameTable>> = OnceLock::new();
        TABLE
            .get_or_init(|| {
                Arc::new(
                    ColorNameTable::from_bytes(BUNDLED, Path::new("<bundled>"))
                        .expect("bundled color-name table is well formed"),
                )
            })
            .clone()
    }

    pub fn from_file(path: &Path) -> Result<ColorNameTable> {
        let bytes = fs::read(path).map_err(|e| Error::LookupTable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        ColorNameTable::from_bytes(&bytes, path)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<ColorNameTable> {
        if bytes.len() != CN_BYTES {
            return Err(Error::LookupTable {
                path: origin.to_path_buf(),
                reason: format!("expected {CN_BYTES} bytes, found {}", bytes.len()),
            });
        }
        let mut rows = Vec::with_capacity(CN_ROWS);
        for chunk in bytes.chunks_exact(CN_CHANNELS * 4) {
            let mut row = [0f32; CN_CHANNELS];
            for (slot, b) in row.iter_mut().zip(chunk.chunks_exact(4)) {
                *slot = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::LookupTable {
                    path: origin.to_path_buf(),
                    reason: "non-finite entry".into(),
                });
            }
            rows.push(row);
        }
        Ok(ColorNameTable { rows })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.rows
            .iter()
            .flat_map(|row| row.iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    /// Soft assignment of each quantized RGB bin to eleven color prototypes.
    pub fn prototype() -> ColorNameTable {
        let denom = 2.0 * PROTOTYPE_SIGMA * PROTOTYPE_SIGMA;
        let rows = (0..CN_ROWS)
            .map(|idx| {
                let rgb = [
                    ((idx & 31) * 8 + 4) as f64,
                    (((idx >> 5) & 31) * 8 + 4) as f64,
                    (((idx >> 10) & 31) * 8 + 4) as f64,
                ];
                let logits: Vec<f64> = PROTOTYPES
                    .iter()
                    .map(|p| {
                        let d2: f64 = p.iter().zip(&rgb).map(|(a, b)| (a - b) * (a - b)).sum();
                        -d2 / denom
                    })
                    .collect();
                let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = weights.iter().sum();
                let mut row = [0f32; CN_CHANNELS];
                for (slot, w) in row.iter_mut().zip(&weights) {
                    *slot = (w / total) as f32;
                }
                row
            })
            .collect();
        ColorNameTable { rows }
    }

    pub fn index(r: u8, g: u8, b: u8) -> usize {
        (r as usize >> 3) + 32 * (g as usize >> 3) + 1024 * (b as usize >> 3)
    }

    pub fn lookup(&self, r: u8, g: u8, b: u8) -> &[f32; CN_CHANNELS] {
        &self.rows[Self::index(r, g, b)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_matches_generator() {
        let bundled = ColorNameTable::bundled();
        let generated = ColorNameTable::prototype();
        for (a, b) in bundled.rows.iter().zip(&generated.rows) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rows_are_sub_stochastic() {
        let t = ColorNameTable::bundled();
        for row in &t.rows {
            let s: f32 = row.iter().sum();
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!(s <= 1.0 + 1e-5);
        }
        // pure red lands on the red channel
        let red = t.lookup(215, 30, 30);
        let argmax = red.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax, 8);
    }

    #[test]
    fn file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.bin");
        assert!(matches!(
            ColorNameTable::from_file(&missing),
            Err(Error::LookupTable { .. })
        ));
        let short = dir.path().join("short.bin");
        fs::write(&short, [0u8; 12]).unwrap();
        assert!(matches!(
            ColorNameTable::from_file(&short),
            Err(Error::LookupTable { .. })
        ));
        let good = dir.path().join("good.bin");
        fs::write(&good, ColorNameTable::prototype().to_bytes()).unwrap();
        assert_eq!(
            ColorNameTable::from_file(&good).unwrap(),
            ColorNameTable::prototype()
        );
    }
}
