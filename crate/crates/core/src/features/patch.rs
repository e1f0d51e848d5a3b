use ndarray::Array3;

use crate::dataio::Frame;
use crate::error::{Error, Result};

/// Region of interest: `size` pixels around `center`, resampled to `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSpec {
    pub center: (f64, f64),
    /// `(width, height)` in source pixels.
    pub size: (f64, f64),
    /// `(width, height)` of the output raster.
    pub target: (usize, usize),
}

impl PatchSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.size.0 > 0.0
            && self.size.1 > 0.0
            && self.size.0.is_finite()
            && self.size.1.is_finite()
            && self.center.0.is_finite()
            && self.center.1.is_finite()
            && self.target.0 > 0
            && self.target.1 > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad patch spec {self:?}")))
        }
    }
}

/// RGB raster with `f64` samples on the 0-255 scale, shape `(rows, cols, 3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub rgb: Array3<f64>,
}

impl Patch {
    pub fn rows(&self) -> usize {
        self.rgb.dim().0
    }

    pub fn cols(&self) -> usize {
        self.rgb.dim().1
    }

    pub fn gray(&self, r: usize, c: usize) -> f64 {
        0.299 * self.rgb[[r, c, 0]] + 0.587 * self.rgb[[r, c, 1]] + 0.114 * self.rgb[[r, c, 2]]
    }
}

/// Crops `spec` out of `frame`, replicating edge pixels outside the frame,
/// and resamples bilinearly to `spec.target`.
pub fn crop_patch(frame: &Frame, spec: &PatchSpec) -> Result<Patch> {
    spec.validate()?;
    let (tw, th) = spec.target;
    let (sw, sh) = spec.size;
    let left = spec.center.0 - sw / 2.0;
    let top = spec.center.1 - sh / 2.0;
    let (kx, ky) = (sw / tw as f64, sh / th as f64);
    let max_x = frame.width() as f64 - 1.0;
    let max_y = frame.height() as f64 - 1.0;

    let xs: Vec<(usize, usize, f64)> = (0..tw)
        .map(|j| axis_taps(left + (j as f64 + 0.5) * kx - 0.5, max_x))
        .collect();
    let ys: Vec<(usize, usize, f64)> = (0..th)
        .map(|i| axis_taps(top + (i as f64 + 0.5) * ky - 0.5, max_y))
        .collect();

    let img = &frame.pixels;
    let mut rgb = Array3::zeros((th, tw, 3));
    for (i, &(y0, y1, ty)) in ys.iter().enumerate() {
        for (j, &(x0, x1, tx)) in xs.iter().enumerate() {
            let a = img.get_pixel(x0 as u32, y0 as u32).0;
            let b = img.get_pixel(x1 as u32, y0 as u32).0;
            let c = img.get_pixel(x0 as u32, y1 as u32).0;
            let d = img.get_pixel(x1 as u32, y1 as u32).0;
            for ch in 0..3 {
                let top = a[ch] as f64 + (b[ch] as f64 - a[ch] as f64) * tx;
                let bot = c[ch] as f64 + (d[ch] as f64 - c[ch] as f64) * tx;
                rgb[[i, j, ch]] = top + (bot - top) * ty;
            }
        }
    }
    Ok(Patch { rgb })
}

/// Clamped bilinear taps for a continuous source coordinate.
fn axis_taps(pos: f64, max: f64) -> (usize, usize, f64) {
    let p = pos.clamp(0.0, max);
    let lo = p.floor();
    let hi = (lo + 1.0).min(max);
    (lo as usize, hi as usize, p - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    fn frame_from(img: RgbImage) -> Frame {
        Frame {
            index: 1,
            pixels: img,
        }
    }

    #[test]
    fn interior_crop_is_exact_copy() {
        let img = RgbImage::from_fn(30, 20, |x, y| Rgb([(x * 7 % 256) as u8, (y * 11) as u8, (x + y) as u8]));
        let frame = frame_from(img.clone());
        let spec = PatchSpec {
            center: (15.0, 10.0),
            size: (10.0, 8.0),
            target: (10, 8),
        };
        let p = crop_patch(&frame, &spec).unwrap();
        for i in 0..8 {
            for j in 0..10 {
                let src = img.get_pixel(10 + j as u32, 6 + i as u32).0;
                for ch in 0..3 {
                    assert_eq!(p.rgb[[i, j, ch]], src[ch] as f64);
                }
            }
        }
    }

    #[test]
    fn replication_of_uniform_frame() {
        let frame = frame_from(RgbImage::from_pixel(16, 16, Rgb([40, 90, 200])));
        let spec = PatchSpec {
            center: (0.0, 0.0),
            size: (24.0, 12.0),
            target: (12, 12),
        };
        let p = crop_patch(&frame, &spec).unwrap();
        for px in p.rgb.outer_iter().flat_map(|row| row.outer_iter().map(|v| v.to_vec()).collect::<Vec<_>>()) {
            assert_eq!(px, vec![40.0, 90.0, 200.0]);
        }
    }

    #[test]
    fn bilinear_midpoints() {
        // 2x2 checkerboard resampled to 3x3: the middle row/column fall on
        // source midpoints.
        let img = RgbImage::from_fn(2, 2, |x, y| if (x + y) % 2 == 0 { Rgb([0, 0, 0]) } else { Rgb([255, 255, 255]) });
        let frame = frame_from(img);
        let spec = PatchSpec {
            center: (1.0, 1.0),
            size: (2.0, 2.0),
            target: (3, 3),
        };
        let p = crop_patch(&frame, &spec).unwrap();
        assert!((p.rgb[[1, 1, 0]] - 127.5).abs() < 1e-12);
        // edge midpoints: mean of the two neighbors along that edge
        assert!((p.rgb[[0, 1, 0]] - 127.5).abs() < 1e-12);
        assert!((p.rgb[[1, 0, 0]] - 127.5).abs() < 1e-12);
        assert_eq!(p.rgb[[0, 0, 0]], 0.0);
        assert_eq!(p.rgb[[0, 2, 0]], 255.0);
    }

    #[test]
    fn rejects_bad_spec() {
        let frame = frame_from(RgbImage::new(4, 4));
        let spec = PatchSpec {
            center: (1.0, 1.0),
            size: (0.0, 2.0),
            target: (3, 3),
        };
        assert!(crop_patch(&frame, &spec).is_err());
    }
}
