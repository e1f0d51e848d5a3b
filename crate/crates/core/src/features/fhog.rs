//! Felzenszwalb-style gradient-orientation histograms, 31 channels per cell:
//! 18 contrast-sensitive bins, 9 contrast-insensitive bins and 4 texture
//! (block energy) terms.

use std::f64::consts::PI;

use ndarray::{Array2, Array3};

use super::patch::Patch;

pub const SENSITIVE_BINS: usize = 18;
pub const INSENSITIVE_BINS: usize = 9;
pub const HOG_CHANNELS: usize = SENSITIVE_BINS + INSENSITIVE_BINS + 4;

const TRUNCATION: f64 = 0.2;
const EPS: f64 = 1e-4;
// 1 / sqrt(18)
const TEXTURE_WEIGHT: f64 = 0.235_702_260_395_515_8;

/// Per-cell 31-channel descriptor, shape `(rows/cell, cols/cell, 31)`.
/// The patch sides must be multiples of `cell`.
pub fn fhog(patch: &Patch, cell: usize) -> Array3<f64> {
    let (rows, cols) = (patch.rows(), patch.cols());
    let (cr, cc) = (rows / cell, cols / cell);
    let hist = orientation_histograms(patch, cell);

    let energy = Array2::from_shape_fn((cr, cc), |(r, c)| {
        (0..INSENSITIVE_BINS)
            .map(|o| {
                let v = hist[[r, c, o]] + hist[[r, c, o + INSENSITIVE_BINS]];
                v * v
            })
            .sum::<f64>()
    });

    let mut out = Array3::zeros((cr, cc, HOG_CHANNELS));
    for r in 0..cr {
        for c in 0..cc {
            let norms = block_norms(&energy, r, c);
            let mut texture = [0.0; 4];
            for o in 0..SENSITIVE_BINS {
                let h = hist[[r, c, o]];
                let mut acc = 0.0;
                for (k, n) in norms.iter().enumerate() {
                    let v = (h * n).min(TRUNCATION);
                    acc += v;
                    texture[k] += v;
                }
                out[[r, c, o]] = 0.5 * acc;
            }
            for o in 0..INSENSITIVE_BINS {
                let h = hist[[r, c, o]] + hist[[r, c, o + INSENSITIVE_BINS]];
                let acc: f64 = norms.iter().map(|n| (h * n).min(TRUNCATION)).sum();
                out[[r, c, SENSITIVE_BINS + o]] = 0.5 * acc;
            }
            for (k, t) in texture.iter().enumerate() {
                out[[r, c, SENSITIVE_BINS + INSENSITIVE_BINS + k]] = TEXTURE_WEIGHT * t;
            }
        }
    }
    out
}

/// Inverse L2 norms of the four 2x2 cell blocks containing cell `(r, c)`;
/// neighbors beyond the grid are replicated.
fn block_norms(energy: &Array2<f64>, r: usize, c: usize) -> [f64; 4] {
    let (rows, cols) = energy.dim();
    let at = |dr: isize, dc: isize| {
        let rr = (r as isize + dr).clamp(0, rows as isize - 1) as usize;
        let cc = (c as isize + dc).clamp(0, cols as isize - 1) as usize;
        energy[[rr, cc]]
    };
    let block = |dr: isize, dc: isize| {
        let s = at(dr, dc) + at(dr + 1, dc) + at(dr, dc + 1) + at(dr + 1, dc + 1);
        1.0 / (s + EPS).sqrt()
    };
    [block(-1, -1), block(-1, 0), block(0, -1), block(0, 0)]
}

/// Magnitude-weighted 18-bin orientation histogram per cell. Each pixel uses
/// the color channel with the strongest gradient; orientation votes are
/// split linearly between the two nearest bins.
fn orientation_histograms(patch: &Patch, cell: usize) -> Array3<f64> {
    let (rows, cols) = (patch.rows(), patch.cols());
    let (cr, cc) = (rows / cell, cols / cell);
    let mut hist = Array3::zeros((cr, cc, SENSITIVE_BINS));
    let bin_width = 2.0 * PI / SENSITIVE_BINS as f64;
    let rgb = &patch.rgb;
    for r in 0..cr * cell {
        let up = r.saturating_sub(1);
        let down = (r + 1).min(rows - 1);
        for c in 0..cc * cell {
            let left = c.saturating_sub(1);
            let right = (c + 1).min(cols - 1);
            let (mut best, mut gx, mut gy) = (-1.0, 0.0, 0.0);
            for ch in 0..3 {
                let dx = rgb[[r, right, ch]] - rgb[[r, left, ch]];
                let dy = rgb[[down, c, ch]] - rgb[[up, c, ch]];
                let m = dx * dx + dy * dy;
                if m > best {
                    best = m;
                    gx = dx;
                    gy = dy;
                }
            }
            // scale to the 0-1 intensity range
            let mag = best.sqrt() / 255.0;
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += 2.0 * PI;
            }
            let pos = angle / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = lo as usize % SENSITIVE_BINS;
            let b1 = (b0 + 1) % SENSITIVE_BINS;
            let (hr, hc) = (r / cell, c / cell);
            hist[[hr, hc, b0]] += mag * (1.0 - frac);
            hist[[hr, hc, b1]] += mag * frac;
        }
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch_from(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Patch {
        Patch {
            rgb: Array3::from_shape_fn((rows, cols, 3), |(r, c, _)| f(r, c)),
        }
    }

    #[test]
    fn uniform_patch_has_no_gradients() {
        let f = fhog(&patch_from(16, 20, |_, _| 128.0), 4);
        assert_eq!(f.dim(), (4, 5, HOG_CHANNELS));
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_edge_votes_horizontal_gradient() {
        // dark left half, bright right half: gradient points along +x (bin 0)
        let p = patch_from(16, 16, |_, c| if c < 8 { 30.0 } else { 220.0 });
        let f = fhog(&p, 4);
        for r in 0..4 {
            for c in 0..4 {
                let sensitive: Vec<f64> = (0..SENSITIVE_BINS).map(|o| f[[r, c, o]]).collect();
                let boundary = c == 1 || c == 2;
                if boundary {
                    let argmax = sensitive
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .unwrap()
                        .0;
                    assert_eq!(argmax, 0, "cell ({r},{c})");
                } else {
                    assert!(sensitive.iter().all(|&v| v == 0.0));
                }
            }
        }
    }

    #[test]
    fn values_bounded_and_finite() {
        let p = patch_from(24, 24, |r, c| ((r * 37 + c * 91) % 256) as f64);
        let f = fhog(&p, 4);
        assert!(f.iter().all(|v| v.is_finite() && *v >= 0.0));
        for o in 0..SENSITIVE_BINS + INSENSITIVE_BINS {
            assert!(f.index_axis(ndarray::Axis(2), o).iter().all(|v| *v <= 2.0 * TRUNCATION + 1e-12));
        }
    }
}
