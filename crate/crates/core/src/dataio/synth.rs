//! Deterministic synthetic sequences: a textured target moving over a smooth
//! background, with optional look-alike distractors, blur and sensor noise.

use std::f64::consts::PI;

use image::{imageops, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{BoundingBox, Frame, Sequence};
use crate::error::{Error, Result};
use crate::eval::iou;

/// Target center trajectory, as a function of the 0-based frame offset `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    Static,
    Linear { vx: f64, vy: f64 },
    /// `start + amp * sin(2*pi*t/period + phase)` per axis.
    Sinusoidal {
        amp: (f64, f64),
        period: f64,
        phase: (f64, f64),
    },
}

impl Motion {
    fn offset(&self, t: f64) -> (f64, f64) {
        match *self {
            Motion::Static => (0.0, 0.0),
            Motion::Linear { vx, vy } => (vx * t, vy * t),
            Motion::Sinusoidal { amp, period, phase } => {
                let w = 2.0 * PI / period;
                (
                    amp.0 * (w * t + phase.0).sin(),
                    amp.1 * (w * t + phase.1).sin(),
                )
            }
        }
    }
}

/// A target-sized patch rendered relative to the target center.
#[derive(Debug, Clone, PartialEq)]
pub struct Distractor {
    /// Offset of the distractor center from the target center, pixels.
    pub offset: (f64, f64),
    /// Extra relative motion on top of `offset`.
    pub motion: Motion,
    /// Texture seed; `None` reuses the target's texture.
    pub texture_seed: Option<u64>,
    /// Per-pixel Gaussian perturbation added to a reused texture (0-255 scale).
    pub texture_jitter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub seed: u64,
    /// Frame-1 target size `(w, h)` in pixels.
    pub target_size: (f64, f64),
    /// Frame-1 target center.
    pub start: (f64, f64),
    pub motion: Motion,
    /// Multiplicative size change per frame.
    pub scale_rate: f64,
    pub distractors: Vec<Distractor>,
    /// Gaussian blur sigma per frame (index 0 is frame 1); missing entries mean no blur.
    pub blur: Vec<f64>,
    /// Blur only the target (object motion) instead of the whole frame.
    pub blur_target_only: bool,
    /// Sensor noise standard deviation on the 0-255 scale.
    pub noise: f64,
}

impl SynthSpec {
    pub fn static_target(seed: u64) -> Self {
        SynthSpec {
            name: "synthetic_static".into(),
            width: 200,
            height: 160,
            frames: 100,
            seed,
            target_size: (40.0, 32.0),
            start: (100.0, 80.0),
            motion: Motion::Static,
            scale_rate: 1.0,
            distractors: Vec::new(),
            blur: Vec::new(),
            blur_target_only: false,
            noise: 0.0,
        }
    }

    /// 100-frame smooth figure-of-eight motion, no clutter.
    pub fn moving_target(seed: u64) -> Self {
        SynthSpec {
            name: "synthetic_moving".into(),
            width: 320,
            height: 240,
            frames: 100,
            seed,
            target_size: (40.0, 32.0),
            start: (160.0, 120.0),
            motion: Motion::Sinusoidal {
                amp: (70.0, 40.0),
                period: 100.0,
                phase: (0.0, 0.0),
            },
            scale_rate: 1.0,
            distractors: Vec::new(),
            blur: Vec::new(),
            blur_target_only: false,
            noise: 2.0,
        }
    }

    /// Target with look-alike distractors riding close by and periodic
    /// object motion-blur bursts (the distractors stay sharp).
    pub fn blur_distractor(seed: u64) -> Self {
        let frames = 120;
        let mut blur = vec![0.0; frames];
        for start in [20usize, 50, 80, 105] {
            for (i, slot) in blur.iter_mut().skip(start).take(8).enumerate() {
                *slot = [2.0, 4.0, 6.0, 6.0, 6.0, 6.0, 4.0, 2.0][i];
            }
        }
        SynthSpec {
            name: "synthetic_blur_distractor".into(),
            width: 360,
            height: 260,
            frames,
            seed,
            target_size: (40.0, 32.0),
            start: (180.0, 130.0),
            motion: Motion::Sinusoidal {
                amp: (80.0, 35.0),
                period: 120.0,
                phase: (0.0, PI / 2.0),
            },
            scale_rate: 1.0,
            distractors: vec![
                Distractor {
                    offset: (52.0, 0.0),
                    motion: Motion::Sinusoidal {
                        amp: (0.0, 10.0),
                        period: 30.0,
                        phase: (0.0, 0.0),
                    },
                    texture_seed: None,
                    texture_jitter: 12.0,
                },
                Distractor {
                    offset: (-30.0, 44.0),
                    motion: Motion::Sinusoidal {
                        amp: (12.0, 0.0),
                        period: 40.0,
                        phase: (0.0, 0.0),
                    },
                    texture_seed: None,
                    texture_jitter: 12.0,
                },
            ],
            blur,
            blur_target_only: true,
            noise: 3.0,
        }
    }

    /// Two-frame still scene: the target with exact look-alikes sitting on
    /// the east and south context-patch centers.
    pub fn context_instance(seed: u64) -> Self {
        SynthSpec {
            name: "synthetic_context".into(),
            width: 240,
            height: 200,
            frames: 2,
            seed,
            target_size: (40.0, 32.0),
            start: (100.0, 84.0),
            motion: Motion::Static,
            scale_rate: 1.0,
            distractors: vec![
                Distractor {
                    offset: (40.0, 0.0),
                    motion: Motion::Static,
                    texture_seed: None,
                    texture_jitter: 0.0,
                },
                Distractor {
                    offset: (0.0, 32.0),
                    motion: Motion::Static,
                    texture_seed: None,
                    texture_jitter: 0.0,
                },
            ],
            blur: Vec::new(),
            blur_target_only: false,
            noise: 0.0,
        }
    }

    pub fn target_box(&self, frame: usize) -> BoundingBox {
        let t = (frame - 1) as f64;
        let (dx, dy) = self.motion.offset(t);
        let s = self.scale_rate.powf(t);
        BoundingBox::new(
            self.start.0 + dx,
            self.start.1 + dy,
            self.target_size.0 * s,
            self.target_size.1 * s,
        )
    }

    pub fn distractor_box(&self, index: usize, frame: usize) -> BoundingBox {
        let target = self.target_box(frame);
        let d = &self.distractors[index];
        let (dx, dy) = d.motion.offset((frame - 1) as f64);
        target.translated(d.offset.0 + dx, d.offset.1 + dy)
    }
}

/// Maximum distractor/target IoU tolerated by the generator.
pub const MAX_DISTRACTOR_IOU: f64 = 0.10;

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Sequence> {
    if spec.frames < 2 {
        return Err(Error::TooFewFrames(spec.frames));
    }
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidParameter("canvas must be non-empty".into()));
    }
    if !(spec.target_size.0 > 0.0 && spec.target_size.1 > 0.0 && spec.scale_rate > 0.0) {
        return Err(Error::InvalidParameter(
            "target size and scale rate must be positive".into(),
        ));
    }
    let (cw, ch) = (spec.width as f64, spec.height as f64);

    let mut boxes = Vec::with_capacity(spec.frames);
    for k in 1..=spec.frames {
        let b = spec.target_box(k);
        if !b.inside(cw, ch) {
            return Err(Error::PathExitsCanvas { frame: k });
        }
        for i in 0..spec.distractors.len() {
            let overlap = iou(&spec.distractor_box(i, k), &b);
            if overlap > MAX_DISTRACTOR_IOU {
                return Err(Error::DistractorOverlap {
                    index: i,
                    frame: k,
                    iou: overlap,
                });
            }
        }
        boxes.push(b);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let background = smooth_background(&mut rng, spec.width, spec.height);
    let tex_w = spec.target_size.0.ceil() as u32;
    let tex_h = spec.target_size.1.ceil() as u32;
    let target_tex = block_texture(&mut rng, tex_w, tex_h);
    let distractor_tex: Vec<RgbImage> = spec
        .distractors
        .iter()
        .map(|d| {
            let mut tex = match d.texture_seed {
                Some(s) => block_texture(&mut ChaCha8Rng::seed_from_u64(s), tex_w, tex_h),
                None => target_tex.clone(),
            };
            if d.texture_jitter > 0.0 {
                add_noise(&mut tex, &mut rng, d.texture_jitter);
            }
            tex
        })
        .collect();

    let mut frames = Vec::with_capacity(spec.frames);
    for k in 1..=spec.frames {
        let mut img = background.clone();
        for (i, tex) in distractor_tex.iter().enumerate() {
            paint(&mut img, tex, &spec.distractor_box(i, k));
        }
        let sigma = spec.blur.get(k - 1).copied().unwrap_or(0.0);
        if sigma > 0.0 && spec.blur_target_only {
            img = paint_blurred(&img, &target_tex, &boxes[k - 1], sigma);
        } else {
            paint(&mut img, &target_tex, &boxes[k - 1]);
            if sigma > 0.0 {
                img = imageops::blur(&img, sigma as f32);
            }
        }
        if spec.noise > 0.0 {
            let mut frame_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (k as u64).wrapping_mul(0x9E37_79B9));
            add_noise(&mut img, &mut frame_rng, spec.noise);
        }
        frames.push(Frame {
            index: k,
            pixels: img,
        });
    }

    Sequence::new(spec.name.clone(), frames, boxes)
}

/// Low-contrast value noise: random colors on a coarse lattice, bilinearly
/// interpolated.
fn smooth_background(rng: &mut ChaCha8Rng, width: u32, height: u32) -> RgbImage {
    const STEP: u32 = 24;
    let gw = width / STEP + 2;
    let gh = height / STEP + 2;
    let lattice: Vec<[f64; 3]> = (0..gw * gh)
        .map(|_| {
            let base = rng.random_range(90.0..150.0);
            [
                base + rng.random_range(-15.0..15.0),
                base + rng.random_range(-15.0..15.0),
                base + rng.random_range(-15.0..15.0),
            ]
        })
        .collect();
    RgbImage::from_fn(width, height, |x, y| {
        let fx = x as f64 / STEP as f64;
        let fy = y as f64 / STEP as f64;
        let (x0, y0) = (fx.floor() as u32, fy.floor() as u32);
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let at = |i: u32, j: u32| lattice[(j * gw + i) as usize];
        let mut px = [0u8; 3];
        for (c, slot) in px.iter_mut().enumerate() {
            let top = at(x0, y0)[c] * (1.0 - tx) + at(x0 + 1, y0)[c] * tx;
            let bot = at(x0, y0 + 1)[c] * (1.0 - tx) + at(x0 + 1, y0 + 1)[c] * tx;
            *slot = (top * (1.0 - ty) + bot * ty).round().clamp(0.0, 255.0) as u8;
        }
        Rgb(px)
    })
}

/// High-contrast texture of random colored blocks with a dark frame.
fn block_texture(rng: &mut ChaCha8Rng, width: u32, height: u32) -> RgbImage {
    const BLOCK: u32 = 6;
    let bw = width.div_ceil(BLOCK);
    let bh = height.div_ceil(BLOCK);
    let colors: Vec<[u8; 3]> = (0..bw * bh)
        .map(|_| {
            [
                rng.random_range(0..=255u8),
                rng.random_range(0..=255u8),
                rng.random_range(0..=255u8),
            ]
        })
        .collect();
    RgbImage::from_fn(width, height, |x, y| {
        if x < 2 || y < 2 || x + 2 >= width || y + 2 >= height {
            return Rgb([20, 20, 20]);
        }
        Rgb(colors[((y / BLOCK) * bw + x / BLOCK) as usize])
    })
}

/// Draws `tex` stretched over `dst` with bilinear sampling. Edge pixels are
/// blended by their fractional coverage so sub-pixel size changes show up.
fn paint(img: &mut RgbImage, tex: &RgbImage, dst: &BoundingBox) {
    let (x0, y0, w, h) = dst.to_corner();
    let (tw, th) = (tex.width() as f64, tex.height() as f64);
    let px_lo = x0.floor().max(0.0) as u32;
    let py_lo = y0.floor().max(0.0) as u32;
    let px_hi = ((x0 + w).ceil().max(0.0) as u32).min(img.width());
    let py_hi = ((y0 + h).ceil().max(0.0) as u32).min(img.height());
    let overlap = |p: u32, lo: f64, len: f64| ((p as f64 + 1.0).min(lo + len) - (p as f64).max(lo)).max(0.0);
    for py in py_lo..py_hi {
        let ay = overlap(py, y0, h);
        let cy = (py as f64 + 0.5).clamp(y0, y0 + h);
        let v = (cy - y0) / h * th - 0.5;
        for px in px_lo..px_hi {
            let a = ay * overlap(px, x0, w);
            if a <= 0.0 {
                continue;
            }
            let cx = (px as f64 + 0.5).clamp(x0, x0 + w);
            let u = (cx - x0) / w * tw - 0.5;
            let src = sample_bilinear(tex, u, v).0;
            let out = img.get_pixel_mut(px, py);
            for (o, s) in out.0.iter_mut().zip(src) {
                *o = (a * s as f64 + (1.0 - a) * *o as f64).round() as u8;
            }
        }
    }
}

/// Paints `tex` over `dst`, blurs it, and composites the smeared target
/// over the untouched scene through an equally blurred coverage mask.
fn paint_blurred(scene: &RgbImage, tex: &RgbImage, dst: &BoundingBox, sigma: f64) -> RgbImage {
    let mut layer = scene.clone();
    paint(&mut layer, tex, dst);
    let layer = imageops::blur(&layer, sigma as f32);
    let mut mask = image::GrayImage::new(scene.width(), scene.height());
    let white = RgbImage::from_pixel(1, 1, Rgb([255, 255, 255]));
    let mut coverage = RgbImage::new(scene.width(), scene.height());
    paint(&mut coverage, &white, dst);
    for (m, c) in mask.pixels_mut().zip(coverage.pixels()) {
        m.0[0] = c.0[0];
    }
    let mask = imageops::blur(&mask, sigma as f32);
    let mut out = scene.clone();
    for ((o, l), m) in out.pixels_mut().zip(layer.pixels()).zip(mask.pixels()) {
        let a = m.0[0] as f64 / 255.0;
        for c in 0..3 {
            o.0[c] = (a * l.0[c] as f64 + (1.0 - a) * o.0[c] as f64).round() as u8;
        }
    }
    out
}

fn sample_bilinear(tex: &RgbImage, u: f64, v: f64) -> Rgb<u8> {
    let max_x = tex.width() as f64 - 1.0;
    let max_y = tex.height() as f64 - 1.0;
    let u = u.clamp(0.0, max_x);
    let v = v.clamp(0.0, max_y);
    let (x0, y0) = (u.floor(), v.floor());
    let (x1, y1) = ((x0 + 1.0).min(max_x), (y0 + 1.0).min(max_y));
    let (tx, ty) = (u - x0, v - y0);
    let p = |x: f64, y: f64| tex.get_pixel(x as u32, y as u32).0;
    let (a, b, c, d) = (p(x0, y0), p(x1, y0), p(x0, y1), p(x1, y1));
    let mut out = [0u8; 3];
    for i in 0..3 {
        let top = a[i] as f64 * (1.0 - tx) + b[i] as f64 * tx;
        let bot = c[i] as f64 * (1.0 - tx) + d[i] as f64 * tx;
        out[i] = (top * (1.0 - ty) + bot * ty).round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

fn add_noise(img: &mut RgbImage, rng: &mut ChaCha8Rng, sigma: f64) {
    for px in img.pixels_mut() {
        for ch in px.0.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            let v = *ch as f64 + sigma * z;
            *ch = v.round().clamp(0.0, 255.0) as u8;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_path_gives_identical_boxes() {
        let seq = generate_synthetic(&SynthSpec::static_target(1)).unwrap();
        assert_eq!(seq.len(), 100);
        assert!(seq.groundtruth.iter().all(|b| *b == seq.groundtruth[0]));
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = SynthSpec {
            seed: 7,
            ..SynthSpec::blur_distractor(7)
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SynthSpec::blur_distractor(8)).unwrap();
        assert_ne!(a.frames[0], c.frames[0]);
    }

    #[test]
    fn path_exiting_canvas_is_rejected() {
        let spec = SynthSpec {
            motion: Motion::Linear { vx: 5.0, vy: 0.0 },
            ..SynthSpec::static_target(0)
        };
        // 200-wide canvas, start 100, half width 20: leaves at t = 16.
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::PathExitsCanvas { frame: 18 })
        ));
    }

    #[test]
    fn overlapping_distractor_is_rejected() {
        let mut spec = SynthSpec::static_target(0);
        spec.distractors.push(Distractor {
            offset: (5.0, 0.0),
            motion: Motion::Static,
            texture_seed: Some(3),
            texture_jitter: 0.0,
        });
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::DistractorOverlap { index: 0, .. })
        ));
    }

    #[test]
    fn distractor_two_widths_away_never_overlaps() {
        let mut spec = SynthSpec::moving_target(4);
        spec.width = 480;
        spec.start.0 = 200.0;
        spec.distractors.push(Distractor {
            offset: (2.0 * spec.target_size.0, 0.0),
            motion: Motion::Static,
            texture_seed: Some(9),
            texture_jitter: 0.0,
        });
        let seq = generate_synthetic(&spec).unwrap();
        for k in 1..=seq.len() {
            assert_eq!(iou(&spec.distractor_box(0, k), &seq.groundtruth[k - 1]), 0.0);
        }
    }

    #[test]
    fn presets_generate() {
        for spec in [
            SynthSpec::moving_target(0),
            SynthSpec::blur_distractor(0),
            SynthSpec::context_instance(0),
        ] {
            let seq = generate_synthetic(&spec).unwrap();
            assert_eq!(seq.len(), spec.frames);
            for b in &seq.groundtruth {
                assert!(b.inside(spec.width as f64, spec.height as f64));
            }
        }
    }

    #[test]
    fn target_only_blur_keeps_scene_sharp() {
        let base = SynthSpec {
            frames: 2,
            noise: 0.0,
            blur: vec![0.0, 4.0],
            ..SynthSpec::context_instance(2)
        };
        let sharp = generate_synthetic(&SynthSpec { blur: Vec::new(), ..base.clone() }).unwrap();
        let local = generate_synthetic(&SynthSpec { blur_target_only: true, ..base.clone() }).unwrap();
        let global = generate_synthetic(&base).unwrap();
        let far = (230, 190);
        let d = base.distractor_box(0, 2);
        let on_distractor = ((d.cx + 10.0) as u32, d.cy as u32);
        let t = base.target_box(2);
        let on_target = (t.cx as u32, t.cy as u32);
        let px = |s: &Sequence, p: (u32, u32)| s.frames[1].pixels.get_pixel(p.0, p.1).0;
        assert_eq!(px(&local, far), px(&sharp, far));
        assert_eq!(px(&local, on_distractor), px(&sharp, on_distractor));
        assert_ne!(px(&global, on_distractor), px(&sharp, on_distractor));
        assert_ne!(local.frames[1].pixels, sharp.frames[1].pixels);
        assert!(px(&local, on_target) != px(&sharp, on_target) || px(&global, on_target) != px(&sharp, on_target));
    }
}
