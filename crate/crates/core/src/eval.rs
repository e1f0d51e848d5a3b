//! One-pass evaluation: center-error precision, overlap success, AUC.
//!
//! Output files written by [`export`]:
//!
//! * `<name>.txt`: predicted boxes, one `x,y,w,h` line per frame (same format
//!   as ground truth).
//! * `<name>_time.txt`: per-frame tracking time in seconds.
//! * `precision.csv`, `success.csv`: columns `sequence,threshold,value`, one
//!   block per sequence plus an `overall` block (mean of per-sequence curves).
//! * `summary.csv`: columns `sequence,frames,precision_20,auc,fps`.
//! * `precision.png`, `success.png` when plots are requested.

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::dataio::{write_boxes, BoundingBox};
use crate::error::{Error, Result};

pub const PRECISION_THRESHOLD: f64 = 20.0;
pub const OVERALL: &str = "overall";

pub fn cle(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    (pred.cx - gt.cx).hypot(pred.cy - gt.cy)
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay, aw, ah) = a.to_corner();
    let (bx, by, bw, bh) = b.to_corner();
    let iw = ((ax + aw).min(bx + bw) - ax.max(bx)).max(0.0);
    let ih = ((ay + ah).min(by + bh) - ay.max(by)).max(0.0);
    let inter = iw * ih;
    let union = aw * ah + bw * bh - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    /// Value at the threshold equal to `t`, if present on the grid.
    pub fn at(&self, t: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&x| (x - t).abs() < 1e-12)
            .map(|i| self.values[i])
    }

    /// Pointwise mean of curves sharing one threshold grid.
    pub fn mean(curves: &[Curve]) -> Result<Curve> {
        let first = curves.first().ok_or(Error::EmptyResults)?;
        let mut values = vec![0.0; first.values.len()];
        for c in curves {
            if c.thresholds != first.thresholds {
                return Err(Error::shape(&[first.thresholds.len()], &[c.thresholds.len()]));
            }
            for (v, x) in values.iter_mut().zip(&c.values) {
                *v += x;
            }
        }
        let n = curves.len() as f64;
        values.iter_mut().for_each(|v| *v /= n);
        Ok(Curve {
            thresholds: first.thresholds.clone(),
            values,
        })
    }
}

pub fn precision_thresholds() -> Vec<f64> {
    (0..=50).map(|t| t as f64).collect()
}

pub fn success_thresholds() -> Vec<f64> {
    (0..=50).map(|i| i as f64 / 50.0).collect()
}

fn check_lengths(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::EmptyResults);
    }
    if pred.len() != gt.len() {
        return Err(Error::shape(&[gt.len()], &[pred.len()]));
    }
    Ok(())
}

fn fraction_curve(stats: &[f64], thresholds: Vec<f64>, hit: impl Fn(f64, f64) -> bool) -> Curve {
    let n = stats.len() as f64;
    let values = thresholds
        .iter()
        .map(|&t| stats.iter().filter(|&&s| hit(s, t)).count() as f64 / n)
        .collect();
    Curve { thresholds, values }
}

pub fn precision_curve(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<Curve> {
    precision_curve_at(pred, gt, precision_thresholds())
}

pub fn precision_curve_at(pred: &[BoundingBox], gt: &[BoundingBox], thresholds: Vec<f64>) -> Result<Curve> {
    check_lengths(pred, gt)?;
    let errors: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| cle(p, g)).collect();
    Ok(fraction_curve(&errors, thresholds, |e, t| e <= t))
}

pub fn success_curve(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<Curve> {
    success_curve_at(pred, gt, success_thresholds())
}

pub fn success_curve_at(pred: &[BoundingBox], gt: &[BoundingBox], thresholds: Vec<f64>) -> Result<Curve> {
    check_lengths(pred, gt)?;
    let overlaps: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| iou(p, g)).collect();
    Ok(fraction_curve(&overlaps, thresholds, |o, t| o >= t))
}

/// Mean of the success curve.
pub fn auc(success: &Curve) -> f64 {
    if success.values.is_empty() {
        return 0.0;
    }
    success.values.iter().sum::<f64>() / success.values.len() as f64
}

pub fn precision_at_20(precision: &Curve) -> f64 {
    precision.at(PRECISION_THRESHOLD).unwrap_or(0.0)
}

pub fn mean_cle(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<f64> {
    check_lengths(pred, gt)?;
    Ok(pred.iter().zip(gt).map(|(p, g)| cle(p, g)).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub name: String,
    pub boxes: Vec<BoundingBox>,
    /// Seconds spent on each frame (frame 1 is the initialization).
    pub times: Vec<f64>,
}

impl TrackResult {
    pub fn fps(&self) -> f64 {
        let total: f64 = self.times.iter().sum();
        if total > 0.0 {
            self.times.len() as f64 / total
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScore {
    pub name: String,
    pub frames: usize,
    pub precision: Curve,
    pub success: Curve,
    /// `None` when no timing is known (results loaded from disk without it).
    pub fps: Option<f64>,
}

impl SequenceScore {
    pub fn precision_20(&self) -> f64 {
        precision_at_20(&self.precision)
    }

    pub fn auc(&self) -> f64 {
        auc(&self.success)
    }
}

pub fn score(result: &TrackResult, gt: &[BoundingBox]) -> Result<SequenceScore> {
    Ok(SequenceScore {
        name: result.name.clone(),
        frames: result.boxes.len(),
        precision: precision_curve(&result.boxes, gt)?,
        success: success_curve(&result.boxes, gt)?,
        fps: (!result.times.is_empty()).then(|| result.fps()),
    })
}

/// Aggregate over sequences; ordering by name keeps outputs deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub sequences: Vec<SequenceScore>,
    pub overall: SequenceScore,
}

pub fn aggregate(mut scores: Vec<SequenceScore>) -> Result<Evaluation> {
    if scores.is_empty() {
        return Err(Error::EmptyResults);
    }
    scores.sort_by(|a, b| a.name.cmp(&b.name));
    let precision = Curve::mean(&scores.iter().map(|s| s.precision.clone()).collect::<Vec<_>>())?;
    let success = Curve::mean(&scores.iter().map(|s| s.success.clone()).collect::<Vec<_>>())?;
    let rates: Vec<f64> = scores.iter().filter_map(|s| s.fps).collect();
    let fps = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
    let overall = SequenceScore {
        name: OVERALL.to_string(),
        frames: scores.iter().map(|s| s.frames).sum(),
        precision,
        success,
        fps,
    };
    Ok(Evaluation {
        sequences: scores,
        overall,
    })
}

pub fn write_result(dir: &Path, result: &TrackResult) -> Result<()> {
    if result.boxes.is_empty() {
        return Err(Error::EmptyResults);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_boxes(&dir.join(format!("{}.txt", result.name)), &result.boxes)?;
    if !result.times.is_empty() {
        let path = dir.join(format!("{}_time.txt", result.name));
        let text: String = result.times.iter().map(|t| format!("{t:.6}\n")).collect();
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn write_curves(path: &Path, eval: &Evaluation, pick: impl Fn(&SequenceScore) -> &Curve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sequence", "threshold", "value"])?;
    for s in eval.sequences.iter().chain(std::iter::once(&eval.overall)) {
        let c = pick(s);
        for (t, v) in c.thresholds.iter().zip(&c.values) {
            w.write_record([s.name.as_str(), &format!("{t}"), &v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_summary(path: &Path, eval: &Evaluation) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sequence", "frames", "precision_20", "auc", "fps"])?;
    for s in eval.sequences.iter().chain(std::iter::once(&eval.overall)) {
        let fps = s.fps.map(|f| format!("{f:.3}")).unwrap_or_default();
        w.write_record([
            s.name.clone(),
            s.frames.to_string(),
            s.precision_20().to_string(),
            s.auc().to_string(),
            fps,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes result files for `results` (may be empty when only re-scoring),
/// curve and summary CSVs, and optionally plots. Returns the written paths.
pub fn export(results: &[TrackResult], eval: &Evaluation, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    if eval.sequences.is_empty() {
        return Err(Error::EmptyResults);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for r in results {
        write_result(dir, r)?;
        written.push(dir.join(format!("{}.txt", r.name)));
    }
    let precision = dir.join("precision.csv");
    write_curves(&precision, eval, |s| &s.precision)?;
    let success = dir.join("success.csv");
    write_curves(&success, eval, |s| &s.success)?;
    let summary = dir.join("summary.csv");
    write_summary(&summary, eval)?;
    written.extend([precision, success, summary]);
    if plots {
        for (name, curve, x_max) in [
            ("precision.png", &eval.overall.precision, 50.0),
            ("success.png", &eval.overall.success, 1.0),
        ] {
            let path = dir.join(name);
            plot_curve(curve, x_max)
                .save(&path)
                .map_err(|e| Error::Io {
                    path: path.clone(),
                    source: std::io::Error::other(e),
                })?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Bare line plot on a unit-height axis.
fn plot_curve(curve: &Curve, x_max: f64) -> RgbImage {
    const W: u32 = 400;
    const H: u32 = 300;
    const M: u32 = 30;
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let axis = Rgb([0, 0, 0]);
    for x in M..W - M {
        img.put_pixel(x, H - M, axis);
    }
    for y in M..=H - M {
        img.put_pixel(M, y, axis);
    }
    let to_px = |t: f64, v: f64| {
        let x = M as f64 + t / x_max * (W - 2 * M) as f64;
        let y = (H - M) as f64 - v.clamp(0.0, 1.0) * (H - 2 * M) as f64;
        (x, y)
    };
    let line = Rgb([200, 30, 30]);
    for pair in curve.thresholds.windows(2).zip(curve.values.windows(2)) {
        let (a, b) = (to_px(pair.0[0], pair.1[0]), to_px(pair.0[1], pair.1[1]));
        let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
        for i in 0..=steps {
            let f = i as f64 / steps as f64;
            let (x, y) = (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
            if x >= 0.0 && y >= 0.0 && (x as u32) < W && (y as u32) < H {
                img.put_pixel(x as u32, y as u32, line);
            }
        }
    }
    img
}
