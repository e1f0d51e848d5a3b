//! Sequences on disk: `<root>/img/*.{jpg,png}` plus `<root>/groundtruth_rect.txt`.
//!
//! Boxes are kept in center form internally. Corner form `x,y,w,h` only
//! appears when reading or writing annotation text.

mod synth;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use ndarray::Array2;

use crate::error::{Error, Result};

pub use synth::{generate_synthetic, Distractor, Motion, SynthSpec};

pub const IMAGE_DIR: &str = "img";
pub const GROUNDTRUTH_FILE: &str = "groundtruth_rect.txt";

/// Axis-aligned box, center form, in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BoundingBox { cx, cy, w, h }
    }

    pub fn from_corner(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox {
            cx: x + w / 2.0,
            cy: y + h / 2.0,
            w,
            h,
        }
    }

    /// `(x, y, w, h)` with `(x, y)` the top-left corner.
    pub fn to_corner(&self) -> (f64, f64, f64, f64) {
        (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        BoundingBox {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    /// True when the whole box lies within a `width x height` canvas.
    pub fn inside(&self, width: f64, height: f64) -> bool {
        let (x, y, w, h) = self.to_corner();
        x >= 0.0 && y >= 0.0 && x + w <= width && y + h <= height
    }
}

impl fmt::Display for BoundingBox {
    /// Corner form, comma separated, as in annotation files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (x, y, w, h) = self.to_corner();
        write!(f, "{x},{y},{w},{h}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// 1-based.
    pub index: usize,
    pub pixels: RgbImage,
}

impl Frame {
    pub fn width(&self) -> usize {
        self.pixels.width() as usize
    }

    pub fn height(&self) -> usize {
        self.pixels.height() as usize
    }

    /// Luma in [0, 255] using ITU-R BT.601 weights.
    pub fn gray(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.height(), self.width()), |(r, c)| {
            let p = self.pixels.get_pixel(c as u32, r as u32).0;
            0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<Frame>,
    pub groundtruth: Vec<BoundingBox>,
}

impl Sequence {
    pub fn new(name: String, frames: Vec<Frame>, groundtruth: Vec<BoundingBox>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::TooFewFrames(frames.len()));
        }
        if frames.len() != groundtruth.len() {
            return Err(Error::CountMismatch {
                path: PathBuf::from(GROUNDTRUTH_FILE),
                frames: frames.len(),
                annotations: groundtruth.len(),
                line: groundtruth.len().min(frames.len()) + 1,
            });
        }
        Ok(Sequence {
            name,
            frames,
            groundtruth,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn init_box(&self) -> BoundingBox {
        self.groundtruth[0]
    }

    /// Writes the sequence in the on-disk layout (PNG frames).
    pub fn save(&self, root: &Path) -> Result<()> {
        let img_dir = root.join(IMAGE_DIR);
        fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        for frame in &self.frames {
            let path = img_dir.join(format!("{:04}.png", frame.index));
            frame
                .pixels
                .save(&path)
                .map_err(|source| Error::UnreadableImage { path, source })?;
        }
        write_boxes(&root.join(GROUNDTRUTH_FILE), &self.groundtruth)
    }
}

pub fn load_sequence(root: &Path) -> Result<Sequence> {
    if !root.is_dir() {
        return Err(Error::MissingDirectory(root.to_path_buf()));
    }
    let img_dir = root.join(IMAGE_DIR);
    if !img_dir.is_dir() {
        return Err(Error::MissingDirectory(img_dir));
    }
    let gt_path = root.join(GROUNDTRUTH_FILE);
    if !gt_path.is_file() {
        return Err(Error::MissingFile(gt_path));
    }

    let mut files: Vec<PathBuf> = fs::read_dir(&img_dir)
        .map_err(|e| Error::io(&img_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| is_image(p))
        .collect();
    files.sort();

    let boxes = read_boxes(&gt_path)?;
    if boxes.len() != files.len() {
        return Err(Error::CountMismatch {
            path: gt_path,
            frames: files.len(),
            annotations: boxes.len(),
            line: boxes.len().min(files.len()) + 1,
        });
    }

    let frames = files
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let img = image::open(path).map_err(|source| Error::UnreadableImage {
                path: path.clone(),
                source,
            })?;
            Ok(Frame {
                index: i + 1,
                pixels: img.to_rgb8(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".to_string());
    Sequence::new(name, frames, boxes)
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("jpg" | "jpeg" | "png" | "bmp")
    )
}

/// Parses one corner-form annotation line. Commas take precedence over
/// whitespace as the separator.
pub fn parse_box_line(text: &str) -> Option<[f64; 4]> {
    let fields: Vec<&str> = if text.contains(',') {
        text.split(',').map(str::trim).collect()
    } else {
        text.split_whitespace().collect()
    };
    if fields.len() != 4 {
        return None;
    }
    let mut out = [0.0; 4];
    for (slot, field) in out.iter_mut().zip(&fields) {
        *slot = field.parse::<f64>().ok().filter(|v| v.is_finite())?;
    }
    Some(out)
}

pub fn parse_boxes(text: &str, origin: &Path) -> Result<Vec<BoundingBox>> {
    let mut boxes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let [x, y, w, h] = parse_box_line(line).ok_or_else(|| Error::MalformedAnnotation {
            path: origin.to_path_buf(),
            line: i + 1,
            text: line.to_string(),
        })?;
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::NonPositiveExtent {
                path: origin.to_path_buf(),
                line: i + 1,
                w,
                h,
            });
        }
        boxes.push(BoundingBox::from_corner(x, y, w, h));
    }
    Ok(boxes)
}

pub fn read_boxes(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_boxes(&text, path)
}

pub fn format_boxes(boxes: &[BoundingBox]) -> String {
    let mut out = String::with_capacity(boxes.len() * 24);
    for b in boxes {
        out.push_str(&b.to_string());
        out.push('\n');
    }
    out
}

pub fn write_boxes(path: &Path, boxes: &[BoundingBox]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, format_boxes(boxes)).map_err(|e| Error::io(path, e))
}
