//! Cell-grid feature maps: grayscale, gradient-orientation histograms and
//! color-attribute channels.

mod color_names;
mod fhog;
mod patch;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};

pub use color_names::{ColorNameTable, CN_BYTES, CN_CHANNELS, CN_ROWS};
pub use fhog::{fhog, HOG_CHANNELS};
pub use patch::{crop_patch, Patch, PatchSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelGroup {
    Gray,
    Hog,
    ColorNames,
}

impl ChannelGroup {
    pub const ALL: [ChannelGroup; 3] = [ChannelGroup::Gray, ChannelGroup::Hog, ChannelGroup::ColorNames];

    pub fn len(self) -> usize {
        match self {
            ChannelGroup::Gray => 1,
            ChannelGroup::Hog => HOG_CHANNELS,
            ChannelGroup::ColorNames => CN_CHANNELS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelGroup::Gray => "gray",
            ChannelGroup::Hog => "hog",
            ChannelGroup::ColorNames => "cn",
        }
    }
}

impl fmt::Display for ChannelGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gray" | "grey" => Ok(ChannelGroup::Gray),
            "hog" | "fhog" => Ok(ChannelGroup::Hog),
            "cn" | "colornames" | "color_names" => Ok(ChannelGroup::ColorNames),
            other => Err(Error::UnknownChannel(other.to_string())),
        }
    }
}

/// Parses a comma-separated channel list such as `gray,hog,cn`.
pub fn parse_channels(list: &str) -> Result<Vec<ChannelGroup>> {
    let groups = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(ChannelGroup::from_str)
        .collect::<Result<Vec<_>>>()?;
    if groups.is_empty() {
        return Err(Error::InvalidParameter("empty channel list".into()));
    }
    Ok(groups)
}

/// `(rows, cols, D)` tensor, channels last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub data: Array3<f64>,
    pub cell_size: usize,
    pub channels: Vec<ChannelGroup>,
    pub windowed: bool,
}

impl FeatureMap {
    pub fn rows(&self) -> usize {
        self.data.dim().0
    }

    pub fn cols(&self) -> usize {
        self.data.dim().1
    }

    pub fn depth(&self) -> usize {
        self.data.dim().2
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn from_data(data: Array3<f64>) -> Self {
        FeatureMap {
            data,
            cell_size: 1,
            channels: Vec::new(),
            windowed: false,
        }
    }

    /// `(1 - rate) * self + rate * other`, in place.
    pub fn blend(&mut self, other: &FeatureMap, rate: f64) -> Result<()> {
        if self.data.dim() != other.data.dim() {
            let (a, b) = (self.data.dim(), other.data.dim());
            return Err(Error::shape(&[a.0, a.1, a.2], &[b.0, b.1, b.2]));
        }
        self.data
            .zip_mut_with(&other.data, |m, &n| *m = (1.0 - rate) * *m + rate * n);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub cell_size: usize,
    pub channels: Vec<ChannelGroup>,
    table: Arc<ColorNameTable>,
}

impl FeatureExtractor {
    pub fn new(cell_size: usize, channels: Vec<ChannelGroup>) -> Result<Self> {
        Self::with_table(cell_size, channels, ColorNameTable::bundled())
    }

    pub fn with_table(cell_size: usize, channels: Vec<ChannelGroup>, table: Arc<ColorNameTable>) -> Result<Self> {
        if cell_size == 0 {
            return Err(Error::InvalidParameter("cell size must be positive".into()));
        }
        if channels.is_empty() {
            return Err(Error::InvalidParameter("no feature channels enabled".into()));
        }
        Ok(FeatureExtractor {
            cell_size,
            channels,
            table,
        })
    }

    pub fn depth(&self) -> usize {
        self.channels.iter().map(|g| g.len()).sum()
    }

    /// Extracts all enabled channel groups; multiplies by `window` (shape
    /// `(rows/cell, cols/cell)`) when given.
    pub fn extract(&self, patch: &Patch, window: Option<&Array2<f64>>) -> Result<FeatureMap> {
        let cs = self.cell_size;
        if !patch.rows().is_multiple_of(cs) || !patch.cols().is_multiple_of(cs) || patch.rows() == 0 || patch.cols() == 0 {
            return Err(Error::InvalidParameter(format!(
                "patch {}x{} is not a multiple of cell size {cs}",
                patch.cols(),
                patch.rows()
            )));
        }
        let (cr, cc) = (patch.rows() / cs, patch.cols() / cs);
        if let Some(w) = window {
            if w.dim() != (cr, cc) {
                return Err(Error::shape(&[cr, cc], &[w.dim().0, w.dim().1]));
            }
        }
        let mut data = Array3::zeros((cr, cc, self.depth()));
        let mut offset = 0;
        for &group in &self.channels {
            let block = match group {
                ChannelGroup::Gray => gray_cells(patch, cs),
                ChannelGroup::Hog => fhog(patch, cs),
                ChannelGroup::ColorNames => color_cells(patch, cs, &self.table),
            };
            let n = group.len();
            data.slice_mut(ndarray::s![.., .., offset..offset + n]).assign(&block);
            offset += n;
        }
        if let Some(w) = window {
            for (mut lane, &wv) in data.lanes_mut(Axis(2)).into_iter().zip(w.iter()) {
                lane.mapv_inplace(|v| v * wv);
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature extraction"));
        }
        Ok(FeatureMap {
            data,
            cell_size: cs,
            channels: self.channels.clone(),
            windowed: window.is_some(),
        })
    }
}

pub fn extract_features(
    patch: &Patch,
    cell_size: usize,
    channels: &[ChannelGroup],
    window: Option<&Array2<f64>>,
) -> Result<FeatureMap> {
    FeatureExtractor::new(cell_size, channels.to_vec())?.extract(patch, window)
}

/// Cell mean of luma, mapped to [-0.5, 0.5].
fn gray_cells(patch: &Patch, cs: usize) -> Array3<f64> {
    let (cr, cc) = (patch.rows() / cs, patch.cols() / cs);
    let norm = 1.0 / (cs * cs) as f64;
    Array3::from_shape_fn((cr, cc, 1), |(r, c, _)| {
        let mut acc = 0.0;
        for i in 0..cs {
            for j in 0..cs {
                acc += patch.gray(r * cs + i, c * cs + j);
            }
        }
        acc * norm / 255.0 - 0.5
    })
}

fn color_cells(patch: &Patch, cs: usize, table: &ColorNameTable) -> Array3<f64> {
    let (cr, cc) = (patch.rows() / cs, patch.cols() / cs);
    let norm = 1.0 / (cs * cs) as f64;
    let mut out = Array3::zeros((cr, cc, CN_CHANNELS));
    let quant = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    for r in 0..cr * cs {
        for c in 0..cc * cs {
            let row = table.lookup(
                quant(patch.rgb[[r, c, 0]]),
                quant(patch.rgb[[r, c, 1]]),
                quant(patch.rgb[[r, c, 2]]),
            );
            for (k, &v) in row.iter().enumerate() {
                out[[r / cs, c / cs, k]] += v as f64 * norm;
            }
        }
    }
    out
}
