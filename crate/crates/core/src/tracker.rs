//! Online tracking loop: detect over a scale pyramid with the previous
//! filter, update the appearance model, then train under the scheduler's
//! directive.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::config::TrackerConfig;
use crate::context::{place_patches, score_patch, ContextPatch, ContextPatchSet};
use crate::dataio::{BoundingBox, Frame, Sequence};
use crate::dsp::{gaussian_label, hann_window, Label};
use crate::error::{Error, Result};
use crate::eval::TrackResult;
use crate::features::{crop_patch, FeatureExtractor, FeatureMap, PatchSpec};
use crate::scheduler::{commit, directive_for, seed_directive, FrameDirective, KeyfilterState};
use crate::solver::{response, train_filter, CropOperator, FilterState};

const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

/// Fixed sampling layout of one track, derived from the initial box.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// Search grid `(rows, cols)` in cells.
    pub grid: (usize, usize),
    /// Resampled search patch `(width, height)` in pixels.
    pub template_px: (usize, usize),
    /// Source pixels per template pixel at scale 1.
    pub resample: f64,
    /// Initial target `(width, height)` in source pixels.
    pub base_target: (f64, f64),
    pub crop: CropOperator,
    pub window: Array2<f64>,
    pub label: Label,
}

impl Geometry {
    pub fn new(target: &BoundingBox, config: &TrackerConfig) -> Result<Self> {
        let cs = config.cell_size as f64;
        if target.w < 2.0 * cs || target.h < 2.0 * cs || !target.w.is_finite() || !target.h.is_finite() {
            return Err(Error::DegenerateBox {
                w: target.w,
                h: target.h,
                min: 2.0 * cs,
            });
        }
        let extent = ((1.0 + config.padding) * target.w, (1.0 + config.padding) * target.h);
        let resample = (extent.0.max(extent.1) / (config.max_cells as f64 * cs)).max(1.0);
        let cells = |px: f64| ((px / resample / cs).round() as usize).max(1);
        let (mut cols, mut rows) = (cells(extent.0), cells(extent.1));
        let (mc, mr) = (cells(target.w).min(cols), cells(target.h).min(rows));
        // keep the filter window exactly centered
        if (cols - mc) % 2 == 1 {
            cols += 1;
        }
        if (rows - mr) % 2 == 1 {
            rows += 1;
        }
        let crop = CropOperator::centered((rows, cols), (mr, mc))?;
        let sigma = config.output_sigma_factor * ((mr * mc) as f64).sqrt();
        Ok(Geometry {
            grid: (rows, cols),
            template_px: (cols * config.cell_size, rows * config.cell_size),
            resample,
            base_target: (target.w, target.h),
            crop,
            window: hann_window(rows, cols),
            label: gaussian_label(rows, cols, sigma)?,
        })
    }

    /// Search region around `center` at relative `scale`.
    pub fn patch_spec(&self, center: (f64, f64), scale: f64) -> PatchSpec {
        let k = self.resample * scale;
        PatchSpec {
            center,
            size: (self.template_px.0 as f64 * k, self.template_px.1 as f64 * k),
            target: self.template_px,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceModel {
    pub features: FeatureMap,
    pub rate: f64,
}

impl AppearanceModel {
    pub fn new(features: FeatureMap, rate: f64) -> Self {
        AppearanceModel { features, rate }
    }
}

/// `(1 - eta) * model + eta * new`, elementwise.
pub fn update_model(model: &AppearanceModel, new_features: &FeatureMap, eta: f64) -> Result<AppearanceModel> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("learning rate {eta} outside [0, 1]")));
    }
    let mut out = model.clone();
    out.features.blend(new_features, eta)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    /// One grid per pyramid level, smallest scale first.
    pub maps: Vec<Array2<f64>>,
    /// Penalized peak value.
    pub peak_value: f64,
    pub peak: (usize, usize),
    pub scale_index: usize,
    /// Signed displacement of the peak in cells, sub-cell refined, `(rows, cols)`.
    pub displacement: (f64, f64),
}

/// Per-frame bookkeeping returned by [`TrackerState::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub frame: usize,
    pub bbox: BoundingBox,
    pub response: ResponseMap,
    pub directive: FrameDirective,
    /// Number of context patches with nonzero score used in training.
    pub context_used: usize,
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    pub config: TrackerConfig,
    pub geometry: Geometry,
    extractor: FeatureExtractor,
    pub bbox: BoundingBox,
    /// Size relative to the initial box.
    pub scale: f64,
    pub model: AppearanceModel,
    pub filter: FilterState,
    pub keyfilter: KeyfilterState,
    /// Index of the last processed frame (1-based).
    pub frame: usize,
    /// Context patches used by the initial training.
    pub seed_context: usize,
}

impl PartialEq for TrackerState {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.geometry == other.geometry
            && self.bbox == other.bbox
            && self.scale == other.scale
            && self.model == other.model
            && self.filter == other.filter
            && self.keyfilter == other.keyfilter
            && self.frame == other.frame
    }
}

impl TrackerState {
    pub fn init(frame: &Frame, bbox: BoundingBox, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        let extractor = FeatureExtractor::new(config.cell_size, config.channels.clone())?;
        let (fw, fh) = (frame.width() as f64, frame.height() as f64);
        let bbox = BoundingBox::new(bbox.cx.clamp(0.0, fw - 1.0), bbox.cy.clamp(0.0, fh - 1.0), bbox.w, bbox.h);
        let geometry = Geometry::new(&bbox, &config)?;

        let features = extract(&extractor, &geometry, frame, bbox.center(), 1.0)?;
        let model = AppearanceModel::new(features, config.learning_rate);
        let directive = seed_directive(config.stepsize);
        let context = gather_context(&extractor, &geometry, &config, frame, &bbox, 1.0, &directive)?;
        let filter = train_filter(
            &model.features,
            &context,
            &geometry.label,
            None,
            &config.solver_params(),
            &geometry.crop,
        )?;
        let keyfilter = KeyfilterState::seed(&filter, 1);
        Ok(TrackerState {
            seed_context: context.patches.iter().filter(|p| p.score != 0.0).count(),
            config,
            geometry,
            extractor,
            bbox,
            scale: 1.0,
            model,
            filter,
            keyfilter,
            frame: 1,
        })
    }

    fn pyramid(&self) -> Vec<f64> {
        let half = (self.config.scales / 2) as i32;
        (0..self.config.scales as i32)
            .map(|i| self.config.scale_step.powi(i - half))
            .collect()
    }

    /// Windowed search-region features around `center` at relative `scale`.
    pub fn features_at(&self, frame: &Frame, center: (f64, f64), scale: f64) -> Result<FeatureMap> {
        extract(&self.extractor, &self.geometry, frame, center, scale)
    }

    /// Correlates the current filter with `features` laid out on the search grid.
    pub fn response_on(&self, features: &FeatureMap) -> Result<Array2<f64>> {
        response(&self.filter.g_hat, &features.data)
    }

    /// Locates the target in `frame` without changing any state.
    pub fn detect(&self, frame: &Frame) -> Result<(BoundingBox, ResponseMap)> {
        let factors = self.pyramid();
        let half = factors.len() / 2;
        let center = self.bbox.center();
        let maps = factors
            .par_iter()
            .map(|f| {
                let feat = extract(&self.extractor, &self.geometry, frame, center, self.scale * f)?;
                self.response_on(&feat)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut best = (f64::NEG_INFINITY, 0, (0, 0));
        for (i, map) in maps.iter().enumerate() {
            let (loc, value) = argmax(map);
            let penalized = value * self.config.scale_penalty.powi((i as i32 - half as i32).abs());
            if penalized > best.0 {
                best = (penalized, i, loc);
            }
        }
        let (peak_value, scale_index, peak) = best;
        if !peak_value.is_finite() {
            return Err(Error::NonFinite("detection response"));
        }
        let map = &maps[scale_index];
        let displacement = subcell_peak(map, peak);

        let level_scale = self.scale * factors[scale_index];
        let px_per_cell = self.config.cell_size as f64 * self.geometry.resample * level_scale;
        let new_scale = level_scale.clamp(MIN_SCALE, MAX_SCALE);
        let bbox = BoundingBox::new(
            center.0 + displacement.1 * px_per_cell,
            center.1 + displacement.0 * px_per_cell,
            self.geometry.base_target.0 * new_scale,
            self.geometry.base_target.1 * new_scale,
        );
        Ok((
            bbox,
            ResponseMap {
                maps,
                peak_value,
                peak,
                scale_index,
                displacement,
            },
        ))
    }

    /// Processes the next frame.
    pub fn step(&mut self, frame: &Frame) -> Result<StepReport> {
        let k = self.frame + 1;
        let (bbox, response) = self.detect(frame)?;
        let scale = (bbox.w / self.geometry.base_target.0).clamp(MIN_SCALE, MAX_SCALE);

        let features = extract(&self.extractor, &self.geometry, frame, bbox.center(), scale)?;
        let model = update_model(&self.model, &features, self.config.learning_rate)?;
        let directive = directive_for(k, self.config.stepsize);
        let context = gather_context(&self.extractor, &self.geometry, &self.config, frame, &bbox, scale, &directive)?;
        let filter = train_filter(
            &model.features,
            &context,
            &self.geometry.label,
            Some(&self.keyfilter.weights),
            &self.config.solver_params(),
            &self.geometry.crop,
        )?;
        let keyfilter = commit(&filter, &directive, self.keyfilter.clone())?;

        self.bbox = bbox;
        self.scale = scale;
        self.model = model;
        self.filter = filter;
        self.keyfilter = keyfilter;
        self.frame = k;
        Ok(StepReport {
            frame: k,
            bbox,
            response,
            directive,
            context_used: context.patches.iter().filter(|p| p.score != 0.0).count(),
        })
    }
}

fn extract(
    extractor: &FeatureExtractor,
    geometry: &Geometry,
    frame: &Frame,
    center: (f64, f64),
    scale: f64,
) -> Result<FeatureMap> {
    let patch = crop_patch(frame, &geometry.patch_spec(center, scale))?;
    extractor.extract(&patch, Some(&geometry.window))
}

/// Context samples when the directive asks for them and `s > 0`; otherwise
/// nothing is extracted.
fn gather_context(
    extractor: &FeatureExtractor,
    geometry: &Geometry,
    config: &TrackerConfig,
    frame: &Frame,
    bbox: &BoundingBox,
    scale: f64,
    directive: &FrameDirective,
) -> Result<ContextPatchSet> {
    if !directive.learn_context || config.base_score == 0.0 || config.context_patches == 0 {
        return Ok(ContextPatchSet::empty());
    }
    let patches = place_patches(bbox, config.context_patches)
        .into_par_iter()
        .map(|center| {
            Ok(ContextPatch {
                center,
                score: score_patch(bbox, center, config.base_score)?,
                features: extract(extractor, geometry, frame, center, scale)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContextPatchSet { patches })
}

fn argmax(map: &Array2<f64>) -> ((usize, usize), f64) {
    let mut best = ((0, 0), f64::NEG_INFINITY);
    for (idx, &v) in map.indexed_iter() {
        if v > best.1 {
            best = (idx, v);
        }
    }
    best
}

/// Signed peak position with a 1-D parabolic fit per axis.
fn subcell_peak(map: &Array2<f64>, peak: (usize, usize)) -> (f64, f64) {
    let (rows, cols) = map.dim();
    let (r, c) = peak;
    let fit = |a: f64, b: f64, c: f64| {
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let dr = if rows >= 3 {
        fit(map[[(r + rows - 1) % rows, c]], map[[r, c]], map[[(r + 1) % rows, c]])
    } else {
        0.0
    };
    let dc = if cols >= 3 {
        fit(map[[r, (c + cols - 1) % cols]], map[[r, c]], map[[r, (c + 1) % cols]])
    } else {
        0.0
    };
    let signed = |i: usize, n: usize| if i > n / 2 { i as f64 - n as f64 } else { i as f64 };
    (signed(r, rows) + dr, signed(c, cols) + dc)
}

/// Runs one-pass tracking from the first ground-truth box. Times cover the
/// tracking work only (frames are already in memory).
pub fn run_sequence(seq: &Sequence, config: &TrackerConfig) -> Result<TrackResult> {
    run_sequence_with(seq, config, |_| {})
}

/// [`run_sequence`] with a callback per processed frame after the first.
pub fn run_sequence_with(
    seq: &Sequence,
    config: &TrackerConfig,
    mut on_step: impl FnMut(&StepReport),
) -> Result<TrackResult> {
    let init_box = seq.init_box();
    let mut boxes = Vec::with_capacity(seq.len());
    let mut times = Vec::with_capacity(seq.len());

    let start = Instant::now();
    let mut state = TrackerState::init(&seq.frames[0], init_box, config.clone())?;
    times.push(start.elapsed().as_secs_f64());
    boxes.push(init_box);

    for frame in &seq.frames[1..] {
        let start = Instant::now();
        let report = state.step(frame)?;
        times.push(start.elapsed().as_secs_f64());
        boxes.push(report.bbox);
        on_step(&report);
    }
    Ok(TrackResult {
        name: seq.name.clone(),
        boxes,
        times,
    })
}
