//! Context patches around the target and their penalization scores.
//!
//! Patches are target-sized and placed on the ring tangent to the target box:
//! the four axis neighbors at `(±w, 0)`, `(0, ±h)` and the four diagonal
//! neighbors at `(±w, ±h)`. A patch's score is
//! `S = min(w, h) / |O O_p| * s`, so nearer patches are penalized harder.

use crate::dataio::BoundingBox;
use crate::error::{Error, Result};
use crate::features::FeatureMap;

pub const DEFAULT_PATCHES: usize = 8;

/// Ring offsets in units of `(w, h)`, ordered E, W, S, N, SE, NW, SW, NE.
const COMPASS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (1.0, 1.0),
    (-1.0, -1.0),
    (-1.0, 1.0),
    (1.0, -1.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ContextPatch {
    pub center: (f64, f64),
    pub score: f64,
    pub features: FeatureMap,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextPatchSet {
    pub patches: Vec<ContextPatch>,
}

impl ContextPatchSet {
    pub fn empty() -> Self {
        ContextPatchSet::default()
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// True when at least one patch carries a nonzero score.
    pub fn is_active(&self) -> bool {
        self.patches.iter().any(|p| p.score != 0.0)
    }
}

/// Centers of `count` target-sized patches around `target`. Up to eight
/// follow the compass ring; larger counts add further rings at
/// multiples of the target extents.
pub fn place_patches(target: &BoundingBox, count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|i| {
            let ring = (i / COMPASS.len() + 1) as f64;
            let (ux, uy) = COMPASS[i % COMPASS.len()];
            (
                target.cx + ux * ring * target.w,
                target.cy + uy * ring * target.h,
            )
        })
        .collect()
}

pub fn score_patch(target: &BoundingBox, patch_center: (f64, f64), base_score: f64) -> Result<f64> {
    let dist = (patch_center.0 - target.cx).hypot(patch_center.1 - target.cy);
    if dist == 0.0 {
        return Err(Error::CoincidentCenters);
    }
    Ok(target.w.min(target.h) / dist * base_score)
}
