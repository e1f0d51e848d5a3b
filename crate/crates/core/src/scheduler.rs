//! Keyfilter lifecycle and intermittent context learning.
//!
//! Every `T` frames the freshly trained filter becomes the new keyfilter;
//! every `2T` frames the context patches are extracted and learned.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::solver::FilterState;

pub const DEFAULT_STEPSIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameDirective {
    pub frame: usize,
    pub learn_context: bool,
    pub refresh_keyfilter: bool,
    pub stepsize: usize,
}

/// Directive for frame `k` (1-based) under stepsize `T`.
///
/// Frame 1 always refreshes, since its filter seeds the first keyfilter.
/// Its context flag follows the modular rule like every other frame; the
/// tracker's initialization learns context separately via [`seed_directive`].
pub fn directive_for(k: usize, stepsize: usize) -> FrameDirective {
    let t = stepsize.max(1);
    FrameDirective {
        frame: k,
        learn_context: k.is_multiple_of(2 * t),
        refresh_keyfilter: k == 1 || k.is_multiple_of(t),
        stepsize: t,
    }
}

/// Directive used for the initial training on frame 1: context on, and the
/// result becomes keyfilter generation 0.
pub fn seed_directive(stepsize: usize) -> FrameDirective {
    FrameDirective {
        frame: 1,
        learn_context: true,
        refresh_keyfilter: true,
        stepsize: stepsize.max(1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyfilterState {
    pub weights: Array3<f64>,
    pub source_frame: usize,
    /// Zero for the seed filter, incremented on each refresh after it.
    pub generation: usize,
}

impl KeyfilterState {
    pub fn seed(filter: &FilterState, frame: usize) -> Self {
        KeyfilterState {
            weights: filter.w.clone(),
            source_frame: frame,
            generation: 0,
        }
    }
}

/// Applies `directive` to `state`, replacing the keyfilter when it asks for
/// a refresh.
pub fn commit(filter: &FilterState, directive: &FrameDirective, state: KeyfilterState) -> Result<KeyfilterState> {
    if filter.w.dim() != state.weights.dim() {
        let (a, b) = (state.weights.dim(), filter.w.dim());
        return Err(Error::shape(&[a.0, a.1, a.2], &[b.0, b.1, b.2]));
    }
    if !directive.refresh_keyfilter {
        return Ok(state);
    }
    Ok(KeyfilterState {
        weights: filter.w.clone(),
        source_frame: directive.frame,
        generation: state.generation + 1,
    })
}
