//! Correlation-filter visual tracking with keyfilter regularization and
//! intermittent context learning.
//!
//! The pipeline: [`dataio`] loads or synthesizes sequences, [`features`]
//! turns image patches into cell-grid feature maps, [`solver`] trains the
//! filter by ADMM, [`scheduler`] decides keyfilter refreshes and context
//! frames, [`tracker`] runs the online loop and [`eval`] scores results.

pub mod config;
pub mod context;
pub mod dataio;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod scheduler;
pub mod solver;
pub mod tracker;

pub use config::{RunManifest, TrackerConfig};
pub use dataio::{load_sequence, BoundingBox, Frame, Sequence};
pub use error::{Error, ErrorKind, Result};
pub use eval::TrackResult;
pub use features::{ChannelGroup, FeatureMap};
pub use solver::{FilterState, SolverParams};
pub use tracker::{run_sequence, TrackerState};
