//! Shared fixtures for the benchmarks.

use keytrack::dataio::{generate_synthetic, SynthSpec};
use keytrack::Sequence;

/// The 100-frame moving-target sequence with a fixed seed.
pub fn moving_sequence() -> Sequence {
    generate_synthetic(&SynthSpec::moving_target(7)).expect("preset is valid")
}
