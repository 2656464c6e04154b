//! Phase measuring profilometry toolkit with bimodal multipath separation.
//!
//! A camera pixel in a structured light scanner is supposed to see exactly one
//! projector row, but step edges, meshes, and specular bounces make some
//! pixels see two. The two paths interfere constructively or destructively
//! depending on the pattern's spatial frequency, so sweeping the frequency
//! traces a sinusoid in the measured modulation magnitude — a cue strong
//! enough to separate the paths and recover two independent row (depth)
//! measurements per pixel.
//!
//! Pipeline stages:
//!
//! 1. [`patterns`] — phase-shift pattern stacks over a frequency sweep,
//!    including the zero-frequency (spatially constant) pattern.
//! 2. [`phasor`] — per-pixel mean/modulation extraction, shadow masking,
//!    phase-to-row conversion.
//! 3. [`simulator`] — synthetic captures from two-path ground-truth scenes
//!    with optical attenuation and sensor noise.
//! 4. [`mtf`] — optical envelope calibration from a flat target plus sweep
//!    normalization.
//! 5. [`separator`] — the two-stage constrained search that splits each
//!    pixel's response into two (magnitude, row) components.
//! 6. [`unwrap`] — the traditional multi-frequency unwrapping baseline the
//!    separator is compared against.
//!
//! [`scanset`] holds the shared data model and file formats.

pub mod error;
pub mod mtf;
pub mod patterns;
pub mod phasor;
pub mod scanset;
pub mod separator;
pub mod simulator;
pub mod unwrap;

pub use error::{Error, Result};
