//! Flat JSON config file; command-line flags override file values.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// Every tunable of the pipeline, all optional. Subcommands pick the fields
/// they need and fall back to built-in defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // Projector geometry and pattern set.
    pub rows: Option<u32>,
    pub cols: Option<u32>,
    pub shifts: Option<u32>,
    pub frequencies: Option<Vec<u32>>,
    pub zero: Option<bool>,
    pub strict_quantization: Option<bool>,

    // Simulation.
    pub scene: Option<String>,
    pub camera_rows: Option<usize>,
    pub camera_cols: Option<usize>,
    pub seed: Option<u64>,
    pub noise_sigma: Option<f64>,
    /// "identity" or "gaussian" (optionally "gaussian:<k0>").
    pub envelope: Option<String>,
    pub albedo: Option<f64>,

    // Scene parameters.
    pub y_fg: Option<f64>,
    pub y_bg: Option<f64>,
    pub edge_col: Option<usize>,
    pub edge_band: Option<usize>,
    pub mesh_period: Option<f64>,
    pub mesh_duty: Option<f64>,
    pub y_screen: Option<f64>,
    pub y_object: Option<f64>,
    pub object_relief: Option<f64>,
    pub flat_y: Option<f64>,

    // Solver.
    pub mag_step: Option<f64>,
    pub row_step: Option<f64>,
    pub multipath_threshold: Option<f64>,
    pub stage1_reject_threshold: Option<f64>,
    pub shadow_threshold: Option<f64>,
    pub chain: Option<Vec<u32>>,

    // Point export.
    pub baseline: Option<f64>,
    pub pitch: Option<f64>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn load_optional(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }
}

/// Flag value wins over config value wins over default.
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag value wins over config value; `None` if neither is set.
pub fn pick_opt<T: Clone>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}
