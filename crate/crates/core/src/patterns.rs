//! Projected pattern generation for multi-frequency phase-shift scans.
//!
//! A pattern set at frequency `K` is `I_n(y) = 1/2 + 1/2·cos(2π(n/N − K·y))`
//! for shift index `n` in `[0, N)` and row fraction `y` in `[0, 1)`. `K = 0`
//! is the zero-frequency pattern: spatially constant, temporally sinusoidal.
//! Quantization artifacts are avoided by keeping wavelengths at integer
//! multiples of `N` projector pixels, which strict mode enforces.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::scanset::{ImageStack, ProjectorGeometry, ScanManifest};

/// A planned frequency sweep: which `K`s to project and with how many shifts.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub geometry: ProjectorGeometry,
    pub shifts: u32,
    /// Nonzero frequencies, ascending.
    pub frequencies: Vec<u32>,
    pub include_zero: bool,
    /// Enforce the wavelength-multiple-of-N rule. On for generation,
    /// off when describing external data that may not comply.
    pub strict_quantization: bool,
}

impl SweepPlan {
    pub fn new(
        geometry: ProjectorGeometry,
        shifts: u32,
        frequencies: Vec<u32>,
        include_zero: bool,
    ) -> Result<Self> {
        let plan = Self {
            geometry,
            shifts,
            frequencies,
            include_zero,
            strict_quantization: true,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.iter().any(|&k| k == 0) {
            return Err(Error::InvalidManifest(
                "list the zero frequency via include_zero, not in the frequency list".into(),
            ));
        }
        if self.strict_quantization {
            for &k in &self.frequencies {
                if !divides_cleanly(self.geometry.rows, k, self.shifts) {
                    return Err(Error::QuantizationViolation { k });
                }
            }
        }
        // Ordering, duplicates, and the wavelength bound are checked here.
        self.manifest().map(|_| ())
    }

    /// Manifest for stacks generated from this plan.
    pub fn manifest(&self) -> Result<ScanManifest> {
        let mut freqs = Vec::with_capacity(self.frequencies.len() + 1);
        if self.include_zero {
            freqs.push(0);
        }
        freqs.extend_from_slice(&self.frequencies);
        ScanManifest::new(self.geometry, self.shifts, freqs, self.include_zero)
    }
}

fn divides_cleanly(rows: u32, k: u32, shifts: u32) -> bool {
    k >= 1 && rows % k == 0 && (rows / k) % shifts == 0
}

/// Projected intensity at shift `n` of `shifts`, frequency `k`, row fraction
/// `y_frac`. Always in `[0, 1]`.
pub fn pattern_value(k: u32, n: u32, shifts: u32, y_frac: f64) -> f64 {
    pattern_value_with_contrast(k, n, shifts, y_frac, 1.0)
}

/// Pattern value with the AC term scaled by `contrast` in `[0, 1]`; models a
/// sinusoid attenuated by the system MTF.
pub fn pattern_value_with_contrast(k: u32, n: u32, shifts: u32, y_frac: f64, contrast: f64) -> f64 {
    0.5 + 0.5 * contrast * (TAU * (n as f64 / shifts as f64 - k as f64 * y_frac)).cos()
}

/// Renders the full pattern stack for a plan. Images vary down rows and are
/// constant across columns.
pub fn generate_stack(plan: &SweepPlan) -> Result<ImageStack> {
    plan.validate()?;
    let manifest = plan.manifest()?;
    let rows = plan.geometry.rows as usize;
    let cols = plan.geometry.cols as usize;
    let mut stack = ImageStack::zeros(manifest.clone(), rows, cols);
    for (ki, &k) in manifest.frequencies.iter().enumerate() {
        for n in 0..plan.shifts {
            let mut img = stack.image_mut(ki, n as usize);
            for r in 0..rows {
                let v = pattern_value(k, n, plan.shifts, r as f64 / rows as f64);
                img.row_mut(r).fill(v);
            }
        }
    }
    Ok(stack)
}

/// The default frequency sweep: `K = 0` plus every `K` in `[1, rows/N]`
/// whose wavelength `rows/K` is an integer multiple of `N` pixels.
pub fn default_sweep(geometry: ProjectorGeometry, shifts: u32) -> Result<SweepPlan> {
    if shifts < 3 {
        return Err(Error::InvalidManifest(format!(
            "shifts must be >= 3, got {shifts}"
        )));
    }
    if geometry.rows % shifts != 0 {
        return Err(Error::InvalidManifest(format!(
            "rows ({}) must be divisible by the shift count ({shifts})",
            geometry.rows
        )));
    }
    let max_k = geometry.rows / shifts;
    let frequencies: Vec<u32> = (1..=max_k)
        .filter(|&k| divides_cleanly(geometry.rows, k, shifts))
        .collect();
    SweepPlan::new(geometry, shifts, frequencies, true)
}
