//! Per-pixel phasor extraction from an N-shift image stack.
//!
//! For samples `I_n`, the mean is `A = (1/N)·Σ I_n` and the modulation is the
//! complex sum `B = Σ I_n·(cos(2πn/N) + j·sin(2πn/N))`. A noiseless pattern at
//! frequency `K` and row fraction `y` extracts to magnitude `N/4` and phase
//! `2πK·y (mod 2π)`, so phase and projector row grow together. The measured
//! phasor of a pixel seeing several paths is the sum of the path phasors.

use std::f64::consts::TAU;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::scanset::{FrequencySweep, ImageStack, PhasorField};

/// One pixel's response at one pattern frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPhasor {
    /// Mean intensity across the shift set.
    pub a: f64,
    pub b_re: f64,
    pub b_im: f64,
    /// Frequency of the stack this came from.
    pub k: u32,
}

impl PixelPhasor {
    pub fn magnitude(&self) -> f64 {
        self.b_re.hypot(self.b_im)
    }

    /// Wrapped phase in `[0, 2π)`. Errors when the magnitude is zero;
    /// magnitudes below 1e-12 count as zero so that round-off from a truly
    /// constant signal does not masquerade as a phase.
    pub fn phase(&self) -> Result<f64> {
        if self.magnitude() < 1e-12 {
            return Err(Error::UndefinedPhase);
        }
        let theta = self.b_im.atan2(self.b_re);
        Ok(if theta < 0.0 { theta + TAU } else { theta })
    }
}

/// Extracts the phasor from one pixel's N intensity samples.
pub fn extract(samples: &[f64], k: u32) -> Result<PixelPhasor> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::TooFewFrequencies { needed: 3, got: n });
    }
    let mut a = 0.0;
    let mut b_re = 0.0;
    let mut b_im = 0.0;
    for (i, &s) in samples.iter().enumerate() {
        let arg = TAU * i as f64 / n as f64;
        a += s;
        b_re += s * arg.cos();
        b_im += s * arg.sin();
    }
    Ok(PixelPhasor {
        a: a / n as f64,
        b_re,
        b_im,
        k,
    })
}

/// Extracts phasors for every pixel and frequency of a stack.
pub fn extract_field(stack: &ImageStack) -> Result<PhasorField> {
    let manifest = stack.manifest().clone();
    if manifest.shifts < 3 {
        return Err(Error::TooFewFrequencies {
            needed: 3,
            got: manifest.shifts as usize,
        });
    }
    let (h, w) = (stack.height(), stack.width());
    let nk = manifest.frequencies.len();
    let shifts = manifest.shifts as usize;

    // Shift basis is shared by all pixels and frequencies.
    let basis: Vec<(f64, f64)> = (0..shifts)
        .map(|n| {
            let arg = TAU * n as f64 / shifts as f64;
            (arg.cos(), arg.sin())
        })
        .collect();

    let mut a = Array3::zeros((nk, h, w));
    let mut b_re = Array3::zeros((nk, h, w));
    let mut b_im = Array3::zeros((nk, h, w));
    for ki in 0..nk {
        for (n, &(cos_n, sin_n)) in basis.iter().enumerate() {
            let plane = stack.image(ki, n);
            for r in 0..h {
                for c in 0..w {
                    let s = plane[[r, c]];
                    a[[ki, r, c]] += s;
                    b_re[[ki, r, c]] += s * cos_n;
                    b_im[[ki, r, c]] += s * sin_n;
                }
            }
        }
    }
    a.mapv_inplace(|v| v / shifts as f64);
    Ok(PhasorField {
        manifest,
        a,
        b_re,
        b_im,
    })
}

/// Collapses a phasor field into per-pixel `|AB|(K)` magnitudes plus the
/// zero-frequency anchor. The field must include a `K = 0` scan.
pub fn sweep_from_field(field: &PhasorField) -> Result<FrequencySweep> {
    if !field.manifest.includes_zero_frequency {
        return Err(Error::InvalidManifest(
            "frequency sweep needs a zero-frequency scan for AB0".into(),
        ));
    }
    let (h, w) = (field.height(), field.width());
    let nk = field.manifest.nonzero_frequencies().len();
    let mut magnitudes = Array3::zeros((nk, h, w));
    let mut ab0 = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            ab0[[r, c]] = field.magnitude(0, r, c);
            for ki in 0..nk {
                magnitudes[[ki, r, c]] = field.magnitude(ki + 1, r, c);
            }
        }
    }
    Ok(FrequencySweep {
        manifest: field.manifest.clone(),
        magnitudes,
        ab0,
    })
}

/// Default shadow threshold: 2% of the theoretical full-contrast magnitude
/// `N/4` for a `[0, 1]`-range source.
pub fn default_shadow_threshold(shifts: u32) -> f64 {
    0.02 * shifts as f64 / 4.0
}

/// Flags unreliable pixels: `true` means masked (shadowed).
///
/// The reference magnitude is taken at `K = 0` when present, else at the
/// lowest frequency, since those cannot destructively interfere.
pub fn shadow_mask(field: &PhasorField, threshold: f64) -> Array2<bool> {
    let (h, w) = (field.height(), field.width());
    let mut mask = Array2::from_elem((h, w), false);
    for r in 0..h {
        for c in 0..w {
            mask[[r, c]] = field.magnitude(0, r, c) < threshold;
        }
    }
    mask
}

/// Converts an absolute (unwrapped) phase in `[0, 2πK)` to a row fraction.
pub fn phase_to_row(theta_abs: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidManifest(
            "row position is undefined at zero frequency".into(),
        ));
    }
    Ok(theta_abs / (TAU * k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::pattern_value;
    use std::f64::consts::PI;

    /// Direct-summation oracle, kept separate from `extract`.
    fn phasor_oracle(samples: &[f64]) -> (f64, f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let re = samples
            .iter()
            .enumerate()
            .map(|(i, s)| s * (TAU * i as f64 / n).cos())
            .sum();
        let im = samples
            .iter()
            .enumerate()
            .map(|(i, s)| s * (TAU * i as f64 / n).sin())
            .sum();
        (mean, re, im)
    }

    #[test]
    fn constant_samples_have_no_modulation() {
        let p = extract(&[0.7; 8], 0).unwrap();
        assert!((p.a - 0.7).abs() < 1e-15);
        assert!(p.magnitude() < 1e-14);
        assert!(matches!(p.phase(), Err(Error::UndefinedPhase)));
    }

    #[test]
    fn shifted_cosine_recovers_magnitude_and_phase() {
        let theta0 = PI / 3.0;
        let samples: Vec<f64> = (0..8)
            .map(|n| 0.5 + 0.5 * (TAU * n as f64 / 8.0 - theta0).cos())
            .collect();
        let (oa, ore, oim) = phasor_oracle(&samples);
        let p = extract(&samples, 1).unwrap();
        assert!((p.a - oa).abs() < 1e-15);
        assert!((p.b_re - ore).abs() < 1e-15);
        assert!((p.b_im - oim).abs() < 1e-15);
        assert!((p.magnitude() - 2.0).abs() < 1e-12);
        assert!((p.phase().unwrap() - theta0).abs() < 1e-12);
    }

    #[test]
    fn extract_requires_three_samples() {
        assert!(extract(&[0.5, 0.5], 1).is_err());
    }

    #[test]
    fn phase_quadrants() {
        let east = PixelPhasor { a: 0.5, b_re: 1.0, b_im: 0.0, k: 1 };
        assert_eq!(east.phase().unwrap(), 0.0);
        let north = PixelPhasor { a: 0.5, b_re: 0.0, b_im: 1.0, k: 1 };
        assert!((north.phase().unwrap() - PI / 2.0).abs() < 1e-15);
        let south = PixelPhasor { a: 0.5, b_re: 0.0, b_im: -1.0, k: 1 };
        assert!((south.phase().unwrap() - 3.0 * PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn generated_pattern_phase_is_2pi_k_y() {
        // Identity with the pattern generator: phase ≡ 2πK·y (mod 2π),
        // magnitude = N/4.
        for &(k, y, n) in &[
            (1u32, 0.25f64, 8u32),
            (1, 0.0, 4),
            (12, 0.3917, 8),
            (60, 0.731, 16),
            (5, 0.9, 3),
        ] {
            let samples: Vec<f64> =
                (0..n).map(|i| pattern_value(k, i, n, y)).collect();
            let p = extract(&samples, k).unwrap();
            let expected = (TAU * k as f64 * y).rem_euclid(TAU);
            let mut diff = (p.phase().unwrap() - expected).abs();
            diff = diff.min(TAU - diff);
            assert!(diff < 1e-9, "K={k} y={y} N={n}: diff={diff}");
            assert!((p.magnitude() - n as f64 / 4.0).abs() < 1e-9);
        }
        // The worked case from above: K=1, y=0.25 lands at π/2.
        let samples: Vec<f64> = (0..8).map(|i| pattern_value(1, i, 8, 0.25)).collect();
        let p = extract(&samples, 1).unwrap();
        assert!((p.phase().unwrap() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn extraction_is_linear() {
        let s1: Vec<f64> = (0..8).map(|i| pattern_value(3, i, 8, 0.1)).collect();
        let s2: Vec<f64> = (0..8).map(|i| pattern_value(3, i, 8, 0.6)).collect();
        let combo: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| 0.3 * a + 1.4 * b).collect();
        let p1 = extract(&s1, 3).unwrap();
        let p2 = extract(&s2, 3).unwrap();
        let pc = extract(&combo, 3).unwrap();
        assert!((pc.a - (0.3 * p1.a + 1.4 * p2.a)).abs() < 1e-12);
        assert!((pc.b_re - (0.3 * p1.b_re + 1.4 * p2.b_re)).abs() < 1e-12);
        assert!((pc.b_im - (0.3 * p1.b_im + 1.4 * p2.b_im)).abs() < 1e-12);
    }

    #[test]
    fn phase_to_row_reference_points() {
        assert!((phase_to_row(PI, 1).unwrap() - 0.5).abs() < 1e-15);
        // Absolute phase fraction 16/60 of the full range at K=60.
        let theta = TAU * 60.0 * (16.0 / 60.0);
        assert!((phase_to_row(theta, 60).unwrap() - 16.0 / 60.0).abs() < 1e-12);
        let y = 0.3917;
        for k in [1u32, 12, 60] {
            assert!((phase_to_row(TAU * k as f64 * y, k).unwrap() - y).abs() < 1e-12);
        }
        assert!(phase_to_row(1.0, 0).is_err());
    }

    #[test]
    fn extracted_fields_respect_the_physical_bound() {
        use crate::patterns::{generate_stack, SweepPlan};
        use crate::scanset::ProjectorGeometry;
        let g = ProjectorGeometry::new(64, 4).unwrap();
        let plan = SweepPlan::new(g, 8, vec![1, 2, 4], true).unwrap();
        let stack = generate_stack(&plan).unwrap();
        let field = extract_field(&stack).unwrap();
        field.validate_physical(1e-9).unwrap();

        // A forged field with more modulation than mean violates it.
        let mut forged = field.clone();
        forged.b_re[[1, 0, 0]] = forged.a[[1, 0, 0]] * 8.0;
        forged.b_im[[1, 0, 0]] = 0.0;
        assert!(forged.validate_physical(1e-9).is_err());
    }

    #[test]
    fn shadow_mask_reference_frequency_and_thresholds() {
        use crate::patterns::{generate_stack, SweepPlan};
        use crate::scanset::ProjectorGeometry;
        let g = ProjectorGeometry::new(64, 4).unwrap();
        let plan = SweepPlan::new(g, 8, vec![1, 2], true).unwrap();
        let stack = generate_stack(&plan).unwrap();
        let field = extract_field(&stack).unwrap();
        // Full-contrast magnitude is N/4 = 2; N/8 masks nothing, 0 masks nothing.
        let mask = shadow_mask(&field, 1.0);
        assert!(mask.iter().all(|&m| !m));
        let mask = shadow_mask(&field, 0.0);
        assert!(mask.iter().all(|&m| !m));

        // All-dark stack: everything masked at any positive threshold.
        let dark = ImageStack::zeros(plan.manifest().unwrap(), 4, 4);
        let dark_field = extract_field(&dark).unwrap();
        let mask = shadow_mask(&dark_field, default_shadow_threshold(8));
        assert!(mask.iter().all(|&m| m));
    }
}
