//! System modulation-transfer envelope: estimation from a flat-target scan
//! and sweep normalization.
//!
//! Projector and camera optics low-pass the projected sinusoids, so measured
//! modulation drops at high K. Scanning a flat, textureless board and
//! averaging `|AB|` over all pixels per frequency gives the envelope, which
//! then divides all subsequent sweeps. Gains are expressed relative to the
//! zero-frequency magnitude so that `K = 0` is unattenuated, which is what
//! the separator's `|A|+|B| = |AB0|` constraint requires.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scanset::{FrequencySweep, Normalization, PhasorField};

/// Per-frequency gain of the optical chain, relative to `K = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MtfEnvelope {
    /// All manifest frequencies, including `K = 0` when present.
    pub frequencies: Vec<u32>,
    /// Gains aligned with `frequencies`; the `K = 0` entry is 1 by construction.
    pub gains: Vec<f64>,
    /// Mean zero-frequency magnitude of the calibration scan.
    pub reference_ab0: f64,
}

impl MtfEnvelope {
    /// Identity envelope for a frequency list (no attenuation).
    pub fn identity(frequencies: &[u32]) -> Self {
        Self {
            frequencies: frequencies.to_vec(),
            gains: vec![1.0; frequencies.len()],
            reference_ab0: 1.0,
        }
    }

    pub fn gain_for(&self, k: u32) -> Option<f64> {
        self.frequencies
            .iter()
            .position(|&f| f == k)
            .map(|i| self.gains[i])
    }

    /// Writes `K,gain` rows plus a JSON sidecar with the reference magnitude.
    pub fn save(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "K,gain").expect("vec write");
        for (k, g) in self.frequencies.iter().zip(&self.gains) {
            writeln!(out, "{k},{g:.6e}").expect("vec write");
        }
        fs::write(csv_path, out).map_err(|e| Error::io(csv_path, e))?;
        let meta = serde_json::json!({ "reference_ab0": self.reference_ab0 });
        fs::write(meta_path, serde_json::to_string_pretty(&meta).expect("json"))
            .map_err(|e| Error::io(meta_path, e))
    }

    pub fn load(csv_path: &Path, meta_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let mut frequencies = Vec::new();
        let mut gains = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                continue; // header
            }
            let mut parts = line.split(',');
            let k = parts
                .next()
                .and_then(|s| s.trim().parse::<u32>().ok())
                .ok_or_else(|| Error::InvalidManifest(format!("bad envelope row: {line}")))?;
            let g = parts
                .next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidManifest(format!("bad envelope row: {line}")))?;
            frequencies.push(k);
            gains.push(g);
        }
        if frequencies.is_empty() {
            return Err(Error::InvalidManifest("empty envelope file".into()));
        }
        let meta_text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
        let meta: serde_json::Value =
            serde_json::from_str(&meta_text).map_err(|e| Error::json(meta_path, e))?;
        let reference_ab0 = meta
            .get("reference_ab0")
            .and_then(|v| v.as_f64())
            .unwrap_or(1.0);
        Ok(Self {
            frequencies,
            gains,
            reference_ab0,
        })
    }
}

/// Estimates the envelope from a flat single-path scan: per frequency, the
/// mean `|AB|` over unmasked pixels divided by the mean `|AB0|`.
pub fn estimate_envelope(flat_scan: &PhasorField, mask: &Array2<bool>) -> Result<MtfEnvelope> {
    if !flat_scan.manifest.includes_zero_frequency {
        return Err(Error::InvalidManifest(
            "envelope estimation needs a zero-frequency scan".into(),
        ));
    }
    let (h, w) = (flat_scan.height(), flat_scan.width());
    if mask.dim() != (h, w) {
        return Err(Error::DimensionMismatch(format!(
            "mask is {:?}, field is {}x{}",
            mask.dim(),
            h,
            w
        )));
    }
    let unmasked = mask.iter().filter(|&&m| !m).count();
    if unmasked == 0 {
        return Err(Error::EmptyMask);
    }

    let nk = flat_scan.manifest.frequencies.len();
    let mut means = vec![0.0; nk];
    for r in 0..h {
        for c in 0..w {
            if mask[[r, c]] {
                continue;
            }
            for (ki, m) in means.iter_mut().enumerate() {
                *m += flat_scan.magnitude(ki, r, c);
            }
        }
    }
    for m in &mut means {
        *m /= unmasked as f64;
    }
    let reference_ab0 = means[0];
    if means.iter().any(|&m| m == 0.0) {
        return Err(Error::InvalidManifest(
            "flat scan has zero mean magnitude at some frequency".into(),
        ));
    }
    Ok(MtfEnvelope {
        frequencies: flat_scan.manifest.frequencies.clone(),
        gains: means.iter().map(|&m| m / reference_ab0).collect(),
        reference_ab0,
    })
}

/// Divides a sweep by the envelope, then rescales each pixel so `AB0 = 1`.
///
/// Masked pixels come out zero. Unmasked pixels with `AB0 = 0` are an error;
/// pass the shadow mask used for extraction to exclude them.
pub fn normalize(
    sweep: &FrequencySweep,
    env: &MtfEnvelope,
    mask: Option<&Array2<bool>>,
) -> Result<FrequencySweep> {
    let freqs = sweep.manifest.nonzero_frequencies();
    let gains: Vec<f64> = freqs
        .iter()
        .map(|&k| {
            env.gain_for(k).ok_or_else(|| {
                Error::FrequencyMismatch(format!("envelope has no gain for K={k}"))
            })
        })
        .collect::<Result<_>>()?;

    let (h, w) = (sweep.height(), sweep.width());
    if let Some(m) = mask {
        if m.dim() != (h, w) {
            return Err(Error::DimensionMismatch(format!(
                "mask is {:?}, sweep is {h}x{w}",
                m.dim()
            )));
        }
    }

    let mut out = sweep.clone();
    out.manifest.normalization = Normalization::MtfNormalized;
    for r in 0..h {
        for c in 0..w {
            if mask.is_some_and(|m| m[[r, c]]) {
                for ki in 0..freqs.len() {
                    out.magnitudes[[ki, r, c]] = 0.0;
                }
                out.ab0[[r, c]] = 0.0;
                continue;
            }
            let ab0 = sweep.ab0[[r, c]];
            if ab0 == 0.0 {
                return Err(Error::ShadowPixel { row: r, col: c });
            }
            for (ki, &g) in gains.iter().enumerate() {
                out.magnitudes[[ki, r, c]] = sweep.magnitudes[[ki, r, c]] / (g * ab0);
            }
            out.ab0[[r, c]] = 1.0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::default_sweep;
    use crate::phasor::{extract_field, shadow_mask, sweep_from_field};
    use crate::scanset::ProjectorGeometry;
    use crate::simulator::{make_flat_scene, render_scene, EnvelopeModel, SceneModel, ScenePixel};
    use std::f64::consts::TAU;

    fn vga() -> ProjectorGeometry {
        ProjectorGeometry::new(480, 640).unwrap()
    }

    fn render_flat(noise: f64, envelope: EnvelopeModel, seed: u64) -> PhasorField {
        let mut scene = make_flat_scene(24, 24, 0.5, 0.85).unwrap();
        scene.noise_sigma = noise;
        scene.envelope = envelope;
        let plan = default_sweep(vga(), 8).unwrap();
        let scan = render_scene(&scene, &plan, seed).unwrap();
        extract_field(&scan.stack).unwrap()
    }

    #[test]
    fn identity_envelope_estimates_to_ones() {
        let field = render_flat(0.0, EnvelopeModel::Identity, 0);
        let mask = shadow_mask(&field, 0.01);
        let env = estimate_envelope(&field, &mask).unwrap();
        assert!(env.gains.iter().all(|g| (g - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gaussian_envelope_recovered_under_noise() {
        let truth = EnvelopeModel::gaussian_half_at(60);
        let field = render_flat(0.005, truth.clone(), 11);
        let mask = shadow_mask(&field, 0.01);
        let env = estimate_envelope(&field, &mask).unwrap();
        for (k, g) in env.frequencies.iter().zip(&env.gains) {
            assert!(
                (g - truth.gain(*k)).abs() < 1e-3,
                "K={k}: {g} vs {}",
                truth.gain(*k)
            );
        }
        // Real optics: gains fall off with K.
        for w in env.gains.windows(2) {
            assert!(w[1] <= w[0] + 1e-3);
        }
    }

    #[test]
    fn self_normalization_is_flat() {
        let field = render_flat(0.003, EnvelopeModel::gaussian_half_at(60), 3);
        let mask = shadow_mask(&field, 0.01);
        let env = estimate_envelope(&field, &mask).unwrap();
        let sweep = sweep_from_field(&field).unwrap();
        let norm = normalize(&sweep, &env, Some(&mask)).unwrap();
        let nk = norm.manifest.nonzero_frequencies().len();
        for ki in 0..nk {
            let mean = norm
                .magnitudes
                .index_axis(ndarray::Axis(0), ki)
                .mean()
                .unwrap();
            assert!((mean - 1.0).abs() < 5e-3, "ki={ki}: {mean}");
        }
        assert_eq!(norm.manifest.normalization, Normalization::MtfNormalized);
    }

    #[test]
    fn normalized_mixture_preserves_interference_shape() {
        // After envelope division the sweep must equal the prediction computed
        // with no envelope at all, noiseless.
        let y_fg = 0.3917;
        let dy = 12.0 / 480.0;
        let scene = SceneModel {
            rows: 2,
            cols: 2,
            pixels: vec![
                ScenePixel {
                    alpha: 0.55,
                    y_fg,
                    y_bg: y_fg - dy,
                    albedo_fg: 0.9,
                    albedo_bg: 0.9,
                    ambient: 0.05,
                };
                4
            ],
            noise_sigma: 0.0,
            envelope: EnvelopeModel::gaussian_half_at(60),
        };
        let plan = default_sweep(vga(), 8).unwrap();
        let scan = render_scene(&scene, &plan, 0).unwrap();
        let field = extract_field(&scan.stack).unwrap();
        let sweep = sweep_from_field(&field).unwrap();

        let flat = render_flat(0.0, EnvelopeModel::gaussian_half_at(60), 0);
        let mask_flat = shadow_mask(&flat, 0.01);
        let env = estimate_envelope(&flat, &mask_flat).unwrap();
        let norm = normalize(&sweep, &env, None).unwrap();

        for (ki, &k) in norm.manifest.nonzero_frequencies().iter().enumerate() {
            let cos_term = (TAU * k as f64 * dy).cos();
            let expected =
                (0.55f64.powi(2) + 0.45f64.powi(2) + 2.0 * 0.55 * 0.45 * cos_term).sqrt();
            let got = norm.magnitudes[[ki, 0, 0]];
            assert!((got - expected).abs() < 1e-6, "K={k}: {got} vs {expected}");
        }
        // Extremes: bounded by |A|+|B| = 1 and ||A|−|B|| = 0.1.
        let mags = norm.pixel(0, 0);
        assert!(mags.iter().cloned().fold(f64::MIN, f64::max) <= 1.0 + 1e-9);
        assert!(mags.iter().cloned().fold(f64::MAX, f64::min) >= 0.1 - 1e-9);
    }

    #[test]
    fn identity_normalization_is_idempotent_in_shape() {
        let field = render_flat(0.0, EnvelopeModel::Identity, 0);
        let sweep = sweep_from_field(&field).unwrap();
        let env = MtfEnvelope::identity(&sweep.manifest.frequencies);
        let once = normalize(&sweep, &env, None).unwrap();
        let twice = normalize(&once, &env, None).unwrap();
        assert_eq!(once.magnitudes, twice.magnitudes);
        assert_eq!(once.ab0, twice.ab0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let field = render_flat(0.0, EnvelopeModel::Identity, 0);
        let mask = Array2::from_elem((field.height(), field.width()), true);
        assert!(matches!(estimate_envelope(&field, &mask), Err(Error::EmptyMask)));
    }

    #[test]
    fn frequency_mismatch_is_an_error() {
        let field = render_flat(0.0, EnvelopeModel::Identity, 0);
        let sweep = sweep_from_field(&field).unwrap();
        let env = MtfEnvelope::identity(&[0, 1, 2]);
        assert!(matches!(
            normalize(&sweep, &env, None),
            Err(Error::FrequencyMismatch(_))
        ));
    }

    #[test]
    fn unmasked_dark_pixel_is_an_error() {
        let field = render_flat(0.0, EnvelopeModel::Identity, 0);
        let mut sweep = sweep_from_field(&field).unwrap();
        sweep.ab0[[3, 5]] = 0.0;
        let env = MtfEnvelope::identity(&sweep.manifest.frequencies);
        assert!(matches!(
            normalize(&sweep, &env, None),
            Err(Error::ShadowPixel { row: 3, col: 5 })
        ));
        // Masking the pixel makes the same input fine.
        let mut mask = Array2::from_elem((field.height(), field.width()), false);
        mask[[3, 5]] = true;
        let norm = normalize(&sweep, &env, Some(&mask)).unwrap();
        assert_eq!(norm.ab0[[3, 5]], 0.0);
    }

    #[test]
    fn envelope_csv_round_trip() {
        let env = MtfEnvelope {
            frequencies: vec![0, 1, 12, 60],
            gains: vec![1.0, 0.997, 0.87, 0.5],
            reference_ab0: 1.6234,
        };
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("envelope.csv");
        let meta = dir.path().join("envelope.json");
        env.save(&csv, &meta).unwrap();
        let back = MtfEnvelope::load(&csv, &meta).unwrap();
        assert_eq!(back.frequencies, env.frequencies);
        for (a, b) in back.gains.iter().zip(&env.gains) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!((back.reference_ab0 - env.reference_ab0).abs() < 1e-9);
    }
}
