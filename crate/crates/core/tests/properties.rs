//! Property tests for the extraction identities and data-model invariants.

use std::f64::consts::TAU;

use ndarray::Array4;
use proptest::prelude::*;

use pmp_multipath::patterns::pattern_value;
use pmp_multipath::phasor::{extract, phase_to_row};
use pmp_multipath::scanset::{
    load_stack, save_stack, ImageStack, ProjectorGeometry, ScanManifest,
};
use pmp_multipath::separator::predicted_magnitude;

fn wrapped_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

proptest! {
    /// Extracting a noiseless generated pattern returns phase 2πK·y (mod 2π)
    /// and magnitude N/4.
    #[test]
    fn extract_inverts_generate(
        k in 0u32..=60,
        y in 0.0f64..1.0,
        n in 3u32..=16,
    ) {
        let samples: Vec<f64> = (0..n).map(|i| pattern_value(k, i, n, y)).collect();
        let p = extract(&samples, k).unwrap();
        prop_assert!((p.magnitude() - n as f64 / 4.0).abs() < 1e-9);
        let expected = (TAU * k as f64 * y).rem_euclid(TAU);
        prop_assert!(wrapped_diff(p.phase().unwrap(), expected) < 1e-9);
        // The absolute phase maps straight back to the row fraction.
        if k >= 1 {
            let absolute = TAU * k as f64 * y;
            prop_assert!((phase_to_row(absolute, k).unwrap() - y).abs() < 1e-12);
        }
    }

    /// Phase is invariant to positive scaling; mean and magnitude scale.
    #[test]
    fn phase_scale_invariance(
        k in 1u32..=30,
        y in 0.0f64..1.0,
        scale in 0.05f64..20.0,
    ) {
        let samples: Vec<f64> = (0..8).map(|i| pattern_value(k, i, 8, y)).collect();
        let scaled: Vec<f64> = samples.iter().map(|s| s * scale).collect();
        let p = extract(&samples, k).unwrap();
        let q = extract(&scaled, k).unwrap();
        prop_assert!(wrapped_diff(p.phase().unwrap(), q.phase().unwrap()) < 1e-9);
        prop_assert!((q.a - scale * p.a).abs() < 1e-9 * scale.max(1.0));
        prop_assert!((q.magnitude() - scale * p.magnitude()).abs() < 1e-9 * scale.max(1.0));
    }

    /// The interference law stays between the destructive and constructive
    /// extremes.
    #[test]
    fn interference_bounds(
        mag_a in 0.0f64..1.0,
        dy in -0.5f64..0.5,
        k in 0u32..=60,
    ) {
        let mag_b = 1.0 - mag_a;
        let p = predicted_magnitude(mag_a, mag_b, dy, k);
        prop_assert!(p <= mag_a + mag_b + 1e-12);
        prop_assert!(p >= (mag_a - mag_b).abs() - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Save/load round trip: manifest exact, pixels within one quantization
    /// step.
    #[test]
    fn stack_round_trip(
        shifts in 3u32..=5,
        h in 1usize..5,
        w in 1usize..4,
        seed in 0u64..1000,
    ) {
        let geometry = ProjectorGeometry::new(64, 8).unwrap();
        let manifest = ScanManifest::new(geometry, shifts, vec![0, 1, 2], true).unwrap();
        let nk = 3;
        let mut values = Vec::new();
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        for _ in 0..nk * shifts as usize * h * w {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            values.push((state >> 11) as f64 / (1u64 << 53) as f64);
        }
        let data = Array4::from_shape_vec((nk, shifts as usize, h, w), values).unwrap();
        let stack = ImageStack::from_data(manifest, data).unwrap();

        let dir = tempfile::tempdir().unwrap();
        save_stack(&stack, dir.path()).unwrap();
        let loaded = load_stack(dir.path()).unwrap();
        prop_assert_eq!(loaded.manifest(), stack.manifest());
        for (a, b) in stack.data().iter().zip(loaded.data().iter()) {
            prop_assert!((a - b).abs() <= 1.0 / 65535.0);
        }
    }
}
