//! Traditional multi-frequency phase unwrapping.
//!
//! High-frequency scans give precise but 2π-ambiguous phase; a lower
//! frequency scan resolves which wavelength each pixel sits in. Chains like
//! `{1, 12, 60}` unwrap stage by stage. Under multipath the mid-frequency
//! phase is pulled off its true value and the wavelength decision can land a
//! whole period away, which is the failure mode the separator removes.

use std::f64::consts::TAU;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scanset::PhasorField;

/// A per-pixel phase image at one frequency. Wrapped values live in
/// `[0, 2π)`, absolute values in `[0, 2πK)`. NaN marks unusable pixels.
#[derive(Debug, Clone)]
pub struct PhaseImage {
    pub k: u32,
    pub wrapped: bool,
    pub data: Array2<f64>,
}

impl PhaseImage {
    /// Row-fraction image `y = θ/(2πK)`; only meaningful for absolute phase.
    pub fn to_rows(&self) -> Result<Array2<f64>> {
        if self.wrapped && self.k > 1 {
            return Err(Error::UnwrapChain(
                "cannot convert wrapped phase above K=1 to rows".into(),
            ));
        }
        Ok(self.data.mapv(|t| t / (TAU * self.k as f64)))
    }
}

/// Wrapped phase image for frequency `k` of a phasor field. Pixels with no
/// modulation (or masked ones, if a mask is given) come out NaN.
pub fn wrapped_phase_image(
    field: &PhasorField,
    k: u32,
    mask: Option<&Array2<bool>>,
) -> Result<PhaseImage> {
    let ki = field
        .manifest
        .index_of(k)
        .ok_or_else(|| Error::FrequencyMismatch(format!("field has no K={k} scan")))?;
    if k == 0 {
        return Err(Error::UnwrapChain("zero frequency carries no phase ramp".into()));
    }
    let (h, w) = (field.height(), field.width());
    let mut data = Array2::from_elem((h, w), f64::NAN);
    for r in 0..h {
        for c in 0..w {
            if mask.is_some_and(|m| m[[r, c]]) {
                continue;
            }
            let re = field.b_re[[ki, r, c]];
            let im = field.b_im[[ki, r, c]];
            if re == 0.0 && im == 0.0 {
                continue;
            }
            let theta = im.atan2(re);
            data[[r, c]] = if theta < 0.0 { theta + TAU } else { theta };
        }
    }
    Ok(PhaseImage { k, wrapped: true, data })
}

/// Unwraps `high` (wrapped, at `K_high`) against `low` (absolute, at
/// `K_low`): per pixel,
/// `abs = 2π·round((K_high/K_low)·low/2π − high/2π) + high`,
/// kept inside `[0, 2πK_high)`.
pub fn unwrap_pair(low: &PhaseImage, high: &PhaseImage) -> Result<PhaseImage> {
    if low.wrapped && low.k > 1 {
        return Err(Error::UnwrapChain(format!(
            "low-frequency image at K={} must be absolute",
            low.k
        )));
    }
    if high.k < low.k {
        return Err(Error::UnwrapChain(format!(
            "cannot unwrap K={} with higher K={}",
            high.k, low.k
        )));
    }
    if low.data.dim() != high.data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            low.data.dim(),
            high.data.dim()
        )));
    }
    if high.k % low.k != 0 {
        log::warn!(
            "unwrap ratio {}/{} is not an integer; noise margins shrink",
            high.k,
            low.k
        );
    }
    let ratio = high.k as f64 / low.k as f64;
    let limit = TAU * high.k as f64;
    let mut data = Array2::from_elem(low.data.dim(), f64::NAN);
    for ((r, c), out) in data.indexed_iter_mut() {
        let lo = low.data[[r, c]];
        let hi = high.data[[r, c]];
        if lo.is_nan() || hi.is_nan() {
            continue;
        }
        let cycles = (ratio * lo / TAU - hi / TAU).round();
        *out = (TAU * cycles + hi).clamp(0.0, limit.next_down());
    }
    Ok(PhaseImage {
        k: high.k,
        wrapped: false,
        data,
    })
}

/// Left fold of [`unwrap_pair`] over an ascending chain; the first image must
/// be the unit frequency, whose wrapped phase is already absolute.
pub fn unwrap_chain(images: &[PhaseImage]) -> Result<PhaseImage> {
    let first = images
        .first()
        .ok_or_else(|| Error::UnwrapChain("empty chain".into()))?;
    if first.k != 1 {
        return Err(Error::UnwrapChain(format!(
            "chain must start at K=1, got K={}",
            first.k
        )));
    }
    let mut acc = PhaseImage {
        k: 1,
        wrapped: false,
        data: first.data.clone(),
    };
    for img in &images[1..] {
        acc = unwrap_pair(&acc, img)?;
    }
    Ok(acc)
}
