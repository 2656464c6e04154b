//! Bimodal multipath separation: fits a two-path interference model to a
//! pixel's frequency sweep and recovers two independent (magnitude, row)
//! estimates.
//!
//! The measured modulation of a two-path pixel obeys
//! `|AB|² = |A|² + |B|² + 2|A||B|·cos(2πK·dy)` with `dy` the row difference
//! between the paths, so `|AB|(K)` traces a sinusoid in K between fully
//! constructive (`|A|+|B|`) and fully destructive (`||A|−|B||`). The
//! zero-frequency scan pins `|A|+|B| = |AB0|`, collapsing the search to two
//! unknowns. Stage 1 grid-searches `(|A|, dy)` against the magnitude sweep;
//! stage 2 grid-searches the absolute row `y_a` (and the sign of `dy`, which
//! magnitudes alone cannot see) against the complex phasors. Both stages end
//! with a parabolic refinement that is only kept when it improves the
//! residual. Pixels are independent, so fields are processed in parallel.

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mtf::{normalize, MtfEnvelope};
use crate::phasor::sweep_from_field;
use crate::scanset::PhasorField;

pub const DEFAULT_MAG_STEP: f64 = 0.002;
pub const DEFAULT_MULTIPATH_THRESHOLD: f64 = 0.05;
pub const DEFAULT_STAGE1_REJECT: f64 = 0.25;

/// Grid resolutions and thresholds for the two-stage search.
#[derive(Debug, Clone, Copy)]
pub struct SeparatorParams {
    /// Magnitude grid step on the normalized scale where `|A|+|B| = 1`.
    pub mag_step: f64,
    /// Row-fraction grid step; default is half a projector pixel.
    pub row_step: f64,
    /// Secondary magnitude at or above this flags a genuine second path.
    pub multipath_threshold: f64,
    /// Stage-2 refuses pixels whose stage-1 residual exceeds this; guards
    /// against pixels the two-path model cannot explain.
    pub stage1_reject_threshold: f64,
    /// Parabolic sub-grid refinement of each axis.
    pub refine: bool,
}

impl SeparatorParams {
    /// Defaults for a projector with the given row count.
    pub fn for_rows(rows: u32) -> Self {
        Self {
            mag_step: DEFAULT_MAG_STEP,
            row_step: 1.0 / (2.0 * rows as f64),
            multipath_threshold: DEFAULT_MULTIPATH_THRESHOLD,
            stage1_reject_threshold: DEFAULT_STAGE1_REJECT,
            refine: true,
        }
    }
}

/// Stage-1 output: magnitudes and unsigned row difference.
#[derive(Debug, Clone, Copy)]
pub struct MagnitudeFit {
    pub mag_a: f64,
    pub mag_b: f64,
    /// Unsigned; the cosine is even in `dy`, stage 2 resolves the sign.
    pub dy_abs: f64,
    pub residual: f64,
    /// Winning grid cell `(mag index, dy index)` before refinement.
    pub grid_cell: (usize, usize),
}

/// Stage-2 output: absolute rows for both paths.
#[derive(Debug, Clone, Copy)]
pub struct PhaseFit {
    pub y_a: f64,
    pub y_b: f64,
    /// Signed row difference `y_a − y_b` in `(−0.5, 0.5]`.
    pub dy: f64,
    pub residual: f64,
}

/// The separated two-path solution for one pixel, ordered so the dominant
/// path comes first.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BimodalEstimate {
    pub mag_a: f64,
    pub mag_b: f64,
    /// `y_a − y_b` in `(−0.5, 0.5]`; `y_b ≡ y_a − dy (mod 1)`.
    pub dy: f64,
    pub y_a: f64,
    pub y_b: f64,
    pub stage1_residual: f64,
    pub stage2_residual: f64,
    pub is_multipath: bool,
}

/// Two-path interference law: combined modulation magnitude at frequency `k`
/// for path magnitudes `mag_a`, `mag_b` separated by `dy` rows.
pub fn predicted_magnitude(mag_a: f64, mag_b: f64, dy: f64, k: u32) -> f64 {
    let cos_term = (TAU * k as f64 * dy).cos();
    (mag_a * mag_a + mag_b * mag_b + 2.0 * mag_a * mag_b * cos_term).sqrt()
}

/// Two-stage grid-search solver with precomputed prediction tables, reusable
/// across all pixels of a field.
pub struct Separator {
    params: SeparatorParams,
    freqs: Vec<u32>,
    mag_grid: Vec<f64>,
    dy_grid: Vec<f64>,
    /// Predicted magnitude per `(dy, mag, K)` cell, flattened.
    pred: Vec<f64>,
    /// Stage-2 unit phasors `e^{j2πK·y}` per `(y, K)`, flattened.
    y_grid: Vec<f64>,
    basis: Vec<Complex64>,
}

impl Separator {
    /// Builds the solver for a set of nonzero fit frequencies.
    pub fn new(params: SeparatorParams, fit_frequencies: &[u32]) -> Result<Self> {
        if fit_frequencies.len() < 4 {
            return Err(Error::TooFewFrequencies {
                needed: 4,
                got: fit_frequencies.len(),
            });
        }
        if fit_frequencies.iter().any(|&k| k == 0) {
            return Err(Error::InvalidManifest(
                "K=0 anchors the constraint and is not a fit point".into(),
            ));
        }
        let n_mag = (0.5 / params.mag_step).round() as usize + 1;
        let n_dy = (0.5 / params.row_step).round() as usize + 1;
        let mag_grid: Vec<f64> = (0..n_mag).map(|i| 0.5 + i as f64 * params.mag_step).collect();
        let dy_grid: Vec<f64> = (0..n_dy).map(|i| i as f64 * params.row_step).collect();

        let nk = fit_frequencies.len();
        let mut pred = vec![0.0; n_dy * n_mag * nk];
        for (di, &dy) in dy_grid.iter().enumerate() {
            for (mi, &ma) in mag_grid.iter().enumerate() {
                let mb = 1.0 - ma;
                let base = (di * n_mag + mi) * nk;
                for (kk, &k) in fit_frequencies.iter().enumerate() {
                    pred[base + kk] = predicted_magnitude(ma, mb, dy, k);
                }
            }
        }

        let n_y = (1.0 / params.row_step).round() as usize;
        let y_grid: Vec<f64> = (0..n_y).map(|i| i as f64 * params.row_step).collect();
        let mut basis = vec![Complex64::ZERO; n_y * nk];
        for (yi, &y) in y_grid.iter().enumerate() {
            for (kk, &k) in fit_frequencies.iter().enumerate() {
                basis[yi * nk + kk] = Complex64::cis(TAU * k as f64 * y);
            }
        }

        Ok(Self {
            params,
            freqs: fit_frequencies.to_vec(),
            mag_grid,
            dy_grid,
            pred,
            y_grid,
            basis,
        })
    }

    pub fn params(&self) -> &SeparatorParams {
        &self.params
    }

    pub fn frequencies(&self) -> &[u32] {
        &self.freqs
    }

    fn stage1_residual_at(&self, mag_a: f64, dy: f64, mags: &[f64]) -> f64 {
        let mag_b = 1.0 - mag_a;
        self.freqs
            .iter()
            .zip(mags)
            .map(|(&k, &m)| {
                let d = m - predicted_magnitude(mag_a, mag_b, dy, k);
                d * d
            })
            .sum()
    }

    /// Stage 1: exhaustive search over `(|A|, dy)` with `|B| = 1 − |A|`,
    /// minimizing the squared error against the normalized magnitude sweep.
    ///
    /// Ties prefer the smallest `dy`, then the largest `|A|` (the single-path
    /// explanation). The sweep must be normalized so `AB0 = 1`.
    pub fn fit_magnitudes(&self, mags: &[f64]) -> Result<MagnitudeFit> {
        let nk = self.freqs.len();
        if mags.len() != nk {
            return Err(Error::FrequencyMismatch(format!(
                "sweep has {} values, solver expects {nk}",
                mags.len()
            )));
        }
        if mags.iter().all(|&m| m == 0.0) {
            return Err(Error::AllZeroSweep);
        }

        let n_mag = self.mag_grid.len();
        let mut best = f64::INFINITY;
        let mut best_cell = (0usize, 0usize);
        for di in 0..self.dy_grid.len() {
            for mi in 0..n_mag {
                let base = (di * n_mag + mi) * nk;
                let mut acc = 0.0;
                for kk in 0..nk {
                    let d = mags[kk] - self.pred[base + kk];
                    acc += d * d;
                }
                if acc < best || (acc == best && di == best_cell.1) {
                    best = acc;
                    best_cell = (mi, di);
                }
            }
        }

        let mut mag_a = self.mag_grid[best_cell.0];
        let mut dy = self.dy_grid[best_cell.1];
        let mut residual = best;
        if self.params.refine {
            // Two coordinate-descent passes: the axes are correlated, so the
            // magnitude fit goes stale once dy moves off its grid value.
            for _ in 0..2 {
                let (m, r) = refine_axis(
                    |x| self.stage1_residual_at(x, dy, mags),
                    mag_a,
                    residual,
                    self.params.mag_step,
                    0.5,
                    1.0,
                    false,
                );
                mag_a = m;
                residual = r;
                let (d, r) = refine_axis(
                    |x| self.stage1_residual_at(mag_a, x, mags),
                    dy,
                    residual,
                    self.params.row_step,
                    0.0,
                    0.5,
                    false,
                );
                dy = d;
                residual = r;
            }
        }
        Ok(MagnitudeFit {
            mag_a,
            mag_b: 1.0 - mag_a,
            dy_abs: dy,
            residual,
            grid_cell: best_cell,
        })
    }

    fn stage2_residual_at(
        &self,
        y_a: f64,
        mag_a: f64,
        mag_b: f64,
        dy_signed: f64,
        phasors: &[Complex64],
    ) -> f64 {
        self.freqs
            .iter()
            .zip(phasors)
            .map(|(&k, &ph)| {
                let model = mag_a * Complex64::cis(TAU * k as f64 * y_a)
                    + mag_b * Complex64::cis(TAU * k as f64 * (y_a - dy_signed));
                (ph - model).norm_sqr()
            })
            .sum()
    }

    /// Stage 2: grid search over the absolute row `y_a` and the `dy` sign,
    /// minimizing the complex residual against the normalized phasors, with
    /// magnitudes and `|dy|` held fixed from stage 1.
    pub fn fit_phases(&self, phasors: &[Complex64], stage1: &MagnitudeFit) -> Result<PhaseFit> {
        let nk = self.freqs.len();
        if phasors.len() != nk {
            return Err(Error::FrequencyMismatch(format!(
                "{} phasors, solver expects {nk}",
                phasors.len()
            )));
        }
        if stage1.residual > self.params.stage1_reject_threshold {
            return Err(Error::Stage1Rejected {
                residual: stage1.residual,
                threshold: self.params.stage1_reject_threshold,
            });
        }

        let (mag_a, mag_b) = (stage1.mag_a, stage1.mag_b);
        let mut best = f64::INFINITY;
        let mut best_y = 0.0;
        let mut best_sign = 1.0;
        for sign in [1.0f64, -1.0] {
            // Model phasor factors as e^{j2πK·y_a}·(|A| + |B|·e^{−j2πK·s·dy}).
            let q: Vec<Complex64> = self
                .freqs
                .iter()
                .map(|&k| mag_a + mag_b * Complex64::cis(-TAU * k as f64 * sign * stage1.dy_abs))
                .collect();
            for (yi, &y) in self.y_grid.iter().enumerate() {
                let base = yi * nk;
                let mut acc = 0.0;
                for kk in 0..nk {
                    acc += (phasors[kk] - self.basis[base + kk] * q[kk]).norm_sqr();
                }
                if acc < best {
                    best = acc;
                    best_y = y;
                    best_sign = sign;
                }
            }
            if stage1.dy_abs == 0.0 {
                break; // signs coincide
            }
        }

        let mut y_a = best_y;
        let mut residual = best;
        if self.params.refine {
            let dy_signed = best_sign * stage1.dy_abs;
            let (y, r) = refine_axis(
                |x| self.stage2_residual_at(x.rem_euclid(1.0), mag_a, mag_b, dy_signed, phasors),
                y_a,
                residual,
                self.params.row_step,
                f64::NEG_INFINITY,
                f64::INFINITY,
                true,
            );
            y_a = y.rem_euclid(1.0);
            residual = r;
        }

        let dy = normalize_dy(best_sign * stage1.dy_abs);
        Ok(PhaseFit {
            y_a,
            y_b: (y_a - dy).rem_euclid(1.0),
            dy,
            residual,
        })
    }

    /// Full per-pixel separation: stage 1, stage 2, dominant ordering, and
    /// the multipath flag. Inputs must be MTF- and AB0-normalized.
    pub fn separate_pixel(
        &self,
        mags: &[f64],
        phasors: &[Complex64],
    ) -> Result<BimodalEstimate> {
        let stage1 = self.fit_magnitudes(mags)?;
        let stage2 = self.fit_phases(phasors, &stage1)?;
        // mag_a >= 0.5 by construction, so the dominant path is already first.
        let is_multipath =
            stage1.mag_b >= self.params.multipath_threshold && stage2.dy.abs() >= self.params.row_step;
        Ok(BimodalEstimate {
            mag_a: stage1.mag_a,
            mag_b: stage1.mag_b,
            dy: stage2.dy,
            y_a: stage2.y_a,
            y_b: stage2.y_b,
            stage1_residual: stage1.residual,
            stage2_residual: stage2.residual,
            is_multipath,
        })
    }

    /// Separates every unmasked pixel of a field. Pixels that cannot be
    /// processed (shadowed, zero sweep, rejected fits) are skipped.
    pub fn separate_field(
        &self,
        field: &PhasorField,
        env: &MtfEnvelope,
        mask: &Array2<bool>,
    ) -> Result<SeparationField> {
        let (h, w) = (field.height(), field.width());
        if mask.dim() != (h, w) {
            return Err(Error::DimensionMismatch(format!(
                "mask is {:?}, field is {h}x{w}",
                mask.dim()
            )));
        }
        let fit_freqs = field.manifest.nonzero_frequencies();
        if fit_freqs != self.freqs {
            return Err(Error::FrequencyMismatch(
                "field frequencies differ from the solver's".into(),
            ));
        }
        let sweep = sweep_from_field(field)?;
        // Zero-magnitude pixels are unprocessable even if the caller's mask
        // missed them.
        let mut mask = mask.clone();
        for ((r, c), m) in mask.indexed_iter_mut() {
            if sweep.ab0[[r, c]] <= 0.0 {
                *m = true;
            }
        }
        let norm = normalize(&sweep, env, Some(&mask))?;
        let gains: Vec<f64> = self
            .freqs
            .iter()
            .map(|&k| {
                env.gain_for(k)
                    .ok_or_else(|| Error::FrequencyMismatch(format!("no envelope gain for K={k}")))
            })
            .collect::<Result<_>>()?;

        let nk = self.freqs.len();
        let estimates: Vec<Option<BimodalEstimate>> = (0..h * w)
            .into_par_iter()
            .map(|idx| {
                let (r, c) = (idx / w, idx % w);
                if mask[[r, c]] {
                    return None;
                }
                let ab0 = sweep.ab0[[r, c]];
                if ab0 <= 0.0 {
                    return None;
                }
                let mags: Vec<f64> = (0..nk).map(|ki| norm.magnitudes[[ki, r, c]]).collect();
                let phasors: Vec<Complex64> = (0..nk)
                    .map(|ki| {
                        Complex64::new(
                            field.b_re[[ki + 1, r, c]],
                            field.b_im[[ki + 1, r, c]],
                        ) / (gains[ki] * ab0)
                    })
                    .collect();
                self.separate_pixel(&mags, &phasors).ok()
            })
            .collect();

        Ok(SeparationField {
            height: h,
            width: w,
            estimates,
        })
    }
}

fn normalize_dy(dy: f64) -> f64 {
    if dy <= -0.5 {
        dy + 1.0
    } else {
        dy
    }
}

/// One parabolic refinement step along an axis. Evaluates the two neighbors
/// at `±step`, fits a parabola, and keeps the vertex only when it actually
/// lowers the residual; degenerate or non-convex fits keep the grid point.
fn refine_axis<F>(
    eval: F,
    center: f64,
    center_res: f64,
    step: f64,
    lo: f64,
    hi: f64,
    circular: bool,
) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let (xm, xp) = (center - step, center + step);
    if !circular && (xm < lo - 1e-12 || xp > hi + 1e-12) {
        return (center, center_res);
    }
    let rm = eval(xm);
    let rp = eval(xp);
    let denom = rm - 2.0 * center_res + rp;
    if !(denom > 0.0) || !denom.is_finite() {
        return (center, center_res);
    }
    let offset = 0.5 * (rm - rp) / denom;
    if !offset.is_finite() || offset.abs() > 1.0 {
        return (center, center_res);
    }
    let candidate = (center + offset * step).clamp(lo, hi);
    let rc = eval(candidate);
    if rc < center_res {
        (candidate, rc)
    } else {
        (center, center_res)
    }
}

/// Per-pixel separation results for a whole field.
#[derive(Debug, Clone)]
pub struct SeparationField {
    pub height: usize,
    pub width: usize,
    /// Row-major; `None` where the pixel was masked or rejected.
    pub estimates: Vec<Option<BimodalEstimate>>,
}

impl SeparationField {
    pub fn get(&self, row: usize, col: usize) -> Option<&BimodalEstimate> {
        self.estimates[row * self.width + col].as_ref()
    }

    fn image_of<F: Fn(&BimodalEstimate) -> f64>(&self, f: F) -> Array2<f64> {
        let mut img = Array2::from_elem((self.height, self.width), f64::NAN);
        for (idx, est) in self.estimates.iter().enumerate() {
            if let Some(e) = est {
                img[[idx / self.width, idx % self.width]] = f(e);
            }
        }
        img
    }

    /// Dominant-path magnitude per pixel.
    pub fn primary_magnitude_image(&self) -> Array2<f64> {
        self.image_of(|e| e.mag_a)
    }

    /// Secondary-path magnitude per pixel.
    pub fn secondary_magnitude_image(&self) -> Array2<f64> {
        self.image_of(|e| e.mag_b)
    }

    /// Dominant-path row fraction per pixel.
    pub fn primary_phase_image(&self) -> Array2<f64> {
        self.image_of(|e| e.y_a)
    }

    /// Secondary-path row fraction per pixel.
    pub fn secondary_phase_image(&self) -> Array2<f64> {
        self.image_of(|e| e.y_b)
    }
}
