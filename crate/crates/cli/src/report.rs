//! Run report: aggregate quality metrics, with ground-truth comparisons when
//! the scan came from the simulator.

use ndarray::Array2;
use serde::Serialize;

use pmp_multipath::separator::SeparationField;
use pmp_multipath::simulator::SceneModel;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scan: String,
    pub envelope: Option<String>,
    pub truth: Option<String>,
    pub pixels_total: usize,
    pub pixels_masked: usize,
    pub pixels_estimated: usize,
    pub pixels_multipath: usize,
    pub median_stage1_residual: f64,
    pub median_stage2_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_metrics: Option<TruthMetrics>,
}

/// Error statistics against ground truth, split by how mixed the pixel is.
///
/// `mixed`: the weaker path carries at least 5% of the modulated light.
/// `balanced`: solid-angle fraction alpha in [0.35, 0.65], the regime where
/// traditional unwrapping misassigns wavelengths.
/// `single_path`: everything else.
#[derive(Debug, Clone, Serialize)]
pub struct TruthMetrics {
    pub all: GroupMetrics,
    pub mixed: GroupMetrics,
    pub balanced: GroupMetrics,
    pub single_path: SinglePathMetrics,
}

/// Row errors are circular distances in units of the projector height.
/// "dominant" compares the dominant estimate with the larger-weight truth
/// path; "nearest" compares it with whichever truth path is closer.
#[derive(Debug, Clone, Default, Serialize)]
pub struct GroupMetrics {
    pub count: usize,
    pub separator_dominant_row_error_median: f64,
    pub separator_dominant_row_error_p95: f64,
    pub separator_nearest_row_error_median: f64,
    pub separator_magnitude_error_median: f64,
    pub traditional_dominant_row_error_median: f64,
    pub traditional_nearest_row_error_median: f64,
    /// Share of pixels the traditional chain misassigns by >= 0.06 of the range.
    pub traditional_fraction_err_ge_006: f64,
    /// Share of pixels whose dominant separated row lands within 0.5% of the
    /// dominant truth row.
    pub separator_fraction_err_lt_0005: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SinglePathMetrics {
    pub count: usize,
    pub secondary_magnitude_median: f64,
    pub fraction_secondary_below_threshold: f64,
    pub separator_row_error_median: f64,
    pub traditional_row_error_median: f64,
}

pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

fn median(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}

#[derive(Clone)]
struct PixelRecord {
    sep_dom: f64,
    sep_nearest: f64,
    sep_mag: f64,
    trad_dom: f64,
    trad_nearest: f64,
}

fn group_metrics(records: &[PixelRecord]) -> GroupMetrics {
    let mut g = GroupMetrics {
        count: records.len(),
        ..Default::default()
    };
    if records.is_empty() {
        return g;
    }
    let mut sep_dom: Vec<f64> = records.iter().map(|r| r.sep_dom).collect();
    let mut sep_near: Vec<f64> = records.iter().map(|r| r.sep_nearest).collect();
    let mut sep_mag: Vec<f64> = records.iter().map(|r| r.sep_mag).collect();
    let mut trad_dom: Vec<f64> = records.iter().map(|r| r.trad_dom).collect();
    let mut trad_near: Vec<f64> = records.iter().map(|r| r.trad_nearest).collect();
    g.separator_dominant_row_error_median = median(&mut sep_dom);
    g.separator_dominant_row_error_p95 = quantile(&sep_dom, 0.95);
    g.separator_nearest_row_error_median = median(&mut sep_near);
    g.separator_magnitude_error_median = median(&mut sep_mag);
    g.traditional_dominant_row_error_median = median(&mut trad_dom);
    g.traditional_nearest_row_error_median = median(&mut trad_near);
    g.traditional_fraction_err_ge_006 =
        records.iter().filter(|r| r.trad_dom >= 0.06).count() as f64 / records.len() as f64;
    g.separator_fraction_err_lt_0005 =
        records.iter().filter(|r| r.sep_dom < 0.005).count() as f64 / records.len() as f64;
    g
}

/// Builds truth-referenced metrics for a separation field plus the
/// traditional row image.
pub fn truth_metrics(
    truth: &SceneModel,
    separation: &SeparationField,
    traditional_rows: &Array2<f64>,
    multipath_threshold: f64,
) -> TruthMetrics {
    let mut all = Vec::new();
    let mut mixed = Vec::new();
    let mut balanced = Vec::new();
    let mut single_secondary = Vec::new();
    let mut single_row = Vec::new();
    let mut single_trad = Vec::new();
    let mut single_below = 0usize;

    for r in 0..truth.rows {
        for c in 0..truth.cols {
            let p = truth.pixel(r, c);
            let est = match separation.get(r, c) {
                Some(e) => e,
                None => continue,
            };
            let (wa, wb) = p.weights();
            let total = wa + wb;
            if total <= 0.0 {
                continue;
            }
            let minor_share = wa.min(wb) / total;
            let (y_dom, y_min) = if wa >= wb {
                (p.y_fg, p.y_bg)
            } else {
                (p.y_bg, p.y_fg)
            };
            let trad = traditional_rows[[r, c]];
            if minor_share >= multipath_threshold {
                let rec = PixelRecord {
                    sep_dom: circular_distance(est.y_a, y_dom),
                    sep_nearest: circular_distance(est.y_a, y_dom)
                        .min(circular_distance(est.y_a, y_min)),
                    sep_mag: (est.mag_a - wa.max(wb) / total).abs(),
                    trad_dom: if trad.is_nan() {
                        f64::INFINITY
                    } else {
                        circular_distance(trad, y_dom)
                    },
                    trad_nearest: if trad.is_nan() {
                        f64::INFINITY
                    } else {
                        circular_distance(trad, y_dom).min(circular_distance(trad, y_min))
                    },
                };
                if p.alpha >= 0.35 && p.alpha <= 0.65 {
                    balanced.push(rec.clone());
                }
                all.push(rec.clone());
                mixed.push(rec);
            } else {
                single_secondary.push(est.mag_b);
                if est.mag_b < multipath_threshold {
                    single_below += 1;
                }
                single_row.push(circular_distance(est.y_a, y_dom));
                if !trad.is_nan() {
                    single_trad.push(circular_distance(trad, y_dom));
                }
                all.push(PixelRecord {
                    sep_dom: circular_distance(est.y_a, y_dom),
                    sep_nearest: circular_distance(est.y_a, y_dom),
                    sep_mag: (est.mag_a - wa.max(wb) / total).abs(),
                    trad_dom: if trad.is_nan() {
                        f64::INFINITY
                    } else {
                        circular_distance(trad, y_dom)
                    },
                    trad_nearest: if trad.is_nan() {
                        f64::INFINITY
                    } else {
                        circular_distance(trad, y_dom)
                    },
                });
            }
        }
    }

    let single_count = single_secondary.len();
    TruthMetrics {
        all: group_metrics(&all),
        mixed: group_metrics(&mixed),
        balanced: group_metrics(&balanced),
        single_path: SinglePathMetrics {
            count: single_count,
            secondary_magnitude_median: median(&mut single_secondary),
            fraction_secondary_below_threshold: if single_count == 0 {
                f64::NAN
            } else {
                single_below as f64 / single_count as f64
            },
            separator_row_error_median: median(&mut single_row),
            traditional_row_error_median: median(&mut single_trad),
        },
    }
}

/// Median residuals over estimated pixels, for the report header.
pub fn residual_medians(separation: &SeparationField) -> (f64, f64) {
    let mut s1: Vec<f64> = separation
        .estimates
        .iter()
        .flatten()
        .map(|e| e.stage1_residual)
        .collect();
    let mut s2: Vec<f64> = separation
        .estimates
        .iter()
        .flatten()
        .map(|e| e.stage2_residual)
        .collect();
    (median(&mut s1), median(&mut s2))
}
