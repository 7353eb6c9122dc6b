//! Salient object detection metrics: MAE, average F-measure and E-measure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::load_map;
use crate::map::SaliencyMap;

/// Numerical guards used by the metrics.
pub mod guards {
    /// beta^2 of the F-measure.
    pub const BETA_SQUARED: f64 = 0.3;
    /// Added to the E-measure alignment denominator.
    pub const ALIGNMENT_EPS: f64 = 1e-8;
    /// Number of evenly spaced thresholds in `[0, 1]` for the average F-measure.
    pub const F_THRESHOLDS: usize = 256;
    /// Ground truth values at or above this are foreground when loaded from disk.
    pub const GT_BINARIZE: f64 = 0.5;
}

use guards::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mae: f64,
    pub f_beta: f64,
    pub e_xi: f64,
    pub threshold_count: usize,
}

fn require_binary(g: &SaliencyMap) -> Result<()> {
    match g.values().iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(index) => Err(Error::NonBinary {
            index,
            value: g.values()[index],
        }),
        None => Ok(()),
    }
}

/// Mean absolute error.
pub fn mae(p: &SaliencyMap, g: &SaliencyMap) -> Result<f64> {
    p.ensure_same_shape(g.shape())?;
    let sum: f64 = p
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / p.len() as f64)
}

/// Number of thresholds `k / 255` with `k / 255 <= v`, i.e. how many of the
/// binarisations mark `v` as foreground.
fn thresholds_at_or_below(v: f64) -> usize {
    let last = (F_THRESHOLDS - 1) as f64;
    let mut k = (v * last).floor().clamp(0.0, last) as usize;
    // settle rounding in v * 255 against the exact comparison v >= k / 255
    while k + 1 < F_THRESHOLDS && (k + 1) as f64 / last <= v {
        k += 1;
    }
    while k > 0 && (k as f64 / last) > v {
        k -= 1;
    }
    if v >= 0.0 {
        k + 1
    } else {
        0
    }
}

/// Average F-measure over 256 thresholds `t = k / 255`, predicting
/// foreground where `P >= t`.
pub fn f_measure(p: &SaliencyMap, g: &SaliencyMap) -> Result<f64> {
    p.ensure_same_shape(g.shape())?;
    require_binary(g)?;
    let positives = g.values().iter().filter(|&&v| v == 1.0).count();
    if positives == 0 {
        return Err(Error::Undefined("F-measure with an empty ground truth"));
    }
    // pos_count[c]: foreground pixels predicted positive at exactly c thresholds
    let mut pos_count = vec![0usize; F_THRESHOLDS + 1];
    let mut neg_count = vec![0usize; F_THRESHOLDS + 1];
    for (&v, &t) in p.values().iter().zip(g.values()) {
        let k = thresholds_at_or_below(v);
        if t == 1.0 {
            pos_count[k] += 1;
        } else {
            neg_count[k] += 1;
        }
    }
    // pixels with count k are predicted positive at thresholds 0..k
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut sum = 0.0;
    for idx in (0..F_THRESHOLDS).rev() {
        tp += pos_count[idx + 1];
        fp += neg_count[idx + 1];
        sum += f_score(tp, fp, positives);
    }
    Ok(sum / F_THRESHOLDS as f64)
}

fn f_score(tp: usize, fp: usize, positives: usize) -> f64 {
    if tp + fp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / positives as f64;
    let denom = BETA_SQUARED * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + BETA_SQUARED) * precision * recall / denom
    }
}

/// Enhanced-alignment measure with adaptive `2 * mean(P)` binarisation.
pub fn e_measure(p: &SaliencyMap, g: &SaliencyMap) -> Result<f64> {
    p.ensure_same_shape(g.shape())?;
    require_binary(g)?;
    let n = p.len() as f64;
    let mean_p = p.values().iter().sum::<f64>() / n;
    let threshold = (2.0 * mean_p).min(1.0);
    let bin: Vec<f64> = p
        .values()
        .iter()
        .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
        .collect();
    let mean_bin = bin.iter().sum::<f64>() / n;
    let mean_g = g.values().iter().sum::<f64>() / n;
    let gt_constant = mean_g == 0.0 || mean_g == 1.0;
    let total: f64 = bin
        .iter()
        .zip(g.values())
        .map(|(&b, &t)| {
            let phi_p = b - mean_bin;
            let phi_g = t - mean_g;
            let xi = if gt_constant {
                if phi_p == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                2.0 * phi_g * phi_p / (phi_g * phi_g + phi_p * phi_p + ALIGNMENT_EPS)
            };
            (xi + 1.0) * (xi + 1.0) / 4.0
        })
        .sum();
    Ok(total / n)
}

pub fn evaluate(p: &SaliencyMap, g: &SaliencyMap) -> Result<MetricsReport> {
    Ok(MetricsReport {
        mae: mae(p, g)?,
        f_beta: f_measure(p, g)?,
        e_xi: e_measure(p, g)?,
        threshold_count: F_THRESHOLDS,
    })
}

/// Metrics for every matched file plus their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSetReport {
    pub per_image: Vec<(String, MetricsReport)>,
    pub mean: MetricsReport,
}

impl PairSetReport {
    /// CSV with header `image,mae,f_beta,e_xi` and a trailing `__mean__` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,mae,f_beta,e_xi\n");
        let rows = self
            .per_image
            .iter()
            .map(|(n, r)| (n.as_str(), r))
            .chain(std::iter::once(("__mean__", &self.mean)));
        for (name, r) in rows {
            let _ = writeln!(out, "{name},{:.6},{:.6},{:.6}", r.mae, r.f_beta, r.e_xi);
        }
        out
    }
}

fn list_maps(dir: &Path) -> Result<BTreeMap<String, std::path::PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::from(e).in_file(dir))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::from(e).in_file(dir))?;
        let path = entry.path();
        let is_pnm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"));
        if is_pnm && path.is_file() {
            out.insert(entry.file_name().to_string_lossy().into_owned(), path);
        }
    }
    Ok(out)
}

/// Pairs same-named PGM/PPM files from two directories and scores each.
///
/// Ground truth is binarised at 0.5 on load. Files are processed in
/// lexicographic order and the mean is accumulated in that order.
pub fn evaluate_pair_set(
    pred_dir: impl AsRef<Path>,
    gt_dir: impl AsRef<Path>,
) -> Result<PairSetReport> {
    let preds = list_maps(pred_dir.as_ref())?;
    let gts = list_maps(gt_dir.as_ref())?;
    let only_pred: Vec<String> = preds
        .keys()
        .filter(|k| !gts.contains_key(*k))
        .cloned()
        .collect();
    let only_gt: Vec<String> = gts
        .keys()
        .filter(|k| !preds.contains_key(*k))
        .cloned()
        .collect();
    if !only_pred.is_empty() || !only_gt.is_empty() || preds.is_empty() {
        return Err(Error::UnmatchedFiles { only_pred, only_gt });
    }
    let per_image = preds
        .par_iter()
        .map(|(name, pred_path)| {
            let gt_path = &gts[name];
            let pred = load_map(pred_path)?;
            let gt = load_map(gt_path)?.binarize(GT_BINARIZE).to_map();
            let report = evaluate(&pred, &gt).map_err(|e| e.in_file(pred_path))?;
            Ok((name.clone(), report))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_image.len() as f64;
    let (mut m, mut f, mut e) = (0.0, 0.0, 0.0);
    for (_, r) in &per_image {
        m += r.mae;
        f += r.f_beta;
        e += r.e_xi;
    }
    Ok(PairSetReport {
        per_image,
        mean: MetricsReport {
            mae: m / n,
            f_beta: f / n,
            e_xi: e / n,
            threshold_count: F_THRESHOLDS,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[f64]) -> SaliencyMap {
        SaliencyMap::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn mae_examples() {
        let g = row(&[0.0, 1.0]);
        assert_eq!(mae(&g, &g).unwrap(), 0.0);
        assert_eq!(mae(&g.inverted(), &g).unwrap(), 1.0);
        assert_eq!(mae(&row(&[0.25, 0.75]), &g).unwrap(), 0.25);
    }

    #[test]
    fn threshold_counting_matches_comparisons() {
        for b in 0..=255u32 {
            let v = f64::from(b) / 255.0;
            let direct = (0..256).filter(|&k| v >= k as f64 / 255.0).count();
            assert_eq!(thresholds_at_or_below(v), direct, "byte {b}");
            for nudge in [v - 1e-12, v + 1e-12] {
                let direct = (0..256).filter(|&k| nudge >= k as f64 / 255.0).count();
                assert_eq!(thresholds_at_or_below(nudge), direct);
            }
        }
    }

    #[test]
    fn perfect_prediction_f() {
        let g = row(&[1.0, 0.0, 0.0, 1.0]);
        let precision0: f64 = 0.5;
        let f0 = 1.3 * precision0 / (0.3 * precision0 + 1.0);
        let expected = (255.0 + f0) / 256.0;
        assert!((f_measure(&g, &g).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_prediction_f() {
        let g = row(&[1.0, 0.0, 0.0, 1.0]);
        let p = row(&[0.0; 4]);
        let precision0: f64 = 0.5;
        let f0 = 1.3 * precision0 / (0.3 * precision0 + 1.0);
        assert!((f_measure(&p, &g).unwrap() - f0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn f_errors() {
        let g = row(&[0.0, 0.0]);
        assert!(matches!(f_measure(&g, &g), Err(Error::Undefined(_))));
        assert!(matches!(
            f_measure(&g, &row(&[0.5, 1.0])),
            Err(Error::NonBinary { index: 0, .. })
        ));
    }

    #[test]
    fn e_measure_perfect_and_inverse() {
        let g = SaliencyMap::from_fn(4, 4, |r, _| if r < 2 { 1.0 } else { 0.0 }).unwrap();
        assert!((e_measure(&g, &g).unwrap() - 1.0).abs() < 1e-6);
        assert!(e_measure(&g.inverted(), &g).unwrap() < 0.05);
    }

    #[test]
    fn e_measure_degenerate_gt() {
        let g = row(&[0.0; 4]);
        assert_eq!(e_measure(&row(&[0.0; 4]), &g).unwrap(), 1.0);
        // P binarises to one foreground pixel: phi_P nonzero everywhere
        assert_eq!(e_measure(&row(&[0.9, 0.0, 0.0, 0.0]), &g).unwrap(), 0.25);
    }

    #[test]
    fn csv_format() {
        let r = MetricsReport {
            mae: 0.5,
            f_beta: 1.0 / 3.0,
            e_xi: 1.0,
            threshold_count: 256,
        };
        let report = PairSetReport {
            per_image: vec![("a.pgm".into(), r)],
            mean: r,
        };
        assert_eq!(
            report.to_csv(),
            "image,mae,f_beta,e_xi\na.pgm,0.500000,0.333333,1.000000\n__mean__,0.500000,0.333333,1.000000\n"
        );
    }
}
