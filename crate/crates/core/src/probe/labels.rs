use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 6;

/// Order-of-magnitude class labels for one feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVector {
    pub labels: Vec<usize>,
    /// `bins + 1` strictly increasing edges in log10 space.
    pub edges: Vec<f64>,
    pub bins: usize,
    pub feature: String,
}

impl LabelVector {
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.bins];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

/// Histogram labels over `log10` of the positive values.
///
/// `bins` equal-width intervals span `[min, max]` of the positive logs; the
/// top edge is closed so the maximum lands in the last bin. Zeros skip the
/// logarithm and take label 0. If every positive value is equal (or none
/// is positive) all labels are 0.
pub fn log_bin_labels(values: &[f64], bins: usize, feature: &str) -> Result<LabelVector> {
    if bins == 0 {
        return Err(Error::InvalidParameter("bin count must be positive".into()));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "feature {feature}: values must be finite and non-negative, found {bad}"
        )));
    }
    let logs: Vec<Option<f64>> = values
        .iter()
        .map(|&v| (v > 0.0).then(|| v.log10()))
        .collect();
    let lo = logs.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = logs
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);

    if !(lo < hi) {
        // degenerate range: unit-width edges anchored at the single value
        let base = if lo.is_finite() { lo } else { 0.0 };
        return Ok(LabelVector {
            labels: vec![0; values.len()],
            edges: (0..=bins).map(|k| base + k as f64).collect(),
            bins,
            feature: feature.to_owned(),
        });
    }

    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    edges[bins] = hi;
    let interior = &edges[1..bins];
    let labels = logs
        .iter()
        .map(|l| match l {
            None => 0,
            Some(x) => interior.partition_point(|&e| e <= *x),
        })
        .collect();
    Ok(LabelVector {
        labels,
        edges,
        bins,
        feature: feature.to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decades_fill_six_bins() {
        let v = [1.0, 10.0, 100.0, 1e3, 1e4, 1e5];
        let l = log_bin_labels(&v, 6, "DG").unwrap();
        assert_eq!(l.labels, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(l.edges.len(), 7);
        assert!((l.edges[1] - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_zero_cases() {
        let l = log_bin_labels(&[3.0; 5], 6, "x").unwrap();
        assert_eq!(l.labels, vec![0; 5]);
        assert!(l.edges.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            log_bin_labels(&[0.0, 0.0], 6, "x").unwrap().labels,
            vec![0, 0]
        );

        // [5, 50] spans log10 range [0.699, 1.699], width 1/6
        let l = log_bin_labels(&[0.0, 5.0, 50.0], 6, "x").unwrap();
        assert_eq!(l.labels, vec![0, 0, 5]);
        assert!((l.edges[0] - 5f64.log10()).abs() < 1e-15);
        assert!((l.edges[6] - 50f64.log10()).abs() < 1e-15);
        let l = log_bin_labels(&[5.0, 50.0, 10.0], 6, "x").unwrap();
        // log10(10) = 1 sits 0.301 above the low edge, i.e. in bin 1
        assert_eq!(l.labels[2], 1);
    }

    #[test]
    fn rejects_negative_or_nan() {
        assert!(log_bin_labels(&[1.0, -1.0], 6, "x").is_err());
        assert!(log_bin_labels(&[f64::NAN], 6, "x").is_err());
        assert!(log_bin_labels(&[1.0], 0, "x").is_err());
    }
}
