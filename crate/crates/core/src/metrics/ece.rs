use serde::{Deserialize, Serialize};

use crate::alien::ErrorLabels;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{check_finite, check_lengths};

pub const DEFAULT_ECE_BINS: usize = 10;

/// How a method's scores are turned into `[0, 1]` before calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMapping {
    /// Score already lies in `[0, 1]`.
    Identity,
    /// Min-max rescaled over the evaluation split.
    MinMax,
}

impl ScoreMapping {
    pub fn apply<T: Scalar>(self, scores: &[T]) -> Vec<f64> {
        match self {
            ScoreMapping::Identity => scores.iter().map(|s| s.to_f64_lossy()).collect(),
            ScoreMapping::MinMax => minmax_normalize(scores),
        }
    }
}

/// Affine rescale onto `[0, 1]`; a constant vector maps to 0.5.
pub fn minmax_normalize<T: Scalar>(scores: &[T]) -> Vec<f64> {
    let (lo, hi) = scores.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        let s = s.to_f64_lossy();
        (lo.min(s), hi.max(s))
    });
    let span = hi - lo;
    scores
        .iter()
        .map(|s| {
            if span > 0.0 {
                ((s.to_f64_lossy() - lo) / span).clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
        .collect()
}

/// Expected calibration error of `confidence = 1 − score` against
/// correctness, over `n_bins` equal-width bins.
pub fn ece<T: Scalar>(scores: &[T], errors: &ErrorLabels, n_bins: usize) -> Result<f64> {
    check_lengths(scores.len(), errors.len())?;
    check_finite(scores)?;
    let mut confidence = Vec::with_capacity(scores.len());
    for (i, s) in scores.iter().enumerate() {
        let s = s.to_f64_lossy();
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidInput(format!(
                "score {s} at index {i} is outside [0, 1]; rescale before computing ECE"
            )));
        }
        confidence.push(1.0 - s);
    }
    let correct: Vec<bool> = errors.as_slice().iter().map(|e| !e).collect();
    ece_from_confidence(&confidence, &correct, n_bins)
}

/// Bins are left-closed, right-open, except the top bin which also holds 1.
pub fn ece_from_confidence(confidence: &[f64], correct: &[bool], n_bins: usize) -> Result<f64> {
    if n_bins < 1 {
        return Err(Error::Config("ECE needs at least one bin".into()));
    }
    check_lengths(confidence.len(), correct.len())?;
    if confidence.is_empty() {
        return Ok(0.0);
    }
    let mut count = vec![0usize; n_bins];
    let mut conf_sum = vec![0.0; n_bins];
    let mut hits = vec![0usize; n_bins];
    for (&c, &ok) in confidence.iter().zip(correct) {
        let b = ((c * n_bins as f64).floor() as usize).min(n_bins - 1);
        count[b] += 1;
        conf_sum[b] += c;
        hits[b] += usize::from(ok);
    }
    let n = confidence.len() as f64;
    Ok((0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let m = count[b] as f64;
            (m / n) * (hits[b] as f64 / m - conf_sum[b] / m).abs()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_confidence_perfect_accuracy() {
        let e = ece(&[0.0; 6], &ErrorLabels::new(vec![false; 6]), 10).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn hand_binned_pair() {
        let e = ece_from_confidence(&[0.8, 0.8], &[true, false], 10).unwrap();
        assert!((e - 0.3).abs() < 1e-12);
    }

    #[test]
    fn bin_edges() {
        // 0.1 opens bin 1, 1.0 lands in the top bin, 0.0 in bin 0
        let conf = [0.0, 0.1, 1.0];
        let correct = [false, true, true];
        let e = ece_from_confidence(&conf, &correct, 10).unwrap();
        let expected = (1.0 / 3.0) * 0.0 + (1.0 / 3.0) * 0.9 + (1.0 / 3.0) * 0.0;
        assert!((e - expected).abs() < 1e-12);
        let two = ece_from_confidence(&[0.5, 0.5], &[true, true], 2).unwrap();
        assert!((two - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_bins_and_unbounded() {
        assert!(ece_from_confidence(&[0.5], &[true], 0).is_err());
        assert!(ece(&[1.5], &ErrorLabels::new(vec![true]), 10).is_err());
    }

    #[test]
    fn minmax_bounds() {
        assert_eq!(minmax_normalize(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(minmax_normalize(&[7.0, 7.0]), vec![0.5, 0.5]);
    }
}
