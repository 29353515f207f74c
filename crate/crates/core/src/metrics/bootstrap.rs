use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alien::ErrorLabels;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{auc::roc_auc, check_finite, check_lengths, ece_from_confidence, risk_coverage};
use super::{ScoreMapping, DEFAULT_ECE_BINS};

const MAX_REDRAWS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_boot: usize,
    pub seed: u64,
    pub ece_bins: usize,
    pub mapping: ScoreMapping,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_boot: 20,
            seed: 0,
            ece_bins: DEFAULT_ECE_BINS,
            mapping: ScoreMapping::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample mean and standard deviation (divisor `n − 1`).
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub roc_auc: f64,
    pub aurc: f64,
    pub oracle_aurc: f64,
    pub ece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub roc_auc: MeanStd,
    pub aurc: MeanStd,
    pub oracle_aurc: MeanStd,
    pub ece: MeanStd,
    /// Metrics on the full, unresampled evaluation set.
    pub full_sample: PointMetrics,
    pub n_boot: usize,
    pub seed: u64,
    pub ece_bins: usize,
    pub score_mapping: ScoreMapping,
}

fn point_metrics(
    scores: &[f64],
    confidence: &[f64],
    errors: &ErrorLabels,
    bins: usize,
) -> Result<PointMetrics> {
    let rc = risk_coverage(scores, errors)?;
    let correct: Vec<bool> = errors.as_slice().iter().map(|e| !e).collect();
    Ok(PointMetrics {
        roc_auc: roc_auc(scores, errors)?,
        aurc: rc.aurc,
        oracle_aurc: rc.oracle_aurc,
        ece: ece_from_confidence(confidence, &correct, bins)?,
    })
}

/// Resample indices for bootstrap replicate `index`; each replicate and
/// each redraw has its own ChaCha stream so order of execution is irrelevant.
fn resample(n: usize, errors: &ErrorLabels, seed: u64, index: usize) -> Result<Vec<usize>> {
    for attempt in 0..=MAX_REDRAWS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((index as u64) << 8) | attempt);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let errs = idx.iter().filter(|&&i| errors.get(i)).count();
        if errs > 0 && errs < n {
            return Ok(idx);
        }
    }
    Err(Error::DegenerateData(format!(
        "bootstrap replicate {index} drew a single label class {} times",
        MAX_REDRAWS + 1
    )))
}

/// ROC-AUC, AURC, oracle AURC and ECE over `n_boot` resamples with
/// replacement. Rank metrics use the raw scores; ECE uses the mapped ones.
pub fn bootstrap_eval<T: Scalar>(
    scores: &[T],
    errors: &ErrorLabels,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if cfg.n_boot < 2 {
        return Err(Error::Config("bootstrap needs at least 2 resamples".into()));
    }
    check_lengths(scores.len(), errors.len())?;
    check_finite(scores)?;
    let raw: Vec<f64> = scores.iter().map(|s| s.to_f64_lossy()).collect();
    let mapped = cfg.mapping.apply(scores);
    if let Some(i) = mapped.iter().position(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidInput(format!(
            "score {} at index {i} is outside [0, 1] under {:?} mapping",
            mapped[i], cfg.mapping
        )));
    }
    let confidence: Vec<f64> = mapped.iter().map(|s| 1.0 - s).collect();
    let full_sample = point_metrics(&raw, &confidence, errors, cfg.ece_bins)?;

    let n = raw.len();
    let replicates: Vec<PointMetrics> = (0..cfg.n_boot)
        .into_par_iter()
        .map(|b| {
            let idx = resample(n, errors, cfg.seed, b)?;
            let s: Vec<f64> = idx.iter().map(|&i| raw[i]).collect();
            let c: Vec<f64> = idx.iter().map(|&i| confidence[i]).collect();
            point_metrics(&s, &c, &errors.select(&idx), cfg.ece_bins)
        })
        .collect::<Result<_>>()?;

    let pick = |f: fn(&PointMetrics) -> f64| MeanStd::of(&replicates.iter().map(f).collect::<Vec<_>>());
    Ok(EvalReport {
        roc_auc: pick(|m| m.roc_auc),
        aurc: pick(|m| m.aurc),
        oracle_aurc: pick(|m| m.oracle_aurc),
        ece: pick(|m| m.ece),
        full_sample,
        n_boot: cfg.n_boot,
        seed: cfg.seed,
        ece_bins: cfg.ece_bins,
        score_mapping: cfg.mapping,
    })
}
