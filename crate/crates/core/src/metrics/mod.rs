//! Misclassification-detection metrics and their bootstrap aggregation.
//!
//! Every score follows one orientation: higher means more uncertain, i.e.
//! more likely to be an error.

mod auc;
mod bootstrap;
mod correlation;
mod ece;
mod ranking;
mod risk;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use auc::roc_auc;
pub use bootstrap::{bootstrap_eval, EvalConfig, EvalReport, MeanStd, PointMetrics};
pub use correlation::{average_ranks, spearman};
pub use ece::{ece, ece_from_confidence, minmax_normalize, ScoreMapping, DEFAULT_ECE_BINS};
pub use ranking::{average_rank, Metric, MetricTable, Orientation};
pub use risk::{risk_coverage, RiskCoverage};

/// Per-example uncertainty scores tagged with the method that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector<T = f64> {
    pub method_tag: String,
    pub scores: Vec<T>,
}

impl<T: Scalar> ScoreVector<T> {
    pub fn new(method_tag: impl Into<String>, scores: Vec<T>) -> Result<Self> {
        check_finite(&scores)?;
        Ok(ScoreVector {
            method_tag: method_tag.into(),
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn to_f64(&self) -> ScoreVector<f64> {
        ScoreVector {
            method_tag: self.method_tag.clone(),
            scores: self.scores.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }
}

impl<T> AsRef<[T]> for ScoreVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.scores
    }
}

pub(crate) fn check_finite<T: Scalar>(scores: &[T]) -> Result<()> {
    match scores.iter().position(|s| !s.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            field: "scores".into(),
            index,
        }),
        None => Ok(()),
    }
}

pub(crate) fn check_lengths(scores: usize, errors: usize) -> Result<()> {
    if scores != errors {
        return Err(Error::DimensionMismatch {
            expected: errors,
            actual: scores,
        });
    }
    Ok(())
}
