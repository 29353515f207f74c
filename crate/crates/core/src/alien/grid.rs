use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::EmbeddingBundle;
use crate::error::{Error, Result};
use crate::metrics::roc_auc;
use crate::scalar::Scalar;

use super::train::{fit_alien_on, AblationVariant, FittedAlien, TrainConfig, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlienGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

impl Default for AlienGrid {
    fn default() -> Self {
        AlienGrid {
            alphas: vec![0.01, 0.1, 1.0],
            betas: vec![0.01, 0.1, 1.0],
            learning_rates: vec![4e-4, 1e-4, 1e-5],
        }
    }
}

impl AlienGrid {
    pub fn single(alpha: f64, beta: f64, learning_rate: f64) -> Self {
        AlienGrid {
            alphas: vec![alpha],
            betas: vec![beta],
            learning_rates: vec![learning_rate],
        }
    }

    /// Collapses the coefficients a variant ignores to a single zero.
    pub fn for_variant(&self, variant: AblationVariant) -> Self {
        AlienGrid {
            alphas: if variant.uses_alpha() { self.alphas.clone() } else { vec![0.0] },
            betas: if variant.uses_beta() { self.betas.clone() } else { vec![0.0] },
            learning_rates: self.learning_rates.clone(),
        }
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &alpha in &self.alphas {
            for &beta in &self.betas {
                for &learning_rate in &self.learning_rates {
                    out.push(GridPoint {
                        alpha,
                        beta,
                        learning_rate,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEvaluation {
    pub point: GridPoint,
    pub val_roc_auc: f64,
}

#[derive(Debug, Clone)]
pub struct GridOutcome<T> {
    pub best: GridEvaluation,
    pub fitted: FittedAlien<T>,
    /// Every grid point in enumeration order.
    pub evaluations: Vec<GridEvaluation>,
}

/// Preference order: higher validation ROC-AUC, then the most anchored
/// setting (larger β, larger α, smaller learning rate).
pub fn compare_candidates(a: &GridEvaluation, b: &GridEvaluation) -> Ordering {
    a.val_roc_auc
        .total_cmp(&b.val_roc_auc)
        .then(a.point.beta.total_cmp(&b.point.beta))
        .then(a.point.alpha.total_cmp(&b.point.alpha))
        .then(b.point.learning_rate.total_cmp(&a.point.learning_rate))
}

fn check_compatible(train: &EmbeddingBundle, val: &EmbeddingBundle) -> Result<()> {
    if train.dim() != val.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            actual: val.dim(),
        });
    }
    if train.classes != val.classes {
        return Err(Error::InvalidBundle(format!(
            "train has {} classes, validation has {}",
            train.classes, val.classes
        )));
    }
    if train.head != val.head {
        return Err(Error::InvalidBundle(
            "train and validation bundles carry different classifier heads".into(),
        ));
    }
    Ok(())
}

/// Fits every grid point on `train` and keeps the one whose score best
/// separates errors on `val`. Grid points train in parallel; the result
/// does not depend on the worker count.
pub fn grid_search<T: Scalar>(
    train: &EmbeddingBundle,
    val: &EmbeddingBundle,
    variant: AblationVariant,
    cfg_base: &TrainConfig,
    grid: &AlienGrid,
) -> Result<GridOutcome<T>> {
    check_compatible(train, val)?;
    let grid = grid.for_variant(variant);
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let train_set = TrainingSet::<T>::from_bundle(train);
    let val_set = TrainingSet::<T>::from_bundle(val);
    val_set.errors.require_both_classes()?;

    let results: Vec<(GridEvaluation, FittedAlien<T>)> = points
        .par_iter()
        .map(|p| {
            let cfg = TrainConfig {
                learning_rate: p.learning_rate,
                ..*cfg_base
            };
            let fitted = fit_alien_on(train, &train_set, variant, &cfg, p.alpha, p.beta)?;
            let scores = fitted.model.score(&val_set.features)?;
            let eval = GridEvaluation {
                point: *p,
                val_roc_auc: roc_auc(&scores, &val_set.errors)?,
            };
            Ok((eval, fitted))
        })
        .collect::<Result<_>>()?;

    let best_idx = (0..results.len())
        .max_by(|&a, &b| compare_candidates(&results[a].0, &results[b].0))
        .expect("non-empty grid");
    let evaluations = results.iter().map(|r| r.0).collect();
    let (best, fitted) = results.into_iter().nth(best_idx).expect("index in range");
    Ok(GridOutcome {
        best,
        fitted,
        evaluations,
    })
}
