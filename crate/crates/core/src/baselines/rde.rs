//! Robust distance estimation: Mahalanobis scoring in a principal
//! subspace with class covariances refit after trimming the training
//! points farthest from their own centroid.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaussian::{class_moments, invert_spd, quad_form, regularize, to_dmatrix, DEFAULT_RIDGE};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdeConfig {
    /// Principal directions kept; `None` means `min(d, 256)`.
    pub pca_components: Option<usize>,
    pub trim_fraction: f64,
    pub ridge: f64,
}

impl Default for RdeConfig {
    fn default() -> Self {
        RdeConfig {
            pca_components: None,
            trim_fraction: 0.1,
            ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdeModel {
    center: DVector<f64>,
    /// `k × d` projection, one principal direction per row.
    components: DMatrix<f64>,
    class_means: DMatrix<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    /// Training rows kept after trimming.
    pub kept: usize,
}

impl RdeModel {
    pub fn components(&self) -> usize {
        self.components.nrows()
    }

    /// Trimmed, regularized pooled covariance in the reduced space.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    fn project(&self, h: &[f64]) -> Vec<f64> {
        let centered = DVector::from_iterator(
            h.len(),
            h.iter().zip(self.center.iter()).map(|(a, b)| a - b),
        );
        (&self.components * centered).iter().copied().collect()
    }

    pub fn score(&self, h: &[f64]) -> Result<f64> {
        if h.len() != self.center.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center.len(),
                actual: h.len(),
            });
        }
        let z = self.project(h);
        Ok((0..self.class_means.nrows())
            .map(|c| {
                let mu: Vec<f64> = self.class_means.row(c).iter().copied().collect();
                quad_form(&self.precision, &mu, &z)
            })
            .fold(f64::INFINITY, f64::min))
    }

    pub fn score_all(&self, features: &Matrix<f64>) -> Result<Vec<f64>> {
        (0..features.rows())
            .into_par_iter()
            .map(|i| self.score(features.row(i)))
            .collect()
    }
}

/// Top-`k` eigenvectors of the feature covariance, largest eigenvalue first,
/// each signed so its largest-magnitude entry is positive.
fn principal_directions(x: &DMatrix<f64>, center: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let n = x.nrows();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= center.transpose();
    }
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new((&cov + cov.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let d = x.ncols();
    let mut out = DMatrix::zeros(k, d);
    for (r, &col) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(col);
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            out[(r, j)] = sign * v[j];
        }
    }
    out
}

/// Fits the robust model on labelled training rows. Deterministic.
pub fn rde_fit(
    features: &Matrix<f64>,
    labels: &[u32],
    classes: usize,
    cfg: &RdeConfig,
) -> Result<RdeModel> {
    let (n, d) = (features.rows(), features.cols());
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let k = cfg.pca_components.unwrap_or_else(|| d.min(256));
    if k == 0 || k > d {
        return Err(Error::Config(format!(
            "pca_components = {k} must lie in 1..={d}"
        )));
    }
    if n < 2 * k {
        return Err(Error::Config(format!(
            "{n} training rows are too few for {k} components (need ≥ {})",
            2 * k
        )));
    }
    if !(0.0..0.5).contains(&cfg.trim_fraction) {
        return Err(Error::Config(format!(
            "trim fraction {} outside [0, 0.5)",
            cfg.trim_fraction
        )));
    }
    let x = to_dmatrix(features);
    let center = x.row_mean().transpose();
    let components = principal_directions(&x, &center, k);
    let mut z = DMatrix::zeros(n, k);
    for i in 0..n {
        let h = DVector::from_iterator(d, (0..d).map(|j| x[(i, j)] - center[j]));
        z.set_row(i, &(&components * h).transpose());
    }

    let all: Vec<usize> = (0..n).collect();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &i in &all {
        let y = labels[i] as usize;
        if y >= classes {
            return Err(Error::InvalidInput(format!("label {y} ≥ {classes} classes")));
        }
        by_class[y].push(i);
    }
    if let Some(class) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::InsufficientData {
            class,
            reason: "no training examples".into(),
        });
    }

    let (means, cov) = class_moments(&z, labels, &all, classes);
    let precision = invert_spd(&regularize(&cov, cfg.ridge), "initial RDE")?;
    let mut kept = Vec::with_capacity(n);
    for (class, rows) in by_class.iter().enumerate() {
        let mu: Vec<f64> = means.row(class).iter().copied().collect();
        let mut dist: Vec<(f64, usize)> = rows
            .iter()
            .map(|&i| {
                let zi: Vec<f64> = z.row(i).iter().copied().collect();
                (quad_form(&precision, &mu, &zi), i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let drop = (cfg.trim_fraction * rows.len() as f64).floor() as usize;
        let keep = rows.len() - drop;
        if keep == 0 {
            return Err(Error::InsufficientData {
                class,
                reason: "all examples removed by trimming".into(),
            });
        }
        kept.extend(dist[..keep].iter().map(|&(_, i)| i));
    }
    kept.sort_unstable();
    let (class_means, trimmed) = class_moments(&z, labels, &kept, classes);
    let covariance = regularize(&trimmed, cfg.ridge);
    Ok(RdeModel {
        precision: invert_spd(&covariance, "trimmed RDE")?,
        center,
        components,
        class_means,
        covariance,
        kept: kept.len(),
    })
}
