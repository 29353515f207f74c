//! Class-conditional Gaussian fits and the Mahalanobis score family.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bundle::EmbeddingBundle;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Default ridge, as a multiple of `trace(Σ) / d`.
pub const DEFAULT_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    /// `c × d`, one centroid per row.
    pub class_means: DMatrix<f64>,
    /// Pooled within-class covariance (regularized).
    pub shared_covariance: DMatrix<f64>,
    pub background_mean: DVector<f64>,
    pub background_covariance: DMatrix<f64>,
    pub shared_precision: DMatrix<f64>,
    pub background_precision: DMatrix<f64>,
    pub ridge: f64,
}

pub(crate) fn to_dmatrix(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Adds `ridge · (trace / d) · I` (or `ridge · I` for a zero trace) and
/// symmetrizes.
pub(crate) fn regularize(cov: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let d = cov.nrows();
    let trace = cov.trace();
    let scale = if trace > 0.0 { trace / d as f64 } else { 1.0 };
    let mut out = (cov + cov.transpose()) * 0.5;
    for i in 0..d {
        out[(i, i)] += ridge * scale;
    }
    out
}

pub(crate) fn invert_spd(cov: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = cov.clone().cholesky().ok_or_else(|| {
        Error::Numerical(format!("{what} covariance is not positive definite; increase the ridge"))
    })?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// `(h − μ)ᵀ P (h − μ)`, floored at zero.
pub(crate) fn quad_form(precision: &DMatrix<f64>, mean: &[f64], h: &[f64]) -> f64 {
    let diff = DVector::from_iterator(h.len(), h.iter().zip(mean).map(|(a, b)| a - b));
    (diff.transpose() * precision * &diff)[(0, 0)].max(0.0)
}

/// Per-class means and pooled covariance over rows grouped by label.
pub(crate) fn class_moments(
    x: &DMatrix<f64>,
    labels: &[u32],
    rows: &[usize],
    classes: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = x.ncols();
    let mut means = DMatrix::zeros(classes, d);
    let mut counts = vec![0usize; classes];
    for &i in rows {
        let c = labels[i] as usize;
        counts[c] += 1;
        for j in 0..d {
            means[(c, j)] += x[(i, j)];
        }
    }
    for c in 0..classes {
        if counts[c] > 0 {
            for j in 0..d {
                means[(c, j)] /= counts[c] as f64;
            }
        }
    }
    let mut centered = DMatrix::zeros(rows.len(), d);
    for (r, &i) in rows.iter().enumerate() {
        let c = labels[i] as usize;
        for j in 0..d {
            centered[(r, j)] = x[(i, j)] - means[(c, j)];
        }
    }
    let cov = centered.transpose() * &centered / rows.len() as f64;
    (means, cov)
}

impl GaussianStats {
    /// Builds stats from given moments: covariances are regularized with
    /// `ridge` and inverted.
    pub fn from_moments(
        class_means: DMatrix<f64>,
        shared_covariance: &DMatrix<f64>,
        background_mean: DVector<f64>,
        background_covariance: &DMatrix<f64>,
        ridge: f64,
    ) -> Result<Self> {
        let d = class_means.ncols();
        for (what, m) in [("shared", shared_covariance), ("background", background_covariance)] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::ShapeMismatch {
                    field: format!("{what} covariance"),
                    expected: d * d,
                    actual: m.nrows() * m.ncols(),
                });
            }
        }
        if background_mean.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: background_mean.len(),
            });
        }
        let shared_covariance = regularize(shared_covariance, ridge);
        let background_covariance = regularize(background_covariance, ridge);
        Ok(GaussianStats {
            shared_precision: invert_spd(&shared_covariance, "shared")?,
            background_precision: invert_spd(&background_covariance, "background")?,
            class_means,
            shared_covariance,
            background_mean,
            background_covariance,
            ridge,
        })
    }

    pub fn dim(&self) -> usize {
        self.class_means.ncols()
    }

    pub fn classes(&self) -> usize {
        self.class_means.nrows()
    }

    fn check_dim(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: h.len(),
            });
        }
        Ok(())
    }

    fn class_mean(&self, c: usize) -> Vec<f64> {
        self.class_means.row(c).iter().copied().collect()
    }

    /// Minimum Mahalanobis distance to a class centroid.
    pub fn md_score(&self, h: &[f64]) -> Result<f64> {
        self.check_dim(h)?;
        Ok((0..self.classes())
            .map(|c| quad_form(&self.shared_precision, &self.class_mean(c), h))
            .fold(f64::INFINITY, f64::min))
    }

    /// Distance to the class-agnostic background Gaussian.
    pub fn mdm_score(&self, h: &[f64]) -> Result<f64> {
        self.check_dim(h)?;
        Ok(quad_form(
            &self.background_precision,
            self.background_mean.as_slice(),
            h,
        ))
    }

    /// Class distance relative to the background distance; may be negative.
    pub fn mdr_score(&self, h: &[f64]) -> Result<f64> {
        Ok(self.md_score(h)? - self.mdm_score(h)?)
    }

    pub fn score_all(&self, kind: MahalanobisKind, features: &Matrix<f64>) -> Result<Vec<f64>> {
        (0..features.rows())
            .into_par_iter()
            .map(|i| {
                let h = features.row(i);
                match kind {
                    MahalanobisKind::Md => self.md_score(h),
                    MahalanobisKind::Mdr => self.mdr_score(h),
                    MahalanobisKind::Mdm => self.mdm_score(h),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MahalanobisKind {
    Md,
    Mdr,
    Mdm,
}

/// Fits class centroids, the pooled covariance and the background
/// Gaussian from labelled rows.
pub fn fit_gaussian_stats_from(
    features: &Matrix<f64>,
    labels: &[u32],
    classes: usize,
    ridge: f64,
) -> Result<GaussianStats> {
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            actual: labels.len(),
        });
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("ridge {ridge} must be finite and ≥ 0")));
    }
    let mut counts = vec![0usize; classes];
    for &y in labels {
        let y = y as usize;
        if y >= classes {
            return Err(Error::InvalidInput(format!("label {y} ≥ {classes} classes")));
        }
        counts[y] += 1;
    }
    if let Some(class) = counts.iter().position(|&n| n < 2) {
        return Err(Error::InsufficientData {
            class,
            reason: format!("{} training example(s), need at least 2", counts[class]),
        });
    }
    let x = to_dmatrix(features);
    let n = x.nrows();
    let rows: Vec<usize> = (0..n).collect();
    let (class_means, pooled) = class_moments(&x, labels, &rows, classes);

    let background_mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= background_mean.transpose();
    }
    let background = centered.transpose() * &centered / n as f64;

    GaussianStats::from_moments(class_means, &pooled, background_mean, &background, ridge)
}

/// Fits on a bundle's features and gold labels.
pub fn fit_gaussian_stats(bundle: &EmbeddingBundle, ridge: f64) -> Result<GaussianStats> {
    fit_gaussian_stats_from(
        &bundle.features_as::<f64>(),
        &bundle.gold_labels,
        bundle.classes,
        ridge,
    )
}

pub fn md_score(stats: &GaussianStats, h: &[f64]) -> Result<f64> {
    stats.md_score(h)
}

pub fn mdr_score(stats: &GaussianStats, h: &[f64]) -> Result<f64> {
    stats.mdr_score(h)
}

pub fn mdm_score(stats: &GaussianStats, h: &[f64]) -> Result<f64> {
    stats.mdm_score(h)
}
