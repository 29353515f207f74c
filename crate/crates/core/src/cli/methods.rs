use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::alien::read_alien;
use crate::baselines::{
    fit_gaussian_stats, read_gaussian_stats, read_probe, rde_fit, GaussianStats, MahalanobisKind,
    RdeConfig, SequenceData, DEFAULT_RIDGE,
};
use crate::bundle::AnyBundle;
use crate::error::{Error, Result};
use crate::math::{normalized_entropy_unchecked, sr_score_slice};
use crate::metrics::{ScoreMapping, ScoreVector};

pub const ALIEN_DIR: &str = "alien";
pub const GAUSSIAN_DIR: &str = "gaussian";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sr,
    Entropy,
    Alien,
    Md,
    Mdr,
    Mdm,
    Rde,
    #[value(name = "linear_probe")]
    LinearProbe,
    #[value(name = "attn_probe")]
    AttnProbe,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sr => "sr",
            Method::Entropy => "entropy",
            Method::Alien => "alien",
            Method::Md => "md",
            Method::Mdr => "mdr",
            Method::Mdm => "mdm",
            Method::Rde => "rde",
            Method::LinearProbe => "linear_probe",
            Method::AttnProbe => "attn_probe",
        }
    }

    /// Distance scores are unbounded and get min-max mapped for ECE.
    pub fn mapping(self) -> ScoreMapping {
        match self {
            Method::Md | Method::Mdr | Method::Mdm | Method::Rde => ScoreMapping::MinMax,
            _ => ScoreMapping::Identity,
        }
    }

    fn mahalanobis(self) -> Option<MahalanobisKind> {
        match self {
            Method::Md => Some(MahalanobisKind::Md),
            Method::Mdr => Some(MahalanobisKind::Mdr),
            Method::Mdm => Some(MahalanobisKind::Mdm),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a method may need to score a target split.
pub struct ScoringContext<'a> {
    pub target: &'a AnyBundle,
    pub train: Option<&'a AnyBundle>,
    pub fits: Option<&'a Path>,
}

impl ScoringContext<'_> {
    fn artifact(&self, method: Method, sub: &str) -> Result<PathBuf> {
        let dir = self.fits.map(|f| f.join(sub));
        match dir {
            Some(d) if d.is_dir() => Ok(d),
            _ => Err(Error::MissingData(format!(
                "method `{method}` needs a fitted artifact `{sub}/` under --fits (run `fit --methods {method}`)"
            ))),
        }
    }

    fn train(&self, method: Method) -> Result<&AnyBundle> {
        self.train.ok_or_else(|| {
            Error::MissingData(format!("method `{method}` needs --train to fit its statistics"))
        })
    }

    fn gaussian(&self, method: Method) -> Result<GaussianStats> {
        if let Some(dir) = self.fits.map(|f| f.join(GAUSSIAN_DIR)).filter(|d| d.is_dir()) {
            return read_gaussian_stats(&dir);
        }
        match self.train {
            Some(t) => fit_gaussian_stats(&t.embedding(), DEFAULT_RIDGE),
            None => Err(Error::MissingData(format!(
                "method `{method}` needs either `{GAUSSIAN_DIR}/` under --fits or --train"
            ))),
        }
    }

    pub fn score(&self, method: Method) -> Result<ScoreVector<f64>> {
        let target = self.target.embedding();
        let scores = match method {
            Method::Sr | Method::Entropy => {
                let p = target.base_probabilities::<f64>();
                p.iter_rows()
                    .map(|row| match method {
                        Method::Sr => sr_score_slice(row),
                        _ => normalized_entropy_unchecked(row),
                    })
                    .collect()
            }
            Method::Alien => {
                let fitted = read_alien::<f64>(&self.artifact(method, ALIEN_DIR)?)?;
                fitted.model.score(&target.features_as())?
            }
            Method::Md | Method::Mdr | Method::Mdm => {
                let kind = method.mahalanobis().expect("distance method");
                self.gaussian(method)?.score_all(kind, &target.features_as())?
            }
            Method::Rde => {
                let train = self.train(method)?.embedding();
                let model = rde_fit(
                    &train.features_as(),
                    &train.gold_labels,
                    train.classes,
                    &RdeConfig::default(),
                )?;
                model.score_all(&target.features_as())?
            }
            Method::LinearProbe => {
                let (probe, _) = read_probe::<f64>(&self.artifact(method, method.as_str())?)?;
                probe.score_features(&target.features_as())?
            }
            Method::AttnProbe => {
                let (probe, _) = read_probe::<f64>(&self.artifact(method, method.as_str())?)?;
                let depth = self.target.depth();
                if probe.depth_tag.is_some() && depth.is_some() && probe.depth_tag != depth {
                    return Err(Error::InvalidInput(format!(
                        "attention probe was fit at depth {:?}, target bundle is at {:?}",
                        probe.depth_tag.map(|d| d.as_str()),
                        depth.map(|d| d.as_str())
                    )));
                }
                probe.score(&SequenceData::from_bundle(&self.target.sequences()))?
            }
        };
        ScoreVector::new(method.as_str(), scores)
    }
}
