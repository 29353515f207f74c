//! The fixed-seed synthetic benchmark: grid-searched error head against raw
//! entropy, rank correlation with ensemble epistemic uncertainty, and the
//! head-variant ablation.

use serde::{Deserialize, Serialize};

use crate::alien::{grid_search, AblationVariant, AlienGrid, GridEvaluation, TrainConfig};
use crate::bundle::{generate_synthetic, SynthConfig, SyntheticData};
use crate::ensemble::{decompose, EnsembleProbs};
use crate::error::Result;
use crate::math::normalized_entropy_unchecked;
use crate::metrics::{roc_auc, spearman};

/// Ensemble size used for the epistemic reference.
pub const ENSEMBLE_MEMBERS: usize = 5;
/// Weight std of each ensemble member's random initialization.
pub const MEMBER_INIT_STD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub grid: AlienGrid,
    pub members: usize,
    pub member_init_std: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            grid: AlienGrid::default(),
            members: ENSEMBLE_MEMBERS,
            member_init_std: MEMBER_INIT_STD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub selected: GridEvaluation,
    pub alien_test_roc_auc: f64,
    pub entropy_test_roc_auc: f64,
    pub test_error_rate: f64,
    pub spearman_alien_epi: f64,
    pub spearman_entropy_epi: f64,
}

/// Base-classifier normalized entropy for every row of a bundle.
fn base_entropy(data: &SyntheticData, test: bool) -> Result<Vec<f64>> {
    let b = if test { &data.test } else { &data.val };
    let p = b.base_probabilities::<f64>();
    Ok(p.iter_rows().map(normalized_entropy_unchecked).collect())
}

/// Ensemble members' test-split probabilities.
pub fn ensemble_test_probs(data: &SyntheticData, members: usize, init_std: f64) -> Result<EnsembleProbs<f64>> {
    let models = data.ensemble_members(members, data.config.seed, init_std);
    EnsembleProbs::new(models.iter().map(|m| m.predict_bundle(&data.test)).collect())
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    let data = generate_synthetic(&cfg.synth)?;
    let outcome = grid_search::<f64>(
        &data.train,
        &data.val,
        AblationVariant::FullAlien,
        &cfg.train,
        &cfg.grid,
    )?;
    let test_features = data.test.features_as::<f64>();
    let errors = data.test.error_labels();
    let alien = outcome.fitted.model.score(&test_features)?;
    let entropy = base_entropy(&data, true)?;

    let decomp = decompose(&ensemble_test_probs(&data, cfg.members, cfg.member_init_std)?);
    Ok(BenchmarkResult {
        selected: outcome.best,
        alien_test_roc_auc: roc_auc(&alien, &errors)?,
        entropy_test_roc_auc: roc_auc(&entropy, &errors)?,
        test_error_rate: errors.error_rate(),
        spearman_alien_epi: spearman(&alien, &decomp.h_epi)?,
        spearman_entropy_epi: spearman(&entropy, &decomp.h_epi)?,
    })
}

/// Grid-searched test ROC-AUC of each head variant on one generated dataset.
pub fn run_ablation(cfg: &BenchmarkConfig) -> Result<Vec<(AblationVariant, f64)>> {
    let data = generate_synthetic(&cfg.synth)?;
    let test_features = data.test.features_as::<f64>();
    let errors = data.test.error_labels();
    AblationVariant::ALL
        .iter()
        .map(|&v| {
            let outcome = grid_search::<f64>(&data.train, &data.val, v, &cfg.train, &cfg.grid)?;
            let scores = outcome.fitted.model.score(&test_features)?;
            Ok((v, roc_auc(&scores, &errors)?))
        })
        .collect()
}
