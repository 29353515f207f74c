use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::probe::{fit_probe, ProbeHead, ProbeKind, SequenceData};
use crate::bundle::EmbeddingBundle;
use crate::error::{Error, Result};
use crate::math::{normalized_entropy_unchecked, softmax_in_place};
use crate::matrix::Matrix;
use crate::optim::{AdamConfig, AdamW};
use crate::scalar::Scalar;

use super::head::{init_alien, AlienHead, LossBreakdown};
use super::labels::ErrorLabels;

/// Std of the Gaussian init used by the random-classifier ablation.
pub const RAND_CLS_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 20,
            batch_size: 64,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(Error::Config(format!(
                "learning rate {} outside (0, 1)",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Head initialization and loss-term ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    FullAlien,
    BceOnly,
    BcePlusL2sp,
    BcePlusReg,
    RandClsBce,
    RandLinearBce,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 6] = [
        AblationVariant::FullAlien,
        AblationVariant::BceOnly,
        AblationVariant::BcePlusL2sp,
        AblationVariant::BcePlusReg,
        AblationVariant::RandClsBce,
        AblationVariant::RandLinearBce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationVariant::FullAlien => "full_alien",
            AblationVariant::BceOnly => "bce_only",
            AblationVariant::BcePlusL2sp => "bce_plus_l2sp",
            AblationVariant::BcePlusReg => "bce_plus_reg",
            AblationVariant::RandClsBce => "rand_cls_bce",
            AblationVariant::RandLinearBce => "rand_linear_bce",
        }
    }

    /// Effective `(alpha, beta)` once the variant's zeroed terms are applied.
    pub fn coefficients(self, alpha: f64, beta: f64) -> (f64, f64) {
        match self {
            AblationVariant::FullAlien => (alpha, beta),
            AblationVariant::BcePlusL2sp => (0.0, beta),
            AblationVariant::BcePlusReg => (alpha, 0.0),
            AblationVariant::BceOnly
            | AblationVariant::RandClsBce
            | AblationVariant::RandLinearBce => (0.0, 0.0),
        }
    }

    pub fn uses_alpha(self) -> bool {
        matches!(self, AblationVariant::FullAlien | AblationVariant::BcePlusReg)
    }

    pub fn uses_beta(self) -> bool {
        matches!(self, AblationVariant::FullAlien | AblationVariant::BcePlusL2sp)
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        AblationVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == norm || format!("{v:?}").to_ascii_lowercase() == norm)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Everything head training needs from a bundle, computed once: features
/// in `T`, error labels and the frozen base entropy target.
#[derive(Debug, Clone)]
pub struct TrainingSet<T> {
    pub features: Matrix<T>,
    pub errors: ErrorLabels,
    pub base_entropy: Vec<T>,
}

impl<T: Scalar> TrainingSet<T> {
    /// The entropy target comes from the bundle's head when it has one, so
    /// it matches an initialized error head exactly; from logits otherwise.
    pub fn from_bundle(bundle: &EmbeddingBundle) -> Self {
        let base_entropy = match &bundle.head {
            Some(head) => bundle
                .features
                .iter_rows()
                .map(|h| {
                    let mut z = head.logits::<T>(h);
                    softmax_in_place(&mut z);
                    normalized_entropy_unchecked(&z)
                })
                .collect(),
            None => {
                let probs = bundle.base_probabilities::<T>();
                probs.iter_rows().map(normalized_entropy_unchecked).collect()
            }
        };
        TrainingSet {
            features: bundle.features_as::<T>(),
            errors: bundle.error_labels(),
            base_entropy,
        }
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A trained error head: the entropy head, or the single-output logistic
/// layer of the random-linear ablation.
#[derive(Debug, Clone, PartialEq)]
pub enum AlienModel<T> {
    Entropy(AlienHead<T>),
    Linear(ProbeHead<T>),
}

impl<T: Scalar> AlienModel<T> {
    pub fn score(&self, features: &Matrix<T>) -> Result<Vec<T>> {
        match self {
            AlienModel::Entropy(h) => h.score(features),
            AlienModel::Linear(p) => p.score_features(features),
        }
    }

    pub fn as_entropy_head(&self) -> Option<&AlienHead<T>> {
        match self {
            AlienModel::Entropy(h) => Some(h),
            AlienModel::Linear(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedAlien<T> {
    pub model: AlienModel<T>,
    pub variant: AblationVariant,
    pub alpha: f64,
    pub beta: f64,
    pub config: TrainConfig,
    /// Mini-batch loss at every optimizer step (empty for the linear variant).
    pub history: Vec<LossBreakdown<T>>,
}

/// Trains one head variant on a prepared training set.
///
/// `base` supplies the classifier head used for initialization by the
/// trained-head variants.
pub fn fit_alien_on<T: Scalar>(
    base: &EmbeddingBundle,
    data: &TrainingSet<T>,
    variant: AblationVariant,
    cfg: &TrainConfig,
    alpha: f64,
    beta: f64,
) -> Result<FittedAlien<T>> {
    cfg.validate()?;
    if alpha < 0.0 || beta < 0.0 {
        return Err(Error::Config("alpha and beta must be non-negative".into()));
    }
    data.errors.require_both_classes()?;
    let (alpha, beta) = variant.coefficients(alpha, beta);

    if variant == AblationVariant::RandLinearBce {
        let probe = fit_probe(
            ProbeKind::Linear,
            &SequenceData::from_features(&data.features),
            &data.errors,
            cfg,
        )?;
        return Ok(FittedAlien {
            model: AlienModel::Linear(probe),
            variant,
            alpha,
            beta,
            config: *cfg,
            history: Vec::new(),
        });
    }

    let mut head = if variant == AblationVariant::RandClsBce {
        let (c, d) = (base.classes, data.features.cols());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let w: Vec<T> = (0..c * d)
            .map(|_| T::lit(RAND_CLS_INIT_STD * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        AlienHead::from_parts(
            Matrix::from_vec(c, d, w)?,
            vec![T::zero(); c],
            T::lit(alpha),
            T::lit(beta),
        )?
    } else {
        init_alien(base, T::lit(alpha), T::lit(beta))?
    };
    head.check_inputs(&data.features, &data.errors, &data.base_entropy)?;

    let mut opt_w = AdamW::new(head.classes() * head.dim(), cfg.adam);
    let mut opt_b = AdamW::new(head.classes(), cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs * data.len().div_ceil(cfg.batch_size));
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut g = head.zero_grad();
            let loss = head.objective(
                &data.features,
                &data.errors,
                &data.base_entropy,
                batch,
                Some(&mut g),
            );
            history.push(loss);
            let (w, b) = head.params_mut();
            opt_w.step(w, g.weight.as_slice(), cfg.learning_rate);
            opt_b.step(b, &g.bias, cfg.learning_rate);
        }
    }
    Ok(FittedAlien {
        model: AlienModel::Entropy(head),
        variant,
        alpha,
        beta,
        config: *cfg,
        history,
    })
}

/// Trains an error head on a bundle's own prediction errors.
pub fn fit_alien<T: Scalar>(
    bundle: &EmbeddingBundle,
    variant: AblationVariant,
    cfg: &TrainConfig,
    alpha: f64,
    beta: f64,
) -> Result<FittedAlien<T>> {
    let data = TrainingSet::from_bundle(bundle);
    fit_alien_on(bundle, &data, variant, cfg, alpha, beta)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::bundle::{ClassifierHead, SplitRole};
    use crate::metrics::roc_auc;

    /// Binary bundle whose gold labels are drawn from the head's own
    /// probabilities, so base entropy is the Bayes-optimal error score.
    fn calibrated_bundle(n: usize, seed: u64) -> EmbeddingBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = ClassifierHead {
            weight: Matrix::from_rows(&[vec![1.0f32, -0.5, 0.0], vec![-1.0, 0.5, 0.0]]).unwrap(),
            bias: vec![0.0, 0.0],
        };
        let mut data = Vec::with_capacity(n * 3);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let h: Vec<f32> = (0..3).map(|_| 1.5 * rng.sample::<f32, _>(StandardNormal)).collect();
            let z = head.logits::<f64>(&h);
            let p0 = 1.0 / (1.0 + (z[1] - z[0]).exp());
            labels.push(if rng.random_bool(p0) { 0 } else { 1 });
            data.extend(h);
        }
        EmbeddingBundle {
            features: Matrix::from_vec(n, 3, data).unwrap(),
            gold_labels: labels,
            classes: 2,
            head: Some(head),
            logits: None,
            split_role: SplitRole::Val,
            depth: None,
        }
    }

    #[test]
    fn training_is_deterministic_and_keeps_snapshot() {
        let b = calibrated_bundle(300, 1);
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = fit_alien::<f64>(&b, AblationVariant::FullAlien, &cfg, 0.1, 0.1).unwrap();
        let c = fit_alien::<f64>(&b, AblationVariant::FullAlien, &cfg, 0.1, 0.1).unwrap();
        assert_eq!(a, c);
        let head = a.model.as_entropy_head().unwrap();
        let fresh = init_alien::<f64>(&b, 0.1, 0.1).unwrap();
        assert_eq!(head.init_weight(), fresh.weight());
        assert_eq!(head.init_bias(), fresh.bias());
        assert_ne!(head.weight(), fresh.weight());
    }

    #[test]
    fn logged_losses_decompose_exactly() {
        let b = calibrated_bundle(200, 2);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let fit = fit_alien::<f64>(&b, AblationVariant::FullAlien, &cfg, 0.7, 0.3).unwrap();
        assert_eq!(fit.history.len(), 2 * 200usize.div_ceil(64));
        for l in &fit.history {
            assert_eq!(l.total - (l.bce + 0.7 * l.reg + 0.3 * l.l2sp), 0.0);
        }
        // first step is taken at the snapshot
        assert_eq!((fit.history[0].reg, fit.history[0].l2sp), (0.0, 0.0));
    }

    #[test]
    fn huge_beta_pins_weights() {
        let b = calibrated_bundle(400, 3);
        let fit =
            fit_alien::<f64>(&b, AblationVariant::BcePlusL2sp, &TrainConfig::default(), 0.0, 1e6)
                .unwrap();
        let d = fit.model.as_entropy_head().unwrap().anchor_distance_sq().sqrt();
        assert!(d < 1e-3, "moved {d}");
    }

    #[test]
    fn entropy_optimal_case_is_not_hurt() {
        let train = calibrated_bundle(2000, 4);
        let test = calibrated_bundle(2000, 5);
        let fit = fit_alien::<f64>(&train, AblationVariant::FullAlien, &TrainConfig::default(), 0.1, 0.1)
            .unwrap();
        let errors = test.error_labels();
        let alien = roc_auc(&fit.model.score(&test.features_as()).unwrap(), &errors).unwrap();
        let base = TrainingSet::<f64>::from_bundle(&test).base_entropy;
        let entropy = roc_auc(&base, &errors).unwrap();
        assert!(alien >= entropy - 0.01, "{alien} vs {entropy}");
    }

    #[test]
    fn single_class_target_rejected() {
        let mut b = calibrated_bundle(50, 6);
        b.gold_labels = b.predictions();
        assert!(matches!(
            fit_alien::<f64>(&b, AblationVariant::FullAlien, &TrainConfig::default(), 0.1, 0.1),
            Err(Error::UntrainableTarget(_))
        ));
    }

    #[test]
    fn variant_semantics() {
        use AblationVariant::*;
        assert_eq!(FullAlien.coefficients(0.1, 1.0), (0.1, 1.0));
        assert_eq!(BcePlusL2sp.coefficients(0.1, 1.0), (0.0, 1.0));
        assert_eq!(BcePlusReg.coefficients(0.1, 1.0), (0.1, 0.0));
        for v in [BceOnly, RandClsBce, RandLinearBce] {
            assert_eq!(v.coefficients(0.1, 1.0), (0.0, 0.0));
        }
        for v in AblationVariant::ALL {
            assert_eq!(v.as_str().parse::<AblationVariant>().unwrap(), v);
        }
        assert!("full".parse::<AblationVariant>().is_err());
    }

    #[test]
    fn random_variants_ignore_the_head() {
        let b = calibrated_bundle(200, 7);
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let rc = fit_alien::<f64>(&b, AblationVariant::RandClsBce, &cfg, 1.0, 1.0).unwrap();
        assert_eq!((rc.alpha, rc.beta), (0.0, 0.0));
        let init = rc.model.as_entropy_head().unwrap().init_weight().clone();
        assert!(init.as_slice().iter().all(|w| w.abs() < 0.2));
        let rl = fit_alien::<f64>(&b, AblationVariant::RandLinearBce, &cfg, 1.0, 1.0).unwrap();
        assert!(matches!(rl.model, AlienModel::Linear(_)));
        assert!(rl.history.is_empty());
    }

    #[test]
    fn bad_config_rejected() {
        for cfg in [
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { learning_rate: 1.0, ..TrainConfig::default() },
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }
}
