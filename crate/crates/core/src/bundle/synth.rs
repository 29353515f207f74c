//! Fixed-seed synthetic bundles for desk-scale experiments.
//!
//! Classes are Gaussian clusters, isotropic except that clean rows vary
//! little along the pocket direction. A fraction of every split forms
//! an "epistemic pocket": points sampled tightly inside a decoy class's
//! cluster, shifted along a direction orthogonal to every class mean, and
//! labelled with the class that generated them. A softmax classifier fit on
//! the clean training rows ignores that direction, so it is confidently
//! wrong on the pocket while the pocket stays linearly identifiable.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ClassifierHead, EmbeddingBundle, SplitRole};
use crate::error::{Error, Result};
use crate::math::softmax_in_place;
use crate::matrix::Matrix;

/// Pocket points are drawn with this fraction of the cluster noise.
pub const POCKET_SPREAD: f64 = 0.5;
/// Pocket offset along the held-out direction, in units of class separation.
pub const POCKET_OFFSET: f64 = 1.0;
/// Clean rows' noise along the pocket direction, as a fraction of the
/// cluster noise. Training data barely constrains that direction.
pub const CLEAN_AXIS_SPREAD: f64 = 0.1;

const FIT_ITERATIONS: usize = 500;
const FIT_LEARNING_RATE: f64 = 0.5;
const FIT_GRAD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub d: usize,
    pub c: usize,
    pub class_separation: f64,
    pub noise_scale: f64,
    /// Fraction of each split placed in the epistemic pocket.
    pub epistemic_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_train: 4000,
            n_val: 2000,
            n_test: 2000,
            d: 16,
            c: 4,
            class_separation: 4.0,
            noise_scale: 1.0,
            epistemic_fraction: 0.1,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.c)));
        }
        if self.d < self.c + 1 {
            return Err(Error::Config(format!(
                "d = {} leaves no direction orthogonal to the {} class means (need d ≥ c + 1)",
                self.d, self.c
            )));
        }
        let min = self.c * 10;
        for (name, n) in [("train", self.n_train), ("val", self.n_val), ("test", self.n_test)] {
            if n < min {
                return Err(Error::Config(format!(
                    "{name} split has {n} examples, need at least {min}"
                )));
            }
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::Config("class_separation must be positive".into()));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config("noise_scale must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.epistemic_fraction) {
            return Err(Error::Config(format!(
                "epistemic fraction {} outside [0, 0.5)",
                self.epistemic_fraction
            )));
        }
        Ok(())
    }

    fn split_size(&self, role: SplitRole) -> usize {
        match role {
            SplitRole::Train => self.n_train,
            SplitRole::Val => self.n_val,
            SplitRole::Test => self.n_test,
        }
    }
}

/// Generated splits plus the ground truth the generator knows about them.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub config: SynthConfig,
    pub train: EmbeddingBundle,
    pub val: EmbeddingBundle,
    pub test: EmbeddingBundle,
    /// Per split (train, val, test): whether each row belongs to the pocket.
    pub pocket: [Vec<bool>; 3],
    pub pocket_direction: Vec<f64>,
    pub decoy_class: usize,
}

impl SyntheticData {
    pub fn split(&self, role: SplitRole) -> &EmbeddingBundle {
        match role {
            SplitRole::Train => &self.train,
            SplitRole::Val => &self.val,
            SplitRole::Test => &self.test,
        }
    }

    pub fn pocket_mask(&self, role: SplitRole) -> &[bool] {
        &self.pocket[role as usize]
    }

    /// Clean (non-pocket) training rows in f64.
    pub fn clean_train(&self) -> (Matrix<f64>, Vec<u32>) {
        let idx: Vec<usize> = (0..self.train.len())
            .filter(|&i| !self.pocket[0][i])
            .collect();
        let labels = idx.iter().map(|&i| self.train.gold_labels[i]).collect();
        (self.train.features.select_rows(&idx).map(f64::from), labels)
    }

    /// `members` softmax classifiers fit on the clean training rows, each
    /// from its own random initialization (stream `seed`, member index).
    pub fn ensemble_members(&self, members: usize, seed: u64, init_std: f64) -> Vec<SoftmaxModel> {
        let (x, y) = self.clean_train();
        (0..members)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64 + 1);
                let init = SoftmaxModel::random(self.config.c, self.config.d, init_std, &mut rng);
                fit_softmax_regression(&x, &y, init)
            })
            .collect()
    }
}

/// A multinomial logistic model in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    pub weight: Matrix<f64>,
    pub bias: Vec<f64>,
}

impl SoftmaxModel {
    pub fn zeros(c: usize, d: usize) -> Self {
        SoftmaxModel {
            weight: Matrix::zeros(c, d),
            bias: vec![0.0; c],
        }
    }

    pub fn random(c: usize, d: usize, std: f64, rng: &mut impl Rng) -> Self {
        let mut m = SoftmaxModel::zeros(c, d);
        for w in m.weight.as_mut_slice() {
            *w = std * rng.sample::<f64, _>(StandardNormal);
        }
        m
    }

    pub fn probabilities(&self, h: &[f64]) -> Vec<f64> {
        let mut z = self.weight.mat_vec(h);
        for (zc, b) in z.iter_mut().zip(&self.bias) {
            *zc += b;
        }
        softmax_in_place(&mut z);
        z
    }

    /// Class probabilities for every row of a bundle's features.
    pub fn predict_bundle(&self, bundle: &EmbeddingBundle) -> Matrix<f64> {
        let rows: Vec<Vec<f64>> = bundle
            .features
            .iter_rows()
            .map(|h| {
                let h: Vec<f64> = h.iter().map(|&x| f64::from(x)).collect();
                self.probabilities(&h)
            })
            .collect();
        Matrix::from_rows(&rows).expect("uniform row length")
    }
}

/// Full-batch gradient descent on mean cross-entropy: fixed iteration
/// budget, stops early once the gradient norm drops below tolerance.
pub fn fit_softmax_regression(x: &Matrix<f64>, y: &[u32], init: SoftmaxModel) -> SoftmaxModel {
    let (n, d) = (x.rows(), x.cols());
    let c = init.bias.len();
    let mut model = init;
    let inv_n = 1.0 / n as f64;
    let mut gw = Matrix::<f64>::zeros(c, d);
    let mut gb = vec![0.0; c];
    for _ in 0..FIT_ITERATIONS {
        gw.as_mut_slice().fill(0.0);
        gb.fill(0.0);
        for (h, &label) in x.iter_rows().zip(y) {
            let mut p = model.probabilities(h);
            p[label as usize] -= 1.0;
            for (k, &r) in p.iter().enumerate() {
                gb[k] += r * inv_n;
                for (g, &hj) in gw.row_mut(k).iter_mut().zip(h) {
                    *g += r * hj * inv_n;
                }
            }
        }
        let norm = (gw.as_slice().iter().chain(&gb).map(|g| g * g).sum::<f64>()).sqrt();
        if norm < FIT_GRAD_TOL {
            break;
        }
        for (w, g) in model.weight.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *w -= FIT_LEARNING_RATE * g;
        }
        for (b, g) in model.bias.iter_mut().zip(&gb) {
            *b -= FIT_LEARNING_RATE * g;
        }
    }
    model
}

struct RawSplit {
    features: Matrix<f32>,
    labels: Vec<u32>,
    pocket: Vec<bool>,
}

fn sample_split(
    cfg: &SynthConfig,
    n: usize,
    means: &[Vec<f64>],
    direction: &[f64],
    decoy: usize,
    rng: &mut ChaCha8Rng,
) -> RawSplit {
    let n_pocket = (cfg.epistemic_fraction * n as f64).round() as usize;
    let offset = POCKET_OFFSET * cfg.class_separation;
    let mut rows: Vec<(Vec<f32>, u32, bool)> = Vec::with_capacity(n);
    for i in 0..n {
        let in_pocket = i >= n - n_pocket;
        let (label, center, spread) = if in_pocket {
            // any class except the decoy whose cluster hosts the pocket
            let mut label = rng.random_range(0..cfg.c - 1);
            if label >= decoy {
                label += 1;
            }
            (label, decoy, POCKET_SPREAD * cfg.noise_scale)
        } else {
            let label = rng.random_range(0..cfg.c);
            (label, label, cfg.noise_scale)
        };
        let mut noise: Vec<f64> = (0..cfg.d).map(|_| rng.sample(StandardNormal)).collect();
        let along: f64 = noise.iter().zip(direction).map(|(z, u)| z * u).sum();
        let (shift, squeeze) = if in_pocket {
            (offset, 0.0)
        } else {
            (0.0, (1.0 - CLEAN_AXIS_SPREAD) * along)
        };
        for (z, u) in noise.iter_mut().zip(direction) {
            *z -= squeeze * u;
        }
        let h: Vec<f32> = (0..cfg.d)
            .map(|j| (means[center][j] + spread * noise[j] + shift * direction[j]) as f32)
            .collect();
        rows.push((h, label as u32, in_pocket));
    }
    rows.shuffle(rng);
    let mut data = Vec::with_capacity(n * cfg.d);
    let mut labels = Vec::with_capacity(n);
    let mut pocket = Vec::with_capacity(n);
    for (h, y, p) in rows {
        data.extend_from_slice(&h);
        labels.push(y);
        pocket.push(p);
    }
    RawSplit {
        features: Matrix::from_vec(n, cfg.d, data).expect("shape"),
        labels,
        pocket,
    }
}

/// Generates train/val/test bundles. Deterministic given the config.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (c, d) = (cfg.c, cfg.d);

    // Means on the first c axes, pairwise distance = class_separation.
    let radius = cfg.class_separation / std::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = (0..c)
        .map(|k| (0..d).map(|j| if j == k { radius } else { 0.0 }).collect())
        .collect();

    // Held-out direction lives in the axes no mean touches.
    let mut direction = vec![0.0; d];
    for v in direction.iter_mut().skip(c) {
        *v = rng.sample(StandardNormal);
    }
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);
    let decoy = c - 1;

    let raw: Vec<RawSplit> = SplitRole::ALL
        .iter()
        .map(|&role| sample_split(cfg, cfg.split_size(role), &means, &direction, decoy, &mut rng))
        .collect();

    let clean: Vec<usize> = (0..raw[0].labels.len()).filter(|&i| !raw[0].pocket[i]).collect();
    let x = raw[0].features.select_rows(&clean).map(f64::from);
    let y: Vec<u32> = clean.iter().map(|&i| raw[0].labels[i]).collect();
    let fitted = fit_softmax_regression(&x, &y, SoftmaxModel::zeros(c, d));
    let head = ClassifierHead {
        weight: fitted.weight.map(|w| w as f32),
        bias: fitted.bias.iter().map(|&b| b as f32).collect(),
    };

    let mut bundles = raw.iter().zip(SplitRole::ALL).map(|(split, role)| {
        let logits: Vec<f32> = split
            .features
            .iter_rows()
            .flat_map(|h| head.logits::<f64>(h).into_iter().map(|z| z as f32))
            .collect();
        EmbeddingBundle {
            features: split.features.clone(),
            gold_labels: split.labels.clone(),
            classes: c,
            head: Some(head.clone()),
            logits: Some(Matrix::from_vec(split.labels.len(), c, logits).expect("shape")),
            split_role: role,
            depth: None,
        }
    });
    let (train, val, test) = (
        bundles.next().unwrap(),
        bundles.next().unwrap(),
        bundles.next().unwrap(),
    );
    for b in [&train, &val, &test] {
        b.validate()?;
    }
    let mut raw = raw.into_iter();
    let pocket = [
        raw.next().unwrap().pocket,
        raw.next().unwrap().pocket,
        raw.next().unwrap().pocket,
    ];
    Ok(SyntheticData {
        config: cfg.clone(),
        train,
        val,
        test,
        pocket,
        pocket_direction: direction,
        decoy_class: decoy,
    })
}

/// Fraction of rows whose prediction matches the gold label.
pub fn accuracy(bundle: &EmbeddingBundle) -> f64 {
    let correct = bundle
        .predictions()
        .iter()
        .zip(&bundle.gold_labels)
        .filter(|(p, y)| p == y)
        .count();
    correct as f64 / bundle.len().max(1) as f64
}
