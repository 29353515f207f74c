//! Logistic error probes: a linear probe on one representation and an
//! attention-pooling probe over a sequence of hidden states.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alien::{ErrorLabels, TrainConfig};
use crate::bundle::{DepthTag, TokenSequenceBundle};
use crate::error::{Error, Result};
use crate::math::{sigmoid, softmax_in_place};
use crate::matrix::{dot, Matrix};
use crate::metrics::roc_auc;
use crate::optim::AdamW;
use crate::scalar::Scalar;

/// Standard deviation of the Gaussian used for probe weight init.
pub const PROBE_INIT_STD: f64 = 0.02;

/// Learning rates tried when a probe is selected on a validation split.
pub const PROBE_LEARNING_RATES: [f64; 3] = [1e-3, 4e-4, 1e-4];

const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Linear,
    AttentionPooling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeHead<T> {
    pub kind: ProbeKind,
    pub weight: Vec<T>,
    pub bias: T,
    /// Attention query; present iff `kind` is attention pooling.
    pub query: Option<Vec<T>>,
    pub depth_tag: Option<DepthTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGradient<T> {
    pub weight: Vec<T>,
    pub bias: T,
    pub query: Option<Vec<T>>,
}

/// Token rows for every example, converted to `T` once.
#[derive(Debug, Clone)]
pub struct SequenceData<T> {
    rows: Vec<T>,
    offsets: Vec<usize>,
    dim: usize,
}

impl<T: Scalar> SequenceData<T> {
    /// One length-1 sequence per feature row.
    pub fn from_features(features: &Matrix<T>) -> Self {
        SequenceData {
            rows: features.as_slice().to_vec(),
            offsets: (0..=features.rows()).collect(),
            dim: features.cols(),
        }
    }

    pub fn from_bundle(bundle: &TokenSequenceBundle) -> Self {
        let mut offsets = vec![0];
        let mut acc = 0;
        for &l in &bundle.lengths {
            acc += l as usize;
            offsets.push(acc);
        }
        SequenceData {
            rows: bundle
                .features
                .as_slice()
                .iter()
                .map(|&x| T::from_f32_lossy(x))
                .collect(),
            offsets,
            dim: bundle.dim(),
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn sequence(&self, i: usize) -> &[T] {
        &self.rows[self.offsets[i] * self.dim..self.offsets[i + 1] * self.dim]
    }

    fn check(&self) -> Result<()> {
        for i in 0..self.len() {
            if self.offsets[i + 1] == self.offsets[i] {
                return Err(Error::InvalidInput(format!("sequence {i} is empty")));
            }
        }
        Ok(())
    }
}

impl<T: Scalar> ProbeHead<T> {
    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    /// Attention weights over the positions of one `L × d` sequence.
    /// Uniform when there is no query.
    pub fn attention_weights(&self, seq: &[T]) -> Vec<T> {
        let d = self.dim();
        let len = seq.len() / d;
        match &self.query {
            Some(q) => {
                let mut s: Vec<T> = seq.chunks_exact(d).map(|h| dot(q, h)).collect();
                softmax_in_place(&mut s);
                s
            }
            None => vec![T::one() / T::lit(len as f64); len],
        }
    }

    /// Pooled representation: attention-weighted mean, or the terminal
    /// token for a linear probe.
    fn pool(&self, seq: &[T], alpha: &mut Vec<T>) -> Vec<T> {
        let d = self.dim();
        match self.kind {
            ProbeKind::Linear => {
                alpha.clear();
                seq[seq.len() - d..].to_vec()
            }
            ProbeKind::AttentionPooling => {
                *alpha = self.attention_weights(seq);
                let mut pooled = vec![T::zero(); d];
                for (h, &a) in seq.chunks_exact(d).zip(alpha.iter()) {
                    for (p, &x) in pooled.iter_mut().zip(h) {
                        *p += a * x;
                    }
                }
                pooled
            }
        }
    }

    fn check_data(&self, data: &SequenceData<T>) -> Result<()> {
        if data.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: data.dim(),
            });
        }
        data.check()
    }

    /// Predicted error probability for every example, in (0, 1).
    pub fn score(&self, data: &SequenceData<T>) -> Result<Vec<T>> {
        self.check_data(data)?;
        let mut alpha = Vec::new();
        Ok((0..data.len())
            .map(|i| {
                let pooled = self.pool(data.sequence(i), &mut alpha);
                sigmoid(dot(&self.weight, &pooled) + self.bias)
            })
            .collect())
    }

    pub fn score_features(&self, features: &Matrix<T>) -> Result<Vec<T>> {
        self.score(&SequenceData::from_features(features))
    }

    /// Mean clamped binary cross-entropy.
    pub fn loss(&self, data: &SequenceData<T>, errors: &ErrorLabels) -> Result<T> {
        self.check_data(data)?;
        check_len(data, errors)?;
        let rows: Vec<usize> = (0..data.len()).collect();
        Ok(self.objective(data, errors, &rows, None))
    }

    pub fn grad(&self, data: &SequenceData<T>, errors: &ErrorLabels) -> Result<ProbeGradient<T>> {
        self.check_data(data)?;
        check_len(data, errors)?;
        let rows: Vec<usize> = (0..data.len()).collect();
        let mut g = self.zero_grad();
        self.objective(data, errors, &rows, Some(&mut g));
        Ok(g)
    }

    fn zero_grad(&self) -> ProbeGradient<T> {
        ProbeGradient {
            weight: vec![T::zero(); self.dim()],
            bias: T::zero(),
            query: self.query.as_ref().map(|q| vec![T::zero(); q.len()]),
        }
    }

    fn objective(
        &self,
        data: &SequenceData<T>,
        errors: &ErrorLabels,
        rows: &[usize],
        mut grad: Option<&mut ProbeGradient<T>>,
    ) -> T {
        let d = self.dim();
        let m = T::lit(rows.len() as f64);
        let lo = T::lit(BCE_CLAMP);
        let hi = T::one() - lo;
        let mut alpha = Vec::new();
        let mut loss = T::zero();
        for &i in rows {
            let seq = data.sequence(i);
            let pooled = self.pool(seq, &mut alpha);
            let p = sigmoid(dot(&self.weight, &pooled) + self.bias);
            let pc = p.max(lo).min(hi);
            let e = errors.get(i);
            loss -= if e { pc.ln() } else { (T::one() - pc).ln() };

            let Some(g) = grad.as_deref_mut() else {
                continue;
            };
            if p < lo || p > hi {
                continue;
            }
            let target = if e { T::one() } else { T::zero() };
            let dz = (p - target) / m;
            g.bias += dz;
            for (gw, &x) in g.weight.iter_mut().zip(&pooled) {
                *gw += dz * x;
            }
            if let Some(gq) = g.query.as_mut() {
                // ∂L/∂s_j = α_j (g_j − Σ_k α_k g_k), g_j = dz · wᵀh_j
                let scores: Vec<T> = seq
                    .chunks_exact(d)
                    .map(|h| dz * dot(&self.weight, h))
                    .collect();
                let mean: T = scores.iter().zip(&alpha).map(|(&s, &a)| s * a).sum();
                for ((h, &a), &s) in seq.chunks_exact(d).zip(&alpha).zip(&scores) {
                    let ds = a * (s - mean);
                    for (q, &x) in gq.iter_mut().zip(h) {
                        *q += ds * x;
                    }
                }
            }
        }
        loss / m
    }

    pub(crate) fn initial(kind: ProbeKind, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let weight = (0..dim)
            .map(|_| T::lit(PROBE_INIT_STD * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        ProbeHead {
            kind,
            weight,
            bias: T::zero(),
            query: (kind == ProbeKind::AttentionPooling).then(|| vec![T::zero(); dim]),
            depth_tag: None,
        }
    }
}

fn check_len<T: Scalar>(data: &SequenceData<T>, errors: &ErrorLabels) -> Result<()> {
    if errors.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            actual: errors.len(),
        });
    }
    Ok(())
}

/// Mini-batch training shared by both probe kinds.
pub fn fit_probe<T: Scalar>(
    kind: ProbeKind,
    data: &SequenceData<T>,
    errors: &ErrorLabels,
    cfg: &TrainConfig,
) -> Result<ProbeHead<T>> {
    cfg.validate()?;
    check_len(data, errors)?;
    data.check()?;
    errors.require_both_classes()?;
    let mut head = ProbeHead::initial(kind, data.dim(), cfg.seed);
    let mut opt_w = AdamW::new(head.dim(), cfg.adam);
    let mut opt_b = AdamW::new(1, cfg.adam);
    let mut opt_q = AdamW::new(head.dim(), cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut g = head.zero_grad();
            head.objective(data, errors, batch, Some(&mut g));
            opt_w.step(&mut head.weight, &g.weight, cfg.learning_rate);
            let mut b = [head.bias];
            opt_b.step(&mut b, &[g.bias], cfg.learning_rate);
            head.bias = b[0];
            if let (Some(q), Some(gq)) = (head.query.as_mut(), g.query.as_ref()) {
                opt_q.step(q, gq, cfg.learning_rate);
            }
        }
    }
    Ok(head)
}

pub fn fit_linear_probe<T: Scalar>(
    features: &Matrix<T>,
    errors: &ErrorLabels,
    cfg: &TrainConfig,
) -> Result<ProbeHead<T>> {
    fit_probe(ProbeKind::Linear, &SequenceData::from_features(features), errors, cfg)
}

pub fn fit_attention_probe<T: Scalar>(
    sequences: &TokenSequenceBundle,
    errors: &ErrorLabels,
    cfg: &TrainConfig,
) -> Result<ProbeHead<T>> {
    let mut head = fit_probe(
        ProbeKind::AttentionPooling,
        &SequenceData::from_bundle(sequences),
        errors,
        cfg,
    )?;
    head.depth_tag = sequences.depth;
    Ok(head)
}

/// Fits one probe per learning rate and keeps the best validation ROC-AUC
/// (earlier rates win ties). Returns the probe and its learning rate.
pub fn select_probe<T: Scalar>(
    kind: ProbeKind,
    train: (&SequenceData<T>, &ErrorLabels),
    val: (&SequenceData<T>, &ErrorLabels),
    cfg: &TrainConfig,
    learning_rates: &[f64],
) -> Result<(ProbeHead<T>, f64)> {
    val.1.require_both_classes()?;
    let mut best: Option<(ProbeHead<T>, f64, f64)> = None;
    for &lr in learning_rates {
        let cfg = TrainConfig {
            learning_rate: lr,
            ..*cfg
        };
        let probe = fit_probe(kind, train.0, train.1, &cfg)?;
        let auc = roc_auc(&probe.score(val.0)?, val.1)?;
        if best.as_ref().is_none_or(|b| auc > b.2) {
            best = Some((probe, lr, auc));
        }
    }
    let (probe, lr, _) = best.ok_or_else(|| Error::Config("empty learning-rate list".into()))?;
    Ok((probe, lr))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;

    fn random_sequences(n: usize, d: usize, max_len: usize, rng: &mut ChaCha8Rng) -> SequenceData<f64> {
        let mut rows = Vec::new();
        let mut offsets = vec![0];
        for _ in 0..n {
            let len = rng.random_range(1..=max_len);
            for _ in 0..len * d {
                rows.push(rng.sample::<f64, _>(StandardNormal));
            }
            offsets.push(offsets.last().unwrap() + len);
        }
        SequenceData { rows, offsets, dim: d }
    }

    fn random_probe(d: usize, rng: &mut ChaCha8Rng) -> ProbeHead<f64> {
        ProbeHead {
            kind: ProbeKind::AttentionPooling,
            weight: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bias: 0.3,
            query: Some((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()),
            depth_tag: None,
        }
    }

    #[test]
    fn zero_query_attends_uniformly() {
        let p = ProbeHead::<f64>::initial(ProbeKind::AttentionPooling, 3, 0);
        let a = p.attention_weights(&[1.0, 2.0, 3.0, -1.0, 0.0, 4.0, 9.0, 9.0, 9.0, 0.5, 0.5, 0.5]);
        assert_eq!(a, vec![0.25; 4]);
    }

    #[test]
    fn length_one_attention_equals_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_vec(300, 4, (0..1200).map(|_| rng.random_range(-2.0..2.0)).collect())
            .unwrap();
        let errors = ErrorLabels::new(x.iter_rows().map(|h| h[0] + 0.3 * h[1] > 0.5).collect());
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: 5,
            ..TrainConfig::default()
        };
        let lin = fit_linear_probe(&x, &errors, &cfg).unwrap();
        let att = fit_probe(ProbeKind::AttentionPooling, &SequenceData::from_features(&x), &errors, &cfg)
            .unwrap();
        assert_eq!(lin.weight, att.weight);
        assert_eq!(lin.bias, att.bias);
        assert!(att.query.unwrap().iter().all(|&q| q == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = 6;
        let data = random_sequences(40, d, 5, &mut rng);
        let errors = ErrorLabels::new((0..40).map(|i| i % 3 == 0).collect());
        let probe = random_probe(d, &mut rng);
        let g = probe.grad(&data, &errors).unwrap();
        let step = 1e-5;
        for idx in 0..2 * d + 1 {
            let eval = |delta: f64| {
                let mut p = probe.clone();
                match idx {
                    i if i < d => p.weight[i] += delta,
                    i if i == d => p.bias += delta,
                    i => p.query.as_mut().unwrap()[i - d - 1] += delta,
                }
                p.loss(&data, &errors).unwrap()
            };
            let fd = (eval(step) - eval(-step)) / (2.0 * step);
            let an = match idx {
                i if i < d => g.weight[i],
                i if i == d => g.bias,
                i => g.query.as_ref().unwrap()[i - d - 1],
            };
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            assert!(rel < 1e-4, "coordinate {idx}: analytic {an}, numeric {fd}");
        }
    }

    #[test]
    fn separable_errors_are_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4096;
        let mut data = Vec::with_capacity(n * 4);
        let mut errors = Vec::with_capacity(n);
        for i in 0..n {
            let e = i % 2 == 0;
            let margin = 4.0 + rng.sample::<f64, _>(StandardNormal).abs();
            data.push(if e { margin } else { -margin });
            data.extend((0..3).map(|_| rng.sample::<f64, _>(StandardNormal)));
            errors.push(e);
        }
        let x = Matrix::from_vec(n, 4, data).unwrap();
        let errors = ErrorLabels::new(errors);
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let probe = fit_linear_probe(&x, &errors, &cfg).unwrap();
        let loss = probe.loss(&SequenceData::from_features(&x), &errors).unwrap();
        assert!(loss < 0.05, "bce {loss}");
    }

    #[test]
    fn null_signal_gives_chance_auc() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut draw = |n: usize| {
                let x = Matrix::<f64>::from_vec(n, 5, (0..n * 5).map(|_| rng.sample(StandardNormal)).collect())
                    .unwrap();
                let e = ErrorLabels::new((0..n).map(|_| rng.random_bool(0.3)).collect());
                (x, e)
            };
            let (xt, et) = draw(1000);
            let (xv, ev) = draw(2000);
            let cfg = TrainConfig {
                learning_rate: 1e-3,
                seed,
                ..TrainConfig::default()
            };
            let probe = fit_linear_probe(&xt, &et, &cfg).unwrap();
            let auc = roc_auc(&probe.score_features(&xv).unwrap(), &ev).unwrap();
            assert!((0.45..=0.55).contains(&auc), "seed {seed}: {auc}");
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let data = SequenceData::<f64> {
            rows: vec![1.0, 2.0],
            offsets: vec![0, 1, 1],
            dim: 2,
        };
        let p = ProbeHead::<f64>::initial(ProbeKind::AttentionPooling, 2, 0);
        assert!(matches!(p.score(&data), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn selection_picks_a_listed_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::from_vec(400, 3, (0..1200).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let e = ErrorLabels::new(x.iter_rows().map(|h| h[0] > 0.2).collect());
        let s = SequenceData::from_features(&x);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let (_, lr) =
            select_probe(ProbeKind::Linear, (&s, &e), (&s, &e), &cfg, &PROBE_LEARNING_RATES).unwrap();
        assert!(PROBE_LEARNING_RATES.contains(&lr));
    }

    proptest! {
        #[test]
        fn attention_is_a_distribution(seed in 0u64..500, d in 1usize..8, len in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let probe = random_probe(d, &mut rng);
            let seq: Vec<f64> = (0..len * d).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let a = probe.attention_weights(&seq);
            prop_assert!(a.iter().all(|&x| x >= 0.0));
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn scores_are_probabilities(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = random_sequences(10, 4, 4, &mut rng);
            let s = random_probe(4, &mut rng).score(&data).unwrap();
            prop_assert!(s.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }
}
