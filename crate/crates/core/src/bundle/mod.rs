//! Embedding bundles: the on-disk unit of exchange between feature
//! extraction and everything downstream.
//!
//! A bundle is a directory holding `manifest.json` plus raw little-endian
//! arrays (`features.bin`, `labels.bin`, `head_weight.bin`, `head_bias.bin`
//! and optionally `logits.bin`). Sequence bundles additionally carry
//! `lengths.bin` and store the concatenation of all token rows.

pub mod binio;
mod io;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::alien::ErrorLabels;
use crate::error::{Error, Result};
use crate::math::softmax_in_place;
use crate::matrix::{argmax, Matrix};
use crate::scalar::Scalar;

pub use io::{
    read_any, read_bundle, read_sequence_bundle, write_bundle, write_sequence_bundle, AnyBundle,
    Manifest, ManifestFiles, FORMAT_MAGIC, FORMAT_VERSION,
};
pub use synth::{generate_synthetic, SynthConfig, SyntheticData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Val,
    Test,
}

impl SplitRole {
    pub const ALL: [SplitRole; 3] = [SplitRole::Train, SplitRole::Val, SplitRole::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Val => "val",
            SplitRole::Test => "test",
        }
    }
}

/// Layer depth a representation was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthTag {
    Begin,
    Mid,
    Last,
}

impl std::str::FromStr for DepthTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "begin" => Ok(DepthTag::Begin),
            "mid" | "middle" => Ok(DepthTag::Mid),
            "last" => Ok(DepthTag::Last),
            other => Err(Error::Config(format!("unknown depth tag `{other}`"))),
        }
    }
}

impl DepthTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DepthTag::Begin => "begin",
            DepthTag::Mid => "mid",
            DepthTag::Last => "last",
        }
    }
}

/// The base model's final linear layer, `c × d` weights plus `c` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub weight: Matrix<f32>,
    pub bias: Vec<f32>,
}

impl ClassifierHead {
    pub fn classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn dim(&self) -> usize {
        self.weight.cols()
    }

    /// `W h + b` evaluated in `T`.
    pub fn logits<T: Scalar>(&self, h: &[f32]) -> Vec<T> {
        self.weight
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, &b)| {
                let mut acc = T::zero();
                for (&wj, &hj) in w.iter().zip(h) {
                    acc += T::from_f32_lossy(wj) * T::from_f32_lossy(hj);
                }
                acc + T::from_f32_lossy(b)
            })
            .collect()
    }
}

/// Features, gold labels and the frozen classifier head for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBundle {
    pub features: Matrix<f32>,
    pub gold_labels: Vec<u32>,
    pub classes: usize,
    pub head: Option<ClassifierHead>,
    pub logits: Option<Matrix<f32>>,
    pub split_role: SplitRole,
    pub depth: Option<DepthTag>,
}

impl EmbeddingBundle {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Checks every structural and value invariant, naming the offending
    /// field and index on failure.
    pub fn validate(&self) -> Result<()> {
        validate_common(
            self.len(),
            self.dim(),
            self.classes,
            &self.gold_labels,
            self.head.as_ref(),
            self.logits.as_ref(),
        )?;
        check_finite("features", self.features.as_slice())?;
        if let (Some(head), Some(logits)) = (&self.head, &self.logits) {
            check_argmax_agreement(head, &self.features, logits)?;
        }
        Ok(())
    }

    /// Argmax of the stored logits, or of the head applied to the features.
    pub fn predictions(&self) -> Vec<u32> {
        match (&self.logits, &self.head) {
            (Some(z), _) => z.iter_rows().map(|r| argmax(r) as u32).collect(),
            (None, Some(head)) => self
                .features
                .iter_rows()
                .map(|h| argmax(&head.logits::<f64>(h)) as u32)
                .collect(),
            (None, None) => unreachable!("validated bundles carry a head or logits"),
        }
    }

    pub fn error_labels(&self) -> ErrorLabels {
        ErrorLabels::from_predictions(&self.predictions(), &self.gold_labels)
    }

    /// Base-model class probabilities: softmax of stored logits if present,
    /// of the head route otherwise.
    pub fn base_probabilities<T: Scalar>(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.len(), self.classes);
        for i in 0..self.len() {
            let row = out.row_mut(i);
            match (&self.logits, &self.head) {
                (Some(z), _) => {
                    for (o, &v) in row.iter_mut().zip(z.row(i)) {
                        *o = T::from_f32_lossy(v);
                    }
                }
                (None, Some(head)) => row.copy_from_slice(&head.logits::<T>(self.features.row(i))),
                (None, None) => unreachable!("validated bundles carry a head or logits"),
            }
            softmax_in_place(row);
        }
        out
    }

    pub fn features_as<T: Scalar>(&self) -> Matrix<T> {
        self.features.map(T::from_f32_lossy)
    }

    pub fn require_head(&self) -> Result<&ClassifierHead> {
        self.head
            .as_ref()
            .ok_or_else(|| Error::InvalidBundle("bundle carries no classifier head".into()))
    }
}

/// Variable-length hidden-state sequences with one label per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequenceBundle {
    /// All token rows, concatenated in sequence order.
    pub features: Matrix<f32>,
    pub lengths: Vec<u32>,
    pub gold_labels: Vec<u32>,
    pub classes: usize,
    pub head: Option<ClassifierHead>,
    pub logits: Option<Matrix<f32>>,
    pub split_role: SplitRole,
    pub depth: Option<DepthTag>,
    offsets: Vec<usize>,
}

impl TokenSequenceBundle {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        features: Matrix<f32>,
        lengths: Vec<u32>,
        gold_labels: Vec<u32>,
        classes: usize,
        head: Option<ClassifierHead>,
        logits: Option<Matrix<f32>>,
        split_role: SplitRole,
        depth: Option<DepthTag>,
    ) -> Result<Self> {
        let mut offsets = Vec::with_capacity(lengths.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for (i, &l) in lengths.iter().enumerate() {
            if l == 0 {
                return Err(Error::InvalidBundle(format!("sequence {i} is empty")));
            }
            acc += l as usize;
            offsets.push(acc);
        }
        if acc != features.rows() {
            return Err(Error::ShapeMismatch {
                field: "features".into(),
                expected: acc * features.cols(),
                actual: features.rows() * features.cols(),
            });
        }
        let bundle = TokenSequenceBundle {
            features,
            lengths,
            gold_labels,
            classes,
            head,
            logits,
            split_role,
            depth,
            offsets,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Every row treated as its own length-1 sequence.
    pub fn from_embedding(bundle: &EmbeddingBundle) -> Self {
        let n = bundle.len();
        TokenSequenceBundle {
            features: bundle.features.clone(),
            lengths: vec![1; n],
            gold_labels: bundle.gold_labels.clone(),
            classes: bundle.classes,
            head: bundle.head.clone(),
            logits: bundle.logits.clone(),
            split_role: bundle.split_role,
            depth: bundle.depth,
            offsets: (0..=n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Row-major `L_i × d` block for sequence `i`.
    pub fn sequence(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.features.as_slice()[self.offsets[i] * d..self.offsets[i + 1] * d]
    }

    /// Position whose representation feeds the classifier head.
    pub fn terminal_index(&self, i: usize) -> usize {
        self.lengths[i] as usize - 1
    }

    pub fn validate(&self) -> Result<()> {
        validate_common(
            self.len(),
            self.dim(),
            self.classes,
            &self.gold_labels,
            self.head.as_ref(),
            self.logits.as_ref(),
        )?;
        check_finite("features", self.features.as_slice())?;
        if let (Some(head), Some(logits)) = (&self.head, &self.logits) {
            check_argmax_agreement(head, &self.terminal_features(), logits)?;
        }
        Ok(())
    }

    fn terminal_features(&self) -> Matrix<f32> {
        let idx: Vec<usize> = (0..self.len())
            .map(|i| self.offsets[i] + self.terminal_index(i))
            .collect();
        self.features.select_rows(&idx)
    }

    /// The per-sequence terminal-token view as an ordinary bundle.
    pub fn terminal_bundle(&self) -> EmbeddingBundle {
        EmbeddingBundle {
            features: self.terminal_features(),
            gold_labels: self.gold_labels.clone(),
            classes: self.classes,
            head: self.head.clone(),
            logits: self.logits.clone(),
            split_role: self.split_role,
            depth: self.depth,
        }
    }
}

fn validate_common(
    n: usize,
    d: usize,
    c: usize,
    labels: &[u32],
    head: Option<&ClassifierHead>,
    logits: Option<&Matrix<f32>>,
) -> Result<()> {
    if c < 2 {
        return Err(Error::DegenerateDistribution { classes: c });
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            field: "labels".into(),
            expected: n,
            actual: labels.len(),
        });
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= c) {
        return Err(Error::LabelOutOfRange {
            index,
            label,
            classes: c,
        });
    }
    if head.is_none() && logits.is_none() {
        return Err(Error::InvalidBundle(
            "bundle needs a classifier head or precomputed logits".into(),
        ));
    }
    if let Some(head) = head {
        if head.weight.rows() != c || head.weight.cols() != d {
            return Err(Error::ShapeMismatch {
                field: "head_weight".into(),
                expected: c * d,
                actual: head.weight.rows() * head.weight.cols(),
            });
        }
        if head.bias.len() != c {
            return Err(Error::ShapeMismatch {
                field: "head_bias".into(),
                expected: c,
                actual: head.bias.len(),
            });
        }
        check_finite("head_weight", head.weight.as_slice())?;
        check_finite("head_bias", &head.bias)?;
    }
    if let Some(z) = logits {
        if z.rows() != n || z.cols() != c {
            return Err(Error::ShapeMismatch {
                field: "logits".into(),
                expected: n * c,
                actual: z.rows() * z.cols(),
            });
        }
        check_finite("logits", z.as_slice())?;
    }
    Ok(())
}

fn check_finite(field: &str, xs: &[f32]) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            field: field.into(),
            index,
        }),
        None => Ok(()),
    }
}

fn check_argmax_agreement(
    head: &ClassifierHead,
    features: &Matrix<f32>,
    logits: &Matrix<f32>,
) -> Result<()> {
    for (i, (h, z)) in features.iter_rows().zip(logits.iter_rows()).enumerate() {
        let from_head = argmax(&head.logits::<f64>(h));
        let from_logits = argmax(z);
        if from_head != from_logits {
            return Err(Error::InvalidBundle(format!(
                "prediction mismatch at index {i}: logits say {from_logits}, head says {from_head}"
            )));
        }
    }
    Ok(())
}
