use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binio::{read_f32, read_json, read_u32, read_u32_all, write_f32, write_json, write_u32};
use super::{ClassifierHead, DepthTag, EmbeddingBundle, SplitRole, TokenSequenceBundle};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const FORMAT_MAGIC: &str = "UEB";
pub const FORMAT_VERSION: u32 = 1;
const DTYPE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFiles {
    pub features: String,
    pub labels: String,
    pub head_weight: Option<String>,
    pub head_bias: Option<String>,
    pub logits: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub dtype: String,
    pub split_role: SplitRole,
    pub files: ManifestFiles,
    pub sequence_mode: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthTag>,
}

impl Manifest {
    fn check(&self) -> Result<()> {
        if self.format != FORMAT_MAGIC {
            return Err(Error::Format(format!(
                "magic mismatch: expected `{FORMAT_MAGIC}`, found `{}`",
                self.format
            )));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        if self.dtype != DTYPE {
            return Err(Error::Format(format!("unsupported dtype `{}`", self.dtype)));
        }
        if self.files.head_weight.is_some() != self.files.head_bias.is_some() {
            return Err(Error::Format(
                "head_weight and head_bias must be present together".into(),
            ));
        }
        Ok(())
    }
}

/// Either kind of bundle, as found on disk.
#[derive(Debug, Clone)]
pub enum AnyBundle {
    Embedding(EmbeddingBundle),
    Sequence(TokenSequenceBundle),
}

impl AnyBundle {
    /// Terminal-token view for methods that score one vector per example.
    pub fn embedding(&self) -> EmbeddingBundle {
        match self {
            AnyBundle::Embedding(b) => b.clone(),
            AnyBundle::Sequence(s) => s.terminal_bundle(),
        }
    }

    pub fn sequences(&self) -> TokenSequenceBundle {
        match self {
            AnyBundle::Embedding(b) => TokenSequenceBundle::from_embedding(b),
            AnyBundle::Sequence(s) => s.clone(),
        }
    }

    pub fn depth(&self) -> Option<DepthTag> {
        match self {
            AnyBundle::Embedding(b) => b.depth,
            AnyBundle::Sequence(s) => s.depth,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn manifest_for(
    n: usize,
    d: usize,
    c: usize,
    split_role: SplitRole,
    has_head: bool,
    has_logits: bool,
    sequence_mode: bool,
    depth: Option<DepthTag>,
) -> Manifest {
    Manifest {
        format: FORMAT_MAGIC.into(),
        version: FORMAT_VERSION,
        n,
        d,
        c,
        dtype: DTYPE.into(),
        split_role,
        files: ManifestFiles {
            features: "features.bin".into(),
            labels: "labels.bin".into(),
            head_weight: has_head.then(|| "head_weight.bin".into()),
            head_bias: has_head.then(|| "head_bias.bin".into()),
            logits: has_logits.then(|| "logits.bin".into()),
            lengths: sequence_mode.then(|| "lengths.bin".into()),
        },
        sequence_mode,
        depth,
    }
}

fn write_common(
    dir: &Path,
    manifest: &Manifest,
    features: &Matrix<f32>,
    labels: &[u32],
    head: Option<&ClassifierHead>,
    logits: Option<&Matrix<f32>>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_f32(&dir.join(&manifest.files.features), features.as_slice())?;
    write_u32(&dir.join(&manifest.files.labels), labels)?;
    if let (Some(head), Some(wf), Some(bf)) = (
        head,
        &manifest.files.head_weight,
        &manifest.files.head_bias,
    ) {
        write_f32(&dir.join(wf), head.weight.as_slice())?;
        write_f32(&dir.join(bf), &head.bias)?;
    }
    if let (Some(z), Some(f)) = (logits, &manifest.files.logits) {
        write_f32(&dir.join(f), z.as_slice())?;
    }
    write_json(&dir.join("manifest.json"), manifest)
}

pub fn write_bundle(bundle: &EmbeddingBundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    let manifest = manifest_for(
        bundle.len(),
        bundle.dim(),
        bundle.classes,
        bundle.split_role,
        bundle.head.is_some(),
        bundle.logits.is_some(),
        false,
        bundle.depth,
    );
    write_common(
        dir,
        &manifest,
        &bundle.features,
        &bundle.gold_labels,
        bundle.head.as_ref(),
        bundle.logits.as_ref(),
    )
}

pub fn write_sequence_bundle(bundle: &TokenSequenceBundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    let manifest = manifest_for(
        bundle.len(),
        bundle.dim(),
        bundle.classes,
        bundle.split_role,
        bundle.head.is_some(),
        bundle.logits.is_some(),
        true,
        bundle.depth,
    );
    write_common(
        dir,
        &manifest,
        &bundle.features,
        &bundle.gold_labels,
        bundle.head.as_ref(),
        bundle.logits.as_ref(),
    )?;
    write_u32(&dir.join("lengths.bin"), &bundle.lengths)
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    manifest.check()?;
    Ok(manifest)
}

struct Parts {
    labels: Vec<u32>,
    head: Option<ClassifierHead>,
    logits: Option<Matrix<f32>>,
}

fn read_parts(dir: &Path, m: &Manifest) -> Result<Parts> {
    let labels = read_u32(&dir.join(&m.files.labels), "labels", m.n)?;
    let head = match (&m.files.head_weight, &m.files.head_bias) {
        (Some(wf), Some(bf)) => {
            let w = read_f32(&dir.join(wf), "head_weight", m.c * m.d)?;
            let b = read_f32(&dir.join(bf), "head_bias", m.c)?;
            Some(ClassifierHead {
                weight: Matrix::from_vec(m.c, m.d, w)?,
                bias: b,
            })
        }
        _ => None,
    };
    let logits = match &m.files.logits {
        Some(f) => Some(Matrix::from_vec(
            m.n,
            m.c,
            read_f32(&dir.join(f), "logits", m.n * m.c)?,
        )?),
        None => None,
    };
    Ok(Parts {
        labels,
        head,
        logits,
    })
}

/// Reads and fully validates an embedding bundle directory.
pub fn read_bundle(dir: &Path) -> Result<EmbeddingBundle> {
    let m = read_manifest(dir)?;
    if m.sequence_mode {
        return Err(Error::Format(
            "sequence-mode bundle; read it with read_sequence_bundle".into(),
        ));
    }
    let features = read_f32(&dir.join(&m.files.features), "features", m.n * m.d)?;
    let parts = read_parts(dir, &m)?;
    let bundle = EmbeddingBundle {
        features: Matrix::from_vec(m.n, m.d, features)?,
        gold_labels: parts.labels,
        classes: m.c,
        head: parts.head,
        logits: parts.logits,
        split_role: m.split_role,
        depth: m.depth,
    };
    bundle.validate()?;
    Ok(bundle)
}

pub fn read_sequence_bundle(dir: &Path) -> Result<TokenSequenceBundle> {
    let m = read_manifest(dir)?;
    if !m.sequence_mode {
        return Err(Error::Format("bundle is not in sequence mode".into()));
    }
    let lengths_file = m.files.lengths.as_deref().unwrap_or("lengths.bin");
    let lengths = read_u32_all(&dir.join(lengths_file), "lengths")?;
    if lengths.len() != m.n {
        return Err(Error::ShapeMismatch {
            field: "lengths".into(),
            expected: m.n,
            actual: lengths.len(),
        });
    }
    let rows: usize = lengths.iter().map(|&l| l as usize).sum();
    let features = read_f32(&dir.join(&m.files.features), "features", rows * m.d)?;
    let parts = read_parts(dir, &m)?;
    TokenSequenceBundle::new(
        Matrix::from_vec(rows, m.d, features)?,
        lengths,
        parts.labels,
        m.c,
        parts.head,
        parts.logits,
        m.split_role,
        m.depth,
    )
}

pub fn read_any(dir: &Path) -> Result<AnyBundle> {
    if read_manifest(dir)?.sequence_mode {
        read_sequence_bundle(dir).map(AnyBundle::Sequence)
    } else {
        read_bundle(dir).map(AnyBundle::Embedding)
    }
}
