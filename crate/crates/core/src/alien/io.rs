//! Fitted-head directories: `alien_manifest.json` plus raw f32 arrays.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::probe::{ProbeHead, ProbeKind};
use crate::bundle::binio::{read_f32, read_json, write_f32, write_json};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::AdamConfig;
use crate::scalar::Scalar;

use super::head::AlienHead;
use super::train::{AblationVariant, AlienModel, FittedAlien, TrainConfig};

pub const ALIEN_MANIFEST: &str = "alien_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlienManifest {
    pub variant: AblationVariant,
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub outputs: usize,
    pub dim: usize,
}

fn to_f32<T: Scalar>(xs: &[T]) -> Vec<f32> {
    xs.iter().map(|x| x.to_f32_lossy()).collect()
}

fn from_f32<T: Scalar>(xs: Vec<f32>) -> Vec<T> {
    xs.into_iter().map(T::from_f32_lossy).collect()
}

pub fn write_alien<T: Scalar>(fitted: &FittedAlien<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (outputs, dim) = match &fitted.model {
        AlienModel::Entropy(h) => {
            write_f32(&dir.join("weight.bin"), &to_f32(h.weight().as_slice()))?;
            write_f32(&dir.join("bias.bin"), &to_f32(h.bias()))?;
            write_f32(&dir.join("init_weight.bin"), &to_f32(h.init_weight().as_slice()))?;
            write_f32(&dir.join("init_bias.bin"), &to_f32(h.init_bias()))?;
            (h.classes(), h.dim())
        }
        AlienModel::Linear(p) => {
            let init = ProbeHead::<T>::initial(ProbeKind::Linear, p.dim(), fitted.config.seed);
            write_f32(&dir.join("weight.bin"), &to_f32(&p.weight))?;
            write_f32(&dir.join("bias.bin"), &to_f32(&[p.bias]))?;
            write_f32(&dir.join("init_weight.bin"), &to_f32(&init.weight))?;
            write_f32(&dir.join("init_bias.bin"), &to_f32(&[init.bias]))?;
            (1, p.dim())
        }
    };
    let manifest = AlienManifest {
        variant: fitted.variant,
        alpha: fitted.alpha,
        beta: fitted.beta,
        learning_rate: fitted.config.learning_rate,
        epochs: fitted.config.epochs,
        seed: fitted.config.seed,
        batch_size: fitted.config.batch_size,
        outputs,
        dim,
    };
    write_json(&dir.join(ALIEN_MANIFEST), &manifest)
}

/// Loads a fitted head; the training history is not persisted.
pub fn read_alien<T: Scalar>(dir: &Path) -> Result<FittedAlien<T>> {
    let m: AlienManifest = read_json(&dir.join(ALIEN_MANIFEST))?;
    let (c, d) = (m.outputs, m.dim);
    let weight = from_f32::<T>(read_f32(&dir.join("weight.bin"), "weight", c * d)?);
    let bias = from_f32::<T>(read_f32(&dir.join("bias.bin"), "bias", c)?);
    let model = if m.variant == AblationVariant::RandLinearBce {
        if c != 1 {
            return Err(Error::Format(format!(
                "linear error head must have one output, manifest says {c}"
            )));
        }
        AlienModel::Linear(ProbeHead {
            kind: ProbeKind::Linear,
            weight,
            bias: bias[0],
            query: None,
            depth_tag: None,
        })
    } else {
        let init_weight = from_f32::<T>(read_f32(&dir.join("init_weight.bin"), "init_weight", c * d)?);
        let init_bias = from_f32::<T>(read_f32(&dir.join("init_bias.bin"), "init_bias", c)?);
        AlienModel::Entropy(AlienHead::with_snapshot(
            Matrix::from_vec(c, d, weight)?,
            bias,
            Matrix::from_vec(c, d, init_weight)?,
            init_bias,
            T::lit(m.alpha),
            T::lit(m.beta),
        )?)
    };
    Ok(FittedAlien {
        model,
        variant: m.variant,
        alpha: m.alpha,
        beta: m.beta,
        config: TrainConfig {
            learning_rate: m.learning_rate,
            epochs: m.epochs,
            batch_size: m.batch_size,
            seed: m.seed,
            adam: AdamConfig::default(),
        },
        history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alien::fit_alien;
    use crate::bundle::{generate_synthetic, SynthConfig};

    fn small() -> crate::bundle::SyntheticData {
        generate_synthetic(&SynthConfig {
            n_train: 200,
            n_val: 100,
            n_test: 100,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn f32_heads_round_trip_exactly() {
        let data = small();
        let cfg = TrainConfig {
            epochs: 2,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        for variant in [AblationVariant::FullAlien, AblationVariant::RandLinearBce] {
            let fit = fit_alien::<f32>(&data.val, variant, &cfg, 0.1, 0.01).unwrap();
            let dir = tempfile::tempdir().unwrap();
            write_alien(&fit, dir.path()).unwrap();
            let back = read_alien::<f32>(dir.path()).unwrap();
            assert_eq!(back.model, fit.model);
            assert_eq!((back.variant, back.alpha, back.beta), (variant, fit.alpha, fit.beta));
            assert_eq!(back.config, fit.config);
        }
    }

    #[test]
    fn truncated_weights_named() {
        let data = small();
        let fit = fit_alien::<f64>(&data.val, AblationVariant::BceOnly, &TrainConfig::default(), 0.0, 0.0)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_alien(&fit, dir.path()).unwrap();
        std::fs::write(dir.path().join("bias.bin"), [0u8; 4]).unwrap();
        let err = read_alien::<f64>(dir.path()).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { ref field, .. } if field == "bias"), "{err}");
    }
}
