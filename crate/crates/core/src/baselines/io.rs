//! Serialization of fitted baselines, following the head directory layout.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gaussian::GaussianStats;
use super::probe::{ProbeHead, ProbeKind};
use crate::alien::TrainConfig;
use crate::bundle::binio::{read_f32, read_json, write_f32, write_json};
use crate::bundle::DepthTag;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const STATS_MANIFEST: &str = "stats_manifest.json";
pub const PROBE_MANIFEST: &str = "probe_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsManifest {
    pub classes: usize,
    pub dim: usize,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeManifest {
    pub kind: ProbeKind,
    pub depth_tag: Option<DepthTag>,
    pub dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

// nalgebra is column-major; files are row-major
fn rows_of(m: &DMatrix<f64>) -> Vec<f32> {
    m.transpose().iter().map(|&x| x as f32).collect()
}

fn read_matrix(dir: &Path, file: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let v = read_f32(&dir.join(file), file.trim_end_matches(".bin"), rows * cols)?;
    Ok(DMatrix::from_row_iterator(rows, cols, v.into_iter().map(f64::from)))
}

pub fn write_gaussian_stats(stats: &GaussianStats, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_f32(&dir.join("class_means.bin"), &rows_of(&stats.class_means))?;
    write_f32(&dir.join("shared_covariance.bin"), &rows_of(&stats.shared_covariance))?;
    write_f32(&dir.join("shared_precision.bin"), &rows_of(&stats.shared_precision))?;
    let mean: Vec<f32> = stats.background_mean.iter().map(|&x| x as f32).collect();
    write_f32(&dir.join("background_mean.bin"), &mean)?;
    write_f32(&dir.join("background_covariance.bin"), &rows_of(&stats.background_covariance))?;
    write_f32(&dir.join("background_precision.bin"), &rows_of(&stats.background_precision))?;
    write_json(
        &dir.join(STATS_MANIFEST),
        &StatsManifest {
            classes: stats.classes(),
            dim: stats.dim(),
            ridge: stats.ridge,
        },
    )
}

pub fn read_gaussian_stats(dir: &Path) -> Result<GaussianStats> {
    let m: StatsManifest = read_json(&dir.join(STATS_MANIFEST))?;
    let (c, d) = (m.classes, m.dim);
    let mean = read_f32(&dir.join("background_mean.bin"), "background_mean", d)?;
    Ok(GaussianStats {
        class_means: read_matrix(dir, "class_means.bin", c, d)?,
        shared_covariance: read_matrix(dir, "shared_covariance.bin", d, d)?,
        shared_precision: read_matrix(dir, "shared_precision.bin", d, d)?,
        background_mean: DVector::from_iterator(d, mean.into_iter().map(f64::from)),
        background_covariance: read_matrix(dir, "background_covariance.bin", d, d)?,
        background_precision: read_matrix(dir, "background_precision.bin", d, d)?,
        ridge: m.ridge,
    })
}

pub fn write_probe<T: Scalar>(probe: &ProbeHead<T>, cfg: &TrainConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let f = |xs: &[T]| xs.iter().map(|x| x.to_f32_lossy()).collect::<Vec<_>>();
    write_f32(&dir.join("weight.bin"), &f(&probe.weight))?;
    write_f32(&dir.join("bias.bin"), &f(&[probe.bias]))?;
    if let Some(q) = &probe.query {
        write_f32(&dir.join("query.bin"), &f(q))?;
    }
    write_json(
        &dir.join(PROBE_MANIFEST),
        &ProbeManifest {
            kind: probe.kind,
            depth_tag: probe.depth_tag,
            dim: probe.dim(),
            learning_rate: cfg.learning_rate,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            seed: cfg.seed,
        },
    )
}

pub fn read_probe<T: Scalar>(dir: &Path) -> Result<(ProbeHead<T>, ProbeManifest)> {
    let m: ProbeManifest = read_json(&dir.join(PROBE_MANIFEST))?;
    let g = |v: Vec<f32>| v.into_iter().map(T::from_f32_lossy).collect::<Vec<T>>();
    let weight = g(read_f32(&dir.join("weight.bin"), "weight", m.dim)?);
    let bias = g(read_f32(&dir.join("bias.bin"), "bias", 1)?)[0];
    let query = match m.kind {
        ProbeKind::AttentionPooling => Some(g(read_f32(&dir.join("query.bin"), "query", m.dim)?)),
        ProbeKind::Linear => None,
    };
    Ok((
        ProbeHead {
            kind: m.kind,
            weight,
            bias,
            query,
            depth_tag: m.depth_tag,
        },
        m,
    ))
}
