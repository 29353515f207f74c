//! Independent oracles and fixtures shared by the integration targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use alien_ue::alien::{AlienHead, ErrorLabels};
use alien_ue::baselines::{ProbeHead, ProbeKind, SequenceData};
use alien_ue::bundle::{SplitRole, TokenSequenceBundle};
use alien_ue::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let v = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, v).unwrap()
}

/// Labels with at least one error and one correct example.
pub fn random_labels(n: usize, p: f64, rng: &mut ChaCha8Rng) -> ErrorLabels {
    assert!(n >= 2);
    let mut v: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
    v[0] = true;
    v[1] = false;
    ErrorLabels::new(v)
}

/// Scores drawn from a small grid so ties are common.
pub fn tied_scores(n: usize, levels: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect()
}

// ---- metric oracles ----

/// O(n²) pair count; ties count one half.
pub fn pairwise_auc(scores: &[f64], errors: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        if !errors[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if errors[j] {
                continue;
            }
            pairs += 1;
            twice += if si > sj { 2 } else if si == sj { 1 } else { 0 };
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Risk at every coverage level recomputed from scratch, then averaged.
pub fn aurc_enumeration(scores: &[f64], errors: &[bool]) -> f64 {
    let n = scores.len();
    // most confident first; ties by index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut total = 0.0;
    for k in 1..=n {
        let errs = order[..k].iter().filter(|&&i| errors[i]).count();
        total += errs as f64 / k as f64;
    }
    total / n as f64
}

/// Equal-width bins over confidence `1 − score`, top bin closed.
pub fn ece_hand(scores: &[f64], errors: &[bool], bins: usize) -> f64 {
    let n = scores.len() as f64;
    let conf: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
    let mut out = 0.0;
    for b in 0..bins {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        let members: Vec<usize> = (0..conf.len())
            .filter(|&i| conf[i] >= lo && (conf[i] < hi || (b + 1 == bins && conf[i] <= 1.0)))
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let acc = members.iter().filter(|&&i| !errors[i]).count() as f64 / m;
        let mean_conf = members.iter().map(|&i| conf[i]).sum::<f64>() / m;
        out += m / n * (acc - mean_conf).abs();
    }
    out
}

/// Rank of each value: 1 + #smaller + (#equal others) / 2.
pub fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let smaller = x.iter().filter(|&&v| v < xi).count() as f64;
            let equal = x.iter().enumerate().filter(|&(j, &v)| j != i && v == xi).count() as f64;
            1.0 + smaller + equal / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn spearman_brute(x: &[f64], y: &[f64]) -> f64 {
    pearson(&brute_ranks(x), &brute_ranks(y))
}

/// Normalized Shannon entropy written out directly.
pub fn plain_entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    h / (p.len() as f64).ln()
}

pub fn random_simplex(c: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // exponentiated gaussians of random temperature
    let t: f64 = rng.random_range(0.1..5.0);
    let z: Vec<f64> = (0..c)
        .map(|_| (t * rng.sample::<f64, _>(rand_distr::StandardNormal)).exp())
        .collect();
    let s: f64 = z.iter().sum();
    z.into_iter().map(|v| v / s).collect()
}

// ---- gradient checks ----

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error between the analytic loss gradient and central
/// differences over every weight and bias.
pub fn alien_fd_error(c: usize, d: usize, n: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let w0 = random_matrix(c, d, 1.0, &mut rng);
    let b0: Vec<f64> = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = random_matrix(n, d, 1.0, &mut rng);
    let errors = random_labels(n, 0.3, &mut rng);
    let snapshot = AlienHead::from_parts(w0.clone(), b0.clone(), 0.0, 0.0).unwrap();
    let base = snapshot.score(&x).unwrap();
    let mut w = w0.clone();
    w.as_mut_slice().iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
    let b: Vec<f64> = b0.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
    let (alpha, beta) = (rng.random_range(0.01..1.0), rng.random_range(0.01..1.0));
    let loss = |w: &Matrix<f64>, b: &[f64]| {
        let h = AlienHead::with_snapshot(w.clone(), b.to_vec(), w0.clone(), b0.clone(), alpha, beta)
            .unwrap();
        h.loss(&x, &errors, &base).unwrap().total
    };
    let head = AlienHead::with_snapshot(w.clone(), b.clone(), w0.clone(), b0.clone(), alpha, beta).unwrap();
    let g = head.grad(&x, &errors, &base).unwrap();
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..c * d {
        let (mut up, mut down) = (w.clone(), w.clone());
        up.as_mut_slice()[k] += step;
        down.as_mut_slice()[k] -= step;
        let fd = (loss(&up, &b) - loss(&down, &b)) / (2.0 * step);
        worst = worst.max(rel_err(g.weight.as_slice()[k], fd));
    }
    for k in 0..c {
        let (mut up, mut down) = (b.clone(), b.clone());
        up[k] += step;
        down[k] -= step;
        let fd = (loss(&w, &up) - loss(&w, &down)) / (2.0 * step);
        worst = worst.max(rel_err(g.bias[k], fd));
    }
    worst
}

pub fn random_sequence_bundle(n: usize, d: usize, max_len: u32, rng: &mut ChaCha8Rng) -> TokenSequenceBundle {
    let lengths: Vec<u32> = (0..n).map(|_| rng.random_range(1..=max_len)).collect();
    let rows: usize = lengths.iter().map(|&l| l as usize).sum();
    let features = random_matrix(rows, d, 1.0, rng).map(|v| v as f32);
    let logits = Some(Matrix::zeros(n, 2));
    TokenSequenceBundle::new(features, lengths, vec![0; n], 2, None, logits, SplitRole::Train, None).unwrap()
}

/// Same check for the attention-pooling probe over query, weight and bias.
pub fn attention_fd_error(d: usize, n: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let seqs = random_sequence_bundle(n, d, 6, &mut rng);
    let data = SequenceData::<f64>::from_bundle(&seqs);
    let errors = random_labels(n, 0.4, &mut rng);
    let head = ProbeHead {
        kind: ProbeKind::AttentionPooling,
        weight: (0..d).map(|_| rng.random_range(-0.5..0.5)).collect(),
        bias: rng.random_range(-0.5..0.5),
        query: Some((0..d).map(|_| rng.random_range(-0.5..0.5)).collect()),
        depth_tag: None,
    };
    let g = head.grad(&data, &errors).unwrap();
    let loss = |h: &ProbeHead<f64>| h.loss(&data, &errors).unwrap();
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    let mut probe = |edit: &dyn Fn(&mut ProbeHead<f64>, f64), analytic: f64| {
        let (mut up, mut down) = (head.clone(), head.clone());
        edit(&mut up, step);
        edit(&mut down, -step);
        let fd = (loss(&up) - loss(&down)) / (2.0 * step);
        worst = worst.max(rel_err(analytic, fd));
    };
    let gq = g.query.clone().unwrap();
    for (k, (&gw, &gqk)) in g.weight.iter().zip(&gq).enumerate() {
        probe(&|h, s| h.weight[k] += s, gw);
        probe(&|h, s| h.query.as_mut().unwrap()[k] += s, gqk);
    }
    probe(&|h, s| h.bias += s, g.bias);
    worst
}

// ---- files ----

/// SHA-256 of every file under `root`, keyed by relative path.
pub fn hash_tree(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                let bytes = std::fs::read(&path).unwrap();
                out.insert(rel, hex::encode(Sha256::digest(&bytes)));
            }
        }
    }
    out
}
