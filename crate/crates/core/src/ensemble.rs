//! Ensemble uncertainty decomposition into aleatoric and epistemic parts,
//! and rank correlation of single-model scores against each component.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle::binio::{read_f32, read_json, write_f32, write_json};
use crate::error::{Error, Result};
use crate::math::{normalized_entropy_unchecked, ProbVector};
use crate::matrix::Matrix;
use crate::metrics::{spearman, ScoreVector};
use crate::scalar::Scalar;

pub const ENSEMBLE_MANIFEST: &str = "ensemble_manifest.json";

/// `T ≥ 2` member probability matrices sharing `n` and `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleProbs<T> {
    members: Vec<Matrix<T>>,
}

impl<T: Scalar> EnsembleProbs<T> {
    pub fn new(members: Vec<Matrix<T>>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::DegenerateEnsemble {
                members: members.len(),
            });
        }
        let (n, c) = (members[0].rows(), members[0].cols());
        for m in &members {
            if m.rows() != n || m.cols() != c {
                return Err(Error::ShapeMismatch {
                    field: "ensemble member".into(),
                    expected: n * c,
                    actual: m.rows() * m.cols(),
                });
            }
            for row in m.iter_rows() {
                ProbVector::new(row.to_vec())?;
            }
        }
        Ok(EnsembleProbs { members })
    }

    pub fn members(&self) -> &[Matrix<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members[0].rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> usize {
        self.members[0].cols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecomposition<T = f64> {
    pub h_total: Vec<T>,
    pub h_alea: Vec<T>,
    /// `h_total − h_alea`.
    pub h_epi: Vec<T>,
}

/// Normalized entropy of the member mean (total), mean member entropy
/// (aleatoric) and their difference (epistemic), per row.
pub fn decompose<T: Scalar>(probs: &EnsembleProbs<T>) -> EnsembleDecomposition<T> {
    let t = T::lit(probs.members.len() as f64);
    let c = probs.classes();
    let n = probs.len();
    let mut out = EnsembleDecomposition {
        h_total: Vec::with_capacity(n),
        h_alea: Vec::with_capacity(n),
        h_epi: Vec::with_capacity(n),
    };
    let mut mean = vec![T::zero(); c];
    for i in 0..n {
        mean.fill(T::zero());
        let mut alea = T::zero();
        for m in &probs.members {
            let row = m.row(i);
            for (a, &p) in mean.iter_mut().zip(row) {
                *a += p;
            }
            alea += normalized_entropy_unchecked(row);
        }
        for a in mean.iter_mut() {
            *a /= t;
        }
        let total = normalized_entropy_unchecked(&mean);
        let alea = alea / t;
        out.h_total.push(total);
        out.h_alea.push(alea);
        out.h_epi.push(total - alea);
    }
    out
}

/// Spearman coefficients, rows = (total, aleatoric, epistemic), one column
/// per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub components: Vec<String>,
    pub methods: Vec<String>,
    pub rho: Vec<Vec<f64>>,
}

impl CorrelationTable {
    pub fn get(&self, component: &str, method: &str) -> Option<f64> {
        let r = self.components.iter().position(|c| c == component)?;
        let m = self.methods.iter().position(|x| x == method)?;
        Some(self.rho[r][m])
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Component |");
        for m in &self.methods {
            s.push_str(&format!(" {m} |"));
        }
        s.push_str("\n|---|");
        s.push_str(&"---:|".repeat(self.methods.len()));
        s.push('\n');
        for (c, row) in self.components.iter().zip(&self.rho) {
            s.push_str(&format!("| {c} |"));
            for v in row {
                s.push_str(&format!(" {v:.3} |"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn correlate_components<T: Scalar, U: Scalar>(
    decomp: &EnsembleDecomposition<T>,
    method_scores: &[ScoreVector<U>],
) -> Result<CorrelationTable> {
    let components = [
        ("h_total", &decomp.h_total),
        ("h_alea", &decomp.h_alea),
        ("h_epi", &decomp.h_epi),
    ];
    let mut rho = Vec::with_capacity(3);
    for (_, comp) in components {
        let row = method_scores
            .iter()
            .map(|s| spearman(comp, &s.scores))
            .collect::<Result<Vec<_>>>()?;
        rho.push(row);
    }
    Ok(CorrelationTable {
        components: components.iter().map(|(n, _)| n.to_string()).collect(),
        methods: method_scores.iter().map(|s| s.method_tag.clone()).collect(),
        rho,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub c: usize,
    pub dtype: String,
    pub members: Vec<String>,
}

pub fn write_members<T: Scalar>(probs: &EnsembleProbs<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for (k, m) in probs.members.iter().enumerate() {
        let name = format!("member_{k}.bin");
        let v: Vec<f32> = m.as_slice().iter().map(|x| x.to_f32_lossy()).collect();
        write_f32(&dir.join(&name), &v)?;
        names.push(name);
    }
    write_json(
        &dir.join(ENSEMBLE_MANIFEST),
        &EnsembleManifest {
            format: "UEB-ENSEMBLE".into(),
            version: 1,
            n: probs.len(),
            c: probs.classes(),
            dtype: "f32le".into(),
            members: names,
        },
    )
}

/// Reads member probabilities and renormalizes each row (f32 storage
/// perturbs row sums).
pub fn read_members(dir: &Path) -> Result<EnsembleProbs<f64>> {
    let m: EnsembleManifest = read_json(&dir.join(ENSEMBLE_MANIFEST))?;
    if m.format != "UEB-ENSEMBLE" || m.version != 1 {
        return Err(Error::Format(format!(
            "unsupported ensemble format {} v{}",
            m.format, m.version
        )));
    }
    let members = m
        .members
        .iter()
        .map(|name| {
            let v = read_f32(&dir.join(name), name, m.n * m.c)?;
            let mut mat = Matrix::from_vec(m.n, m.c, v.into_iter().map(f64::from).collect())?;
            for i in 0..m.n {
                let row = mat.row_mut(i);
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|p| *p /= s);
                }
            }
            Ok(mat)
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleProbs::new(members)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_members_have_no_epistemic_part() {
        let m = Matrix::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.3, 0.3, 0.4]]).unwrap();
        let d = decompose(&EnsembleProbs::new(vec![m.clone(), m.clone(), m]).unwrap());
        assert!(d.h_epi.iter().all(|x: &f64| x.abs() < 1e-12));
    }

    #[test]
    fn maximal_disagreement() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let d = decompose(&EnsembleProbs::new(vec![a, b]).unwrap());
        assert_eq!((d.h_total[0], d.h_alea[0], d.h_epi[0]), (1.0, 0.0, 1.0));
    }

    #[test]
    fn single_member_rejected() {
        let a = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert!(matches!(
            EnsembleProbs::new(vec![a]),
            Err(Error::DegenerateEnsemble { members: 1 })
        ));
    }

    #[test]
    fn member_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = Matrix::from_rows(&[vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let p = EnsembleProbs::new(vec![a, b]).unwrap();
        write_members(&p, dir.path()).unwrap();
        assert_eq!(read_members(dir.path()).unwrap(), p);
    }
}
