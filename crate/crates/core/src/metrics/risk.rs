use crate::alien::ErrorLabels;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{check_finite, check_lengths};

/// Selective risk at every coverage level `k / n`, most confident first.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskCoverage {
    pub risks: Vec<f64>,
    /// Mean risk over all `n` coverage levels.
    pub aurc: f64,
    /// AURC of the ordering that places every correct example first.
    pub oracle_aurc: f64,
}

/// Ascending-score ordering with ties broken by original index.
pub fn risk_coverage<T: Scalar>(scores: &[T], errors: &ErrorLabels) -> Result<RiskCoverage> {
    check_lengths(scores.len(), errors.len())?;
    check_finite(scores)?;
    let n = scores.len();
    if n == 0 {
        return Err(Error::InvalidInput("risk-coverage needs at least one example".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("finite")
            .then(a.cmp(&b))
    });
    let mut risks = Vec::with_capacity(n);
    let mut seen = 0usize;
    for (k, &i) in order.iter().enumerate() {
        seen += usize::from(errors.get(i));
        risks.push(seen as f64 / (k + 1) as f64);
    }
    let aurc = risks.iter().sum::<f64>() / n as f64;
    Ok(RiskCoverage {
        risks,
        aurc,
        oracle_aurc: oracle_aurc(n, errors.error_count()),
    })
}

fn oracle_aurc(n: usize, n_err: usize) -> f64 {
    let n_ok = n - n_err;
    let total: f64 = (n_ok + 1..=n)
        .map(|k| (k - n_ok) as f64 / k as f64)
        .sum();
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_errors_no_risk() {
        let rc = risk_coverage(&[0.3, 0.1, 0.7], &ErrorLabels::new(vec![false; 3])).unwrap();
        assert_eq!(rc.risks, vec![0.0; 3]);
        assert_eq!(rc.aurc, 0.0);
        assert_eq!(rc.oracle_aurc, 0.0);
    }

    #[test]
    fn two_point_enumeration() {
        // correct example covered first: risks 0 then 1/2
        let rc = risk_coverage(&[0.9, 0.1], &ErrorLabels::new(vec![true, false])).unwrap();
        assert_eq!(rc.risks, vec![0.0, 0.5]);
        assert_eq!(rc.aurc, 0.25);
        assert_eq!(rc.oracle_aurc, 0.25);
    }

    #[test]
    fn ties_broken_by_index() {
        let rc = risk_coverage(&[0.5, 0.5], &ErrorLabels::new(vec![true, false])).unwrap();
        assert_eq!(rc.risks, vec![1.0, 0.5]);
    }

    #[test]
    fn empty_rejected() {
        assert!(risk_coverage::<f64>(&[], &ErrorLabels::new(vec![])).is_err());
    }
}
