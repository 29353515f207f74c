use crate::alien::ErrorLabels;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{check_finite, check_lengths};

/// Probability that a random error is scored above a random correct
/// example, ties counting one half.
///
/// Rank-sum form in `O(n log n)`. Ranks are kept doubled as integers so the
/// numerator is exact and the result matches the pairwise count bit-for-bit.
pub fn roc_auc<T: Scalar>(scores: &[T], errors: &ErrorLabels) -> Result<f64> {
    check_lengths(scores.len(), errors.len())?;
    check_finite(scores)?;
    let n_err = errors.error_count() as u64;
    let n_ok = errors.len() as u64 - n_err;
    if n_err == 0 || n_ok == 0 {
        return Err(Error::UndefinedMetric(
            "ROC-AUC needs at least one error and one correct example".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite"));

    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // positions i..j share rank (i + 1 + j) / 2
        let doubled = (i + 1 + j) as u64;
        let errs_in_group = order[i..j].iter().filter(|&&k| errors.get(k)).count() as u64;
        rank_sum2 += doubled * errs_in_group;
        i = j;
    }
    let numerator2 = rank_sum2 - n_err * (n_err + 1);
    Ok(numerator2 as f64 / (2 * n_err * n_ok) as f64)
}
