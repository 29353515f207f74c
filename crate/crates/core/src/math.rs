//! Numerically stable probability primitives: softmax, normalized entropy,
//! softmax response and the entropy gradient with respect to logits.
//!
//! Logs are natural; probabilities are clamped to `[PROB_FLOOR, 1]` before
//! any logarithm so that `0 · log 0` evaluates to `0`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower clamp applied to probabilities before taking a log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on `Σ p = 1` accepted by [`ProbVector::new`].
pub const PROB_SUM_TOL: f64 = 1e-9;

/// A validated categorical distribution over `C ≥ 2` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<T>(Vec<T>);

impl<T: Scalar> ProbVector<T> {
    pub fn new(p: Vec<T>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::DegenerateDistribution { classes: p.len() });
        }
        for (i, &x) in p.iter().enumerate() {
            if !x.is_finite() || x < T::zero() || x > T::one() {
                return Err(Error::InvalidInput(format!(
                    "probability {x} at index {i} is outside [0, 1]"
                )));
            }
        }
        let sum: T = p.iter().copied().sum();
        if (sum - T::one()).abs().to_f64_lossy() > PROB_SUM_TOL.max(tol_for::<T>()) {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ProbVector(p))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

// f32 cannot hold a sum to 1e-9.
fn tol_for<T: Scalar>() -> f64 {
    T::epsilon().to_f64_lossy() * 16.0
}

/// Raw class scores, `C ≥ 2`, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector<T>(Vec<T>);

impl<T: Scalar> LogitVector<T> {
    pub fn new(z: Vec<T>) -> Result<Self> {
        if z.len() < 2 {
            return Err(Error::DegenerateDistribution { classes: z.len() });
        }
        if let Some(i) = z.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                field: "logits".into(),
                index: i,
            });
        }
        Ok(LogitVector(z))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

pub fn softmax<T: Scalar>(z: &LogitVector<T>) -> ProbVector<T> {
    ProbVector(softmax_slice(z.as_slice()))
}

pub fn normalized_entropy<T: Scalar>(p: &ProbVector<T>) -> T {
    normalized_entropy_unchecked(p.as_slice())
}

/// `1 − max_c p_c`.
pub fn sr_score<T: Scalar>(p: &ProbVector<T>) -> T {
    sr_score_slice(p.as_slice())
}

/// Gradient of `normalized_entropy(softmax(z))` with respect to `z`.
pub fn entropy_grad<T: Scalar>(z: &LogitVector<T>) -> Vec<T> {
    let p = softmax_slice(z.as_slice());
    let mut out = vec![T::zero(); p.len()];
    entropy_grad_from_probs(&p, &mut out);
    out
}

/// Max-shifted softmax over a raw slice. Callers guarantee finiteness.
pub fn softmax_slice<T: Scalar>(z: &[T]) -> Vec<T> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place<T: Scalar>(z: &mut [T]) {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in z.iter_mut() {
        *x /= sum;
    }
}

#[inline]
fn clamped_ln<T: Scalar>(p: T) -> T {
    p.max(T::lit(PROB_FLOOR)).min(T::one()).ln()
}

/// Unnormalized Shannon entropy `−Σ p log p`.
pub fn entropy_slice<T: Scalar>(p: &[T]) -> T {
    let mut h = T::zero();
    for &pc in p {
        if pc > T::zero() {
            h -= pc * clamped_ln(pc);
        }
    }
    h
}

/// Normalized entropy over a raw slice; fails when fewer than two classes.
pub fn normalized_entropy_slice<T: Scalar>(p: &[T]) -> Result<T> {
    if p.len() < 2 {
        return Err(Error::DegenerateDistribution { classes: p.len() });
    }
    Ok(normalized_entropy_unchecked(p))
}

#[inline]
pub(crate) fn normalized_entropy_unchecked<T: Scalar>(p: &[T]) -> T {
    entropy_slice(p) / T::lit(p.len() as f64).ln()
}

#[inline]
pub fn sr_score_slice<T: Scalar>(p: &[T]) -> T {
    T::one() - p.iter().copied().fold(T::neg_infinity(), T::max)
}

/// `∂U/∂z_c = −p_c (log p_c + H) / log C`, written into `out`.
///
/// Derived from `∂H/∂p_k = −(log p_k + 1)` and `∂p_k/∂z_c = p_k(δ_kc − p_c)`.
pub(crate) fn entropy_grad_from_probs<T: Scalar>(p: &[T], out: &mut [T]) {
    let h = entropy_slice(p);
    let log_c = T::lit(p.len() as f64).ln();
    for (o, &pc) in out.iter_mut().zip(p) {
        *o = -pc * (clamped_ln(pc) + h) / log_c;
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logits(z: &[f64]) -> LogitVector<f64> {
        LogitVector::new(z.to_vec()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&logits(&[0.0, 0.0]));
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
        for t in [-700.0, -3.0, 0.0, 12.5, 800.0] {
            let p = softmax(&logits(&[t, t, t]));
            for &x in p.as_slice() {
                assert!((x - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        // direct exp/normalize oracle
        let e: Vec<f64> = [2.0f64, 1.0, 0.0].iter().map(|x| x.exp()).collect();
        let s: f64 = e.iter().sum();
        let p = softmax(&logits(&[2.0, 1.0, 0.0]));
        for (a, b) in p.as_slice().iter().zip(&e) {
            assert!((a - b / s).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(matches!(
            LogitVector::new(vec![0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(LogitVector::new(vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn entropy_examples() {
        for c in 2..10 {
            let p = ProbVector::new(vec![1.0 / c as f64; c]).unwrap();
            assert!((normalized_entropy(&p) - 1.0).abs() < 1e-12);
        }
        let p = ProbVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(normalized_entropy(&p), 0.0);
        // −Σ p ln p / ln 3 by hand
        let oracle = -(0.7f64 * 0.7f64.ln() + 0.2 * 0.2f64.ln() + 0.1 * 0.1f64.ln()) / 3f64.ln();
        let p = ProbVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        assert!((normalized_entropy(&p) - oracle).abs() < 1e-15);
        assert!((oracle - 0.7298).abs() < 5e-5);
    }

    #[test]
    fn entropy_rejects_single_class() {
        assert!(matches!(
            normalized_entropy_slice(&[1.0]),
            Err(Error::DegenerateDistribution { classes: 1 })
        ));
        assert!(ProbVector::new(vec![1.0f64]).is_err());
    }

    #[test]
    fn sr_examples() {
        let p = ProbVector::new(vec![0.6, 0.3, 0.1]).unwrap();
        assert!((sr_score(&p) - 0.4f64).abs() < 1e-15);
        assert_eq!(sr_score(&ProbVector::new(vec![1.0, 0.0]).unwrap()), 0.0);
        assert_eq!(sr_score(&ProbVector::new(vec![0.25; 4]).unwrap()), 0.75);
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbVector::new(vec![0.5f32, 0.5]).is_ok());
    }

    #[test]
    fn entropy_grad_uniform_is_zero() {
        let g = entropy_grad(&logits(&[1.5; 6]));
        assert!(g.iter().all(|x| x.abs() < 1e-15));
    }

    fn fd_entropy(z: &[f64], c: usize, step: f64) -> f64 {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[c] += step;
        zm[c] -= step;
        let up = normalized_entropy_unchecked(&softmax_slice(&zp));
        let um = normalized_entropy_unchecked(&softmax_slice(&zm));
        (up - um) / (2.0 * step)
    }

    #[test]
    fn entropy_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &c in &[2usize, 3, 5, 20] {
            for _ in 0..100 {
                let z: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
                let g = entropy_grad(&logits(&z));
                let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                for k in 0..c {
                    let fd = fd_entropy(&z, k, 1e-5);
                    let err = (g[k] - fd).abs() / scale.max(1e-8);
                    assert!(err < 1e-6, "c={c} k={k} analytic={} fd={fd}", g[k]);
                }
            }
        }
    }

    #[test]
    fn binary_entropy_ranks_like_sr() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zs: Vec<f64> = (0..200).map(|_| rng.random_range(-6.0..6.0)).collect();
        let mut pairs: Vec<(f64, f64)> = zs
            .iter()
            .map(|&z| {
                let p = softmax_slice(&[z, 0.0]);
                (normalized_entropy_unchecked(&p), sr_score_slice(&p))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn generic_over_f32() {
        let p = softmax(&LogitVector::new(vec![1.0f32, 1.0, 1.0, 1.0]).unwrap());
        assert!((normalized_entropy(&p) - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(z in prop::collection::vec(-50.0f64..50.0, 2..12), t in -100.0f64..100.0) {
            let a = softmax_slice(&z);
            let shifted: Vec<f64> = z.iter().map(|x| x + t).collect();
            let b = softmax_slice(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let s: f64 = a.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn entropy_permutation_and_shift(z in prop::collection::vec(-20.0f64..20.0, 2..10), t in -10.0f64..10.0) {
            let h = normalized_entropy_unchecked(&softmax_slice(&z));
            let mut rev = z.clone();
            rev.reverse();
            let shifted: Vec<f64> = rev.iter().map(|x| x + t).collect();
            let h2 = normalized_entropy_unchecked(&softmax_slice(&shifted));
            prop_assert!((h - h2).abs() < 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&h));
        }

        #[test]
        fn entropy_grad_sums_to_zero(z in prop::collection::vec(-10.0f64..10.0, 2..20)) {
            let g = entropy_grad(&LogitVector::new(z).unwrap());
            let s: f64 = g.iter().sum();
            prop_assert!(s.abs() < 1e-12);
        }
    }
}
