//! The entropy-producing error head: a trainable copy of the classifier's
//! final layer whose normalized predictive entropy is the uncertainty score.

use crate::bundle::EmbeddingBundle;
use crate::error::{Error, Result};
use crate::math::{entropy_grad_from_probs, normalized_entropy_unchecked, softmax_in_place};
use crate::matrix::{dot, Matrix};
use crate::scalar::Scalar;

use super::labels::ErrorLabels;

/// Probability clamp applied inside the binary cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct AlienHead<T> {
    weight: Matrix<T>,
    bias: Vec<T>,
    init_weight: Matrix<T>,
    init_bias: Vec<T>,
    /// Coefficient of the output-consistency term.
    pub alpha: T,
    /// Coefficient of the L2-SP anchor.
    pub beta: T,
}

/// The loss terms at one evaluation. `total` is always assembled as
/// `bce + alpha * reg + beta * l2sp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub bce: T,
    pub reg: T,
    pub l2sp: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> AlienHead<T> {
    /// Builds a head whose frozen snapshot equals the given parameters.
    pub fn from_parts(weight: Matrix<T>, bias: Vec<T>, alpha: T, beta: T) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::DimensionMismatch {
                expected: weight.rows(),
                actual: bias.len(),
            });
        }
        if weight.rows() < 2 {
            return Err(Error::DegenerateDistribution {
                classes: weight.rows(),
            });
        }
        Ok(AlienHead {
            init_weight: weight.clone(),
            init_bias: bias.clone(),
            weight,
            bias,
            alpha,
            beta,
        })
    }

    /// Rebuilds a head with separately stored current and initial parameters.
    pub fn with_snapshot(
        weight: Matrix<T>,
        bias: Vec<T>,
        init_weight: Matrix<T>,
        init_bias: Vec<T>,
        alpha: T,
        beta: T,
    ) -> Result<Self> {
        let mut head = AlienHead::from_parts(init_weight, init_bias, alpha, beta)?;
        if weight.rows() != head.weight.rows() || weight.cols() != head.weight.cols() {
            return Err(Error::ShapeMismatch {
                field: "weight".into(),
                expected: head.weight.rows() * head.weight.cols(),
                actual: weight.rows() * weight.cols(),
            });
        }
        if bias.len() != head.bias.len() {
            return Err(Error::ShapeMismatch {
                field: "bias".into(),
                expected: head.bias.len(),
                actual: bias.len(),
            });
        }
        head.weight = weight;
        head.bias = bias;
        Ok(head)
    }

    pub fn weight(&self) -> &Matrix<T> {
        &self.weight
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn init_weight(&self) -> &Matrix<T> {
        &self.init_weight
    }

    pub fn init_bias(&self) -> &[T] {
        &self.init_bias
    }

    pub fn classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn dim(&self) -> usize {
        self.weight.cols()
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (self.weight.as_mut_slice(), &mut self.bias)
    }

    /// `‖θ − θ_init‖₂²` over weight and bias.
    pub fn anchor_distance_sq(&self) -> T {
        let db: T = self
            .bias
            .iter()
            .zip(&self.init_bias)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        self.weight.sq_dist(&self.init_weight) + db
    }

    fn logits_into(&self, h: &[T], out: &mut [T]) {
        for ((o, w), &b) in out.iter_mut().zip(self.weight.iter_rows()).zip(&self.bias) {
            *o = dot(w, h) + b;
        }
    }

    fn check_dim(&self, features: &Matrix<T>) -> Result<()> {
        if features.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: features.cols(),
            });
        }
        Ok(())
    }

    /// Normalized entropy of `softmax(W h + b)` for every row.
    pub fn score(&self, features: &Matrix<T>) -> Result<Vec<T>> {
        self.check_dim(features)?;
        let mut z = vec![T::zero(); self.classes()];
        Ok(features
            .iter_rows()
            .map(|h| {
                self.logits_into(h, &mut z);
                softmax_in_place(&mut z);
                normalized_entropy_unchecked(&z)
            })
            .collect())
    }

    pub fn loss(
        &self,
        features: &Matrix<T>,
        errors: &ErrorLabels,
        base_entropy: &[T],
    ) -> Result<LossBreakdown<T>> {
        self.check_inputs(features, errors, base_entropy)?;
        let rows: Vec<usize> = (0..features.rows()).collect();
        Ok(self.objective(features, errors, base_entropy, &rows, None))
    }

    pub fn grad(
        &self,
        features: &Matrix<T>,
        errors: &ErrorLabels,
        base_entropy: &[T],
    ) -> Result<HeadGradient<T>> {
        self.check_inputs(features, errors, base_entropy)?;
        let rows: Vec<usize> = (0..features.rows()).collect();
        let mut g = self.zero_grad();
        self.objective(features, errors, base_entropy, &rows, Some(&mut g));
        Ok(g)
    }

    pub(crate) fn zero_grad(&self) -> HeadGradient<T> {
        HeadGradient {
            weight: Matrix::zeros(self.classes(), self.dim()),
            bias: vec![T::zero(); self.classes()],
        }
    }

    pub(crate) fn check_inputs(
        &self,
        features: &Matrix<T>,
        errors: &ErrorLabels,
        base_entropy: &[T],
    ) -> Result<()> {
        self.check_dim(features)?;
        if errors.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                actual: errors.len(),
            });
        }
        if base_entropy.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                actual: base_entropy.len(),
            });
        }
        Ok(())
    }

    /// Loss over `rows` (a mini-batch), optionally accumulating the exact
    /// gradient into `grad` (which must be zeroed by the caller).
    pub(crate) fn objective(
        &self,
        features: &Matrix<T>,
        errors: &ErrorLabels,
        base_entropy: &[T],
        rows: &[usize],
        mut grad: Option<&mut HeadGradient<T>>,
    ) -> LossBreakdown<T> {
        let c = self.classes();
        let m = T::lit(rows.len() as f64);
        let lo = T::lit(BCE_CLAMP);
        let hi = T::one() - lo;
        let mut p = vec![T::zero(); c];
        let mut du_dz = vec![T::zero(); c];
        let mut bce = T::zero();
        let mut reg = T::zero();
        for &i in rows {
            let h = features.row(i);
            self.logits_into(h, &mut p);
            softmax_in_place(&mut p);
            let u = normalized_entropy_unchecked(&p);
            let uc = u.max(lo).min(hi);
            let e = errors.get(i);
            bce -= if e { uc.ln() } else { (T::one() - uc).ln() };
            let diff = u - base_entropy[i];
            reg += diff * diff;

            if let Some(g) = grad.as_deref_mut() {
                // clamp has zero slope outside [lo, hi]
                let dbce = if u < lo || u > hi {
                    T::zero()
                } else if e {
                    -T::one() / uc
                } else {
                    T::one() / (T::one() - uc)
                };
                let dl_du = (dbce + self.alpha * T::lit(2.0) * diff) / m;
                entropy_grad_from_probs(&p, &mut du_dz);
                for (k, &du) in du_dz.iter().enumerate() {
                    let dz = dl_du * du;
                    g.bias[k] += dz;
                    for (gw, &hj) in g.weight.row_mut(k).iter_mut().zip(h) {
                        *gw += dz * hj;
                    }
                }
            }
        }
        bce /= m;
        reg /= m;
        let l2sp = self.anchor_distance_sq();

        if let Some(g) = grad {
            if self.beta != T::zero() {
                let two_beta = T::lit(2.0) * self.beta;
                for ((gw, &w), &w0) in g
                    .weight
                    .as_mut_slice()
                    .iter_mut()
                    .zip(self.weight.as_slice())
                    .zip(self.init_weight.as_slice())
                {
                    *gw += two_beta * (w - w0);
                }
                for ((gb, &b), &b0) in g.bias.iter_mut().zip(&self.bias).zip(&self.init_bias) {
                    *gb += two_beta * (b - b0);
                }
            }
        }

        LossBreakdown {
            total: bce + self.alpha * reg + self.beta * l2sp,
            bce,
            reg,
            l2sp,
        }
    }
}

/// Copies the bundle's classifier head into a fresh error head.
pub fn init_alien<T: Scalar>(bundle: &EmbeddingBundle, alpha: T, beta: T) -> Result<AlienHead<T>> {
    let head = bundle.require_head()?;
    AlienHead::from_parts(
        head.weight.map(T::from_f32_lossy),
        head.bias.iter().map(|&b| T::from_f32_lossy(b)).collect(),
        alpha,
        beta,
    )
}

/// Free-function form of [`AlienHead::score`].
pub fn score_alien<T: Scalar>(head: &AlienHead<T>, features: &Matrix<T>) -> Result<Vec<T>> {
    head.score(features)
}

pub fn alien_loss<T: Scalar>(
    head: &AlienHead<T>,
    features: &Matrix<T>,
    errors: &ErrorLabels,
    base_entropy: &[T],
) -> Result<LossBreakdown<T>> {
    head.loss(features, errors, base_entropy)
}

pub fn alien_grad<T: Scalar>(
    head: &AlienHead<T>,
    features: &Matrix<T>,
    errors: &ErrorLabels,
    base_entropy: &[T],
) -> Result<HeadGradient<T>> {
    head.grad(features, errors, base_entropy)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::bundle::{ClassifierHead, SplitRole};
    use crate::math::{normalized_entropy_slice, softmax_slice};

    fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        let v = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
        Matrix::from_vec(rows, cols, v).unwrap()
    }

    fn random_case(
        c: usize,
        d: usize,
        n: usize,
        seed: u64,
    ) -> (AlienHead<f64>, Matrix<f64>, ErrorLabels, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_matrix(c, d, 1.0, &mut rng);
        let b: Vec<f64> = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut head = AlienHead::from_parts(w, b, 0.3, 0.2).unwrap();
        let x = random_matrix(n, d, 1.0, &mut rng);
        let errors = ErrorLabels::new((0..n).map(|_| rng.random_bool(0.3)).collect());
        let base = head.score(&x).unwrap();
        // move away from the snapshot so every term is active
        let (pw, pb) = head.params_mut();
        pw.iter_mut().for_each(|w| *w += rng.random_range(-0.3..0.3));
        pb.iter_mut().for_each(|b| *b += rng.random_range(-0.3..0.3));
        (head, x, errors, base)
    }

    #[test]
    fn init_reproduces_base_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_matrix(3, 5, 2.0, &mut rng);
        let x = random_matrix(40, 5, 3.0, &mut rng);
        let bundle = EmbeddingBundle {
            features: x.map(|v| v as f32),
            gold_labels: vec![0; 40],
            classes: 3,
            head: Some(ClassifierHead {
                weight: w.map(|v| v as f32),
                bias: vec![0.1, -0.2, 0.3],
            }),
            logits: None,
            split_role: SplitRole::Val,
            depth: None,
        };
        let head = init_alien::<f64>(&bundle, 1.0, 1.0).unwrap();
        let base = bundle.base_probabilities::<f64>();
        let u = head.score(&bundle.features_as()).unwrap();
        for (i, ui) in u.iter().enumerate() {
            assert!((ui - normalized_entropy_unchecked(base.row(i))).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_head_rejected() {
        let bundle = EmbeddingBundle {
            features: Matrix::zeros(1, 2),
            gold_labels: vec![0],
            classes: 2,
            head: None,
            logits: Some(Matrix::zeros(1, 2)),
            split_role: SplitRole::Val,
            depth: None,
        };
        assert!(matches!(init_alien::<f64>(&bundle, 0.0, 0.0), Err(Error::InvalidBundle(_))));
    }

    #[test]
    fn zero_head_scores_one() {
        let head = AlienHead::from_parts(Matrix::<f64>::zeros(4, 3), vec![0.0; 4], 0.0, 0.0).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 5.0]]).unwrap();
        assert_eq!(head.score(&x).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn dominant_logit_scores_near_zero() {
        let head = AlienHead::from_parts(Matrix::<f64>::zeros(3, 1), vec![50.0, 0.0, 0.0], 0.0, 0.0)
            .unwrap();
        assert!(head.score(&Matrix::zeros(1, 1)).unwrap()[0] < 1e-9);
    }

    #[test]
    fn score_matches_composition() {
        let (head, x, _, _) = random_case(5, 7, 30, 2);
        let u = head.score(&x).unwrap();
        for (i, h) in x.iter_rows().enumerate() {
            let z: Vec<f64> = (0..5)
                .map(|k| head.weight().row(k).iter().zip(h).map(|(a, b)| a * b).sum::<f64>() + head.bias()[k])
                .collect();
            assert_eq!(u[i], normalized_entropy_slice(&softmax_slice(&z)).unwrap());
        }
    }

    #[test]
    fn regularizers_vanish_at_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let head = AlienHead::from_parts(random_matrix(3, 4, 1.0, &mut rng), vec![0.0; 3], 5.0, 7.0)
            .unwrap();
        let x = random_matrix(20, 4, 1.0, &mut rng);
        let base = head.score(&x).unwrap();
        let errors = ErrorLabels::new((0..20).map(|i| i % 3 == 0).collect());
        let l = head.loss(&x, &errors, &base).unwrap();
        assert_eq!((l.reg, l.l2sp), (0.0, 0.0));
        assert_eq!(l.total, l.bce);
    }

    #[test]
    fn half_score_gives_log_two() {
        // binary p with normalized entropy exactly 1/2
        let (mut lo, mut hi) = (1e-9f64, 0.5f64);
        for _ in 0..200 {
            let p = 0.5 * (lo + hi);
            let u = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln()) / 2f64.ln();
            if u < 0.5 {
                lo = p;
            } else {
                hi = p;
            }
        }
        let p = 0.5 * (lo + hi);
        let head =
            AlienHead::from_parts(Matrix::<f64>::zeros(2, 1), vec![p.ln(), (1.0 - p).ln()], 0.0, 0.0)
                .unwrap();
        let x = Matrix::zeros(2, 1);
        for e in [vec![true, true], vec![false, true], vec![false, false]] {
            let l = head.loss(&x, &ErrorLabels::new(e), &[0.5, 0.5]).unwrap();
            assert!((l.bce - 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_matches_scalar_oracle() {
        let (head, x, errors, base) = random_case(3, 6, 50, 4);
        let l = head.loss(&x, &errors, &base).unwrap();
        let (mut bce, mut reg) = (0.0, 0.0);
        for i in 0..50 {
            let h = x.row(i);
            let z: Vec<f64> = (0..3)
                .map(|k| (0..6).map(|j| head.weight().get(k, j) * h[j]).sum::<f64>() + head.bias()[k])
                .collect();
            let mx = z.iter().cloned().fold(f64::MIN, f64::max);
            let s: f64 = z.iter().map(|v| (v - mx).exp()).sum();
            let u = -z
                .iter()
                .map(|v| {
                    let p = (v - mx).exp() / s;
                    p * p.ln()
                })
                .sum::<f64>()
                / 3f64.ln();
            let uc = u.clamp(1e-7, 1.0 - 1e-7);
            bce -= if errors.get(i) { uc.ln() } else { (1.0 - uc).ln() };
            reg += (u - base[i]).powi(2);
        }
        bce /= 50.0;
        reg /= 50.0;
        let mut l2 = 0.0;
        for (a, b) in head.weight().as_slice().iter().zip(head.init_weight().as_slice()) {
            l2 += (a - b).powi(2);
        }
        for (a, b) in head.bias().iter().zip(head.init_bias()) {
            l2 += (a - b).powi(2);
        }
        let total = bce + 0.3 * reg + 0.2 * l2;
        assert!(((l.total - total) / total).abs() < 1e-12);
        assert!(((l.bce - bce) / bce).abs() < 1e-12);
        assert!(((l.reg - reg) / reg).abs() < 1e-12);
        assert!(((l.l2sp - l2) / l2).abs() < 1e-12);
    }

    #[test]
    fn l2sp_gradient_is_exact() {
        let (mut head, x, errors, base) = random_case(4, 5, 10, 5);
        head.alpha = 0.0;
        head.beta = 0.0;
        let g0 = head.grad(&x, &errors, &base).unwrap();
        head.beta = 0.75;
        let g1 = head.grad(&x, &errors, &base).unwrap();
        for i in 0..g0.weight.as_slice().len() {
            let delta = head.weight().as_slice()[i] - head.init_weight().as_slice()[i];
            let extra = g1.weight.as_slice()[i] - g0.weight.as_slice()[i];
            assert!((extra - 1.5 * delta).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (head, x, errors, base) = random_case(5, 16, 64, 6);
        let g = head.grad(&x, &errors, &base).unwrap();
        let step = 1e-5;
        let n_w = head.weight().as_slice().len();
        for idx in 0..n_w + head.classes() {
            let eval = |delta: f64| {
                let mut h = head.clone();
                let (w, b) = h.params_mut();
                if idx < n_w {
                    w[idx] += delta;
                } else {
                    b[idx - n_w] += delta;
                }
                h.loss(&x, &errors, &base).unwrap().total
            };
            let fd = (eval(step) - eval(-step)) / (2.0 * step);
            let an = if idx < n_w { g.weight.as_slice()[idx] } else { g.bias[idx - n_w] };
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            assert!(rel < 1e-4, "coordinate {idx}: analytic {an}, numeric {fd}");
        }
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let (head, x, errors, base) = random_case(3, 4, 10, 7);
        assert!(matches!(
            head.score(&Matrix::zeros(2, 5)),
            Err(Error::DimensionMismatch { expected: 4, actual: 5 })
        ));
        assert!(head.loss(&x, &errors.select(&[0, 1]), &base).is_err());
    }
}
