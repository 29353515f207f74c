use crate::error::{Error, Result};

/// Per-example base-model error indicators, `true` where the prediction
/// differs from the gold label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorLabels(Vec<bool>);

impl ErrorLabels {
    pub fn new(errors: Vec<bool>) -> Self {
        ErrorLabels(errors)
    }

    pub fn from_predictions(predicted: &[u32], gold: &[u32]) -> Self {
        ErrorLabels(predicted.iter().zip(gold).map(|(p, g)| p != g).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn error_count(&self) -> usize {
        self.0.iter().filter(|&&e| e).count()
    }

    pub fn error_rate(&self) -> f64 {
        self.error_count() as f64 / self.len().max(1) as f64
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        ErrorLabels(idx.iter().map(|&i| self.0[i]).collect())
    }

    /// Both classes present, or an untrainable-target error.
    pub fn require_both_classes(&self) -> Result<()> {
        let errors = self.error_count();
        if errors == 0 || errors == self.len() {
            let which = if errors == 0 { "no errors" } else { "all errors" };
            return Err(Error::UntrainableTarget(which.into()));
        }
        Ok(())
    }
}

impl From<Vec<bool>> for ErrorLabels {
    fn from(v: Vec<bool>) -> Self {
        ErrorLabels(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_predictions_marks_mismatches() {
        let e = ErrorLabels::from_predictions(&[0, 1, 2, 1], &[0, 2, 2, 0]);
        assert_eq!(e.as_slice(), &[false, true, false, true]);
        assert_eq!(e.error_count(), 2);
        assert_eq!(e.error_rate(), 0.5);
        assert_eq!(e.select(&[1, 2]).as_slice(), &[true, false]);
    }

    #[test]
    fn single_class_is_untrainable() {
        assert!(ErrorLabels::new(vec![false; 3]).require_both_classes().is_err());
        assert!(ErrorLabels::new(vec![true; 3]).require_both_classes().is_err());
        assert!(ErrorLabels::new(vec![true, false]).require_both_classes().is_ok());
    }
}
