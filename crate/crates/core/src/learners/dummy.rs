use serde::{Deserialize, Serialize};

/// Scores every row with the (weighted) positive-class prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DummyClassifier {
    pub prior: f64,
}

impl DummyClassifier {
    pub fn fit(labels: &[u8], weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let pos: f64 = labels.iter().zip(weights).filter(|(&y, _)| y == 1).map(|(_, w)| w).sum();
        Self {
            prior: if total > 0.0 { pos / total } else { 0.0 },
        }
    }

    pub fn predict_proba(&self, num_rows: usize) -> Vec<f64> {
        vec![self.prior; num_rows]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_prior_scores() {
        let d = DummyClassifier::fit(&[1, 0, 0, 0], &[1.0; 4]);
        assert_eq!(d.prior, 0.25);
        assert!(d.predict_proba(5).iter().all(|&p| p == 0.25));
    }
}
