//! Means and stacked (meta-learner) ensembles of a classical and a quantum
//! scorer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::logistic::{LogisticModel, LogisticRegression};

/// The two stacking regularisation settings.
pub const META_C_VALUES: [f64; 2] = [0.2, 0.04];

pub fn means_ensemble(classical: &[f64], quantum: &[f64]) -> Result<Vec<f64>> {
    if classical.len() != quantum.len() {
        return Err(Error::Validation(format!(
            "ensemble inputs differ in length ({} vs {})",
            classical.len(),
            quantum.len()
        )));
    }
    Ok(classical.iter().zip(quantum).map(|(a, b)| 0.5 * (a + b)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreProvenance {
    /// Each row scored by a model that never saw it.
    OutOfFold,
    /// Scored by a model trained on the same rows.
    InSample,
}

/// Base-model scores on a set of rows, tagged with how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseScores {
    pub classical: Vec<f64>,
    pub quantum: Vec<f64>,
    pub provenance: ScoreProvenance,
}

impl BaseScores {
    pub fn new(classical: Vec<f64>, quantum: Vec<f64>, provenance: ScoreProvenance) -> Result<Self> {
        if classical.len() != quantum.len() {
            return Err(Error::Validation("base score columns differ in length".into()));
        }
        Ok(Self {
            classical,
            quantum,
            provenance,
        })
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.classical.iter().zip(&self.quantum).map(|(&c, &q)| vec![c, q]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEnsemble {
    pub model: LogisticModel,
}

impl MetaEnsemble {
    pub fn predict(&self, scores: &BaseScores) -> Vec<f64> {
        self.model.predict_proba(&scores.rows())
    }
}

/// Fits a logistic meta-learner over the two base-score columns.
///
/// In-sample training scores are refused with [`Error::Leakage`] unless
/// `allow_in_sample` is set.
pub fn meta_ensemble_fit(
    train: &BaseScores,
    labels: &[u8],
    weights: &[f64],
    c: f64,
    allow_in_sample: bool,
) -> Result<MetaEnsemble> {
    if train.provenance == ScoreProvenance::InSample && !allow_in_sample {
        return Err(Error::Leakage);
    }
    if train.classical.len() != labels.len() {
        return Err(Error::Validation("base scores and labels differ in length".into()));
    }
    let model = LogisticRegression::new(c).fit(&train.rows(), labels, weights)?;
    Ok(MetaEnsemble { model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::metrics::{cdr, ScoredPredictions};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn means_examples() {
        assert_eq!(means_ensemble(&[0.2], &[0.8]).unwrap(), vec![0.5]);
        let a = vec![0.1, 0.7, 0.33];
        assert_eq!(means_ensemble(&a, &a).unwrap(), a);
        assert!(means_ensemble(&[0.1], &[0.1, 0.2]).is_err());
    }

    proptest! {
        #[test]
        fn means_bracketed(pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..100)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            for ((m, x), y) in means_ensemble(&a, &b).unwrap().iter().zip(&a).zip(&b) {
                prop_assert!(*m >= x.min(*y) && *m <= x.max(*y));
            }
        }
    }

    fn toy(seed: u64, m: usize) -> (Vec<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<u8> = (0..m).map(|i| u8::from(i % 5 == 0)).collect();
        let scores = labels
            .iter()
            .map(|&y| (0.3 * f64::from(y) + rng.random_range(0.0..0.7)).clamp(0.0, 1.0))
            .collect();
        (scores, labels)
    }

    #[test]
    fn leakage_guard() {
        let (s, y) = toy(1, 50);
        let w = vec![1.0; 50];
        let leaky = BaseScores::new(s.clone(), s.clone(), ScoreProvenance::InSample).unwrap();
        assert!(matches!(meta_ensemble_fit(&leaky, &y, &w, 0.2, false), Err(Error::Leakage)));
        assert!(meta_ensemble_fit(&leaky, &y, &w, 0.2, true).is_ok());
    }

    #[test]
    fn constant_quantum_column_keeps_classical_ranking() {
        let (train_s, train_y) = toy(2, 400);
        let (test_s, test_y) = toy(3, 400);
        for c in META_C_VALUES {
            let train = BaseScores::new(train_s.clone(), vec![0.5; 400], ScoreProvenance::OutOfFold).unwrap();
            let meta = meta_ensemble_fit(&train, &train_y, &vec![1.0; 400], c, false).unwrap();
            assert!(meta.model.coefficients[0] > 0.0);
            let test = BaseScores::new(test_s.clone(), vec![0.5; 400], ScoreProvenance::OutOfFold).unwrap();
            let meta_cdr = cdr(&ScoredPredictions::new(meta.predict(&test), test_y.clone()).unwrap()).unwrap();
            let base_cdr = cdr(&ScoredPredictions::new(test_s.clone(), test_y.clone()).unwrap()).unwrap();
            assert_eq!(meta_cdr, base_cdr);
        }
    }

    #[test]
    fn equal_columns_match_means_ensemble_ranking() {
        let (train_s, train_y) = toy(4, 300);
        let (test_s, test_y) = toy(5, 300);
        let train = BaseScores::new(train_s.clone(), train_s, ScoreProvenance::OutOfFold).unwrap();
        let meta = meta_ensemble_fit(&train, &train_y, &vec![1.0; 300], 0.2, false).unwrap();
        let test = BaseScores::new(test_s.clone(), test_s.clone(), ScoreProvenance::OutOfFold).unwrap();
        let meta_cdr = cdr(&ScoredPredictions::new(meta.predict(&test), test_y.clone()).unwrap()).unwrap();
        let means = means_ensemble(&test_s, &test_s).unwrap();
        let means_cdr = cdr(&ScoredPredictions::new(means, test_y).unwrap()).unwrap();
        assert_eq!(meta_cdr, means_cdr);
    }
}
