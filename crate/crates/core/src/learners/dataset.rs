use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Missing cells are stored as NaN.
pub const MISSING: f64 = f64::NAN;

/// Weight of a negative (non-default) row in the ranking metric.
pub const NEGATIVE_WEIGHT: f64 = 20.0;
pub const POSITIVE_WEIGHT: f64 = 1.0;

pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// `20` for label 0, `1` for label 1.
pub fn default_weights(labels: &[u8]) -> Vec<f64> {
    labels
        .iter()
        .map(|&y| if y == 1 { POSITIVE_WEIGHT } else { NEGATIVE_WEIGHT })
        .collect()
}

/// Labelled, weighted tabular data; `features` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, features: Vec<Vec<f64>>, labels: Vec<u8>, weights: Vec<f64>) -> Result<Self> {
        let ds = Self {
            feature_names,
            features,
            labels,
            weights,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Dataset with the 20/1 weighting rule applied.
    pub fn with_default_weights(feature_names: Vec<String>, features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let weights = default_weights(&labels);
        Self::new(feature_names, features, labels, weights)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.features.len();
        if self.labels.len() != m || self.weights.len() != m {
            return Err(Error::Validation(format!(
                "row counts disagree: {m} feature rows, {} labels, {} weights",
                self.labels.len(),
                self.weights.len()
            )));
        }
        let f = self.feature_names.len();
        if let Some((i, _)) = self.features.iter().enumerate().find(|(_, r)| r.len() != f) {
            return Err(Error::Validation(format!("row {i} does not have {f} features")));
        }
        if self.labels.iter().any(|&y| y > 1) {
            return Err(Error::Validation("labels must be 0 or 1".into()));
        }
        if self.weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Validation("weights must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            weights: rows.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            features: self
                .features
                .iter()
                .map(|r| cols.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            weights: self.weights.clone(),
        }
    }

    pub fn unit_weights(&self) -> Vec<f64> {
        vec![1.0; self.len()]
    }

    pub(crate) fn require_both_classes(labels: &[u8]) -> Result<()> {
        let pos = labels.iter().filter(|&&y| y == 1).count();
        if pos == 0 || pos == labels.len() {
            return Err(Error::Validation(
                "training data must contain both classes".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_rows() {
        let names = vec!["a".to_string()];
        assert!(Dataset::with_default_weights(names.clone(), vec![vec![1.0]], vec![2]).is_err());
        assert!(Dataset::with_default_weights(names.clone(), vec![vec![1.0, 2.0]], vec![1]).is_err());
        assert!(Dataset::new(names.clone(), vec![vec![1.0]], vec![1], vec![0.0]).is_err());
        let ds = Dataset::with_default_weights(names, vec![vec![1.0], vec![MISSING]], vec![1, 0]).unwrap();
        assert_eq!(ds.weights, vec![1.0, 20.0]);
        assert_eq!((ds.positives(), ds.negatives()), (1, 1));
    }
}
