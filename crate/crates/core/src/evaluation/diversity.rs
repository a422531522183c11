//! How differently two scorers rank the same customers.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::metrics::ranking;
use crate::error::{Error, Result};
use crate::learners::dataset::is_missing;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureComparison {
    pub feature: String,
    pub classical_mean: f64,
    pub quantum_mean: f64,
}

impl FeatureComparison {
    pub fn abs_difference(&self) -> f64 {
        (self.classical_mean - self.quantum_mean).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub correlation: f64,
    pub k: usize,
    /// Jaccard overlap of the two top-k sets.
    pub top_k_agreement: f64,
    /// Sorted by decreasing absolute difference of the means.
    pub features: Vec<FeatureComparison>,
}

/// Pearson correlation; 0 when either input has no spread.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

fn column_means(rows: &[Vec<f64>], pick: &[usize], num_features: usize) -> Vec<f64> {
    (0..num_features)
        .map(|j| {
            let vals: Vec<f64> = pick.iter().map(|&i| rows[i][j]).filter(|v| !is_missing(*v)).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect()
}

pub fn diversity_report(
    classical: &[f64],
    quantum: &[f64],
    features: &[Vec<f64>],
    feature_names: &[String],
    k: usize,
) -> Result<DiversityReport> {
    let m = classical.len();
    if quantum.len() != m || features.len() != m {
        return Err(Error::Validation("diversity inputs differ in length".into()));
    }
    if k == 0 || k > m {
        return Err(Error::Validation(format!("top-k size {k} not in 1..={m}")));
    }
    let top_c: Vec<usize> = ranking(classical)[..k].to_vec();
    let top_q: Vec<usize> = ranking(quantum)[..k].to_vec();
    let sc: HashSet<usize> = top_c.iter().copied().collect();
    let sq: HashSet<usize> = top_q.iter().copied().collect();
    let inter = sc.intersection(&sq).count() as f64;
    let union = sc.union(&sq).count() as f64;

    let mc = column_means(features, &top_c, feature_names.len());
    let mq = column_means(features, &top_q, feature_names.len());
    let mut comparisons: Vec<FeatureComparison> = feature_names
        .iter()
        .zip(mc.into_iter().zip(mq))
        .map(|(name, (c, q))| FeatureComparison {
            feature: name.clone(),
            classical_mean: c,
            quantum_mean: q,
        })
        .collect();
    comparisons.sort_by(|a, b| b.abs_difference().total_cmp(&a.abs_difference()));

    Ok(DiversityReport {
        correlation: pearson(classical, quantum),
        k,
        top_k_agreement: inter / union,
        features: comparisons,
    })
}
