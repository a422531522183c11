//! Ranking metrics for default prediction.
//!
//! Rows are ranked by descending score with ties broken by ascending
//! original index. Negatives carry weight 20 and positives weight 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::dataset::default_weights;

/// Fraction of total weight that forms the capture-rate budget.
pub const CAPTURE_FRACTION: f64 = 0.04;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPredictions {
    scores: Vec<f64>,
    labels: Vec<u8>,
    weights: Vec<f64>,
}

impl ScoredPredictions {
    /// Weights follow the 20/1 rule and cannot be supplied.
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("score {i} is not finite")));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::Validation(format!("label {i} is not binary")));
        }
        let weights = default_weights(&labels);
        Ok(Self { scores, labels, weights })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}

/// Row indices ordered by descending score, ties by ascending index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Twice the trapezoidal Lorenz area, scaled by total weight times total
/// positives, minus that product. Exact for integer weights.
fn lorenz_numerator(order: &[usize], labels: &[u8], weights: &[f64], total_w: f64, total_p: f64) -> f64 {
    let mut cum = 0.0;
    let mut twice_area = 0.0;
    for &i in order {
        let prev = cum;
        cum += f64::from(labels[i]);
        twice_area += weights[i] * (prev + cum);
    }
    twice_area - total_w * total_p
}

pub fn normalized_weighted_gini(p: &ScoredPredictions) -> Result<f64> {
    let pos = p.positives();
    if pos == 0 || pos == p.len() {
        return Err(Error::Validation("Gini needs both classes".into()));
    }
    let total_w: f64 = p.weights.iter().sum();
    let total_p = pos as f64;
    let model = lorenz_numerator(&ranking(&p.scores), &p.labels, &p.weights, total_w, total_p);
    let ideal_scores: Vec<f64> = p.labels.iter().map(|&y| f64::from(y)).collect();
    let ideal = lorenz_numerator(&ranking(&ideal_scores), &p.labels, &p.weights, total_w, total_p);
    Ok(model / ideal)
}

/// Positives (unweighted) among the top rows whose cumulative weight stays
/// within 4% of the total, over all positives.
pub fn capture_rate_at_4pct(p: &ScoredPredictions) -> Result<f64> {
    let pos = p.positives();
    if pos == 0 {
        return Err(Error::Validation("capture rate needs at least one positive".into()));
    }
    let budget = CAPTURE_FRACTION * p.weights.iter().sum::<f64>();
    let mut cum = 0.0;
    let mut caught = 0usize;
    for i in ranking(&p.scores) {
        cum += p.weights[i];
        if cum > budget {
            break;
        }
        caught += usize::from(p.labels[i]);
    }
    Ok(caught as f64 / pos as f64)
}

pub fn cdr(p: &ScoredPredictions) -> Result<f64> {
    Ok(0.5 * (normalized_weighted_gini(p)? + capture_rate_at_4pct(p)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

/// Area under the ROC curve from the rank-sum statistic, ties averaged.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Validation("AUC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their average
        let avg = (start + end + 1) as f64 / 2.0;
        rank_sum += avg * idx[start..end].iter().filter(|&&i| labels[i] == 1).count() as f64;
        start = end;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Threshold metrics count a row positive when its score is at least
/// `threshold`. Precision and F1 are 0 when nothing is predicted positive.
pub fn standard_metrics(p: &ScoredPredictions, threshold: f64) -> Result<StandardMetrics> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in p.scores.iter().zip(&p.labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(StandardMetrics {
        accuracy: ratio(tp + tn, p.len()),
        precision,
        recall,
        f1,
        auc: auc(&p.scores, &p.labels)?,
    })
}
