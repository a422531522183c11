//! Stratified k-fold splitting, out-of-fold prediction and seeded
//! hyperparameter search.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gbdt::GbdtParams;
use crate::error::{Error, Result};
use crate::seeds::rng_for;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Each class is shuffled and dealt round-robin into `k` folds, continuing
/// the deal across classes so fold sizes stay balanced.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Validation(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = rng_for(seed, 0xF01D);
    let mut assignment = vec![0usize; labels.len()];
    let mut next = 0usize;
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::Validation(format!(
                "class {class} has {} members, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| Fold {
            train: (0..labels.len()).filter(|&i| assignment[i] != f).collect(),
            validation: (0..labels.len()).filter(|&i| assignment[i] == f).collect(),
        })
        .collect())
}

/// Scores every row with a model trained on the folds that exclude it.
///
/// `fit_predict(fold_index, fold)` returns scores for `fold.validation`.
pub fn out_of_fold_predictions<F>(num_rows: usize, folds: &[Fold], fit_predict: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &Fold) -> Result<Vec<f64>> + Sync,
{
    let per_fold: Vec<Vec<f64>> = folds
        .par_iter()
        .enumerate()
        .map(|(i, f)| fit_predict(i, f))
        .collect::<Result<_>>()?;
    let mut out = vec![f64::NAN; num_rows];
    for (fold, scores) in folds.iter().zip(per_fold) {
        if scores.len() != fold.validation.len() {
            return Err(Error::Validation("fold predictions have the wrong length".into()));
        }
        for (&i, s) in fold.validation.iter().zip(scores) {
            out[i] = s;
        }
    }
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::Validation("folds do not cover every row".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult<P> {
    pub best_index: usize,
    pub best_params: P,
    pub best: CandidateScore,
    pub candidates: Vec<CandidateScore>,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evaluates every candidate on every fold and keeps the best mean score.
/// Ties go to the lower candidate index.
///
/// `evaluate(candidate, fold_index, fold)` returns the validation metric
/// (higher is better).
pub fn hyper_search<P, F>(candidates: &[P], folds: &[Fold], evaluate: F) -> Result<SearchResult<P>>
where
    P: Clone + Sync,
    F: Fn(&P, usize, &Fold) -> Result<f64> + Sync,
{
    if candidates.is_empty() {
        return Err(Error::Validation("search space is empty".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| evaluate(&candidates[c], f, &folds[f]))
        .collect::<Result<_>>()?;
    let per_candidate: Vec<CandidateScore> = scores
        .chunks(folds.len())
        .map(|fold_scores| {
            let (mean, std) = mean_std(fold_scores);
            CandidateScore {
                fold_scores: fold_scores.to_vec(),
                mean,
                std,
            }
        })
        .collect();
    let mut best_index = 0;
    for (i, c) in per_candidate.iter().enumerate() {
        if c.mean > per_candidate[best_index].mean {
            best_index = i;
        }
    }
    Ok(SearchResult {
        best_index,
        best_params: candidates[best_index].clone(),
        best: per_candidate[best_index].clone(),
        candidates: per_candidate,
    })
}

/// Discrete value lists for each boosting hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtSpace {
    pub learning_rate: Vec<f64>,
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    #[serde(default = "one_f64")]
    pub min_child_weight: Vec<f64>,
    #[serde(default = "one_f64")]
    pub subsample: Vec<f64>,
    #[serde(default = "one_f64")]
    pub colsample_bytree: Vec<f64>,
    #[serde(default = "zero_f64")]
    pub gamma: Vec<f64>,
}

fn one_f64() -> Vec<f64> {
    vec![1.0]
}

fn zero_f64() -> Vec<f64> {
    vec![0.0]
}

impl GbdtSpace {
    pub fn single(p: GbdtParams) -> Self {
        Self {
            learning_rate: vec![p.learning_rate],
            n_estimators: vec![p.n_estimators],
            max_depth: vec![p.max_depth],
            min_child_weight: vec![p.min_child_weight],
            subsample: vec![p.subsample],
            colsample_bytree: vec![p.colsample_bytree],
            gamma: vec![p.gamma],
        }
    }

    fn is_empty(&self) -> bool {
        self.learning_rate.is_empty()
            || self.n_estimators.is_empty()
            || self.max_depth.is_empty()
            || self.min_child_weight.is_empty()
            || self.subsample.is_empty()
            || self.colsample_bytree.is_empty()
            || self.gamma.is_empty()
    }

    /// Full Cartesian product, learning rate varying slowest.
    pub fn grid(&self) -> Vec<GbdtParams> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rate {
            for &n_estimators in &self.n_estimators {
                for &max_depth in &self.max_depth {
                    for &min_child_weight in &self.min_child_weight {
                        for &subsample in &self.subsample {
                            for &colsample_bytree in &self.colsample_bytree {
                                for &gamma in &self.gamma {
                                    out.push(GbdtParams {
                                        learning_rate,
                                        n_estimators,
                                        max_depth,
                                        min_child_weight,
                                        subsample,
                                        colsample_bytree,
                                        gamma,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `count` independent draws, each parameter uniform over its list.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<GbdtParams> {
        let mut rng = rng_for(seed, 0x5EA7);
        fn pick<T: Copy, R: Rng>(v: &[T], rng: &mut R) -> T {
            v[rng.random_range(0..v.len())]
        }
        (0..count)
            .map(|_| GbdtParams {
                learning_rate: pick(&self.learning_rate, &mut rng),
                n_estimators: pick(&self.n_estimators, &mut rng),
                max_depth: pick(&self.max_depth, &mut rng),
                min_child_weight: pick(&self.min_child_weight, &mut rng),
                subsample: pick(&self.subsample, &mut rng),
                colsample_bytree: pick(&self.colsample_bytree, &mut rng),
                gamma: pick(&self.gamma, &mut rng),
            })
            .collect()
    }

    pub fn candidates(&self, mode: SearchMode, seed: u64) -> Result<Vec<GbdtParams>> {
        if self.is_empty() {
            return Err(Error::Validation("every searched parameter needs at least one value".into()));
        }
        let c = match mode {
            SearchMode::Grid => self.grid(),
            SearchMode::Random { samples } => self.sample(samples, seed),
        };
        for p in &c {
            p.validate()?;
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SearchMode {
    Grid,
    Random { samples: usize },
}
