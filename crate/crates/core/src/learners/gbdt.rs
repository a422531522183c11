//! Second-order gradient boosting of regression trees on the logistic loss.
//!
//! Each round fits one tree to the gradients `g = w (p - y)` and hessians
//! `h = w p (1 - p)` of the weighted log loss at the current margins. Trees
//! grow level by level with exact greedy splits over presorted feature
//! columns. A candidate split scores
//!
//! ```text
//! gain = 1/2 [ G_L^2/(H_L+λ) + G_R^2/(H_R+λ) - G^2/(H+λ) ] - gamma
//! ```
//!
//! with `λ = 1`, and leaves output `-η G / (H + λ)`. Missing values are sent
//! to whichever child gives the larger gain; that direction is stored per
//! split and reused at prediction time.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{is_missing, Dataset};
use crate::error::{Error, Result};
use crate::seeds::rng_for;

/// L2 penalty on leaf values inside the split gain; fixed, not searched.
pub const LEAF_L2: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    /// Minimum split gain.
    pub gamma: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            n_estimators: 100,
            max_depth: 6,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            gamma: 0.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.learning_rate) {
            return Err(Error::Validation(format!("learning_rate {} not in (0, 1]", self.learning_rate)));
        }
        if !unit(self.subsample) || !unit(self.colsample_bytree) {
            return Err(Error::Validation("subsample and colsample_bytree must be in (0, 1]".into()));
        }
        if !(self.min_child_weight >= 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::Validation("min_child_weight and gamma must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let v = row[*feature];
                    let go_left = if is_missing(v) { *missing_left } else { v < *threshold };
                    at = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub params: GbdtParams,
    pub num_features: usize,
    /// Initial margin: log-odds of the weighted class prior.
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted mean log loss.
pub fn log_loss(labels: &[u8], weights: &[f64], probs: &[f64]) -> f64 {
    let eps = 1e-15;
    let total: f64 = weights.iter().sum();
    labels
        .iter()
        .zip(weights)
        .zip(probs)
        .map(|((&y, &w), &p)| {
            let p = p.clamp(eps, 1.0 - eps);
            -w * if y == 1 { p.ln() } else { (1.0 - p).ln() }
        })
        .sum::<f64>()
        / total
}

#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
}

impl Stats {
    fn score(self) -> f64 {
        self.g * self.g / (self.h + LEAF_L2)
    }
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    missing_left: bool,
}

fn threshold_between(lo: f64, hi: f64) -> f64 {
    let mid = lo + 0.5 * (hi - lo);
    if mid > lo {
        mid
    } else {
        hi
    }
}

struct Grower<'a> {
    rows: &'a [Vec<f64>],
    sorted: &'a [Vec<usize>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
}

impl Grower<'_> {
    /// Grows one tree on the rows with `node_of[i] == Some(0)`.
    fn grow(&self, mut node_of: Vec<Option<usize>>, features: &[usize]) -> Tree {
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut totals = vec![Stats::default()];
        for (i, n) in node_of.iter().enumerate() {
            if n.is_some() {
                totals[0].g += self.grad[i];
                totals[0].h += self.hess[i];
            }
        }
        let mut frontier = vec![0usize];
        for _depth in 0..self.params.max_depth {
            if frontier.is_empty() {
                break;
            }
            let best = self.best_splits(&node_of, &frontier, &totals, features, nodes.len());
            let mut next = Vec::new();
            let mut remap = vec![None; nodes.len()];
            for (slot, &node) in frontier.iter().enumerate() {
                let Some(c) = &best[slot] else { continue };
                let (left, right) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                totals.push(Stats::default());
                totals.push(Stats::default());
                nodes[node] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    missing_left: c.missing_left,
                    left,
                    right,
                    gain: c.gain,
                };
                remap[node] = Some((c.feature, c.threshold, c.missing_left, left, right));
                next.push(left);
                next.push(right);
            }
            for (i, slot) in node_of.iter_mut().enumerate() {
                let Some(n) = *slot else { continue };
                if let Some((f, t, ml, l, r)) = remap[n] {
                    let v = self.rows[i][f];
                    let child = if is_missing(v) { if ml { l } else { r } } else if v < t { l } else { r };
                    *slot = Some(child);
                    totals[child].g += self.grad[i];
                    totals[child].h += self.hess[i];
                }
            }
            frontier = next;
        }
        for (node, stats) in nodes.iter_mut().zip(&totals) {
            if let Node::Leaf { value } = node {
                *value = -self.params.learning_rate * stats.g / (stats.h + LEAF_L2);
            }
        }
        Tree { nodes }
    }

    fn best_splits(
        &self,
        node_of: &[Option<usize>],
        frontier: &[usize],
        totals: &[Stats],
        features: &[usize],
        num_nodes: usize,
    ) -> Vec<Option<Candidate>> {
        let mut slot_of = vec![usize::MAX; num_nodes];
        for (s, &n) in frontier.iter().enumerate() {
            slot_of[n] = s;
        }
        let mut best: Vec<Option<Candidate>> = frontier.iter().map(|_| None).collect();
        let k = frontier.len();
        let mut present = vec![Stats::default(); k];
        let mut running = vec![Stats::default(); k];
        let mut last = vec![f64::NAN; k];
        let mcw = self.params.min_child_weight;
        for &f in features {
            let order = &self.sorted[f];
            present.iter_mut().for_each(|s| *s = Stats::default());
            for &i in order {
                if let Some(n) = node_of[i] {
                    let s = slot_of[n];
                    if s != usize::MAX {
                        present[s].g += self.grad[i];
                        present[s].h += self.hess[i];
                    }
                }
            }
            running.iter_mut().for_each(|s| *s = Stats::default());
            last.iter_mut().for_each(|v| *v = f64::NAN);
            for &i in order {
                let Some(n) = node_of[i] else { continue };
                let s = slot_of[n];
                if s == usize::MAX {
                    continue;
                }
                let v = self.rows[i][f];
                if !last[s].is_nan() && v > last[s] {
                    let total = totals[frontier[s]];
                    let missing = Stats {
                        g: total.g - present[s].g,
                        h: total.h - present[s].h,
                    };
                    let left = running[s];
                    let right = Stats {
                        g: present[s].g - left.g,
                        h: present[s].h - left.h,
                    };
                    let parent = total.score();
                    for missing_left in [false, true] {
                        let (l, r) = if missing_left {
                            (Stats { g: left.g + missing.g, h: left.h + missing.h }, right)
                        } else {
                            (left, Stats { g: right.g + missing.g, h: right.h + missing.h })
                        };
                        if l.h < mcw || r.h < mcw {
                            continue;
                        }
                        let gain = 0.5 * (l.score() + r.score() - parent) - self.params.gamma;
                        if gain > 0.0 && best[s].as_ref().is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: threshold_between(last[s], v),
                                missing_left,
                            });
                        }
                    }
                }
                running[s].g += self.grad[i];
                running[s].h += self.hess[i];
                last[s] = v;
            }
        }
        best
    }
}

/// Boosting with per-round diagnostics available to callers that want them.
pub struct GbdtTrainer {
    pub params: GbdtParams,
    pub seed: u64,
}

impl GbdtTrainer {
    pub fn new(params: GbdtParams, seed: u64) -> Self {
        Self { params, seed }
    }

    pub fn fit(&self, rows: &[Vec<f64>], labels: &[u8], weights: &[f64]) -> Result<GbdtModel> {
        self.fit_with_callback(rows, labels, weights, |_, _| {})
    }

    /// `on_round(round, margins)` runs after each tree is added.
    pub fn fit_with_callback(
        &self,
        rows: &[Vec<f64>],
        labels: &[u8],
        weights: &[f64],
        mut on_round: impl FnMut(usize, &[f64]),
    ) -> Result<GbdtModel> {
        let params = self.params;
        params.validate()?;
        let m = rows.len();
        if labels.len() != m || weights.len() != m {
            return Err(Error::Validation("rows, labels and weights differ in length".into()));
        }
        Dataset::require_both_classes(labels)?;
        let num_features = rows[0].len();
        if num_features == 0 {
            return Err(Error::Validation("no features to split on".into()));
        }

        let (mut wp, mut wn) = (0.0, 0.0);
        for (&y, &w) in labels.iter().zip(weights) {
            if y == 1 {
                wp += w
            } else {
                wn += w
            }
        }
        let base_score = (wp / wn).ln();

        let sorted: Vec<Vec<usize>> = (0..num_features)
            .map(|f| {
                let mut idx: Vec<usize> = (0..m).filter(|&i| !is_missing(rows[i][f])).collect();
                idx.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut margins = vec![base_score; m];
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m];
        let mut trees = Vec::with_capacity(params.n_estimators);
        let n_cols = ((params.colsample_bytree * num_features as f64).round() as usize).clamp(1, num_features);

        for round in 0..params.n_estimators {
            let mut rng = rng_for(self.seed, round as u64);
            for i in 0..m {
                let p = sigmoid(margins[i]);
                grad[i] = weights[i] * (p - f64::from(labels[i]));
                hess[i] = weights[i] * p * (1.0 - p);
            }
            let node_of: Vec<Option<usize>> = (0..m)
                .map(|_| (params.subsample >= 1.0 || rng.random_bool(params.subsample)).then_some(0))
                .collect();
            let mut features: Vec<usize> = if n_cols == num_features {
                (0..num_features).collect()
            } else {
                index::sample(&mut rng, num_features, n_cols).into_vec()
            };
            features.sort_unstable();

            let grower = Grower {
                rows,
                sorted: &sorted,
                grad: &grad,
                hess: &hess,
                params: &params,
            };
            let tree = grower.grow(node_of, &features);
            for (i, margin) in margins.iter_mut().enumerate() {
                *margin += tree.predict_row(&rows[i]);
            }
            trees.push(tree);
            on_round(round, &margins);
        }

        Ok(GbdtModel {
            params,
            num_features,
            base_score,
            trees,
        })
    }
}

impl GbdtModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict_proba(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| sigmoid(self.margin(r))).collect()
    }

    /// Total split gain per feature.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.num_features];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, gain, .. } = node {
                    imp[*feature] += gain;
                }
            }
        }
        imp
    }
}

pub fn gbdt_fit(train: &Dataset, params: GbdtParams, weights: &[f64], seed: u64) -> Result<GbdtModel> {
    GbdtTrainer::new(params, seed).fit(&train.features, &train.labels, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::dataset::MISSING;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let labels = rows.iter().map(|r| u8::from(r[0] > 0.1 || r[1] > 0.6)).collect();
        (rows, labels)
    }

    fn noisy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|r: &Vec<f64>| {
                let z = 2.0 * r[0] - r[1] * r[2] + 0.5 * r[3];
                u8::from(rng.random_bool(sigmoid(3.0 * z)))
            })
            .collect();
        (rows, labels)
    }

    #[test]
    fn separable_toy_set_is_fit_exactly() {
        let (rows, labels) = separable(50, 1);
        let params = GbdtParams {
            max_depth: 2,
            n_estimators: 20,
            learning_rate: 0.5,
            min_child_weight: 0.0,
            ..GbdtParams::default()
        };
        let model = GbdtTrainer::new(params, 0).fit(&rows, &labels, &vec![1.0; 50]).unwrap();
        let correct = model
            .predict_proba(&rows)
            .iter()
            .zip(&labels)
            .filter(|(p, &y)| u8::from(**p >= 0.5) == y)
            .count();
        assert_eq!(correct, 50);
        assert!(model.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn no_trees_predicts_weighted_prior() {
        let (rows, labels) = separable(40, 2);
        let w: Vec<f64> = labels.iter().map(|&y| if y == 1 { 1.0 } else { 20.0 }).collect();
        let params = GbdtParams {
            n_estimators: 0,
            ..GbdtParams::default()
        };
        let model = GbdtTrainer::new(params, 0).fit(&rows, &labels, &w).unwrap();
        let wp: f64 = labels.iter().zip(&w).filter(|(&y, _)| y == 1).map(|(_, w)| w).sum();
        let total: f64 = w.iter().sum();
        for p in model.predict_proba(&rows) {
            assert!((p - wp / total).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (rows, labels) = noisy(300, 4);
        let params = GbdtParams {
            subsample: 0.7,
            colsample_bytree: 0.5,
            n_estimators: 15,
            max_depth: 3,
            ..GbdtParams::default()
        };
        let w = vec![1.0; 300];
        let a = GbdtTrainer::new(params, 9).fit(&rows, &labels, &w).unwrap();
        let b = GbdtTrainer::new(params, 9).fit(&rows, &labels, &w).unwrap();
        assert_eq!(a, b);
        let c = GbdtTrainer::new(params, 10).fit(&rows, &labels, &w).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_class_rejected() {
        let rows = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            GbdtTrainer::new(GbdtParams::default(), 0).fit(&rows, &[1, 1], &[1.0, 1.0]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn training_loss_never_increases() {
        let (rows, labels) = noisy(400, 6);
        let w = vec![1.0; 400];
        let params = GbdtParams {
            n_estimators: 40,
            max_depth: 4,
            learning_rate: 0.3,
            ..GbdtParams::default()
        };
        let mut losses = Vec::new();
        GbdtTrainer::new(params, 1)
            .fit_with_callback(&rows, &labels, &w, |_, margins| {
                let p: Vec<f64> = margins.iter().map(|&z| sigmoid(z)).collect();
                losses.push(log_loss(&labels, &w, &p));
            })
            .unwrap();
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn missing_values_follow_learned_direction() {
        // label is 1 exactly when the value is missing or large
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let v = i as f64 / 60.0;
            if i % 3 == 0 {
                rows.push(vec![MISSING]);
                labels.push(1);
            } else {
                rows.push(vec![v]);
                labels.push(u8::from(v > 0.7));
            }
        }
        let params = GbdtParams {
            n_estimators: 10,
            max_depth: 2,
            learning_rate: 0.5,
            ..GbdtParams::default()
        };
        let model = GbdtTrainer::new(params, 0).fit(&rows, &labels, &vec![1.0; 60]).unwrap();
        let p = model.predict_proba(&[vec![MISSING], vec![0.1], vec![0.9]]);
        assert!(p[0] > 0.5 && p[1] < 0.5 && p[2] > 0.5, "{p:?}");
    }

    #[test]
    fn gamma_and_min_child_weight_prune() {
        let (rows, labels) = noisy(200, 3);
        let w = vec![1.0; 200];
        let strict = GbdtParams {
            gamma: 1e6,
            n_estimators: 3,
            ..GbdtParams::default()
        };
        let m = GbdtTrainer::new(strict, 0).fit(&rows, &labels, &w).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        let heavy = GbdtParams {
            min_child_weight: 1e6,
            n_estimators: 3,
            ..GbdtParams::default()
        };
        let m = GbdtTrainer::new(heavy, 0).fit(&rows, &labels, &w).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        assert!(m.feature_importance().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn importance_finds_the_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[1] > 0.5)).collect();
        let model = GbdtTrainer::new(GbdtParams { n_estimators: 5, ..GbdtParams::default() }, 0)
            .fit(&rows, &labels, &vec![1.0; 300])
            .unwrap();
        let imp = model.feature_importance();
        assert!(imp[1] > imp[0] && imp[1] > imp[2]);
    }

    #[test]
    fn invalid_params_rejected() {
        for p in [
            GbdtParams { learning_rate: 0.0, ..GbdtParams::default() },
            GbdtParams { subsample: 1.5, ..GbdtParams::default() },
            GbdtParams { colsample_bytree: 0.0, ..GbdtParams::default() },
        ] {
            assert!(p.validate().is_err());
        }
    }
}
