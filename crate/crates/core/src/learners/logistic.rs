//! L2-regularised logistic regression solved by damped Newton iterations.
//!
//! Minimises `sum_i w_i [log(1 + e^{z_i}) - y_i z_i] + ||beta||^2 / (2C)` with
//! `z = X beta + b`; the intercept `b` is not penalised.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::gbdt::sigmoid;
use crate::error::{Error, Result};

pub const DEFAULT_GRADIENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub c: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LogisticModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn predict_proba(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| sigmoid(self.decision(r))).collect()
    }
}

/// The penalised objective; parameters are `[beta..., intercept]`.
pub struct LogisticObjective<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [u8],
    pub weights: &'a [f64],
    pub c: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticObjective<'_> {
    fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn margin(&self, params: &[f64], row: &[f64]) -> f64 {
        let d = self.dim();
        params[d] + params[..d].iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let d = self.dim();
        let data: f64 = self
            .rows
            .iter()
            .zip(self.labels)
            .zip(self.weights)
            .map(|((r, &y), &w)| {
                let z = self.margin(params, r);
                w * (softplus(z) - f64::from(y) * z)
            })
            .sum();
        data + params[..d].iter().map(|b| b * b).sum::<f64>() / (2.0 * self.c)
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d + 1];
        for ((r, &y), &w) in self.rows.iter().zip(self.labels).zip(self.weights) {
            let resid = w * (sigmoid(self.margin(params, r)) - f64::from(y));
            for (gj, xj) in g[..d].iter_mut().zip(r) {
                *gj += resid * xj;
            }
            g[d] += resid;
        }
        for j in 0..d {
            g[j] += params[j] / self.c;
        }
        g
    }

    fn hessian(&self, params: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut h = DMatrix::zeros(d + 1, d + 1);
        let mut x = vec![0.0; d + 1];
        for ((r, _), &w) in self.rows.iter().zip(self.labels).zip(self.weights) {
            let p = sigmoid(self.margin(params, r));
            let s = w * p * (1.0 - p);
            x[..d].copy_from_slice(r);
            x[d] = 1.0;
            for a in 0..=d {
                let xa = s * x[a];
                for b in 0..=a {
                    h[(a, b)] += xa * x[b];
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        for j in 0..d {
            h[(j, j)] += 1.0 / self.c;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    /// Inverse regularisation strength.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl LogisticRegression {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            max_iter: 100,
            tol: DEFAULT_GRADIENT_TOL,
        }
    }

    pub fn fit(&self, rows: &[Vec<f64>], labels: &[u8], weights: &[f64]) -> Result<LogisticModel> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Validation(format!("C must be positive, got {}", self.c)));
        }
        if rows.len() != labels.len() || rows.len() != weights.len() {
            return Err(Error::Validation("rows, labels and weights differ in length".into()));
        }
        Dataset::require_both_classes(labels)?;
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("logistic regression needs imputed, finite inputs".into()));
        }
        let obj = LogisticObjective {
            rows,
            labels,
            weights,
            c: self.c,
        };
        let d = obj.dim();
        let mut params = vec![0.0; d + 1];
        let mut value = obj.value(&params);
        let mut grad = obj.gradient(&params);
        let mut iterations = 0;
        while iterations < self.max_iter && norm(&grad) > self.tol {
            iterations += 1;
            let h = obj.hessian(&params);
            let g = DVector::from_column_slice(&grad);
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => h.lu().solve(&g).unwrap_or_else(|| g.clone()),
            };
            // backtracking on the Newton direction
            let mut t = 1.0;
            let slope: f64 = -g.dot(&step);
            loop {
                let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p - t * s).collect();
                let tv = obj.value(&trial);
                if tv <= value + 1e-4 * t * slope || t < 1e-10 {
                    params = trial;
                    value = tv;
                    break;
                }
                t *= 0.5;
            }
            grad = obj.gradient(&params);
        }
        Ok(LogisticModel {
            coefficients: params[..d].to_vec(),
            intercept: params[d],
            c: self.c,
            iterations,
            gradient_norm: norm(&grad),
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, m: usize, d: usize) -> (Vec<Vec<f64>>, Vec<u8>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels = rows
            .iter()
            .map(|r| u8::from(rng.random_bool(sigmoid(r.iter().sum::<f64>()))))
            .collect();
        let weights = (0..m).map(|_| rng.random_range(0.5..3.0)).collect();
        (rows, labels, weights)
    }

    #[test]
    fn symmetric_data_has_zero_intercept() {
        let rows: Vec<Vec<f64>> = (1..=10).flat_map(|i| [vec![i as f64 / 10.0], vec![-(i as f64) / 10.0]]).collect();
        let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] > 0.0)).collect();
        let model = LogisticRegression::new(1.0).fit(&rows, &labels, &vec![1.0; 20]).unwrap();
        assert!(model.intercept.abs() < 1e-6);
        assert!(model.coefficients[0] > 0.0);
        assert!(model.gradient_norm <= 1e-8);
    }

    #[test]
    fn tiny_c_shrinks_to_prior() {
        let (rows, labels, _) = random_problem(3, 200, 3);
        let w = vec![1.0; 200];
        let model = LogisticRegression::new(1e-6).fit(&rows, &labels, &w).unwrap();
        assert!(model.coefficients.iter().all(|b| b.abs() < 1e-3));
        let prior = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / 200.0;
        for p in model.predict_proba(&rows) {
            assert!((p - prior).abs() < 2e-3);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..5 {
            let (rows, labels, weights) = random_problem(seed, 60, 4);
            let obj = LogisticObjective {
                rows: &rows,
                labels: &labels,
                weights: &weights,
                c: 0.7,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let params: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = obj.gradient(&params);
            for j in 0..5 {
                let h = 1e-5;
                let mut up = params.clone();
                let mut dn = params.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "seed {seed} coord {j}");
            }
        }
    }

    #[test]
    fn converges_to_stationary_point() {
        let (rows, labels, weights) = random_problem(9, 500, 3);
        let model = LogisticRegression::new(0.2).fit(&rows, &labels, &weights).unwrap();
        assert!(model.gradient_norm <= 1e-8);
        let obj = LogisticObjective {
            rows: &rows,
            labels: &labels,
            weights: &weights,
            c: 0.2,
        };
        let mut params = model.coefficients.clone();
        params.push(model.intercept);
        assert!(norm(&obj.gradient(&params)) <= 1e-8);
    }

    #[test]
    fn rejects_bad_input() {
        let rows = vec![vec![1.0], vec![2.0]];
        assert!(LogisticRegression::new(1.0).fit(&rows, &[0, 0], &[1.0, 1.0]).is_err());
        assert!(LogisticRegression::new(0.0).fit(&rows, &[0, 1], &[1.0, 1.0]).is_err());
        let nan = vec![vec![f64::NAN], vec![2.0]];
        assert!(LogisticRegression::new(1.0).fit(&nan, &[0, 1], &[1.0, 1.0]).is_err());
    }
}
