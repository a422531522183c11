//! Median imputation, min-max scaling and seeded feature permutation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::is_missing;

pub const DEFAULT_RANGE: (f64, f64) = (0.3, 0.8);

fn column_values(rows: &[Vec<f64>], j: usize) -> impl Iterator<Item = f64> + '_ {
    rows.iter().map(move |r| r[j]).filter(|v| !is_missing(*v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianImputer {
    pub medians: Vec<f64>,
}

impl MedianImputer {
    /// Per-column median of observed values; all-missing columns impute 0.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let f = rows.first().map_or(0, Vec::len);
        let medians = (0..f)
            .map(|j| {
                let mut v: Vec<f64> = column_values(rows, j).collect();
                if v.is_empty() {
                    return 0.0;
                }
                v.sort_by(f64::total_cmp);
                let mid = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[mid]
                } else {
                    0.5 * (v[mid - 1] + v[mid])
                }
            })
            .collect();
        Self { medians }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .zip(&self.medians)
                    .map(|(&v, &m)| if is_missing(v) { m } else { v })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl ScalerParams {
    /// Fits per-column min/max on training rows (missing cells ignored).
    pub fn fit(rows: &[Vec<f64>], range: (f64, f64)) -> Self {
        assert!(range.1 > range.0, "scaler range must have hi > lo");
        let f = rows.first().map_or(0, Vec::len);
        let (mut mins, mut maxs) = (vec![f64::INFINITY; f], vec![f64::NEG_INFINITY; f]);
        for j in 0..f {
            for v in column_values(rows, j) {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Self {
            mins,
            maxs,
            lo: range.0,
            hi: range.1,
        }
    }

    /// No clipping: values outside the training range extrapolate linearly.
    /// Constant (or unobserved) columns map to the midpoint.
    pub fn transform_value(&self, j: usize, v: f64) -> f64 {
        if is_missing(v) {
            return v;
        }
        let (min, max) = (self.mins[j], self.maxs[j]);
        if !(max > min) {
            return 0.5 * (self.lo + self.hi);
        }
        let t = (v - min) / (max - min);
        let y = self.lo * (1.0 - t) + self.hi * t;
        if (0.0..=1.0).contains(&t) {
            // rounding must not push in-range values past the target bounds
            y.clamp(self.lo, self.hi)
        } else {
            y
        }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().enumerate().map(|(j, &v)| self.transform_value(j, v)).collect())
            .collect()
    }
}

/// Output column `j` reads input column `order[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturePermutation {
    pub order: Vec<usize>,
    pub seed: u64,
}

impl FeaturePermutation {
    pub fn random(num_features: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..num_features).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { order, seed }
    }

    pub fn identity(num_features: usize) -> Self {
        Self {
            order: (0..num_features).collect(),
            seed: 0,
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&k| row[k]).collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }

    pub fn inverse(&self) -> FeaturePermutation {
        let mut order = vec![0; self.order.len()];
        for (j, &k) in self.order.iter().enumerate() {
            order[k] = j;
        }
        FeaturePermutation { order, seed: self.seed }
    }
}

/// Permutes columns with a seeded shuffle.
pub fn shuffle_features(rows: &[Vec<f64>], seed: u64) -> (Vec<Vec<f64>>, FeaturePermutation) {
    let f = rows.first().map_or(0, Vec::len);
    let perm = FeaturePermutation::random(f, seed);
    (perm.apply(rows), perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::dataset::MISSING;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn linear_map_examples() {
        let s = ScalerParams::fit(&col(&[0.0, 1.0, 2.0]), DEFAULT_RANGE);
        let out: Vec<f64> = s.transform(&col(&[0.0, 1.0, 2.0])).into_iter().map(|r| r[0]).collect();
        assert_eq!(out[0], 0.3);
        assert!((out[1] - 0.55).abs() < 1e-15);
        assert_eq!(out[2], 0.8);
        assert!((s.transform_value(0, 3.0) - 1.05).abs() < 1e-15);

        let c = ScalerParams::fit(&col(&[4.0, 4.0, 4.0]), DEFAULT_RANGE);
        assert!(c.transform(&col(&[4.0, 9.0])).iter().all(|r| (r[0] - 0.55).abs() < 1e-15));
    }

    #[test]
    fn missing_cells_pass_through_scaler_and_get_imputed() {
        let rows = vec![vec![1.0, MISSING], vec![3.0, 5.0], vec![MISSING, 7.0], vec![2.0, 6.0]];
        let imp = MedianImputer::fit(&rows);
        assert_eq!(imp.medians, vec![2.0, 6.0]);
        let filled = imp.transform(&rows);
        assert_eq!(filled[0][1], 6.0);
        assert_eq!(filled[2][0], 2.0);
        let s = ScalerParams::fit(&rows, DEFAULT_RANGE);
        assert!(s.transform_value(1, MISSING).is_nan());
        assert_eq!(s.mins, vec![1.0, 5.0]);
    }

    #[test]
    fn permutation_round_trip_and_determinism() {
        let rows = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![6.0, 7.0, 8.0, 9.0, 10.0]];
        let (shuffled, perm) = shuffle_features(&rows, 17);
        assert_eq!(perm.inverse().apply(&shuffled), rows);
        assert_eq!(perm, FeaturePermutation::random(5, 17));
        assert_eq!(FeaturePermutation::identity(5).apply(&rows), rows);
    }

    proptest! {
        #[test]
        fn scaler_hits_range_on_train(values in proptest::collection::vec(-1e6f64..1e6, 2..40)) {
            let rows = col(&values);
            let s = ScalerParams::fit(&rows, DEFAULT_RANGE);
            let out: Vec<f64> = s.transform(&rows).into_iter().map(|r| r[0]).collect();
            let lo = out.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if s.maxs[0] > s.mins[0] {
                prop_assert_eq!(lo, 0.3);
                prop_assert_eq!(hi, 0.8);
            } else {
                prop_assert!(out.iter().all(|v| (*v - 0.55).abs() < 1e-15));
            }
        }
    }
}
