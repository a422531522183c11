//! Projected quantum features: per-qubit Pauli expectations of an embedded
//! state, and the Gaussian kernel on one-qubit reduced density matrices.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::{Backend, FeatureMap};
use crate::simulator::{Pauli, QuantumState};

/// Bloch vector of a one-qubit reduced state, `rho = (I + bx X + by Y + bz Z) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl BlochVector {
    pub fn norm(&self) -> f64 {
        (self.bx * self.bx + self.by * self.by + self.bz * self.bz).sqrt()
    }
}

/// `3n` expectations ordered `<X_0>, <Y_0>, <Z_0>, <X_1>, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqfVector {
    values: Vec<f64>,
}

impl PqfVector {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() % 3 != 0 {
            return Err(Error::Validation(format!(
                "PQF vector length {} is not a positive multiple of 3",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn num_qubits(&self) -> usize {
        self.values.len() / 3
    }

    pub fn bloch(&self, qubit: usize) -> BlochVector {
        let v = &self.values[3 * qubit..3 * qubit + 3];
        BlochVector {
            bx: v[0],
            by: v[1],
            bz: v[2],
        }
    }
}

/// Canonical column names `q{k}_X`, `q{k}_Y`, `q{k}_Z`.
pub fn column_names(num_qubits: usize) -> Vec<String> {
    (0..num_qubits)
        .flat_map(|k| Pauli::ALL.iter().map(move |p| format!("q{k}_{}", p.label())))
        .collect()
}

pub fn project(state: &dyn QuantumState) -> PqfVector {
    let values = state.bloch_vectors().into_iter().flatten().collect();
    PqfVector { values }
}

/// `sum_k ||rho_k(a) - rho_k(b)||_F^2`, which equals half the squared
/// Euclidean distance between the stacked Bloch vectors.
pub fn pqk_distance_sq(a: &PqfVector, b: &PqfVector) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::Validation(format!(
            "PQF vectors differ in length ({} vs {})",
            a.values.len(),
            b.values.len()
        )));
    }
    let sq: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(0.5 * sq)
}

pub fn pqk_kernel(a: &PqfVector, b: &PqfVector, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Validation(format!("gamma must be positive, got {gamma}")));
    }
    Ok((-gamma * pqk_distance_sq(a, b)?).exp())
}

pub fn gram_matrix(vectors: &[PqfVector], gamma: f64) -> Result<DMatrix<f64>> {
    if vectors.is_empty() {
        return Err(Error::Validation("gram matrix needs at least one vector".into()));
    }
    let m = vectors.len();
    let mut k = DMatrix::identity(m, m);
    for i in 0..m {
        for j in 0..i {
            let v = pqk_kernel(&vectors[i], &vectors[j], gamma)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Maps classical rows through a feature map and projects each state.
///
/// Counts circuit executions so callers can check the one-execution-per-row
/// contract.
#[derive(Debug)]
pub struct PqfTransformer {
    feature_map: FeatureMap,
    backend: Backend,
    executions: AtomicUsize,
}

impl PqfTransformer {
    pub fn new(feature_map: FeatureMap, backend: Backend) -> Self {
        Self {
            feature_map,
            backend,
            executions: AtomicUsize::new(0),
        }
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.feature_map
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn executions(&self) -> usize {
        self.executions.load(Ordering::Relaxed)
    }

    pub fn output_dim(&self) -> usize {
        3 * self.feature_map.spec().num_qubits
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<PqfVector> {
        let state = self.feature_map.execute(x, self.backend)?;
        self.executions.fetch_add(1, Ordering::Relaxed);
        Ok(project(state.as_quantum_state()))
    }

    /// Transforms every row; output order follows input order.
    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<PqfVector>> {
        rows.par_iter().map(|x| self.transform_row(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featuremap::FeatureMapSpec;
    use crate::simulator::{SingleQubitUnitary, StateVector};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_state_projection() {
        let s = StateVector::zero(3).unwrap();
        assert_eq!(project(&s).values(), &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn plus_state_projection() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply_single_qubit(&SingleQubitUnitary::hadamard(), 0).unwrap();
        let v = project(&s);
        assert!((v.values()[0] - 1.0).abs() < 1e-15);
        assert!(v.values()[1].abs() < 1e-15 && v.values()[2].abs() < 1e-15);
    }

    #[test]
    fn singlet_has_maximally_mixed_marginals() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let z = Complex64::new(0.0, 0.0);
        // (|01> - |10>)/sqrt 2 with qubit 0 least significant: indices 1 and 2
        let s = StateVector::from_amplitudes(vec![z, Complex64::new(h, 0.0), Complex64::new(-h, 0.0), z]).unwrap();
        assert!(project(&s).values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn distance_examples() {
        let a = PqfVector::from_values(vec![0.0, 0.0, 1.0]).unwrap();
        let b = PqfVector::from_values(vec![0.0, 0.0, -1.0]).unwrap();
        assert_eq!(pqk_distance_sq(&a, &a).unwrap(), 0.0);
        // rho(+Z) - rho(-Z) = Z and ||Z||_F^2 = 2
        assert_eq!(pqk_distance_sq(&a, &b).unwrap(), 2.0);
        let k = pqk_kernel(&a, &b, 1.0).unwrap();
        assert!((k - (-2.0f64).exp()).abs() < 1e-15);
        assert!((k - 0.13534).abs() < 1e-5);
        assert_eq!(pqk_kernel(&a, &b, 0.3).unwrap(), pqk_kernel(&b, &a, 0.3).unwrap());
        assert_eq!(pqk_kernel(&a, &a, 7.0).unwrap(), 1.0);
        assert!(pqk_kernel(&a, &b, 0.0).is_err());
        assert!(pqk_kernel(&a, &b, -1.0).is_err());
        let c = PqfVector::from_values(vec![0.0; 6]).unwrap();
        assert!(pqk_distance_sq(&a, &c).is_err());
    }

    #[test]
    fn frobenius_route_agrees() {
        // explicit 2x2 matrices for a random pair of Bloch vectors
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-0.57..0.57)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-0.57..0.57)).collect();
            let rho = |v: &[f64]| {
                let c = |re, im| Complex64::new(re, im);
                [
                    [c((1.0 + v[2]) / 2.0, 0.0), c(v[0] / 2.0, -v[1] / 2.0)],
                    [c(v[0] / 2.0, v[1] / 2.0), c((1.0 - v[2]) / 2.0, 0.0)],
                ]
            };
            let (ra, rb) = (rho(&a), rho(&b));
            let mut frob = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    frob += (ra[i][j] - rb[i][j]).norm_sqr();
                }
            }
            let d = pqk_distance_sq(
                &PqfVector::from_values(a).unwrap(),
                &PqfVector::from_values(b).unwrap(),
            )
            .unwrap();
            assert!((d - frob).abs() < 1e-15);
        }
    }

    #[test]
    fn distance_is_additive_over_qubits() {
        let a1 = [0.1, 0.2, 0.3];
        let b1 = [-0.4, 0.0, 0.9];
        let a2 = [0.5, -0.5, 0.0];
        let b2 = [0.0, 0.1, -0.2];
        let d = |a: &[f64], b: &[f64]| {
            pqk_distance_sq(
                &PqfVector::from_values(a.to_vec()).unwrap(),
                &PqfVector::from_values(b.to_vec()).unwrap(),
            )
            .unwrap()
        };
        let joint = d(&[a1, a2].concat(), &[b1, b2].concat());
        assert!((joint - (d(&a1, &b1) + d(&a2, &b2))).abs() < 1e-15);
    }

    #[test]
    fn small_gram_matrices() {
        let a = PqfVector::from_values(vec![0.2, 0.1, 0.3]).unwrap();
        let g = gram_matrix(std::slice::from_ref(&a), 1.0).unwrap();
        assert_eq!(g, DMatrix::from_element(1, 1, 1.0));
        let g2 = gram_matrix(&[a.clone(), a], 2.5).unwrap();
        assert_eq!(g2, DMatrix::from_element(2, 2, 1.0));
        assert!(gram_matrix(&[], 1.0).is_err());
    }

    #[test]
    fn transformer_counts_one_execution_per_row() {
        let fm = FeatureMap::new(FeatureMapSpec::new(4, 3, 0.9, 1, 6).unwrap()).unwrap();
        let t = PqfTransformer::new(fm, Backend::Exact);
        let rows: Vec<Vec<f64>> = (0..17).map(|i| vec![0.3 + 0.01 * i as f64, 0.5, 0.7]).collect();
        let out = t.transform(&rows).unwrap();
        assert_eq!(out.len(), 17);
        assert_eq!(t.executions(), 17);
        assert!(out.iter().all(|v| v.values().len() == 12));
        for v in &out {
            for k in 0..4 {
                assert!(v.bloch(k).norm() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn column_names_are_qubit_major() {
        assert_eq!(column_names(2), vec!["q0_X", "q0_Y", "q0_Z", "q1_X", "q1_Y", "q1_Z"]);
    }
}
