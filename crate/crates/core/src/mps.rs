//! Matrix-product-state backend for nearest-neighbour circuits.
//!
//! Each site holds two matrices `A[p]` (`left_bond x right_bond`), one per
//! physical index, so the amplitude of `|q_{n-1} ... q_0>` is
//! `A_0[q_0] A_1[q_1] ... A_{n-1}[q_{n-1}]` (a 1x1 product).
//!
//! The state is kept in mixed canonical form around an orthogonality centre:
//! sites left of the centre are left-isometric, sites right of it are
//! right-isometric. Two-site gates first move the centre onto the pair, so the
//! singular values of the updated pair are the Schmidt coefficients of the
//! whole state and truncation can be renormalised exactly.
//!
//! Truncation after each two-site gate keeps singular values
//! `s_k >= trunc_tol * s_max` (and above a `1e-14 * s_max` numerical floor),
//! at most `chi_max` of them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{HeisenbergCoupling, Pauli, QuantumState, SingleQubitUnitary, StateVector};

pub const MAX_DENSE_EXPORT_QUBITS: usize = 20;
pub const DEFAULT_CHI_MAX: usize = 64;
pub const DEFAULT_TRUNC_TOL: f64 = 1e-10;

/// Singular values below this fraction of the largest are numerically zero.
const SVD_FLOOR: f64 = 1e-14;

type CMat = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpsConfig {
    pub chi_max: usize,
    pub trunc_tol: f64,
}

impl Default for MpsConfig {
    fn default() -> Self {
        Self {
            chi_max: DEFAULT_CHI_MAX,
            trunc_tol: DEFAULT_TRUNC_TOL,
        }
    }
}

#[derive(Debug, Clone)]
struct Site {
    mats: [CMat; 2],
}

impl Site {
    fn left_dim(&self) -> usize {
        self.mats[0].nrows()
    }

    fn right_dim(&self) -> usize {
        self.mats[0].ncols()
    }
}

#[derive(Debug, Clone)]
pub struct MpsState {
    sites: Vec<Site>,
    center: usize,
    config: MpsConfig,
    discarded_weight: f64,
}

impl MpsState {
    pub fn zero(num_qubits: usize, config: MpsConfig) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::Capacity("MPS needs at least one qubit".into()));
        }
        if config.chi_max == 0 || !(config.trunc_tol >= 0.0) {
            return Err(Error::Validation(format!(
                "chi_max must be >= 1 and trunc_tol >= 0, got {config:?}"
            )));
        }
        let one = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let zero = CMat::zeros(1, 1);
        let sites = (0..num_qubits)
            .map(|_| Site {
                mats: [one.clone(), zero.clone()],
            })
            .collect();
        Ok(Self {
            sites,
            center: 0,
            config,
            discarded_weight: 0.0,
        })
    }

    pub fn config(&self) -> MpsConfig {
        self.config
    }

    /// Bond dimensions between consecutive sites (`n - 1` entries).
    pub fn bond_dimensions(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1]
            .iter()
            .map(Site::right_dim)
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dimensions().into_iter().max().unwrap_or(1)
    }

    /// Total squared weight of singular values discarded so far.
    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.sites.len() {
            return Err(Error::Index(format!(
                "qubit {q} outside a {}-qubit register",
                self.sites.len()
            )));
        }
        Ok(())
    }

    fn move_center_right(&mut self) {
        let k = self.center;
        let (dl, dr) = (self.sites[k].left_dim(), self.sites[k].right_dim());
        let mut stacked = CMat::zeros(2 * dl, dr);
        for p in 0..2 {
            stacked.view_mut((p * dl, 0), (dl, dr)).copy_from(&self.sites[k].mats[p]);
        }
        let qr = stacked.qr();
        let (q, r) = (qr.q(), qr.r());
        let rank = q.ncols();
        for p in 0..2 {
            self.sites[k].mats[p] = q.view((p * dl, 0), (dl, rank)).into_owned();
        }
        let next = &mut self.sites[k + 1];
        for p in 0..2 {
            next.mats[p] = &r * &next.mats[p];
        }
        self.center = k + 1;
    }

    fn move_center_left(&mut self) {
        let k = self.center;
        let (dl, dr) = (self.sites[k].left_dim(), self.sites[k].right_dim());
        let mut stacked = CMat::zeros(dl, 2 * dr);
        for p in 0..2 {
            stacked.view_mut((0, p * dr), (dl, dr)).copy_from(&self.sites[k].mats[p]);
        }
        // A = R^† Q^† from the QR of A^†
        let qr = stacked.adjoint().qr();
        let q_adj = qr.q().adjoint();
        let r_adj = qr.r().adjoint();
        let rank = q_adj.nrows();
        for p in 0..2 {
            self.sites[k].mats[p] = q_adj.view((0, p * dr), (rank, dr)).into_owned();
        }
        let prev = &mut self.sites[k - 1];
        for p in 0..2 {
            prev.mats[p] = &prev.mats[p] * &r_adj;
        }
        self.center = k - 1;
    }

    fn move_center_to(&mut self, target: usize) {
        while self.center < target {
            self.move_center_right();
        }
        while self.center > target {
            self.move_center_left();
        }
    }

    /// Dense statevector of the MPS (qubit 0 least significant).
    pub fn to_statevector(&self) -> Result<StateVector> {
        let n = self.sites.len();
        if n > MAX_DENSE_EXPORT_QUBITS {
            return Err(Error::Capacity(format!(
                "dense export supports at most {MAX_DENSE_EXPORT_QUBITS} qubits, got {n}"
            )));
        }
        let mut acc = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        for site in &self.sites {
            let rows = acc.nrows();
            let mut next = CMat::zeros(2 * rows, site.right_dim());
            for p in 0..2 {
                let block = &acc * &site.mats[p];
                next.view_mut((p * rows, 0), (rows, site.right_dim())).copy_from(&block);
            }
            acc = next;
        }
        StateVector::from_amplitudes(acc.column(0).iter().copied().collect())
    }

    /// Squared norm by transfer-matrix contraction.
    pub fn norm_sqr(&self) -> f64 {
        let envs = self.left_environments();
        envs[self.sites.len()][(0, 0)].re
    }

    /// `L_k` contracts sites `0..k` with their conjugates.
    fn left_environments(&self) -> Vec<CMat> {
        let mut envs = Vec::with_capacity(self.sites.len() + 1);
        envs.push(CMat::from_element(1, 1, Complex64::new(1.0, 0.0)));
        for site in &self.sites {
            let prev = envs.last().unwrap();
            let mut next = CMat::zeros(site.right_dim(), site.right_dim());
            for a in &site.mats {
                next += a.transpose() * prev * a.conjugate();
            }
            envs.push(next);
        }
        envs
    }

    /// `R_k` contracts sites `k..n` with their conjugates.
    fn right_environments(&self) -> Vec<CMat> {
        let n = self.sites.len();
        let mut envs = vec![CMat::zeros(0, 0); n + 1];
        envs[n] = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        for k in (0..n).rev() {
            let site = &self.sites[k];
            let mut cur = CMat::zeros(site.left_dim(), site.left_dim());
            for a in &site.mats {
                cur += a * &envs[k + 1] * a.adjoint();
            }
            envs[k] = cur;
        }
        envs
    }

    /// Unnormalised one-site reduced density matrix `rho[p][p'] = <p|rho|p'>`.
    fn site_rdm(&self, q: usize, left: &CMat, right: &CMat) -> [[Complex64; 2]; 2] {
        let site = &self.sites[q];
        let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
        for p in 0..2 {
            for pp in 0..2 {
                let m = &site.mats[p] * right * site.mats[pp].adjoint();
                rho[p][pp] = left.component_mul(&m).sum();
            }
        }
        rho
    }

    fn bloch_from_rdm(rho: [[Complex64; 2]; 2]) -> [f64; 3] {
        let tr = (rho[0][0] + rho[1][1]).re;
        let off = rho[1][0];
        [2.0 * off.re / tr, 2.0 * off.im / tr, (rho[0][0] - rho[1][1]).re / tr]
    }
}

impl QuantumState for MpsState {
    fn num_qubits(&self) -> usize {
        self.sites.len()
    }

    fn apply_single_qubit(&mut self, u: &SingleQubitUnitary, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let m = u.matrix();
        let site = &mut self.sites[q];
        let a0 = site.mats[0].clone();
        let a1 = std::mem::replace(&mut site.mats[1], CMat::zeros(0, 0));
        site.mats[0] = &a0 * m[0][0] + &a1 * m[0][1];
        site.mats[1] = a0 * m[1][0] + a1 * m[1][1];
        Ok(())
    }

    fn apply_heisenberg(&mut self, coupling: &HeisenbergCoupling) -> Result<()> {
        let n = self.sites.len();
        coupling.check(n)?;
        if coupling.theta == 0.0 {
            return Ok(());
        }
        let j = coupling.qubit_index;
        if self.center < j {
            self.move_center_to(j);
        } else if self.center > j + 1 {
            self.move_center_to(j + 1);
        }

        let dl = self.sites[j].left_dim();
        let dr = self.sites[j + 1].right_dim();
        let gate = coupling.matrix();

        // theta[p1][p2] = A_j[p1] A_{j+1}[p2]
        let mut pair: [[CMat; 2]; 2] = Default::default();
        for (p1, row) in pair.iter_mut().enumerate() {
            for (p2, slot) in row.iter_mut().enumerate() {
                *slot = &self.sites[j].mats[p1] * &self.sites[j + 1].mats[p2];
            }
        }
        let mut theta = CMat::zeros(2 * dl, 2 * dr);
        for p1 in 0..2 {
            for p2 in 0..2 {
                let out = p1 + 2 * p2;
                let mut block = CMat::zeros(dl, dr);
                for q1 in 0..2 {
                    for q2 in 0..2 {
                        let g = gate[out][q1 + 2 * q2];
                        if g != Complex64::new(0.0, 0.0) {
                            block += &pair[q1][q2] * g;
                        }
                    }
                }
                theta.view_mut((p1 * dl, p2 * dr), (dl, dr)).copy_from(&block);
            }
        }

        let svd = theta.svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sigma_max = svd.singular_values[order[0]];
        let cutoff = sigma_max * self.config.trunc_tol.max(SVD_FLOOR);
        let kept: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&k| svd.singular_values[k] >= cutoff)
            .take(self.config.chi_max)
            .collect();
        let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
        let retained: f64 = kept.iter().map(|&k| svd.singular_values[k].powi(2)).sum();
        self.discarded_weight += (total - retained).max(0.0) / total;
        let scale = retained.sqrt();

        let rank = kept.len();
        for p in 0..2 {
            let mut left = CMat::zeros(dl, rank);
            let mut right = CMat::zeros(rank, dr);
            for (c, &k) in kept.iter().enumerate() {
                left.column_mut(c).copy_from(&u.view((p * dl, k), (dl, 1)));
                let s = svd.singular_values[k] / scale;
                let row = v_t.view((k, p * dr), (1, dr)) * Complex64::new(s, 0.0);
                right.row_mut(c).copy_from(&row);
            }
            self.sites[j].mats[p] = left;
            self.sites[j + 1].mats[p] = right;
        }
        self.center = j + 1;
        assert!(
            self.bond_dimensions().iter().all(|&d| d <= self.config.chi_max),
            "bond dimension exceeded chi_max"
        );
        Ok(())
    }

    fn pauli_expectation(&self, axis: Pauli, q: usize) -> Result<f64> {
        self.check_qubit(q)?;
        let lefts = self.left_environments();
        let rights = self.right_environments();
        let b = Self::bloch_from_rdm(self.site_rdm(q, &lefts[q], &rights[q + 1]));
        Ok(match axis {
            Pauli::X => b[0],
            Pauli::Y => b[1],
            Pauli::Z => b[2],
        })
    }

    fn bloch_vectors(&self) -> Vec<[f64; 3]> {
        let lefts = self.left_environments();
        let rights = self.right_environments();
        (0..self.sites.len())
            .map(|q| Self::bloch_from_rdm(self.site_rdm(q, &lefts[q], &rights[q + 1])))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featuremap::sample_haar_unitary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn untruncated() -> MpsConfig {
        MpsConfig {
            chi_max: 4096,
            trunc_tol: 0.0,
        }
    }

    fn max_amp_diff(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Applies the same random nearest-neighbour circuit to both backends.
    fn twin_circuit(n: usize, gates: usize, seed: u64) -> (StateVector, MpsState) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sv = StateVector::zero(n).unwrap();
        let mut mps = MpsState::zero(n, untruncated()).unwrap();
        for q in 0..n {
            let u = sample_haar_unitary(&mut rng);
            sv.apply_single_qubit(&u, q).unwrap();
            mps.apply_single_qubit(&u, q).unwrap();
        }
        for _ in 0..gates {
            if rng.random_bool(0.7) {
                let c = HeisenbergCoupling::new(rng.random_range(0..n - 1), rng.random_range(-2.0..2.0));
                sv.apply_heisenberg(&c).unwrap();
                mps.apply_heisenberg(&c).unwrap();
            } else {
                let q = rng.random_range(0..n);
                let u = sample_haar_unitary(&mut rng);
                sv.apply_single_qubit(&u, q).unwrap();
                mps.apply_single_qubit(&u, q).unwrap();
            }
        }
        (sv, mps)
    }

    #[test]
    fn product_state_export() {
        let mps = MpsState::zero(3, MpsConfig::default()).unwrap();
        let sv = mps.to_statevector().unwrap();
        assert_eq!(sv, StateVector::zero(3).unwrap());
        assert_eq!(mps.bond_dimensions(), vec![1, 1]);
    }

    #[test]
    fn wide_product_state_is_cheap() {
        let mut mps = MpsState::zero(101, MpsConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for q in 0..101 {
            mps.apply_single_qubit(&sample_haar_unitary(&mut rng), q).unwrap();
        }
        assert_eq!(mps.max_bond(), 1);
        assert!(matches!(mps.to_statevector(), Err(Error::Capacity(_))));
        assert!((mps.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_export_bound() {
        assert!(MpsState::zero(20, MpsConfig::default()).unwrap().to_statevector().is_ok());
        assert!(matches!(
            MpsState::zero(21, MpsConfig::default()).unwrap().to_statevector(),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn identity_and_flip() {
        let mut mps = MpsState::zero(4, MpsConfig::default()).unwrap();
        let before = mps.clone();
        mps.apply_single_qubit(&SingleQubitUnitary::identity(), 2).unwrap();
        for (a, b) in mps.sites.iter().zip(&before.sites) {
            for p in 0..2 {
                assert!((&a.mats[p] - &b.mats[p]).norm() < 1e-15);
            }
        }
        mps.apply_single_qubit(&SingleQubitUnitary::pauli(Pauli::X), 2).unwrap();
        let sv = mps.to_statevector().unwrap();
        assert!((sv.amplitudes()[4].re - 1.0).abs() < 1e-15);
        assert!(matches!(
            mps.apply_single_qubit(&SingleQubitUnitary::identity(), 4),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn single_qubit_gates_match_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sv = StateVector::zero(8).unwrap();
        let mut mps = MpsState::zero(8, MpsConfig::default()).unwrap();
        for _ in 0..40 {
            let q = rng.random_range(0..8);
            let u = sample_haar_unitary(&mut rng);
            sv.apply_single_qubit(&u, q).unwrap();
            mps.apply_single_qubit(&u, q).unwrap();
        }
        assert!(max_amp_diff(&sv, &mps.to_statevector().unwrap()) < 1e-10);
    }

    #[test]
    fn zero_angle_keeps_bonds() {
        let (_, mut mps) = twin_circuit(6, 10, 2);
        let bonds = mps.bond_dimensions();
        mps.apply_heisenberg(&HeisenbergCoupling::new(3, 0.0)).unwrap();
        assert_eq!(bonds, mps.bond_dimensions());
    }

    #[test]
    fn coupling_on_zero_state_stays_product() {
        let mut mps = MpsState::zero(5, untruncated()).unwrap();
        mps.apply_heisenberg(&HeisenbergCoupling::new(1, 0.7)).unwrap();
        assert_eq!(mps.bond_dimensions(), vec![1, 1, 1, 1]);
        let sv = mps.to_statevector().unwrap();
        assert!((sv.amplitudes()[0] - Complex64::from_polar(1.0, -0.7)).norm() < 1e-12);
    }

    #[test]
    fn one_coupling_matches_exact() {
        let mut sv = StateVector::zero(4).unwrap();
        let mut mps = MpsState::zero(4, untruncated()).unwrap();
        let x = SingleQubitUnitary::pauli(Pauli::X);
        sv.apply_single_qubit(&x, 1).unwrap();
        mps.apply_single_qubit(&x, 1).unwrap();
        let c = HeisenbergCoupling::new(1, 0.4);
        sv.apply_heisenberg(&c).unwrap();
        mps.apply_heisenberg(&c).unwrap();
        assert!(max_amp_diff(&sv, &mps.to_statevector().unwrap()) < 1e-12);
        assert_eq!(mps.bond_dimensions(), vec![1, 2, 1]);
    }

    #[test]
    fn random_circuit_expectations_match_exact() {
        let (sv, mps) = twin_circuit(10, 120, 31);
        let exact = sv.bloch_vectors();
        let approx = mps.bloch_vectors();
        for (e, a) in exact.iter().zip(&approx) {
            for k in 0..3 {
                assert!((e[k] - a[k]).abs() < 1e-8);
            }
        }
        for q in 0..10 {
            let z = mps.pauli_expectation(Pauli::Z, q).unwrap();
            assert!((z - exact[q][2]).abs() < 1e-8);
        }
        assert!((mps.norm_sqr() - 1.0).abs() < 1e-8);
        assert!(max_amp_diff(&sv, &mps.to_statevector().unwrap()) < 1e-8);
    }

    #[test]
    fn zero_state_expectations() {
        let mps = MpsState::zero(4, MpsConfig::default()).unwrap();
        for q in 0..4 {
            assert_eq!(mps.pauli_expectation(Pauli::Z, q).unwrap(), 1.0);
            assert_eq!(mps.pauli_expectation(Pauli::Y, q).unwrap(), 0.0);
        }
    }

    #[test]
    fn chi_cap_is_enforced_and_norm_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = MpsConfig {
            chi_max: 2,
            trunc_tol: 0.0,
        };
        let mut mps = MpsState::zero(8, cfg).unwrap();
        for q in 0..8 {
            mps.apply_single_qubit(&sample_haar_unitary(&mut rng), q).unwrap();
        }
        for layer in 0..6 {
            for j in (layer % 2..7).step_by(2) {
                mps.apply_heisenberg(&HeisenbergCoupling::new(j, rng.random_range(0.3..1.2)))
                    .unwrap();
            }
        }
        assert!(mps.max_bond() <= 2);
        assert!(mps.discarded_weight() > 0.0);
        assert!((mps.norm_sqr() - 1.0).abs() < 1e-8);
        assert!((mps.to_statevector().unwrap().norm_sqr() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn larger_chi_converges_once_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 8;
        let us: Vec<_> = (0..n).map(|_| sample_haar_unitary(&mut rng)).collect();
        let couplings: Vec<_> = (0..4)
            .flat_map(|layer| (layer % 2..n - 1).step_by(2).collect::<Vec<_>>())
            .map(|j| HeisenbergCoupling::new(j, rng.random_range(-1.0..1.0)))
            .collect();
        let run = |chi| {
            let mut m = MpsState::zero(n, MpsConfig { chi_max: chi, trunc_tol: 0.0 }).unwrap();
            for (q, u) in us.iter().enumerate() {
                m.apply_single_qubit(u, q).unwrap();
            }
            for c in &couplings {
                m.apply_heisenberg(c).unwrap();
            }
            m.bloch_vectors()
        };
        let a = run(16);
        let b = run(64);
        for (x, y) in a.iter().zip(&b) {
            for k in 0..3 {
                assert!((x[k] - y[k]).abs() < 1e-10);
            }
        }
    }
}
