//! Exact statevector simulation.
//!
//! Amplitudes are stored densely, `2^n` complex numbers, with qubit 0 as the
//! least significant bit of the basis index: basis state `|q_{n-1} ... q_1 q_0>`
//! lives at index `sum_k q_k 2^k`.
//!
//! Only the two gate families the Heisenberg feature map needs are supported:
//! arbitrary single-qubit unitaries and the nearest-neighbour exchange gate
//! `exp(-i theta (XX + YY + ZZ))`. The exchange gate is applied through its
//! closed form. `XX + YY + ZZ` has eigenvalue `+1` on the triplet and `-3` on
//! the singlet, so `|00>` and `|11>` pick up `e^{-i theta}` while the
//! `{|01>, |10>}` block mixes with
//!
//! ```text
//! 1/2 [ e^{-iθ} + e^{3iθ}   e^{-iθ} - e^{3iθ} ]
//!     [ e^{-iθ} - e^{3iθ}   e^{-iθ} + e^{3iθ} ]
//! ```

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the dense backend accepts.
pub const MAX_EXACT_QUBITS: usize = 30;

const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn label(self) -> &'static str {
        match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        }
    }
}

/// A validated 2x2 unitary, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitUnitary {
    m: [[Complex64; 2]; 2],
}

impl SingleQubitUnitary {
    pub fn new(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let u = Self { m };
        let err = u.unitarity_error();
        if !err.is_finite() || err > UNITARITY_TOL {
            return Err(Error::Validation(format!(
                "matrix is not unitary (max |UU^† - I| = {err:e})"
            )));
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self { m: [[o, z], [z, o]] }
    }

    pub fn pauli(axis: Pauli) -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let m = match axis {
            Pauli::X => [[z, o], [o, z]],
            Pauli::Y => [[z, -i], [i, z]],
            Pauli::Z => [[o, z], [z, -o]],
        };
        Self { m }
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { m: [[h, h], [h, -h]] }
    }

    /// Rotation taking the eigenbasis of `axis` onto the computational basis,
    /// so that a Z measurement afterwards measures `axis`.
    pub fn basis_change(axis: Pauli) -> Self {
        match axis {
            Pauli::Z => Self::identity(),
            Pauli::X => Self::hadamard(),
            Pauli::Y => {
                // H S^dagger
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let a = Complex64::new(h, 0.0);
                let b = Complex64::new(0.0, -h);
                Self {
                    m: [[a, b], [a, -b]],
                }
            }
        }
    }

    pub fn matrix(&self) -> &[[Complex64; 2]; 2] {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self {
            m: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]],
        }
    }

    /// Maximum entrywise deviation of `U U^†` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let m = &self.m;
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let v = m[r][0] * m[c][0].conj() + m[r][1] * m[c][1].conj();
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((v - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// `exp(-i theta (X_j X_{j+1} + Y_j Y_{j+1} + Z_j Z_{j+1}))` on qubits `(j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergCoupling {
    pub qubit_index: usize,
    pub theta: f64,
}

impl HeisenbergCoupling {
    pub fn new(qubit_index: usize, theta: f64) -> Self {
        Self { qubit_index, theta }
    }

    pub(crate) fn check(&self, num_qubits: usize) -> Result<()> {
        if self.qubit_index + 1 >= num_qubits {
            return Err(Error::Index(format!(
                "coupling on ({}, {}) needs a neighbour inside a {num_qubits}-qubit register",
                self.qubit_index,
                self.qubit_index + 1
            )));
        }
        Ok(())
    }

    /// `(diag, same, swap)`: phase on `|00>`/`|11>` and the two entries of the
    /// `{|01>, |10>}` block.
    pub fn block(&self) -> (Complex64, Complex64, Complex64) {
        let triplet = Complex64::from_polar(1.0, -self.theta);
        let singlet = Complex64::from_polar(1.0, 3.0 * self.theta);
        (triplet, (triplet + singlet) * 0.5, (triplet - singlet) * 0.5)
    }

    /// Dense 4x4 gate in the two-qubit basis `b_j + 2 b_{j+1}`.
    pub fn matrix(&self) -> [[Complex64; 4]; 4] {
        let (d, s, w) = self.block();
        let z = Complex64::new(0.0, 0.0);
        [[d, z, z, z], [z, s, w, z], [z, w, s, z], [z, z, z, d]]
    }
}

/// Operations shared by the exact and MPS backends.
pub trait QuantumState {
    fn num_qubits(&self) -> usize;

    fn apply_single_qubit(&mut self, u: &SingleQubitUnitary, q: usize) -> Result<()>;

    fn apply_heisenberg(&mut self, coupling: &HeisenbergCoupling) -> Result<()>;

    fn pauli_expectation(&self, axis: Pauli, q: usize) -> Result<f64>;

    /// `(<X_k>, <Y_k>, <Z_k>)` for every qubit `k`.
    fn bloch_vectors(&self) -> Vec<[f64; 3]>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0^n>`.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_EXACT_QUBITS {
            return Err(Error::Capacity(format!(
                "exact backend supports 1..={MAX_EXACT_QUBITS} qubits, got {num_qubits}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1usize << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes; the vector is normalised on the way in.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Validation(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_EXACT_QUBITS {
            return Err(Error::Capacity(format!("{num_qubits} qubits")));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Validation("amplitudes have zero norm".into()));
        }
        Ok(Self {
            num_qubits,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::Index(format!(
                "qubit {q} outside a {}-qubit register",
                self.num_qubits
            )));
        }
        Ok(())
    }

    /// Draws `shots` basis-state indices from `|amplitude|^2`.
    pub fn sample_bitstrings(&self, shots: usize, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(shots, &mut rng)
    }

    pub(crate) fn sample_with<R: rand::Rng>(&self, shots: usize, rng: &mut R) -> Vec<u64> {
        let dist = WeightedIndex::new(self.probabilities())
            .expect("normalised state has positive total probability");
        (0..shots).map(|_| dist.sample(rng) as u64).collect()
    }

    fn bloch_of(&self, q: usize) -> [f64; 3] {
        let stride = 1usize << q;
        let mut off = Complex64::new(0.0, 0.0);
        let mut z = 0.0;
        for chunk in self.amplitudes.chunks_exact(2 * stride) {
            let (lo, hi) = chunk.split_at(stride);
            for (a0, a1) in lo.iter().zip(hi) {
                off += a0.conj() * a1;
                z += a0.norm_sqr() - a1.norm_sqr();
            }
        }
        [2.0 * off.re, 2.0 * off.im, z]
    }
}

impl QuantumState for StateVector {
    fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    fn apply_single_qubit(&mut self, u: &SingleQubitUnitary, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let [[u00, u01], [u10, u11]] = *u.matrix();
        let stride = 1usize << q;
        for chunk in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = u00 * x0 + u01 * x1;
                *a1 = u10 * x0 + u11 * x1;
            }
        }
        Ok(())
    }

    fn apply_heisenberg(&mut self, coupling: &HeisenbergCoupling) -> Result<()> {
        coupling.check(self.num_qubits)?;
        if coupling.theta == 0.0 {
            return Ok(());
        }
        let (diag, same, swap) = coupling.block();
        let j = coupling.qubit_index;
        let lo_bit = 1usize << j;
        let hi_bit = lo_bit << 1;
        let pair = lo_bit | hi_bit;
        for base in 0..self.amplitudes.len() {
            if base & pair != 0 {
                continue;
            }
            let i01 = base | lo_bit;
            let i10 = base | hi_bit;
            let i11 = base | pair;
            self.amplitudes[base] *= diag;
            self.amplitudes[i11] *= diag;
            let (a, b) = (self.amplitudes[i01], self.amplitudes[i10]);
            self.amplitudes[i01] = same * a + swap * b;
            self.amplitudes[i10] = swap * a + same * b;
        }
        Ok(())
    }

    fn pauli_expectation(&self, axis: Pauli, q: usize) -> Result<f64> {
        self.check_qubit(q)?;
        let b = self.bloch_of(q);
        Ok(match axis {
            Pauli::X => b[0],
            Pauli::Y => b[1],
            Pauli::Z => b[2],
        })
    }

    fn bloch_vectors(&self) -> Vec<[f64; 3]> {
        (0..self.num_qubits).map(|q| self.bloch_of(q)).collect()
    }
}
