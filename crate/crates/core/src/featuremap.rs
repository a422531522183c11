//! Heisenberg feature-map circuits.
//!
//! A data vector `x` is embedded by preparing a fixed Haar-random product
//! state and then applying `R` repetitions of a brickwork block: first every
//! coupling on an even pair `(j, j+1)`, then every coupling on an odd pair,
//! each with angle `alpha * x[layout(r, j)]`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::{MpsConfig, MpsState};
use crate::simulator::{HeisenbergCoupling, QuantumState, SingleQubitUnitary, StateVector};

/// Draws a 2x2 unitary from the Haar measure.
///
/// QR of a complex Ginibre matrix, with the columns of `Q` rephased by the
/// phases of `diag(R)` so the result is Haar rather than QR-biased.
pub fn sample_haar_unitary<R: Rng + ?Sized>(rng: &mut R) -> SingleQubitUnitary {
    let mut gauss = || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    };
    let z = Matrix2::new(gauss(), gauss(), gauss(), gauss());
    let qr = z.qr();
    let q = qr.q();
    let r = qr.r();
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for col in 0..2 {
        let d = r[(col, col)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for row in 0..2 {
            m[row][col] = q[(row, col)] * phase;
        }
    }
    SingleQubitUnitary::new(m).expect("QR of a Gaussian matrix yields a unitary")
}

/// Which feature drives each `(repetition, coupling)` slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    assignment: Vec<Vec<usize>>,
}

/// Outcome of [`default_layout`]: the layout plus any features left unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutPlan {
    pub layout: FeatureLayout,
    pub unused_features: Vec<usize>,
}

impl LayoutPlan {
    pub fn warning(&self) -> Option<String> {
        if self.unused_features.is_empty() {
            None
        } else {
            Some(format!(
                "{} feature(s) have no coupling slot and are ignored: {:?}",
                self.unused_features.len(),
                self.unused_features
            ))
        }
    }
}

/// Cyclic assignment: slot `s = r * (n - 1) + j` reads feature `s mod F`.
pub fn default_layout(num_features: usize, num_qubits: usize, repetitions: usize) -> LayoutPlan {
    let couplings = num_qubits.saturating_sub(1);
    let assignment: Vec<Vec<usize>> = (0..repetitions)
        .map(|r| (0..couplings).map(|j| (r * couplings + j) % num_features.max(1)).collect())
        .collect();
    let slots = repetitions * couplings;
    let unused_features = (slots.min(num_features)..num_features).collect();
    LayoutPlan {
        layout: FeatureLayout { assignment },
        unused_features,
    }
}

impl FeatureLayout {
    pub fn from_assignment(assignment: Vec<Vec<usize>>) -> Self {
        Self { assignment }
    }

    pub fn feature_for(&self, repetition: usize, coupling: usize) -> usize {
        self.assignment[repetition][coupling]
    }

    pub fn assignment(&self) -> &[Vec<usize>] {
        &self.assignment
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub num_qubits: usize,
    /// Angle scale, the evolution time over the Trotter step count.
    pub alpha: f64,
    pub repetitions: usize,
    pub haar_seed: u64,
    pub num_features: usize,
    pub layout: FeatureLayout,
}

impl FeatureMapSpec {
    /// Spec with the cyclic default layout.
    pub fn new(num_qubits: usize, num_features: usize, alpha: f64, repetitions: usize, haar_seed: u64) -> Result<Self> {
        let plan = default_layout(num_features, num_qubits, repetitions);
        if let Some(w) = plan.warning() {
            log::warn!("{w}");
        }
        let spec = Self {
            num_qubits,
            alpha,
            repetitions,
            haar_seed,
            num_features,
            layout: plan.layout,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_qubits < 2 {
            return Err(Error::Validation("feature map needs at least 2 qubits".into()));
        }
        if self.repetitions == 0 || self.num_features == 0 {
            return Err(Error::Validation("repetitions and num_features must be >= 1".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Validation("alpha must be finite".into()));
        }
        let a = self.layout.assignment();
        if a.len() != self.repetitions
            || a.iter().any(|row| row.len() != self.num_qubits - 1)
            || a.iter().flatten().any(|&f| f >= self.num_features)
        {
            return Err(Error::Validation(
                "layout must map every (repetition, coupling) slot to a valid feature".into(),
            ));
        }
        Ok(())
    }

    /// The fixed Haar layer, one unitary per qubit, derived from `haar_seed`.
    pub fn haar_layer(&self) -> Vec<SingleQubitUnitary> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.haar_seed);
        (0..self.num_qubits).map(|_| sample_haar_unitary(&mut rng)).collect()
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Single { qubit: usize, unitary: SingleQubitUnitary },
    Coupling(HeisenbergCoupling),
}

/// A spec with its Haar layer materialised, ready to embed many vectors.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    spec: FeatureMapSpec,
    haar: Vec<SingleQubitUnitary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Mps(MpsConfig),
}

#[derive(Debug, Clone)]
pub enum BackendState {
    Exact(StateVector),
    Mps(MpsState),
}

impl BackendState {
    pub fn as_quantum_state(&self) -> &dyn QuantumState {
        match self {
            BackendState::Exact(s) => s,
            BackendState::Mps(s) => s,
        }
    }
}

impl FeatureMap {
    pub fn new(spec: FeatureMapSpec) -> Result<Self> {
        spec.validate()?;
        let haar = spec.haar_layer();
        Ok(Self { spec, haar })
    }

    pub fn spec(&self) -> &FeatureMapSpec {
        &self.spec
    }

    pub fn haar_layer(&self) -> &[SingleQubitUnitary] {
        &self.haar
    }

    pub fn build_circuit(&self, x: &[f64]) -> Result<Vec<Gate>> {
        let spec = &self.spec;
        if x.len() != spec.num_features {
            return Err(Error::Validation(format!(
                "feature vector has {} entries, feature map expects {}",
                x.len(),
                spec.num_features
            )));
        }
        let n = spec.num_qubits;
        let mut gates = Vec::with_capacity(n + spec.repetitions * (n - 1));
        gates.extend(
            self.haar
                .iter()
                .enumerate()
                .map(|(qubit, u)| Gate::Single { qubit, unitary: *u }),
        );
        for r in 0..spec.repetitions {
            for parity in [0, 1] {
                for j in (parity..n - 1).step_by(2) {
                    let theta = spec.alpha * x[spec.layout.feature_for(r, j)];
                    gates.push(Gate::Coupling(HeisenbergCoupling::new(j, theta)));
                }
            }
        }
        Ok(gates)
    }

    /// Runs the circuit for `x` on an already-initialised `|0^n>` state.
    pub fn apply_to<S: QuantumState>(&self, state: &mut S, x: &[f64]) -> Result<()> {
        for gate in self.build_circuit(x)? {
            match gate {
                Gate::Single { qubit, unitary } => state.apply_single_qubit(&unitary, qubit)?,
                Gate::Coupling(c) => state.apply_heisenberg(&c)?,
            }
        }
        Ok(())
    }

    pub fn execute(&self, x: &[f64], backend: Backend) -> Result<BackendState> {
        match backend {
            Backend::Exact => {
                let mut s = StateVector::zero(self.spec.num_qubits)?;
                self.apply_to(&mut s, x)?;
                Ok(BackendState::Exact(s))
            }
            Backend::Mps(cfg) => {
                let mut s = MpsState::zero(self.spec.num_qubits, cfg)?;
                self.apply_to(&mut s, x)?;
                Ok(BackendState::Mps(s))
            }
        }
    }

    pub fn execute_exact(&self, x: &[f64]) -> Result<StateVector> {
        let mut s = StateVector::zero(self.spec.num_qubits)?;
        self.apply_to(&mut s, x)?;
        Ok(s)
    }
}
