//! Shot-based Pauli estimation under independent per-qubit readout errors,
//! with twirled readout error extinction (TREX).
//!
//! Twirling: before each shot every qubit is flipped by an X gate with
//! probability 1/2, and the recorded bit is XOR-ed with the flip afterwards.
//! An X immediately before an ideal Z measurement is the same as XOR-ing the
//! ideal outcome, so the twirl is applied to sampled outcomes rather than to
//! the state. Averaged over twirls the readout channel on `<Z_q>` becomes a
//! pure attenuation `lambda_q = 1 - p10_q - p01_q`, which an empty-circuit
//! calibration run measures and the estimate divides out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::FeatureMap;
use crate::pqf::PqfVector;
use crate::seeds::{derive_seed, rng_for};
use crate::simulator::{Pauli, QuantumState, SingleQubitUnitary, StateVector};

/// Calibrated attenuations below this are treated as unusable.
pub const MIN_ATTENUATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutNoiseModel {
    /// `Pr(read 1 | true 0)` per qubit.
    pub p10: Vec<f64>,
    /// `Pr(read 0 | true 1)` per qubit.
    pub p01: Vec<f64>,
}

impl ReadoutNoiseModel {
    pub fn new(p10: Vec<f64>, p01: Vec<f64>) -> Result<Self> {
        let model = Self { p10, p01 };
        model.validate()?;
        Ok(model)
    }

    pub fn noiseless(num_qubits: usize) -> Self {
        Self {
            p10: vec![0.0; num_qubits],
            p01: vec![0.0; num_qubits],
        }
    }

    pub fn uniform(num_qubits: usize, p10: f64, p01: f64) -> Result<Self> {
        Self::new(vec![p10; num_qubits], vec![p01; num_qubits])
    }

    pub fn validate(&self) -> Result<()> {
        if self.p10.len() != self.p01.len() {
            return Err(Error::Validation("p10 and p01 lists differ in length".into()));
        }
        let ok = |p: &f64| (0.0..0.5).contains(p);
        if !self.p10.iter().all(ok) || !self.p01.iter().all(ok) {
            return Err(Error::Validation("readout error rates must lie in [0, 0.5)".into()));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.p10.len()
    }

    fn check_width(&self, n: usize) -> Result<()> {
        if self.num_qubits() != n {
            return Err(Error::Validation(format!(
                "noise model covers {} qubits, state has {n}",
                self.num_qubits()
            )));
        }
        Ok(())
    }

    /// Passes one ideal outcome through the readout channel.
    fn corrupt<R: Rng>(&self, bits: u64, rng: &mut R) -> u64 {
        let mut out = bits;
        for k in 0..self.num_qubits() {
            let one = (bits >> k) & 1 == 1;
            let p = if one { self.p01[k] } else { self.p10[k] };
            if p > 0.0 && rng.random_bool(p) {
                out ^= 1 << k;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrexConfig {
    pub shots_per_circuit: usize,
    pub calibration_shots: usize,
    pub twirl_seed: u64,
}

impl TrexConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots_per_circuit == 0 || self.calibration_shots == 0 {
            return Err(Error::Validation("shot counts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Unmitigated `<Z_q>` from `shots` noisy readouts.
pub fn noisy_sample_z(
    state: &StateVector,
    q: usize,
    model: &ReadoutNoiseModel,
    shots: usize,
    seed: u64,
) -> Result<f64> {
    model.check_width(state.num_qubits())?;
    state.pauli_expectation(Pauli::Z, q)?;
    if shots == 0 {
        return Err(Error::Validation("shots must be >= 1".into()));
    }
    let mut rng = rng_for(seed, 0);
    let outcomes = state.sample_with(shots, &mut rng);
    let mut sum = 0i64;
    for b in outcomes {
        let r = model.corrupt(b, &mut rng);
        sum += if (r >> q) & 1 == 0 { 1 } else { -1 };
    }
    Ok(sum as f64 / shots as f64)
}

/// Per-qubit sign-corrected `<Z>` means under twirled noisy readout.
fn twirled_means<R: Rng>(
    state: &StateVector,
    model: &ReadoutNoiseModel,
    shots: usize,
    rng: &mut R,
) -> Vec<f64> {
    let n = state.num_qubits();
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut sums = vec![0i64; n];
    for b in state.sample_with(shots, rng) {
        let twirl = rng.random::<u64>() & mask;
        let recorded = model.corrupt(b ^ twirl, rng);
        let corrected = recorded ^ twirl;
        for (k, s) in sums.iter_mut().enumerate() {
            *s += if (corrected >> k) & 1 == 0 { 1 } else { -1 };
        }
    }
    sums.into_iter().map(|s| s as f64 / shots as f64).collect()
}

/// Empty-circuit attenuation estimates for every qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub lambdas: Vec<f64>,
    pub shots: usize,
}

impl Calibration {
    pub fn measure(model: &ReadoutNoiseModel, shots: usize, seed: u64) -> Result<Self> {
        let zero = StateVector::zero(model.num_qubits())?;
        let mut rng = rng_for(seed, 0xCA1B);
        Ok(Self {
            lambdas: twirled_means(&zero, model, shots, &mut rng),
            shots,
        })
    }

    fn lambda(&self, q: usize) -> Result<f64> {
        let lambda = self.lambdas[q];
        if lambda < MIN_ATTENUATION {
            return Err(Error::MitigationUnreliable { qubit: q, lambda });
        }
        Ok(lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MitigatedExpectation {
    /// `raw / lambda`, clipped to `[-1, 1]`.
    pub value: f64,
    /// Twirled but uncorrected estimate.
    pub raw: f64,
    pub lambda: f64,
    /// First-order propagated standard error of the unclipped ratio.
    pub std_error: f64,
}

fn propagate(raw: f64, lambda: f64, target_shots: usize, calibration_shots: usize) -> f64 {
    let var_raw = (1.0 - raw * raw).max(0.0) / target_shots as f64;
    let var_lambda = (1.0 - lambda * lambda).max(0.0) / calibration_shots as f64;
    (var_raw / (lambda * lambda) + raw * raw * var_lambda / lambda.powi(4)).sqrt()
}

fn rotated(state: &StateVector, axis: Pauli, qubits: impl IntoIterator<Item = usize>) -> Result<StateVector> {
    let mut s = state.clone();
    if axis != Pauli::Z {
        let u = SingleQubitUnitary::basis_change(axis);
        for q in qubits {
            s.apply_single_qubit(&u, q)?;
        }
    }
    Ok(s)
}

/// TREX-mitigated estimate of `<axis_q>`.
pub fn trex_estimate(
    state: &StateVector,
    axis: Pauli,
    q: usize,
    model: &ReadoutNoiseModel,
    config: &TrexConfig,
) -> Result<MitigatedExpectation> {
    config.validate()?;
    model.check_width(state.num_qubits())?;
    state.pauli_expectation(axis, q)?;
    let calibration = Calibration::measure(model, config.calibration_shots, config.twirl_seed)?;
    let lambda = calibration.lambda(q)?;
    let measured = rotated(state, axis, [q])?;
    let mut rng = rng_for(config.twirl_seed, 0x7A56);
    let raw = twirled_means(&measured, model, config.shots_per_circuit, &mut rng)[q];
    Ok(MitigatedExpectation {
        value: (raw / lambda).clamp(-1.0, 1.0),
        raw,
        lambda,
        std_error: propagate(raw, lambda, config.shots_per_circuit, config.calibration_shots),
    })
}

/// All `3n` projected features estimated from shots with TREX, using a
/// calibration measured once for the call.
pub fn pqf_with_shots(
    feature_map: &FeatureMap,
    x: &[f64],
    model: &ReadoutNoiseModel,
    config: &TrexConfig,
) -> Result<PqfVector> {
    config.validate()?;
    let calibration = Calibration::measure(model, config.calibration_shots, config.twirl_seed)?;
    pqf_with_calibration(feature_map, x, model, &calibration, config.shots_per_circuit, config.twirl_seed)
}

/// Like [`pqf_with_shots`] with a shared calibration; the three measurement
/// bases each get `shots` twirled shots on all qubits at once.
pub fn pqf_with_calibration(
    feature_map: &FeatureMap,
    x: &[f64],
    model: &ReadoutNoiseModel,
    calibration: &Calibration,
    shots: usize,
    seed: u64,
) -> Result<PqfVector> {
    let state = feature_map.execute_exact(x)?;
    let n = state.num_qubits();
    model.check_width(n)?;
    let lambdas: Vec<f64> = (0..n).map(|q| calibration.lambda(q)).collect::<Result<_>>()?;
    let mut values = vec![0.0; 3 * n];
    for (a, axis) in Pauli::ALL.into_iter().enumerate() {
        let measured = rotated(&state, axis, 0..n)?;
        let mut rng = rng_for(seed, derive_seed(0xB45E, a as u64));
        let raw = twirled_means(&measured, model, shots, &mut rng);
        for q in 0..n {
            values[3 * q + a] = (raw[q] / lambdas[q]).clamp(-1.0, 1.0);
        }
    }
    PqfVector::from_values(values)
}
