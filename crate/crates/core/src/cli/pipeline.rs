//! Model pipelines: classical boosted trees on raw features, and the
//! quantum chain imputer → scaler → feature shuffle → PQF → boosted trees.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BackendConfig, Metric, QuantumConfig};
use crate::error::{Error, Result};
use crate::evaluation::{auc, cdr, standard_metrics, ScoredPredictions};
use crate::featuremap::{FeatureMap, FeatureMapSpec};
use crate::learners::gbdt::{GbdtModel, GbdtParams, GbdtTrainer};
use crate::learners::preprocess::{FeaturePermutation, MedianImputer, ScalerParams};
use crate::noise::{pqf_with_calibration, Calibration, ReadoutNoiseModel, TrexConfig};
use crate::pqf::PqfTransformer;
use crate::seeds::derive_seed;

pub fn metric_value(metric: Metric, scores: &[f64], labels: &[u8]) -> Result<f64> {
    match metric {
        Metric::Auc => auc(scores, labels),
        Metric::Accuracy => Ok(standard_metrics(&ScoredPredictions::new(scores.to_vec(), labels.to_vec())?, 0.5)?.accuracy),
        Metric::Cdr => cdr(&ScoredPredictions::new(scores.to_vec(), labels.to_vec())?),
    }
}

/// Seeds of one quantum model instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumSeeds {
    pub model_seed: u64,
    pub haar_seed: u64,
    pub shuffle_seed: u64,
}

impl QuantumSeeds {
    /// The first configured seed uses the configured Haar and shuffle seeds
    /// directly; later ones derive theirs.
    pub fn for_index(cfg: &QuantumConfig, i: usize) -> Self {
        let s = cfg.seeds[i];
        if i == 0 {
            Self {
                model_seed: s,
                haar_seed: cfg.haar_seed,
                shuffle_seed: cfg.shuffle_seed,
            }
        } else {
            Self {
                model_seed: s,
                haar_seed: derive_seed(cfg.haar_seed, s),
                shuffle_seed: derive_seed(cfg.shuffle_seed, s),
            }
        }
    }
}

/// Imputer, scaler and column shuffle fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub imputer: MedianImputer,
    pub scaler: ScalerParams,
    pub permutation: FeaturePermutation,
}

impl Preprocessor {
    pub fn fit(rows: &[Vec<f64>], range: (f64, f64), shuffle_seed: u64) -> Self {
        let imputer = MedianImputer::fit(rows);
        let scaler = ScalerParams::fit(&imputer.transform(rows), range);
        let f = rows.first().map_or(0, Vec::len);
        Self {
            imputer,
            scaler,
            permutation: FeaturePermutation::random(f, shuffle_seed),
        }
    }

    /// Imputed and scaled, in the original column order.
    pub fn scale(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.scaler.transform(&self.imputer.transform(rows))
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.permutation.apply(&self.scale(rows))
    }
}

/// Runs rows through a feature map on one backend and counts executions.
pub struct Projector {
    feature_map: FeatureMap,
    backend: BackendConfig,
    readout: Option<(ReadoutNoiseModel, TrexConfig)>,
    executions: AtomicUsize,
}

impl Projector {
    pub fn new(spec: FeatureMapSpec, backend: &BackendConfig) -> Result<Self> {
        let readout = backend.readout(spec.num_qubits)?;
        Ok(Self {
            feature_map: FeatureMap::new(spec)?,
            backend: backend.clone(),
            readout,
            executions: AtomicUsize::new(0),
        })
    }

    pub fn executions(&self) -> usize {
        self.executions.load(Ordering::Relaxed)
    }

    pub fn output_dim(&self) -> usize {
        3 * self.feature_map.spec().num_qubits
    }

    /// Projects every row with exactly one circuit execution each. `stream`
    /// separates the shot-noise streams of different calls.
    pub fn project(&self, rows: &[Vec<f64>], stream: u64) -> Result<Vec<Vec<f64>>> {
        let out: Vec<Vec<f64>> = match (&self.readout, self.backend.simulator()) {
            (None, Some(backend)) => {
                let t = PqfTransformer::new(self.feature_map.clone(), backend);
                let v = t.transform(rows)?;
                if t.executions() != rows.len() {
                    return Err(Error::Validation(format!(
                        "{} circuit executions for {} rows",
                        t.executions(),
                        rows.len()
                    )));
                }
                v.into_iter().map(|p| p.into_values()).collect()
            }
            (Some((model, trex)), _) => {
                let call_seed = derive_seed(trex.twirl_seed, stream);
                let cal = Calibration::measure(model, trex.calibration_shots, call_seed)?;
                let counter = AtomicUsize::new(0);
                let v = rows
                    .par_iter()
                    .enumerate()
                    .map(|(i, x)| {
                        counter.fetch_add(1, Ordering::Relaxed);
                        pqf_with_calibration(
                            &self.feature_map,
                            x,
                            model,
                            &cal,
                            trex.shots_per_circuit,
                            derive_seed(call_seed, i as u64),
                        )
                        .map(|p| p.into_values())
                    })
                    .collect::<Result<Vec<_>>>()?;
                if counter.into_inner() != rows.len() {
                    return Err(Error::Validation("shot backend executed an unexpected circuit count".into()));
                }
                v
            }
            (None, None) => unreachable!("shot backends always carry a readout model"),
        };
        self.executions.fetch_add(rows.len(), Ordering::Relaxed);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumHyper {
    pub alpha: f64,
    pub gbdt: GbdtParams,
}

/// A fitted quantum pipeline.
pub struct QuantumModel {
    pub preprocessor: Preprocessor,
    pub projector: Projector,
    pub gbdt: GbdtModel,
}

pub fn feature_map_spec(cfg: &QuantumConfig, num_features: usize, alpha: f64, haar_seed: u64) -> Result<FeatureMapSpec> {
    FeatureMapSpec::new(cfg.num_qubits, num_features, alpha, cfg.repetitions, haar_seed)
}

impl QuantumModel {
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        cfg: &QuantumConfig,
        backend: &BackendConfig,
        hyper: QuantumHyper,
        seeds: QuantumSeeds,
        rows: &[Vec<f64>],
        labels: &[u8],
        weights: &[f64],
        stream: u64,
    ) -> Result<Self> {
        Ok(Self::fit_with_features(cfg, backend, hyper, seeds, rows, labels, weights, stream)?.0)
    }

    /// As [`QuantumModel::fit`], also returning the projected training rows.
    #[allow(clippy::too_many_arguments)]
    pub fn fit_with_features(
        cfg: &QuantumConfig,
        backend: &BackendConfig,
        hyper: QuantumHyper,
        seeds: QuantumSeeds,
        rows: &[Vec<f64>],
        labels: &[u8],
        weights: &[f64],
        stream: u64,
    ) -> Result<(Self, Vec<Vec<f64>>)> {
        let preprocessor = Preprocessor::fit(rows, cfg.scaler_range, seeds.shuffle_seed);
        let f = rows.first().map_or(0, Vec::len);
        let projector = Projector::new(feature_map_spec(cfg, f, hyper.alpha, seeds.haar_seed)?, backend)?;
        let pqf = projector.project(&preprocessor.transform(rows), stream)?;
        let gbdt = GbdtTrainer::new(hyper.gbdt, seeds.model_seed).fit(&pqf, labels, weights)?;
        Ok((
            Self {
                preprocessor,
                projector,
                gbdt,
            },
            pqf,
        ))
    }

    pub fn pqf(&self, rows: &[Vec<f64>], stream: u64) -> Result<Vec<Vec<f64>>> {
        self.projector.project(&self.preprocessor.transform(rows), stream)
    }

    pub fn predict_proba(&self, rows: &[Vec<f64>], stream: u64) -> Result<Vec<f64>> {
        Ok(self.gbdt.predict_proba(&self.pqf(rows, stream)?))
    }
}
