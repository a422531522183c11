//! Experiment configuration, read from TOML. Every random choice in a run
//! traces back to a seed field in this file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::featuremap::Backend;
use crate::learners::cv::{GbdtSpace, SearchMode};
use crate::learners::preprocess::DEFAULT_RANGE;
use crate::mps::MpsConfig;
use crate::noise::{ReadoutNoiseModel, TrexConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub features: usize,
    #[serde(default = "default_positive_fraction")]
    pub positive_fraction: f64,
    #[serde(default)]
    pub missing_fraction: f64,
    pub seed: u64,
}

fn default_positive_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default = "default_label")]
    pub label_column: String,
    /// Non-modelling columns removed before anything else.
    #[serde(default)]
    pub drop_columns: Vec<String>,
    /// With `date_column`, only each customer's latest record is kept.
    #[serde(default)]
    pub id_column: Option<String>,
    #[serde(default)]
    pub date_column: Option<String>,
}

fn default_label() -> String {
    "target".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(CsvSource),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsamplePolicy {
    Balanced,
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleConfig {
    pub policy: SubsamplePolicy,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub seed: u64,
}

fn default_test_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Auc,
    Cdr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub seed: u64,
    #[serde(default = "default_metric")]
    pub metric: Metric,
}

fn default_folds() -> usize {
    5
}

fn default_metric() -> Metric {
    Metric::Cdr
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    pub space: GbdtSpace,
    #[serde(default = "default_search")]
    pub search: SearchMode,
    /// Model seeds; the first also drives the search.
    pub seeds: Vec<u64>,
}

fn default_search() -> SearchMode {
    SearchMode::Grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    Exact,
    Mps {
        #[serde(default = "default_chi")]
        chi_max: usize,
        #[serde(default = "default_tol")]
        trunc_tol: f64,
    },
    /// Exact state, sampled readout with uniform flip rates and TREX.
    Shots {
        shots: usize,
        calibration_shots: usize,
        twirl_seed: u64,
        #[serde(default)]
        p10: f64,
        #[serde(default)]
        p01: f64,
    },
}

fn default_chi() -> usize {
    crate::mps::DEFAULT_CHI_MAX
}

fn default_tol() -> f64 {
    crate::mps::DEFAULT_TRUNC_TOL
}

impl BackendConfig {
    pub fn label(&self) -> String {
        match self {
            BackendConfig::Exact => "exact".into(),
            BackendConfig::Mps { chi_max, trunc_tol } => format!("mps(chi={chi_max},tol={trunc_tol:e})"),
            BackendConfig::Shots { shots, p10, p01, .. } => format!("shots({shots},p10={p10},p01={p01})"),
        }
    }

    /// Simulator backend for noiseless modes.
    pub fn simulator(&self) -> Option<Backend> {
        match *self {
            BackendConfig::Exact => Some(Backend::Exact),
            BackendConfig::Mps { chi_max, trunc_tol } => Some(Backend::Mps(MpsConfig { chi_max, trunc_tol })),
            BackendConfig::Shots { .. } => None,
        }
    }

    pub fn readout(&self, num_qubits: usize) -> Result<Option<(ReadoutNoiseModel, TrexConfig)>> {
        match *self {
            BackendConfig::Shots {
                shots,
                calibration_shots,
                twirl_seed,
                p10,
                p01,
            } => {
                let trex = TrexConfig {
                    shots_per_circuit: shots,
                    calibration_shots,
                    twirl_seed,
                };
                trex.validate()?;
                Ok(Some((ReadoutNoiseModel::uniform(num_qubits, p10, p01)?, trex)))
            }
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumConfig {
    pub num_qubits: usize,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    /// Searched jointly with the boosting space.
    pub alphas: Vec<f64>,
    pub haar_seed: u64,
    pub shuffle_seed: u64,
    #[serde(default = "default_range")]
    pub scaler_range: (f64, f64),
    pub backends: Vec<BackendConfig>,
    pub space: GbdtSpace,
    #[serde(default = "default_search")]
    pub search: SearchMode,
    /// Model seeds. Seed `s` re-derives the Haar layer and the feature
    /// shuffle from `haar_seed` and `shuffle_seed`; the first seed keeps them
    /// as given and drives the search.
    pub seeds: Vec<u64>,
}

fn default_reps() -> usize {
    1
}

fn default_range() -> (f64, f64) {
    DEFAULT_RANGE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_meta_c")]
    pub meta_c: Vec<f64>,
    #[serde(default = "default_k")]
    pub diversity_k: usize,
    /// Permit in-sample base scores for the meta-learner.
    #[serde(default)]
    pub allow_in_sample: bool,
}

fn default_meta_c() -> Vec<f64> {
    crate::evaluation::META_C_VALUES.to_vec()
}

fn default_k() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSelectionConfig {
    pub top_k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub subsample: Option<SubsampleConfig>,
    pub split: SplitConfig,
    pub cv: CvConfig,
    /// Train with the 20/1 metric weights instead of unit weights.
    #[serde(default)]
    pub weighted_loss: bool,
    #[serde(default)]
    pub feature_selection: Option<FeatureSelectionConfig>,
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub quantum: Option<QuantumConfig>,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    /// Write the projected features of the first quantum model as CSV.
    #[serde(default)]
    pub export_pqf: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        // relative data paths resolve against the config file
        if let DataSource::Csv(c) = &mut cfg.data {
            if c.path.is_relative() {
                if let Some(dir) = path.parent() {
                    c.path = dir.join(&c.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let DataSource::Synthetic(s) = &self.data {
            if !(0.0..1.0).contains(&s.positive_fraction) || !(0.0..1.0).contains(&s.missing_fraction) {
                return bad("synthetic fractions must lie in [0, 1)".into());
            }
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad(format!("test_fraction {} not in (0, 1)", self.split.test_fraction));
        }
        if self.cv.folds < 2 {
            return bad("cv.folds must be at least 2".into());
        }
        if self.classical.seeds.is_empty() {
            return bad("classical.seeds is empty".into());
        }
        if let Some(q) = &self.quantum {
            if q.seeds.is_empty() || q.alphas.is_empty() || q.backends.is_empty() {
                return bad("quantum seeds, alphas and backends must be non-empty".into());
            }
            if q.alphas.iter().any(|a| !a.is_finite()) {
                return bad("alphas must be finite".into());
            }
            if !(q.scaler_range.0 < q.scaler_range.1) {
                return bad("scaler_range must be increasing".into());
            }
        }
        if let Some(e) = &self.ensemble {
            if self.quantum.is_none() {
                return bad("ensembles need a quantum section".into());
            }
            if e.meta_c.iter().any(|c| !(*c > 0.0)) {
                return bad("meta_c values must be positive".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
name = "sample"

[data]
source = "synthetic"
samples = 400
features = 9
positive_fraction = 0.5
seed = 1

[split]
seed = 2

[cv]
folds = 3
seed = 3
metric = "auc"

[classical]
seeds = [11]
space = { learning_rate = [0.3], n_estimators = [20], max_depth = [3] }

[quantum]
num_qubits = 10
alphas = [0.5]
haar_seed = 5
shuffle_seed = 6
backends = [{ kind = "exact" }, { kind = "mps", chi_max = 8 }]
seeds = [21]
space = { learning_rate = [0.3], n_estimators = [20], max_depth = [3] }
"#;

    #[test]
    fn parses_and_defaults() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.split.test_fraction, 0.5);
        let q = cfg.quantum.as_ref().unwrap();
        assert_eq!(q.scaler_range, (0.3, 0.8));
        assert_eq!(q.repetitions, 1);
        assert_eq!(q.backends[1], BackendConfig::Mps { chi_max: 8, trunc_tol: 1e-10 });
        let round = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn hash_tracks_every_field() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let h = cfg.hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, cfg.clone().hash());
        let mut a = cfg.clone();
        a.cv.seed += 1;
        let mut b = cfg.clone();
        b.quantum.as_mut().unwrap().alphas[0] = 0.75;
        let mut c = cfg;
        c.name.push('x');
        assert!(a.hash() != h && b.hash() != h && c.hash() != h);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(ExperimentConfig::from_toml_str(&format!("{SAMPLE}\nbogus = 1\n")).is_err());
        let no_seeds = SAMPLE.replace("seeds = [11]", "seeds = []");
        assert!(ExperimentConfig::from_toml_str(&no_seeds).is_err());
        let one_fold = SAMPLE.replace("folds = 3", "folds = 1");
        assert!(ExperimentConfig::from_toml_str(&one_fold).is_err());
    }
}
