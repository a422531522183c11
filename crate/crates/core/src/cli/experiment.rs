//! End-to-end experiment execution.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{BackendConfig, DataSource, ExperimentConfig, QuantumConfig};
use super::data::{generate_synthetic, load_csv, subsample, train_test_split, LoadSummary};
use super::pipeline::{feature_map_spec, metric_value, Preprocessor, Projector, QuantumHyper, QuantumModel, QuantumSeeds};
use super::report::{
    AuditReport, CandidateSummary, DataSummary, EnsembleReport, MeanStd, MetricSet, MetricSummary, ModelReport,
    PqfExport, Provenance, ReportBody, RunReport, SearchSummary, SeedResult,
};
use crate::error::{Error, Result};
use crate::evaluation::{diversity_report, means_ensemble, meta_ensemble_fit, BaseScores, ScoreProvenance};
use crate::learners::cv::{hyper_search, out_of_fold_predictions, stratified_kfold, Fold};
use crate::learners::dataset::Dataset;
use crate::learners::dummy::DummyClassifier;
use crate::learners::gbdt::{GbdtParams, GbdtTrainer};
use crate::pqf::column_names;
use crate::seeds::derive_seed;

pub const CAPTURE_NOTE: &str =
    "capture rate counts positives unweighted; the 20/1 weights enter only the 4% budget and the Gini";
pub const SEARCH_NOTE: &str = "hyperparameters chosen by seeded grid or random search with stratified k-fold CV";
pub const SELECTION_NOTE: &str =
    "feature selection ranks features by boosted-tree total split gain in place of a random-forest importance ranking";

/// The held-out partition. Every final model may read its features once.
struct TestPartition {
    data: Dataset,
    reads: Mutex<BTreeMap<String, usize>>,
    analysis_reads: Mutex<usize>,
}

impl TestPartition {
    fn new(data: Dataset) -> Self {
        Self {
            data,
            reads: Mutex::new(BTreeMap::new()),
            analysis_reads: Mutex::new(0),
        }
    }

    fn features_for(&self, model: &str) -> &[Vec<f64>] {
        *self.reads.lock().unwrap().entry(model.to_string()).or_default() += 1;
        &self.data.features
    }

    fn features_for_analysis(&self) -> &[Vec<f64>] {
        *self.analysis_reads.lock().unwrap() += 1;
        &self.data.features
    }

    fn labels(&self) -> &[u8] {
        &self.data.labels
    }
}

fn rows_of(ds: &Dataset, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| ds.features[i].clone()).collect()
}

fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

fn gbdt_label(p: &GbdtParams) -> String {
    format!(
        "eta={} trees={} depth={} mcw={} subsample={} colsample={} gamma={}",
        p.learning_rate, p.n_estimators, p.max_depth, p.min_child_weight, p.subsample, p.colsample_bytree, p.gamma
    )
}

struct Stage<'a>(&'a str);

impl Stage<'_> {
    fn wrap<T>(&self, r: Result<T>) -> Result<T> {
        r.map_err(|e| e.in_stage(self.0))
    }
}

/// Scores from one fitted model instance.
struct SeedRun {
    seed: u64,
    test_scores: Vec<f64>,
    oof: Option<Vec<f64>>,
}

struct ModelRun {
    report: ModelReport,
    runs: Vec<SeedRun>,
}

fn load(cfg: &ExperimentConfig) -> Result<(Dataset, LoadSummary, String)> {
    match &cfg.data {
        DataSource::Synthetic(s) => Ok((
            generate_synthetic(s)?,
            LoadSummary::default(),
            format!("synthetic(m={}, F={}, seed={})", s.samples, s.features, s.seed),
        )),
        DataSource::Csv(c) => {
            let (ds, summary) = load_csv(c)?;
            Ok((ds, summary, format!("csv({})", c.path.display())))
        }
    }
}

fn select_features(train: &Dataset, weights: &[f64], top_k: usize, seed: u64) -> Result<Vec<usize>> {
    let params = GbdtParams {
        n_estimators: 50,
        max_depth: 4,
        ..GbdtParams::default()
    };
    let model = GbdtTrainer::new(params, seed).fit(&train.features, &train.labels, weights)?;
    let imp = model.feature_importance();
    let mut order: Vec<usize> = (0..imp.len()).collect();
    order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
    let mut keep: Vec<usize> = order.into_iter().take(top_k.min(imp.len())).collect();
    keep.sort_unstable();
    Ok(keep)
}

fn summarise(runs: &[SeedRun], labels: &[u8]) -> Result<(Vec<SeedResult>, MetricSummary)> {
    let per_seed: Vec<SeedResult> = runs
        .iter()
        .map(|r| {
            Ok(SeedResult {
                seed: r.seed,
                test: MetricSet::compute(&r.test_scores, labels)?,
            })
        })
        .collect::<Result<_>>()?;
    let sets: Vec<MetricSet> = per_seed.iter().map(|s| s.test).collect();
    Ok((per_seed, MetricSummary::of(&sets)))
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    train: &'a Dataset,
    test: &'a TestPartition,
    folds: &'a [Fold],
    weights: &'a [f64],
    need_oof: bool,
}

impl Context<'_> {
    fn fold_weights(&self, idx: &[usize]) -> Vec<f64> {
        pick(self.weights, idx)
    }

    fn run_classical(&self) -> Result<ModelRun> {
        let cc = &self.cfg.classical;
        let metric = self.cfg.cv.metric;
        let candidates = cc.space.candidates(cc.search, self.cfg.cv.seed)?;
        let search_seed = cc.seeds[0];
        let search = hyper_search(&candidates, self.folds, |p, _, fold| {
            let model = GbdtTrainer::new(*p, search_seed).fit(
                &rows_of(self.train, &fold.train),
                &pick(&self.train.labels, &fold.train),
                &self.fold_weights(&fold.train),
            )?;
            metric_value(
                metric,
                &model.predict_proba(&rows_of(self.train, &fold.validation)),
                &pick(&self.train.labels, &fold.validation),
            )
        })?;
        let best = search.best_params;
        let runs: Vec<SeedRun> = cc
            .seeds
            .par_iter()
            .map(|&seed| {
                let trainer = GbdtTrainer::new(best, seed);
                let model = trainer.fit(&self.train.features, &self.train.labels, self.weights)?;
                let name = format!("classical/seed={seed}");
                let test_scores = model.predict_proba(self.test.features_for(&name));
                let oof = if self.need_oof {
                    Some(out_of_fold_predictions(self.train.len(), self.folds, |_, fold| {
                        let m = trainer.fit(
                            &rows_of(self.train, &fold.train),
                            &pick(&self.train.labels, &fold.train),
                            &self.fold_weights(&fold.train),
                        )?;
                        Ok(m.predict_proba(&rows_of(self.train, &fold.validation)))
                    })?)
                } else {
                    None
                };
                Ok(SeedRun { seed, test_scores, oof })
            })
            .collect::<Result<_>>()?;
        let (per_seed, test) = summarise(&runs, self.test.labels())?;
        Ok(ModelRun {
            report: ModelReport {
                name: "classical".into(),
                backend: None,
                alpha: None,
                gbdt: Some(best),
                search: Some(SearchSummary {
                    metric,
                    folds: self.folds.len(),
                    best_index: search.best_index,
                    candidates: candidates
                        .iter()
                        .zip(&search.candidates)
                        .map(|(p, c)| CandidateSummary {
                            label: gbdt_label(p),
                            cv: MeanStd { mean: c.mean, std: c.std },
                        })
                        .collect(),
                }),
                per_seed,
                test,
            },
            runs,
        })
    }

    /// Returns the model run, circuit executions (observed, expected) and
    /// optional PQF exports from the first seed.
    fn run_quantum(
        &self,
        qc: &QuantumConfig,
        backend: &BackendConfig,
        backend_index: usize,
        export: bool,
    ) -> Result<(ModelRun, usize, usize, Vec<PqfExport>)> {
        let metric = self.cfg.cv.metric;
        let f = self.train.num_features();
        let seeds0 = QuantumSeeds::for_index(qc, 0);
        let gbdt_candidates = qc.space.candidates(qc.search, self.cfg.cv.seed)?;
        let stream_base = derive_seed(0x9F, backend_index as u64);
        let mut observed = 0usize;
        let mut expected = 0usize;

        // projected features per (alpha, fold), computed once and shared by
        // every boosting candidate
        let jobs: Vec<(usize, usize)> = (0..qc.alphas.len())
            .flat_map(|a| (0..self.folds.len()).map(move |k| (a, k)))
            .collect();
        let cached: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>, usize)> = jobs
            .par_iter()
            .map(|&(a, k)| {
                let fold = &self.folds[k];
                let tr = rows_of(self.train, &fold.train);
                let pre = Preprocessor::fit(&tr, qc.scaler_range, seeds0.shuffle_seed);
                let proj = Projector::new(feature_map_spec(qc, f, qc.alphas[a], seeds0.haar_seed)?, backend)?;
                let stream = derive_seed(stream_base, (a * 1000 + k) as u64);
                let ptr = proj.project(&pre.transform(&tr), stream)?;
                let pva = proj.project(&pre.transform(&rows_of(self.train, &fold.validation)), stream ^ 1)?;
                Ok((ptr, pva, proj.executions()))
            })
            .collect::<Result<_>>()?;
        for (&(_, k), c) in jobs.iter().zip(&cached) {
            observed += c.2;
            expected += self.folds[k].train.len() + self.folds[k].validation.len();
        }

        let candidates: Vec<(usize, GbdtParams)> = (0..qc.alphas.len())
            .flat_map(|a| gbdt_candidates.iter().map(move |p| (a, *p)))
            .collect();
        let search = hyper_search(&candidates, self.folds, |&(a, p), k, fold| {
            let (ptr, pva, _) = &cached[a * self.folds.len() + k];
            let model = GbdtTrainer::new(p, seeds0.model_seed).fit(
                ptr,
                &pick(&self.train.labels, &fold.train),
                &self.fold_weights(&fold.train),
            )?;
            metric_value(metric, &model.predict_proba(pva), &pick(&self.train.labels, &fold.validation))
        })?;
        drop(cached);
        let (best_alpha, best_gbdt) = (qc.alphas[search.best_params.0], search.best_params.1);
        let hyper = QuantumHyper {
            alpha: best_alpha,
            gbdt: best_gbdt,
        };
        let name = format!("quantum[{}]", backend.label());

        let outcomes: Vec<(SeedRun, usize, usize, Vec<PqfExport>)> = (0..qc.seeds.len())
            .into_par_iter()
            .map(|i| {
                let seeds = QuantumSeeds::for_index(qc, i);
                let stream = derive_seed(stream_base, 0x5EED_0000 + i as u64);
                let (model, train_pqf) = QuantumModel::fit_with_features(
                    qc,
                    backend,
                    hyper,
                    seeds,
                    &self.train.features,
                    &self.train.labels,
                    self.weights,
                    stream,
                )?;
                let test_pqf = model.pqf(self.test.features_for(&format!("{name}/seed={}", seeds.model_seed)), stream ^ 1)?;
                let test_scores = model.gbdt.predict_proba(&test_pqf);
                let mut obs = model.projector.executions();
                let mut exp = self.train.len() + self.test.data.len();
                let oof = if self.need_oof {
                    let counter = Mutex::new((0usize, 0usize));
                    let v = out_of_fold_predictions(self.train.len(), self.folds, |k, fold| {
                        let (m, _) = QuantumModel::fit_with_features(
                            qc,
                            backend,
                            hyper,
                            seeds,
                            &rows_of(self.train, &fold.train),
                            &pick(&self.train.labels, &fold.train),
                            &self.fold_weights(&fold.train),
                            derive_seed(stream, 10 + k as u64),
                        )?;
                        let p = m.predict_proba(&rows_of(self.train, &fold.validation), derive_seed(stream, 100 + k as u64))?;
                        let mut c = counter.lock().unwrap();
                        c.0 += m.projector.executions();
                        c.1 += fold.train.len() + fold.validation.len();
                        Ok(p)
                    })?;
                    let (o, e) = counter.into_inner().unwrap();
                    obs += o;
                    exp += e;
                    Some(v)
                } else {
                    None
                };
                let exports = if export && i == 0 {
                    let names = column_names(qc.num_qubits);
                    vec![
                        PqfExport {
                            name: "train".into(),
                            data: Dataset::new(names.clone(), train_pqf, self.train.labels.clone(), self.train.weights.clone())?,
                        },
                        PqfExport {
                            name: "test".into(),
                            data: Dataset::new(names, test_pqf, self.test.data.labels.clone(), self.test.data.weights.clone())?,
                        },
                    ]
                } else {
                    Vec::new()
                };
                Ok((
                    SeedRun {
                        seed: seeds.model_seed,
                        test_scores,
                        oof,
                    },
                    obs,
                    exp,
                    exports,
                ))
            })
            .collect::<Result<_>>()?;

        let mut runs = Vec::new();
        let mut exports = Vec::new();
        for (run, o, e, x) in outcomes {
            runs.push(run);
            observed += o;
            expected += e;
            exports.extend(x);
        }
        let (per_seed, test) = summarise(&runs, self.test.labels())?;
        let report = ModelReport {
            name,
            backend: Some(backend.label()),
            alpha: Some(best_alpha),
            gbdt: Some(best_gbdt),
            search: Some(SearchSummary {
                metric,
                folds: self.folds.len(),
                best_index: search.best_index,
                candidates: candidates
                    .iter()
                    .zip(&search.candidates)
                    .map(|((a, p), c)| CandidateSummary {
                        label: format!("alpha={} {}", qc.alphas[*a], gbdt_label(p)),
                        cv: MeanStd { mean: c.mean, std: c.std },
                    })
                    .collect(),
            }),
            per_seed,
            test,
        };
        Ok((ModelRun { report, runs }, observed, expected, exports))
    }
}

/// Executes the configured experiment. Any failure names the stage it came
/// from.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(RunReport, Vec<PqfExport>)> {
    let started = Instant::now();
    cfg.validate()?;
    let config_hash = cfg.hash();
    let mut notes = vec![CAPTURE_NOTE.to_string(), SEARCH_NOTE.to_string()];

    let (data, load_summary, source) = Stage("load").wrap(load(cfg))?;
    let data = match &cfg.subsample {
        Some(s) => Stage("subsample").wrap(subsample(&data, s.policy, s.count, s.seed))?,
        None => data,
    };
    let (mut train, mut test) = Stage("split").wrap(train_test_split(&data, cfg.split.test_fraction, cfg.split.seed))?;
    let unit = train.unit_weights();
    let weights: Vec<f64> = if cfg.weighted_loss { train.weights.clone() } else { unit };

    let mut selected = None;
    if let Some(fs) = &cfg.feature_selection {
        let keep = Stage("feature_selection").wrap(select_features(&train, &weights, fs.top_k, fs.seed))?;
        train = train.select_columns(&keep);
        test = test.select_columns(&keep);
        selected = Some(train.feature_names.clone());
        notes.push(SELECTION_NOTE.to_string());
    }
    let folds = Stage("cv").wrap(stratified_kfold(&train.labels, cfg.cv.folds, cfg.cv.seed))?;
    let test = TestPartition::new(test);
    let ctx = Context {
        cfg,
        train: &train,
        test: &test,
        folds: &folds,
        weights: &weights,
        need_oof: cfg.ensemble.is_some(),
    };

    let mut models = Vec::new();
    let dummy = DummyClassifier::fit(&train.labels, &weights);
    let dummy_runs = vec![SeedRun {
        seed: 0,
        test_scores: dummy.predict_proba(test.data.len()),
        oof: None,
    }];
    let (per_seed, summary) = Stage("dummy").wrap(summarise(&dummy_runs, test.labels()))?;
    models.push(ModelReport {
        name: "dummy".into(),
        backend: None,
        alpha: None,
        gbdt: None,
        search: None,
        per_seed,
        test: summary,
    });

    let classical = Stage("classical").wrap(ctx.run_classical())?;
    models.push(classical.report.clone());

    let mut audit = AuditReport::default();
    let mut quantum_runs = Vec::new();
    let mut exports = Vec::new();
    if let Some(qc) = &cfg.quantum {
        for (b, backend) in qc.backends.iter().enumerate() {
            let stage = format!("quantum[{}]", backend.label());
            let (run, obs, exp, x) = Stage(&stage).wrap(ctx.run_quantum(qc, backend, b, cfg.export_pqf && b == 0))?;
            audit.circuit_executions += obs;
            audit.expected_circuit_executions += exp;
            models.push(run.report.clone());
            exports.extend(x);
            quantum_runs.push(run);
        }
    }

    let mut ensembles = Vec::new();
    let mut diversity = None;
    if let (Some(ec), Some(quantum)) = (&cfg.ensemble, quantum_runs.first()) {
        let stage = Stage("ensemble");
        let labels = test.labels();
        let mut means_sets = Vec::new();
        let mut meta_sets: Vec<Vec<MetricSet>> = vec![Vec::new(); ec.meta_c.len()];
        let mut bracketed = true;
        let mut guard = true;
        for c in &classical.runs {
            for q in &quantum.runs {
                let means = stage.wrap(means_ensemble(&c.test_scores, &q.test_scores))?;
                bracketed &= means
                    .iter()
                    .zip(c.test_scores.iter().zip(&q.test_scores))
                    .all(|(m, (a, b))| *m >= a.min(*b) && *m <= a.max(*b));
                means_sets.push(stage.wrap(MetricSet::compute(&means, labels))?);

                let oof = stage.wrap(BaseScores::new(
                    c.oof.clone().expect("oof computed"),
                    q.oof.clone().expect("oof computed"),
                    ScoreProvenance::OutOfFold,
                ))?;
                let leaky = BaseScores {
                    provenance: ScoreProvenance::InSample,
                    ..oof.clone()
                };
                guard &= matches!(meta_ensemble_fit(&leaky, &train.labels, &weights, ec.meta_c[0], false), Err(Error::Leakage));
                let test_base = stage.wrap(BaseScores::new(
                    c.test_scores.clone(),
                    q.test_scores.clone(),
                    ScoreProvenance::OutOfFold,
                ))?;
                for (slot, &cval) in ec.meta_c.iter().enumerate() {
                    let meta = stage.wrap(meta_ensemble_fit(&oof, &train.labels, &weights, cval, ec.allow_in_sample))?;
                    meta_sets[slot].push(stage.wrap(MetricSet::compute(&meta.predict(&test_base), labels))?);
                }
            }
        }
        let base = classical.report.test.cdr.mean;
        let mk = |name: String, sets: &[MetricSet]| {
            let test = MetricSummary::of(sets);
            EnsembleReport {
                name,
                pairs: sets.len(),
                cdr_gain_bp: (test.cdr.mean - base) * 1e4,
                test,
            }
        };
        ensembles.push(mk("means ensemble".into(), &means_sets));
        for (cval, sets) in ec.meta_c.iter().zip(&meta_sets) {
            ensembles.push(mk(format!("LogReg (C={cval})"), sets));
        }
        audit.means_bracketed = Some(bracketed);
        audit.leakage_guard_holds = Some(guard);

        let qc = cfg.quantum.as_ref().expect("validated");
        let pre = Preprocessor::fit(&train.features, qc.scaler_range, QuantumSeeds::for_index(qc, 0).shuffle_seed);
        let scaled = pre.scale(test.features_for_analysis());
        let k = ec.diversity_k.min(test.data.len());
        diversity = Some(stage.wrap(diversity_report(
            &classical.runs[0].test_scores,
            &quantum.runs[0].test_scores,
            &scaled,
            &train.feature_names,
            k,
        ))?);
    }

    audit.test_scoring_reads = test.reads.into_inner().unwrap();
    audit.test_analysis_reads = test.analysis_reads.into_inner().unwrap();
    if let Some((model, n)) = audit.test_scoring_reads.iter().find(|(_, &n)| n != 1) {
        return Err(Error::Validation(format!("test partition read {n} times by {model}")).in_stage("audit"));
    }
    if audit.circuit_executions != audit.expected_circuit_executions {
        return Err(Error::Validation(format!(
            "{} circuit executions, expected {}",
            audit.circuit_executions, audit.expected_circuit_executions
        ))
        .in_stage("audit"));
    }

    let crate_version = env!("CARGO_PKG_VERSION").to_string();
    let body = ReportBody {
        name: cfg.name.clone(),
        config_hash: config_hash.clone(),
        crate_version: crate_version.clone(),
        notes,
        data: DataSummary {
            source,
            rows: data.len(),
            features: train.num_features(),
            positives: data.positives(),
            train_rows: train.len(),
            test_rows: test.data.len(),
            dropped_columns: load_summary.dropped_columns,
            zero_variance_columns: load_summary.zero_variance_columns,
            superseded_rows: load_summary.superseded_rows,
            selected_features: selected,
        },
        models,
        ensembles,
        diversity,
        audit,
    };
    Ok((
        RunReport {
            body,
            provenance: Provenance {
                config_hash,
                crate_version,
                wall_time_seconds: started.elapsed().as_secs_f64(),
            },
        },
        exports,
    ))
}

/// Projects train and test rows with the first quantum backend, first alpha
/// and first seed, without fitting any model.
pub fn project_only(cfg: &ExperimentConfig) -> Result<Vec<PqfExport>> {
    cfg.validate()?;
    let qc = cfg
        .quantum
        .as_ref()
        .ok_or_else(|| Error::Config("projection needs a quantum section".into()))?;
    let (data, _, _) = Stage("load").wrap(load(cfg))?;
    let data = match &cfg.subsample {
        Some(s) => Stage("subsample").wrap(subsample(&data, s.policy, s.count, s.seed))?,
        None => data,
    };
    let (train, test) = Stage("split").wrap(train_test_split(&data, cfg.split.test_fraction, cfg.split.seed))?;
    let seeds = QuantumSeeds::for_index(qc, 0);
    let pre = Preprocessor::fit(&train.features, qc.scaler_range, seeds.shuffle_seed);
    let stage = Stage("project");
    let proj = stage.wrap(Projector::new(
        feature_map_spec(qc, train.num_features(), qc.alphas[0], seeds.haar_seed)?,
        &qc.backends[0],
    ))?;
    let names = column_names(qc.num_qubits);
    let mut out = Vec::new();
    for (name, part, stream) in [("train", &train, 0u64), ("test", &test, 1)] {
        let pqf = stage.wrap(proj.project(&pre.transform(&part.features), stream))?;
        out.push(PqfExport {
            name: name.into(),
            data: Dataset::new(names.clone(), pqf, part.labels.clone(), part.weights.clone())?,
        });
    }
    Ok(out)
}
