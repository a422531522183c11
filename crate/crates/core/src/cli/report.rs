//! Run reports: machine-readable JSON plus plain-text tables.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Metric;
use crate::error::Result;
use crate::evaluation::{capture_rate_at_4pct, normalized_weighted_gini, standard_metrics, DiversityReport, ScoredPredictions};
use crate::learners::cv::mean_std;
use crate::learners::dataset::Dataset;
use crate::learners::gbdt::GbdtParams;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub gini: f64,
    pub capture_rate: f64,
    pub cdr: f64,
}

impl MetricSet {
    pub fn compute(scores: &[f64], labels: &[u8]) -> Result<Self> {
        let p = ScoredPredictions::new(scores.to_vec(), labels.to_vec())?;
        let s = standard_metrics(&p, 0.5)?;
        let gini = normalized_weighted_gini(&p)?;
        let capture_rate = capture_rate_at_4pct(&p)?;
        Ok(Self {
            accuracy: s.accuracy,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            auc: s.auc,
            gini,
            capture_rate,
            cdr: 0.5 * (gini + capture_rate),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub auc: MeanStd,
    pub gini: MeanStd,
    pub capture_rate: MeanStd,
    pub cdr: MeanStd,
}

impl MetricSummary {
    pub fn of(sets: &[MetricSet]) -> Self {
        let col = |f: fn(&MetricSet) -> f64| MeanStd::of(&sets.iter().map(f).collect::<Vec<_>>());
        Self {
            accuracy: col(|m| m.accuracy),
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
            f1: col(|m| m.f1),
            auc: col(|m| m.auc),
            gini: col(|m| m.gini),
            capture_rate: col(|m| m.capture_rate),
            cdr: col(|m| m.cdr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub label: String,
    pub cv: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub metric: Metric,
    pub folds: usize,
    pub best_index: usize,
    pub candidates: Vec<CandidateSummary>,
}

impl SearchSummary {
    pub fn best(&self) -> &CandidateSummary {
        &self.candidates[self.best_index]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub test: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub gbdt: Option<GbdtParams>,
    #[serde(default)]
    pub search: Option<SearchSummary>,
    pub per_seed: Vec<SeedResult>,
    pub test: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub name: String,
    pub pairs: usize,
    pub test: MetricSummary,
    /// Mean CDR minus the classical mean CDR, in basis points.
    pub cdr_gain_bp: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Test-partition reads per final model; each must be exactly 1.
    pub test_scoring_reads: BTreeMap<String, usize>,
    pub test_analysis_reads: usize,
    pub circuit_executions: usize,
    pub expected_circuit_executions: usize,
    #[serde(default)]
    pub means_bracketed: Option<bool>,
    #[serde(default)]
    pub leakage_guard_holds: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub source: String,
    pub rows: usize,
    pub features: usize,
    pub positives: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub dropped_columns: Vec<String>,
    pub zero_variance_columns: Vec<String>,
    pub superseded_rows: usize,
    #[serde(default)]
    pub selected_features: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub name: String,
    pub config_hash: String,
    pub crate_version: String,
    pub notes: Vec<String>,
    pub data: DataSummary,
    pub models: Vec<ModelReport>,
    pub ensembles: Vec<EnsembleReport>,
    #[serde(default)]
    pub diversity: Option<DiversityReport>,
    pub audit: AuditReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub crate_version: String,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub body: ReportBody,
    pub provenance: Provenance,
}

impl RunReport {
    /// Deterministic part of the report.
    pub fn body_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.body)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.body.models.iter().find(|m| m.name == name)
    }

    pub fn ensemble(&self, name: &str) -> Option<&EnsembleReport> {
        self.body.ensembles.iter().find(|e| e.name == name)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |a| format!("{a}"))
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).chain([header[j].chars().count()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let _ = writeln!(out, "{}", line(header.to_vec()).trim_end());
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()).trim_end());
    }
}

/// Plain-text rendering in the layout of the published result tables.
pub fn render_text(report: &RunReport) -> String {
    let b = &report.body;
    let mut out = String::new();
    let _ = writeln!(out, "Run `{}`", b.name);
    let _ = writeln!(out, "config sha256 {}", b.config_hash);
    let _ = writeln!(out, "pqf-credit {}, wall time {:.1} s", b.crate_version, report.provenance.wall_time_seconds);
    let d = &b.data;
    let _ = writeln!(
        out,
        "data: {} ({} rows, {} features, {} positives); train {} / test {}",
        d.source, d.rows, d.features, d.positives, d.train_rows, d.test_rows
    );
    if !d.zero_variance_columns.is_empty() {
        let _ = writeln!(out, "zero-variance columns dropped: {}", d.zero_variance_columns.join(", "));
    }
    if let Some(sel) = &d.selected_features {
        let _ = writeln!(out, "selected features: {}", sel.join(", "));
    }

    let _ = writeln!(out, "\nTest metrics (mean ± std over seeds)\n");
    let rows: Vec<Vec<String>> = b
        .models
        .iter()
        .map(|m| {
            vec![
                m.name.clone(),
                fmt_opt(m.alpha),
                fmt_opt(m.gbdt.map(|g| g.learning_rate)),
                m.test.accuracy.to_string(),
                m.test.precision.to_string(),
                m.test.recall.to_string(),
                m.test.f1.to_string(),
                m.test.auc.to_string(),
            ]
        })
        .collect();
    table(&mut out, &["Model", "α", "η", "Acc.", "Prec.", "Rec.", "F1", "AUC"], &rows);

    let _ = writeln!(out, "\nCDR on the test set (mean ± std)\n");
    let mut rows: Vec<Vec<String>> = b
        .models
        .iter()
        .map(|m| {
            vec![
                m.name.clone(),
                m.per_seed.len().to_string(),
                m.test.cdr.to_string(),
                m.test.gini.to_string(),
                m.test.capture_rate.to_string(),
                "-".into(),
            ]
        })
        .collect();
    rows.extend(b.ensembles.iter().map(|e| {
        vec![
            e.name.clone(),
            e.pairs.to_string(),
            e.test.cdr.to_string(),
            e.test.gini.to_string(),
            e.test.capture_rate.to_string(),
            format!("{:+.1}", e.cdr_gain_bp),
        ]
    }));
    table(&mut out, &["Model", "Runs", "CDR", "Gini", "Capture@4%", "vs classical (bp)"], &rows);

    for m in &b.models {
        if let Some(s) = &m.search {
            let _ = writeln!(out, "\nSearch for {} ({:?}, {} folds)\n", m.name, s.metric, s.folds);
            let rows: Vec<Vec<String>> = s
                .candidates
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    vec![
                        if i == s.best_index { "*".into() } else { String::new() },
                        c.label.clone(),
                        c.cv.to_string(),
                    ]
                })
                .collect();
            table(&mut out, &["", "Candidate", "CV"], &rows);
        }
    }

    if let Some(div) = &b.diversity {
        let _ = writeln!(
            out,
            "\nDiversity: score correlation {:.4}, top-{} agreement (Jaccard) {:.4}\n",
            div.correlation, div.k, div.top_k_agreement
        );
        let rows: Vec<Vec<String>> = div
            .features
            .iter()
            .take(20)
            .map(|f| {
                vec![
                    f.feature.clone(),
                    format!("{:.4}", f.classical_mean),
                    format!("{:.4}", f.quantum_mean),
                ]
            })
            .collect();
        table(&mut out, &["Feature", "Classical top-k mean", "Quantum top-k mean"], &rows);
    }

    let a = &b.audit;
    let _ = writeln!(out, "\nAudit");
    let _ = writeln!(
        out,
        "test reads per final model: {}",
        a.test_scoring_reads
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(
        out,
        "circuit executions {} (expected {})",
        a.circuit_executions, a.expected_circuit_executions
    );
    if let Some(v) = a.means_bracketed {
        let _ = writeln!(out, "means ensemble within base-score brackets: {v}");
    }
    if let Some(v) = a.leakage_guard_holds {
        let _ = writeln!(out, "meta-learner leakage guard holds: {v}");
    }
    if !b.notes.is_empty() {
        let _ = writeln!(out, "\nNotes");
        for n in &b.notes {
            let _ = writeln!(out, "- {n}");
        }
    }
    out
}

/// Projected features of one partition with canonical headers.
pub struct PqfExport {
    pub name: String,
    pub data: Dataset,
}

/// `q{k}_X, q{k}_Y, q{k}_Z` columns, then `label` and `weight`.
pub fn write_pqf_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = data.feature_names.clone();
    header.push("label".into());
    header.push("weight".into());
    w.write_record(&header)?;
    for ((row, y), wt) in data.features.iter().zip(&data.labels).zip(&data.weights) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        rec.push(wt.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json`, `report.txt` and any PQF exports into `dir`.
pub fn emit_report(report: &RunReport, exports: &[PqfExport], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join(REPORT_JSON);
    std::fs::write(&json, serde_json::to_string_pretty(report)?)?;
    let txt = dir.join(REPORT_TXT);
    std::fs::write(&txt, render_text(report))?;
    let mut written = vec![json, txt];
    for e in exports {
        let p = dir.join(format!("pqf_{}.csv", e.name));
        write_pqf_csv(&e.data, &p)?;
        written.push(p);
    }
    Ok(written)
}

pub fn load_report(dir: &Path) -> Result<RunReport> {
    RunReport::from_json(&std::fs::read_to_string(dir.join(REPORT_JSON))?)
}
