//! Dataset ingestion, synthetic data, subsampling and the train/test split.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{CsvSource, SubsamplePolicy, SyntheticSpec};
use crate::error::{Error, Result};
use crate::learners::dataset::{is_missing, Dataset, MISSING};
use crate::seeds::rng_for;

/// What ingestion removed, for the run report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub dropped_columns: Vec<String>,
    pub zero_variance_columns: Vec<String>,
    /// Rows discarded by the latest-record-per-customer reduction.
    pub superseded_rows: usize,
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return Ok(MISSING);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            row,
            msg: format!("column `{column}`: `{t}` is not a finite number"),
        }),
    }
}

fn parse_label(cell: &str, row: usize) -> Result<u8> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::Validation(format!("row {row}: label `{}` is not 0 or 1", cell.trim()))),
    }
}

/// Indices of columns with fewer than two distinct non-missing values.
pub fn zero_variance_columns(rows: &[Vec<f64>], num_features: usize) -> Vec<usize> {
    (0..num_features)
        .filter(|&j| {
            let mut first = None;
            for r in rows {
                let v = r[j];
                if is_missing(v) {
                    continue;
                }
                match first {
                    None => first = Some(v),
                    Some(f) if f != v => return false,
                    _ => {}
                }
            }
            true
        })
        .collect()
}

/// Reads CSV text. Rows in errors are numbered from 1 after the header.
pub fn read_csv<R: Read>(reader: R, source: &CsvSource) -> Result<(Dataset, LoadSummary)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Validation(format!("column `{name}` not found")))
    };
    let label_at = find(&source.label_column)?;
    let id_at = source.id_column.as_deref().map(find).transpose()?;
    let date_at = source.date_column.as_deref().map(find).transpose()?;
    for d in &source.drop_columns {
        find(d)?;
    }
    let mut summary = LoadSummary::default();
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&j| {
            let h = &header[j];
            let dropped = j == label_at
                || Some(j) == id_at
                || Some(j) == date_at
                || source.drop_columns.iter().any(|d| d == h);
            if dropped && j != label_at {
                summary.dropped_columns.push(h.clone());
            }
            !dropped
        })
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut keys: Vec<(String, String)> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                msg: format!("{} fields, header has {}", record.len(), header.len()),
            });
        }
        labels.push(parse_label(&record[label_at], row)?);
        rows.push(
            feature_cols
                .iter()
                .map(|&j| parse_cell(&record[j], row, &header[j]))
                .collect::<Result<Vec<f64>>>()?,
        );
        if let (Some(i), Some(d)) = (id_at, date_at) {
            keys.push((record[i].to_string(), record[d].to_string()));
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset("CSV has a header but no data rows".into()));
    }

    if !keys.is_empty() {
        // latest date per customer; on equal dates the later row wins
        let mut latest: HashMap<&str, usize> = HashMap::new();
        for (i, (id, date)) in keys.iter().enumerate() {
            let e = latest.entry(id.as_str()).or_insert(i);
            if date >= &keys[*e].1 {
                *e = i;
            }
        }
        let mut keep: Vec<usize> = latest.into_values().collect();
        keep.sort_unstable();
        summary.superseded_rows = rows.len() - keep.len();
        rows = keep.iter().map(|&i| std::mem::take(&mut rows[i])).collect();
        labels = keep.iter().map(|&i| labels[i]).collect();
    }

    let mut names: Vec<String> = feature_cols.iter().map(|&j| header[j].clone()).collect();
    let zv = zero_variance_columns(&rows, names.len());
    if !zv.is_empty() {
        summary.zero_variance_columns = zv.iter().map(|&j| names[j].clone()).collect();
        log::info!("dropping zero-variance columns: {:?}", summary.zero_variance_columns);
        let keep: Vec<usize> = (0..names.len()).filter(|j| !zv.contains(j)).collect();
        rows = rows.into_iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
        names = keep.iter().map(|&j| names[j].clone()).collect();
    }
    Ok((Dataset::with_default_weights(names, rows, labels)?, summary))
}

pub fn load_csv(source: &CsvSource) -> Result<(Dataset, LoadSummary)> {
    let file = std::fs::File::open(&source.path)?;
    read_csv(std::io::BufReader::new(file), source)
}

/// Writes features then the label column; missing cells are left empty.
/// Values print in shortest round-trip form.
pub fn write_csv<W: Write>(ds: &Dataset, label_column: &str, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = ds.feature_names.clone();
    header.push(label_column.to_string());
    w.write_record(&header)?;
    for (row, &y) in ds.features.iter().zip(&ds.labels) {
        let mut rec: Vec<String> = row
            .iter()
            .map(|v| if is_missing(*v) { String::new() } else { v.to_string() })
            .collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, label_column: &str, path: &Path) -> Result<()> {
    write_csv(ds, label_column, std::fs::File::create(path)?)
}

/// Separation of the class means in the two-dimensional latent space.
const LATENT_SHIFT: [f64; 2] = [1.5, 1.1];
const SIGNAL_NOISE: f64 = 0.6;

/// Synthetic credit-like data.
///
/// Exactly `round(m * positive_fraction)` rows are positive, placed at
/// shuffled positions. A two-dimensional Gaussian latent vector, shifted for
/// positives, drives the first third of the features through random
/// loadings plus noise; some of those pass through a skewing transform.
/// Every other feature is class-independent noise. Cells go missing
/// independently with probability `missing_fraction`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if !(0.0..1.0).contains(&spec.positive_fraction) || !(0.0..1.0).contains(&spec.missing_fraction) {
        return Err(Error::Validation("synthetic fractions must lie in [0, 1)".into()));
    }
    if spec.samples == 0 || spec.features == 0 {
        return Err(Error::EmptyDataset("synthetic spec asks for no rows or no features".into()));
    }
    let m = spec.samples;
    let f = spec.features;
    let positives = (m as f64 * spec.positive_fraction).round() as usize;
    let mut labels: Vec<u8> = (0..m).map(|i| u8::from(i < positives)).collect();
    labels.shuffle(&mut rng_for(spec.seed, 1));

    let signal = f.div_ceil(3);
    let mut rng = rng_for(spec.seed, 2);
    let loadings: Vec<[f64; 2]> = (0..signal)
        .map(|_| {
            let a: f64 = rng.random_range(0.0..std::f64::consts::PI);
            [a.cos(), a.sin()]
        })
        .collect();
    let skewed: Vec<bool> = (0..signal).map(|j| j % 2 == 1).collect();

    let mut rng = rng_for(spec.seed, 3);
    let mut miss = rng_for(spec.seed, 4);
    let features = labels
        .iter()
        .map(|&y| {
            let shift = f64::from(y);
            let u: [f64; 2] = [
                Distribution::<f64>::sample(&StandardNormal, &mut rng) + shift * LATENT_SHIFT[0],
                Distribution::<f64>::sample(&StandardNormal, &mut rng) + shift * LATENT_SHIFT[1],
            ];
            (0..f)
                .map(|j| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    let v = if j < signal {
                        let s = loadings[j][0] * u[0] + loadings[j][1] * u[1] + SIGNAL_NOISE * noise;
                        if skewed[j] {
                            (0.5 * s).exp()
                        } else {
                            s
                        }
                    } else {
                        noise
                    };
                    if spec.missing_fraction > 0.0 && miss.random_bool(spec.missing_fraction) {
                        MISSING
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let names = (0..f).map(|j| format!("x{j:02}")).collect();
    Dataset::with_default_weights(names, features, labels)
}

fn class_members(labels: &[u8], class: u8) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] == class).collect()
}

/// Draws `count` rows. Balanced takes `count / 2` positives (rounded down)
/// and the rest negatives; stratified keeps the source positive rate to
/// within one row. Selected rows keep their source order.
pub fn subsample(ds: &Dataset, policy: SubsamplePolicy, count: usize, seed: u64) -> Result<Dataset> {
    let pos = class_members(&ds.labels, 1);
    let neg = class_members(&ds.labels, 0);
    let want_pos = match policy {
        SubsamplePolicy::Balanced => count / 2,
        SubsamplePolicy::Stratified => (count as f64 * pos.len() as f64 / ds.len() as f64).round() as usize,
    };
    let want_neg = count - want_pos.min(count);
    if want_pos > pos.len() || want_neg > neg.len() {
        return Err(Error::Validation(format!(
            "subsample of {count} needs {want_pos} positives and {want_neg} negatives, have {} and {}",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = rng_for(seed, 0x5AB);
    let mut pick: Vec<usize> = index::sample(&mut rng, pos.len(), want_pos)
        .into_iter()
        .map(|i| pos[i])
        .chain(index::sample(&mut rng, neg.len(), want_neg).into_iter().map(|i| neg[i]))
        .collect();
    pick.sort_unstable();
    Ok(ds.select_rows(&pick))
}

/// Stratified split; returns (train, test) with `round(test_fraction * n_c)`
/// rows of each class in the test part.
pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = rng_for(seed, 0x5917);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut members = class_members(&ds.labels, class);
        members.shuffle(&mut rng);
        let k = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset("split leaves an empty partition".into()));
    }
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}
