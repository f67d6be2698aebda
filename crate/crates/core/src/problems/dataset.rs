//! Dataset ingestion for the two-task instances: numeric CSV files with a
//! trailing label column (or a 0/1 multi-label block), plus a seeded
//! Gaussian-blob generator for desk-scale synthetic runs.
//!
//! The label set is always divided evenly in two, lower labels to task 1
//! (which also takes the extra label when the count is odd). Row order is
//! preserved, so loading is deterministic.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Where the labels live in the CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelSpec {
    /// Features in all columns but the last; the last column holds an
    /// integer class label.
    LastColumn,
    /// The trailing `count` columns form a 0/1 indicator block; a row's
    /// label is its first set indicator within the task's half.
    MultiLabelBlock { count: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    None,
    ZScore,
}

/// One task's training data. Labels are re-indexed to `0..num_classes`.
#[derive(Clone, Debug, Default)]
pub struct TaskData {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

/// The two-task split of a dataset.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub task1: TaskData,
    pub task2: TaskData,
    /// Original label values assigned to each task, in order.
    pub label_map: [Vec<i64>; 2],
    /// Per-feature (mean, stddev) when z-scoring was applied.
    pub norm_params: Option<Vec<(f64, f64)>>,
    pub feature_dim: usize,
}

fn zscore(rows: &mut [Vec<f64>], dim: usize) -> Vec<(f64, f64)> {
    let n = rows.len() as f64;
    let mut params = Vec::with_capacity(dim);
    for j in 0..dim {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-12);
        for r in rows.iter_mut() {
            r[j] = (r[j] - mean) / std;
        }
        params.push((mean, std));
    }
    params
}

/// Splits labeled rows into the two tasks by the even label partition.
fn split_rows(
    rows: Vec<Vec<f64>>,
    labels: Vec<i64>,
    normalization: Normalization,
    feature_dim: usize,
) -> Result<DatasetSplit> {
    let mut distinct: Vec<i64> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::Dataset {
            line: None,
            message: format!("need at least 4 distinct labels to form two tasks, found {}", distinct.len()),
        });
    }
    // Even split; ties give the extra label to task 1.
    let cut = distinct.len().div_ceil(2);
    let (first, second) = distinct.split_at(cut);
    let task_of = |label: i64| -> (usize, usize) {
        if let Some(i) = first.iter().position(|&l| l == label) {
            (0, i)
        } else {
            (1, second.iter().position(|&l| l == label).unwrap())
        }
    };

    let mut rows = rows;
    let norm_params = match normalization {
        Normalization::None => None,
        Normalization::ZScore => Some(zscore(&mut rows, feature_dim)),
    };

    let mut tasks = [TaskData::default(), TaskData::default()];
    tasks[0].num_classes = first.len();
    tasks[1].num_classes = second.len();
    for (row, label) in rows.into_iter().zip(labels) {
        let (t, idx) = task_of(label);
        tasks[t].features.push(row);
        tasks[t].labels.push(idx);
    }
    let [task1, task2] = tasks;
    if task1.features.is_empty() || task2.features.is_empty() {
        return Err(Error::Dataset {
            line: None,
            message: "one of the tasks received no rows".into(),
        });
    }
    Ok(DatasetSplit {
        task1,
        task2,
        label_map: [first.to_vec(), second.to_vec()],
        norm_params,
        feature_dim,
    })
}

/// Loads a numeric CSV with a header row into a two-task split.
pub fn load_csv_dataset(
    path: &Path,
    labels: LabelSpec,
    normalization: Normalization,
) -> Result<DatasetSplit> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Dataset { line: None, message: format!("{path:?}: {e}") })?;

    let header_len = reader
        .headers()
        .map_err(|e| Error::Dataset { line: Some(1), message: e.to_string() })?
        .len();
    let (feature_dim, label_cols) = match labels {
        LabelSpec::LastColumn => {
            if header_len < 2 {
                return Err(Error::Dataset {
                    line: Some(1),
                    message: "need at least one feature column and one label column".into(),
                });
            }
            (header_len - 1, 1)
        }
        LabelSpec::MultiLabelBlock { count } => {
            if count == 0 || header_len <= count {
                return Err(Error::Dataset {
                    line: Some(1),
                    message: format!("label block of {count} does not fit in {header_len} columns"),
                });
            }
            (header_len - count, count)
        }
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut row_labels: Vec<i64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Dataset { line: Some(line), message: e.to_string() })?;
        if record.len() != header_len {
            return Err(Error::Dataset {
                line: Some(line),
                message: format!("expected {header_len} columns, found {}", record.len()),
            });
        }
        let parse = |field: &str, col: usize| -> Result<f64> {
            field.trim().parse::<f64>().map_err(|_| Error::Dataset {
                line: Some(line),
                message: format!("non-numeric cell {:?} in column {}", field, col + 1),
            })
        };
        let mut row = Vec::with_capacity(feature_dim);
        for col in 0..feature_dim {
            row.push(parse(&record[col], col)?);
        }
        let label = match labels {
            LabelSpec::LastColumn => {
                let v = parse(&record[feature_dim], feature_dim)?;
                if v.fract() != 0.0 {
                    return Err(Error::Dataset {
                        line: Some(line),
                        message: format!("label {v} is not an integer"),
                    });
                }
                v as i64
            }
            LabelSpec::MultiLabelBlock { .. } => {
                let mut found = None;
                for col in 0..label_cols {
                    let v = parse(&record[feature_dim + col], feature_dim + col)?;
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::Dataset {
                            line: Some(line),
                            message: format!("indicator cell must be 0 or 1, found {v}"),
                        });
                    }
                    if v == 1.0 && found.is_none() {
                        found = Some(col as i64);
                    }
                }
                match found {
                    Some(l) => l,
                    None => {
                        return Err(Error::Dataset {
                            line: Some(line),
                            message: "row has no set label indicator".into(),
                        })
                    }
                }
            }
        };
        rows.push(row);
        row_labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::Dataset { line: None, message: "file has no data rows".into() });
    }
    split_rows(rows, row_labels, normalization, feature_dim)
}

/// Seeded isotropic Gaussian blobs: `classes` clusters with centers drawn in
/// a box, `per_class` points each, labels `0..classes` split evenly across
/// the two tasks.
pub fn make_blobs(
    seed: u64,
    classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
) -> Result<DatasetSplit> {
    if classes < 4 || per_class == 0 || dim == 0 || !(spread > 0.0) {
        return Err(Error::invalid(
            "blobs need >= 4 classes, positive counts and dimension, positive spread",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Rejection-sample centers so every pair sits several spreads apart;
    // otherwise unlucky draws produce inseparable classes.
    let min_sep = (5.0 * spread).min(2.5);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(classes);
    while centers.len() < classes {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..200 {
            let cand: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let sep = centers
                .iter()
                .map(|c| {
                    c.iter()
                        .zip(&cand)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            if sep >= min_sep {
                best = Some((sep, cand));
                break;
            }
            if best.as_ref().map_or(true, |(b, _)| sep > *b) {
                best = Some((sep, cand));
            }
        }
        centers.push(best.unwrap().1);
    }
    let mut rows = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (cls, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            // Box-Muller for a deterministic normal draw.
            let row: Vec<f64> = (0..dim)
                .map(|j| {
                    let u1: f64 = rng.random_range(1e-12..1.0);
                    let u2: f64 = rng.random_range(0.0..1.0);
                    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                    center[j] + spread * z
                })
                .collect();
            rows.push(row);
            labels.push(cls as i64);
        }
    }
    split_rows(rows, labels, Normalization::ZScore, dim)
}
