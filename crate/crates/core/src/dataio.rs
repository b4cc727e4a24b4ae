//! Dataset ingestion, train/test splitting, standardization and the
//! synthetic twonorm / ringnorm generators.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::masking::Mask;
use crate::matrix::Matrix;
use crate::seed::rng_from_seed;
use crate::{Error, Result};

pub const DEFAULT_SYNTHETIC_ROWS: usize = 7400;
pub const DEFAULT_SYNTHETIC_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Original label text for each class index.
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

fn csv_error(path: &Path, line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        line,
        column,
        message: message.into(),
    }
}

/// Reads a headed CSV of numeric features plus one label column. Line and
/// column numbers in errors are 1-based.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, 1, 0, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    let label_idx = match label {
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_error(path, 1, 0, format!("no label column named {name:?}")))?,
        LabelColumn::Index(i) => {
            return Err(csv_error(path, 1, 0, format!("label column index {i} out of range for {} columns", headers.len())));
        }
    };
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(path, line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(csv_error(path, line, c + 1, "empty cell"));
            }
            if c == label_idx {
                raw_labels.push(cell.to_string());
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| csv_error(path, line, c + 1, format!("non-numeric value {cell:?}")))?;
                if !v.is_finite() {
                    return Err(csv_error(path, line, c + 1, format!("non-finite value {cell:?}")));
                }
                values.push(v);
            }
        }
    }
    let (labels, class_names) = encode_labels(&raw_labels);
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let features = Matrix::from_vec(labels.len(), feature_names.len(), values)?;
    Ok(Dataset {
        name: path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        features,
        labels,
        feature_names,
        class_names,
    })
}

/// Maps label strings to indices. Numeric labels are ordered numerically,
/// anything else lexicographically.
fn encode_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = raw.to_vec();
    names.sort();
    names.dedup();
    let numeric: Option<Vec<f64>> = names.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut pairs: Vec<(f64, String)> = nums.into_iter().zip(names).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        names = pairs.into_iter().map(|(_, s)| s).collect();
    }
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let labels = raw.iter().map(|s| index[s.as_str()]).collect();
    (labels, names)
}

/// Writes features and the label text as a final `label` column.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, 0, e.to_string()))?;
    let mut header = ds.feature_names.clone();
    header.push("label".into());
    let wrap = |e: csv::Error| csv_error(path, 0, 0, e.to_string());
    writer.write_record(&header).map_err(wrap)?;
    for r in 0..ds.n_rows() {
        let mut rec: Vec<String> = ds.features.row(r).iter().map(|v| format!("{v:?}")).collect();
        rec.push(
            ds.class_names
                .get(ds.labels[r])
                .cloned()
                .unwrap_or_else(|| ds.labels[r].to_string()),
        );
        writer.write_record(&rec).map_err(wrap)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Features-only table in which empty cells mark missing entries.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteTable {
    pub column_names: Vec<String>,
    /// Missing entries hold 0.
    pub values: Matrix,
    pub mask: Mask,
}

/// Reads a headed, all-numeric CSV; empty cells become missing entries.
pub fn read_incomplete_csv(path: impl AsRef<Path>) -> Result<IncompleteTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let column_names: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, 1, 0, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let (mut values, mut observed) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e.position().map_or(0, |p| p.line()), 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                values.push(0.0);
                observed.push(0.0);
                continue;
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| csv_error(path, line, c + 1, format!("non-numeric value {cell:?}")))?;
            values.push(v);
            observed.push(1.0);
        }
    }
    let rows = values.len() / column_names.len().max(1);
    Ok(IncompleteTable {
        values: Matrix::from_vec(rows, column_names.len(), values)?,
        mask: Mask::from_matrix(Matrix::from_vec(rows, column_names.len(), observed)?)?,
        column_names,
    })
}

/// Writes a headed numeric CSV with round-trip float formatting.
pub fn write_matrix_csv(path: impl AsRef<Path>, column_names: &[String], x: &Matrix) -> Result<()> {
    let path = path.as_ref();
    if column_names.len() != x.cols() {
        return Err(Error::shape("write_matrix_csv", x.cols(), column_names.len()));
    }
    let wrap = |e: csv::Error| csv_error(path, 0, 0, e.to_string());
    let mut writer = csv::Writer::from_path(path).map_err(wrap)?;
    writer.write_record(column_names).map_err(wrap)?;
    for r in 0..x.rows() {
        writer
            .write_record(x.row(r).iter().map(|v| format!("{v:?}")))
            .map_err(wrap)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Shuffled split with `⌊0.7·n⌋` training rows.
///
/// Stratified splitting allots the training quota to classes by largest
/// remainder. A class with fewer than 2 rows forces the plain shuffled split
/// and records a warning.
pub fn split_70_30(ds: &Dataset, seed: u64, stratified: bool) -> Result<Split> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::invalid("splitting needs at least 2 rows"));
    }
    let n_train = n * 7 / 10;
    let mut rng = rng_from_seed(seed);
    let mut warnings = Vec::new();
    let n_classes = ds.labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in ds.labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let small = by_class.iter().any(|g| g.len() == 1);
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    if stratified && !small {
        let ideal: Vec<f64> = by_class.iter().map(|g| g.len() as f64 * n_train as f64 / n as f64).collect();
        let mut quota: Vec<usize> = ideal.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..n_classes).collect();
        order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())).then(a.cmp(&b)));
        let mut left = n_train - quota.iter().sum::<usize>();
        for &c in order.iter().cycle() {
            if left == 0 {
                break;
            }
            if quota[c] < by_class[c].len() {
                quota[c] += 1;
                left -= 1;
            }
        }
        for (group, &q) in by_class.iter_mut().zip(&quota) {
            group.shuffle(&mut rng);
            train.extend_from_slice(&group[..q]);
            test.extend_from_slice(&group[q..]);
        }
        train.shuffle(&mut rng);
        test.shuffle(&mut rng);
    } else {
        if stratified {
            warnings.push("a class has fewer than 2 rows; using an unstratified split".to_string());
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    Ok(Split {
        train: ds.select_rows(&train),
        test: ds.select_rows(&test),
        warnings,
    })
}

/// Per-column standardization learned on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Scaler {
    /// Population standard deviation; a zero-variance column gets std 1.
    pub fn fit(train: &Matrix) -> Result<Self> {
        if train.rows() == 0 {
            return Err(Error::invalid("cannot fit a scaler on zero rows"));
        }
        let mean = train.column_means();
        let n = train.rows() as f64;
        let mut warnings = Vec::new();
        let std = (0..train.cols())
            .map(|c| {
                let var = (0..train.rows()).map(|r| (train.get(r, c) - mean[c]).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 1e-12 * (1.0 + mean[c].abs()) {
                    s
                } else {
                    warnings.push(format!("column {c} has zero variance; leaving it unscaled"));
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std, warnings })
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.mean.len() {
            return Err(Error::shape("scaler", format!("{} columns", self.mean.len()), x.cols()));
        }
        Ok(())
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        Ok(Matrix::from_fn(x.rows(), x.cols(), |r, c| (x.get(r, c) - self.mean[c]) / self.std[c]))
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        Ok(Matrix::from_fn(x.rows(), x.cols(), |r, c| x.get(r, c) * self.std[c] + self.mean[c]))
    }
}

fn synthetic(name: &str, n: usize, d: usize, seed: u64, sample: impl Fn(usize, usize, f64) -> (f64, f64)) -> Result<Dataset> {
    if n == 0 || !n.is_multiple_of(2) || d == 0 {
        return Err(Error::invalid(format!("synthetic data needs even n > 0 and d >= 1, got n = {n}, d = {d}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    labels.shuffle(&mut rng);
    let a = 2.0 / (d as f64).sqrt();
    let mut data = Vec::with_capacity(n * d);
    for &y in &labels {
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let (scale, shift) = sample(y, j, a);
            data.push(z * scale + shift);
        }
    }
    Ok(Dataset {
        name: name.to_string(),
        features: Matrix::from_vec(n, d, data)?,
        labels,
        feature_names: (0..d).map(|j| format!("x{j}")).collect(),
        class_names: vec!["0".into(), "1".into()],
    })
}

/// Class 0 from `N(a·1, I)`, class 1 from `N(−a·1, I)`, `a = 2/√d`,
/// exactly `n/2` rows per class.
pub fn gen_twonorm(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    synthetic("twonorm", n, d, seed, |y, _, a| (1.0, if y == 0 { a } else { -a }))
}

/// Class 0 from `N(0, 4I)`, class 1 from `N(a·1, I)`, `a = 2/√d`.
pub fn gen_ringnorm(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    synthetic("ringnorm", n, d, seed, |y, _, a| if y == 0 { (2.0, 0.0) } else { (1.0, a) })
}
