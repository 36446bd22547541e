//! Bug-report datasets: CSV loading, validation and stratified fold splitting.
//!
//! The on-disk layout is one header row, an id column, any number of numeric
//! term-frequency columns and a 0/1 label column (1 = security bug report).
//! Row order is the chronological submission order and is preserved
//! everywhere, because ranking ties are broken by it.

use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

pub const SBR: u8 = 1;
pub const NSBR: u8 = 0;

/// One bug report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub features: Vec<f64>,
    pub label: u8,
}

/// Column layout of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ColumnSchema {
    /// First column is the id, last column the label, everything between is a feature.
    #[default]
    Positional,
    /// Id and label located by header name; every other column is a feature.
    Named { id: String, label: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    features: Array2<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        ids: Vec<String>,
        features: Array2<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let (rows, cols) = features.dim();
        if ids.len() != rows || labels.len() != rows {
            return Err(Error::Validation(format!(
                "{} ids and {} labels for {} feature rows",
                ids.len(),
                labels.len(),
                rows
            )));
        }
        if feature_names.len() != cols {
            return Err(Error::Validation(format!(
                "{} feature names for {} feature columns",
                feature_names.len(),
                cols
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Validation(format!(
                "label {} at row {} is not 0 or 1",
                labels[i], i
            )));
        }
        Ok(Dataset {
            ids,
            features,
            labels,
            feature_names,
        })
    }

    pub fn from_records(records: &[Record], feature_names: Vec<String>) -> Result<Self> {
        let cols = feature_names.len();
        let mut flat = Vec::with_capacity(records.len() * cols);
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != cols {
                return Err(Error::Validation(format!(
                    "record {} ({}) has {} features, expected {}",
                    i,
                    r.id,
                    r.features.len(),
                    cols
                )));
            }
            flat.extend_from_slice(&r.features);
        }
        let features = Array2::from_shape_vec((records.len(), cols), flat)
            .map_err(|e| Error::Validation(e.to_string()))?;
        Dataset::new(
            records.iter().map(|r| r.id.clone()).collect(),
            features,
            records.iter().map(|r| r.label).collect(),
            feature_names,
        )
    }

    /// Builds a dataset with generated ids `r0, r1, ...` and feature names `f0, f1, ...`.
    pub fn from_matrix(features: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        let ids = (0..features.nrows()).map(|i| format!("r{i}")).collect();
        let names = (0..features.ncols()).map(|j| format!("f{j}")).collect();
        Dataset::new(ids, features, labels, names)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn record(&self, i: usize) -> Record {
        Record {
            id: self.ids[i].clone(),
            features: self.features.row(i).to_vec(),
            label: self.labels[i],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        (0..self.len()).map(|i| self.record(i))
    }

    pub fn sbr_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == SBR).count()
    }

    pub fn nsbr_count(&self) -> usize {
        self.len() - self.sbr_count()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same rows and labels over a new feature matrix (e.g. after a transform).
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        if features.nrows() != self.len() {
            return Err(Error::Validation(format!(
                "replacement matrix has {} rows, dataset has {}",
                features.nrows(),
                self.len()
            )));
        }
        let names = if features.ncols() == self.n_features() {
            self.feature_names.clone()
        } else {
            (0..features.ncols()).map(|j| format!("x{j}")).collect()
        };
        Ok(Dataset {
            ids: self.ids.clone(),
            features,
            labels: self.labels.clone(),
            feature_names: names,
        })
    }

    /// Appends records at the end, keeping existing order.
    pub fn append(&self, extra: &[Record]) -> Result<Dataset> {
        let mut records: Vec<Record> = self.records().collect();
        records.extend_from_slice(extra);
        Dataset::from_records(&records, self.feature_names.clone())
    }

    /// Writes the dataset in the positional CSV layout (`id, features..., label`).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header = Vec::with_capacity(self.n_features() + 2);
        header.push("id".to_string());
        header.extend(self.feature_names.iter().cloned());
        header.push("label".to_string());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = Vec::with_capacity(header.len());
            row.push(self.ids[i].clone());
            row.extend(self.features.row(i).iter().map(|v| v.to_string()));
            row.push(self.labels[i].to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Loads a dataset file. Errors name the offending data row (0-based, header excluded).
pub fn load_dataset(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: std::io::Read>(reader: R, schema: &ColumnSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let (id_col, label_col) = match schema {
        ColumnSchema::Positional => {
            if header.len() < 3 {
                return Err(Error::Schema(format!(
                    "need an id column, at least one feature column and a label column; found {} columns",
                    header.len()
                )));
            }
            if !header.last().is_some_and(|h| h.eq_ignore_ascii_case("label")) {
                return Err(Error::Schema(format!(
                    "last column must be `label`, found `{}`",
                    header.last().map(String::as_str).unwrap_or_default()
                )));
            }
            (0, header.len() - 1)
        }
        ColumnSchema::Named { id, label } => {
            let find = |name: &str| header.iter().position(|h| h == name);
            let label_col =
                find(label).ok_or_else(|| Error::Schema(format!("missing label column `{label}`")))?;
            let id_col = find(id).ok_or_else(|| Error::Schema(format!("missing id column `{id}`")))?;
            if header.len() < 3 {
                return Err(Error::Schema("no feature columns".into()));
            }
            (id_col, label_col)
        }
    };
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != id_col && c != label_col)
        .collect();
    let feature_names = feature_cols.iter().map(|&c| header[c].clone()).collect();

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut flat = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("{} cells, header has {}", rec.len(), header.len()),
            });
        }
        ids.push(rec[id_col].to_string());
        for &c in &feature_cols {
            let v: f64 = rec[c].parse().map_err(|_| Error::Parse {
                row,
                column: header[c].clone(),
                message: format!("`{}` is not a number", &rec[c]),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "row {row}, column `{}`: term frequency {v} must be finite and >= 0",
                    header[c]
                )));
            }
            flat.push(v);
        }
        let raw = &rec[label_col];
        let label = match raw.parse::<f64>() {
            Ok(0.0) => NSBR,
            Ok(1.0) => SBR,
            _ => {
                return Err(Error::Validation(format!(
                    "row {row}: label `{raw}` is not 0 or 1"
                )))
            }
        };
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Validation("no records".into()));
    }
    let features = Array2::from_shape_vec((labels.len(), feature_cols.len()), flat)
        .map_err(|e| Error::Validation(e.to_string()))?;
    Dataset::new(ids, features, labels, feature_names)
}

/// Fold membership for B-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    n_folds: usize,
}

impl FoldAssignment {
    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn fold_of(&self, index: usize) -> usize {
        self.fold_of[index]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.fold_of
    }

    /// Indices in fold `k`, ascending.
    pub fn validation_indices(&self, k: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == k).collect()
    }

    /// Indices outside fold `k`, ascending.
    pub fn training_indices(&self, k: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != k).collect()
    }
}

/// Stratified B-fold split. Positives and negatives are shuffled separately,
/// then dealt round-robin (positives first, negatives continuing the cycle),
/// so fold sizes differ by at most one and each fold's positive count is
/// `floor(P/B)` or `ceil(P/B)`.
pub fn split_folds(ds: &Dataset, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {n_folds}")));
    }
    if n_folds > ds.len() {
        return Err(Error::Argument(format!(
            "{} folds requested for {} records",
            n_folds,
            ds.len()
        )));
    }
    let mut rng = util::rng(seed);
    let mut pos: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == SBR).collect();
    let mut neg: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == NSBR).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold_of = vec![0; ds.len()];
    for (slot, &i) in pos.iter().chain(neg.iter()).enumerate() {
        fold_of[i] = slot % n_folds;
    }
    Ok(FoldAssignment { fold_of, n_folds })
}
