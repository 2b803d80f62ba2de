//! Dataset loading, normalization, and seeded stratified splitting.
//!
//! Class labels are the raw strings of the label column, mapped to dense ids
//! in order of first appearance. Two datasets ship embedded as fixtures (the
//! four-feature iris table and a 4-row xor toy); everything else is loaded
//! from CSV files, optionally pinned by sha256 through a manifest.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    /// samples x features
    features: Matrix,
    labels: Vec<usize>,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if features.rows() == 0 {
            return Err(Error::EmptyDataset(format!("{name} has no samples")));
        }
        assert_eq!(features.rows(), labels.len(), "feature/label row mismatch");
        assert!(
            labels.iter().all(|&l| l < label_names.len()),
            "label id out of range"
        );
        Ok(Dataset {
            name,
            features,
            labels,
            label_names,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty datasets
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn features_row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Samples of one class, as row indices in original order.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    fn select(&self, indices: &[usize], suffix: &str) -> Dataset {
        let rows: Vec<Vec<f64>> = indices.iter().map(|&i| self.features_row(i).to_vec()).collect();
        Dataset {
            name: format!("{}-{suffix}", self.name),
            features: Matrix::from_rows(&rows),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
        }
    }
}

/// How to read a CSV file into features and labels. `label_column` and
/// `skip_columns` index the raw columns, before any are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    #[serde(default = "default_true")]
    pub has_header: bool,
    pub label_column: usize,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub skip_columns: Vec<usize>,
}

fn default_true() -> bool {
    true
}

fn default_delimiter() -> char {
    ','
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            has_header: true,
            label_column: 0,
            delimiter: ',',
            skip_columns: Vec::new(),
        }
    }
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    load_csv_reader(File::open(path)?, schema, &name)
}

pub fn load_csv_reader<R: Read>(reader: R, schema: &CsvSchema, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(schema.delimiter as u8)
        .from_reader(reader);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut label_names: Vec<String> = Vec::new();

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, csv::Position::line);
            Error::MalformedRow {
                row,
                reason: e.to_string(),
            }
        })?;
        let row = record.position().map_or(0, csv::Position::line);
        if record.len() <= schema.label_column {
            return Err(Error::BadLabelColumn {
                column: schema.label_column,
                width: record.len(),
            });
        }
        let mut features = Vec::with_capacity(record.len() - 1);
        for (col, field) in record.iter().enumerate() {
            if col == schema.label_column || schema.skip_columns.contains(&col) {
                continue;
            }
            let value: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
                row,
                reason: format!("column {col}: {field:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::MalformedRow {
                    row,
                    reason: format!("column {col}: {field:?} is not finite"),
                });
            }
            features.push(value);
        }
        let label_text = record.get(schema.label_column).unwrap().trim();
        let id = match label_names.iter().position(|n| n == label_text) {
            Some(id) => id,
            None => {
                label_names.push(label_text.to_string());
                label_names.len() - 1
            }
        };
        labels.push(id);
        rows.push(features);
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!("{name} has no data rows")));
    }
    Dataset::new(name, Matrix::from_rows(&rows), labels, label_names)
}

/// Min-max scale every feature column to [0, 1]; constant columns become 0.
/// Applying it twice is a no-op.
pub fn normalize(ds: &Dataset) -> Dataset {
    let (n, cols) = (ds.len(), ds.feature_count());
    let mut lo = vec![f64::INFINITY; cols];
    let mut hi = vec![f64::NEG_INFINITY; cols];
    for i in 0..n {
        for (c, &v) in ds.features_row(i).iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    let mut out = Matrix::zeros(n, cols);
    for i in 0..n {
        for (c, &v) in ds.features_row(i).iter().enumerate() {
            let span = hi[c] - lo[c];
            let scaled = if span == 0.0 { 0.0 } else { (v - lo[c]) / span };
            out.set(i, c, scaled);
        }
    }
    Dataset {
        name: ds.name.clone(),
        features: out,
        labels: ds.labels.clone(),
        label_names: ds.label_names.clone(),
    }
}

/// Seeded stratified split into (train, test). Each class contributes
/// round(class_size * test_fraction) test samples, capped so at least one
/// sample per class stays on the train side. Classes with fewer than two
/// samples cannot be split.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::BadTestFraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_idx: Vec<usize> = Vec::new();
    let mut train_idx: Vec<usize> = Vec::new();
    for class in 0..ds.class_count() {
        let mut members = ds.class_indices(class);
        let size = members.len();
        if size < 2 {
            return Err(Error::ClassTooSmall { class, size });
        }
        members.shuffle(&mut rng);
        let count = ((size as f64 * test_fraction).round() as usize).min(size - 1);
        test_idx.extend_from_slice(&members[..count]);
        train_idx.extend_from_slice(&members[count..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    if train_idx.is_empty() {
        return Err(Error::EmptyDataset("train split has no samples".into()));
    }
    if test_idx.is_empty() {
        return Err(Error::EmptyDataset("test split has no samples".into()));
    }
    Ok((ds.select(&train_idx, "train"), ds.select(&test_idx, "test")))
}

/// The classic 150-sample iris table, embedded so the smoke paths need no
/// files on disk.
pub fn iris_fixture() -> Dataset {
    let schema = CsvSchema {
        has_header: true,
        label_column: 4,
        delimiter: ',',
        skip_columns: Vec::new(),
    };
    load_csv_reader(
        include_str!("../fixtures/iris.csv").as_bytes(),
        &schema,
        "iris",
    )
    .expect("embedded iris fixture must parse")
}

/// Four-sample xor truth table, two classes.
pub fn xor_fixture() -> Dataset {
    let features = Matrix::from_rows(&[
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ]);
    Dataset::new("xor", features, vec![0, 1, 1, 0], vec!["even".into(), "odd".into()]).unwrap()
}

pub fn fixture(name: &str) -> Result<Dataset> {
    match name {
        "iris" => Ok(iris_fixture()),
        "xor" => Ok(xor_fixture()),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

/// One downloadable dataset: where it comes from, how to read it, and
/// optionally the sha256 the file must hash to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub url: String,
    pub file: String,
    pub sha256: Option<String>,
    pub schema: CsvSchema,
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Check a downloaded manifest entry: the file must exist and, when the
/// manifest pins a hash, match it exactly.
pub fn verify_entry(dir: &Path, entry: &ManifestEntry) -> Result<std::path::PathBuf> {
    let path = dir.join(&entry.file);
    if !path.exists() {
        return Err(Error::Manifest(format!(
            "{} is missing, fetch {} first",
            path.display(),
            entry.url
        )));
    }
    if let Some(expected) = &entry.sha256 {
        let actual = sha256_hex(&path)?;
        if &actual != expected {
            return Err(Error::ChecksumMismatch {
                name: entry.name.clone(),
                expected: expected.clone(),
                actual,
            });
        }
    }
    Ok(path)
}
