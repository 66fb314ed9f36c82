//! Tabular data for the logistic-regression experiments: CSV ingestion,
//! imbalanced-covariate selection, standardization and a synthetic generator
//! that reproduces the rare-category pathology.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{fmt_f64, sigmoid};

/// Per-column affine map applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub column: String,
    pub mean: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n × d`
    pub features: DMatrix<f64>,
    /// Entries are 0.0 or 1.0.
    pub labels: Vec<f64>,
    pub column_names: Vec<String>,
    pub standardization: Option<Vec<ColumnScaling>>,
    /// Rows removed at load time because they held a missing marker.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.ncols()
    }

    /// Features with a leading column of ones.
    pub fn design_with_intercept(&self) -> DMatrix<f64> {
        self.features.clone().insert_column(0, 1.0)
    }

    /// Features mapped back through the standardization record.
    pub fn inverse_transform(&self) -> DMatrix<f64> {
        let mut out = self.features.clone();
        if let Some(rec) = &self.standardization {
            for (j, s) in rec.iter().enumerate() {
                out.column_mut(j).apply(|v| *v = *v * s.scale + s.mean);
            }
        }
        out
    }

    fn subset_columns(&self, cols: &[usize]) -> Dataset {
        let features = DMatrix::from_fn(self.n_rows(), cols.len(), |i, j| {
            self.features[(i, cols[j])]
        });
        Dataset {
            features,
            labels: self.labels.clone(),
            column_names: cols.iter().map(|&j| self.column_names[j].clone()).collect(),
            standardization: self
                .standardization
                .as_ref()
                .map(|s| cols.iter().map(|&j| s[j].clone()).collect()),
            dropped_rows: self.dropped_rows,
        }
    }

    /// Snapshot: features plus a trailing `label` column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = self.column_names.clone();
        header.push("label".into());
        out.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = self.features.row(i).iter().map(|v| fmt_f64(*v)).collect();
            rec.push(self.labels[i].to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Standardization sidecar as a JSON array of `{column, mean, scale}`.
    pub fn write_standardization_json<W: Write>(&self, w: W) -> Result<()> {
        let rec = self.standardization.clone().unwrap_or_default();
        serde_json::to_writer_pretty(w, &rec)?;
        Ok(())
    }
}

/// Which column holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    /// Zero-based; negative values count from the end (`-1` is the last).
    Index(isize),
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label: LabelColumn,
    pub has_header: bool,
    pub missing_markers: HashSet<String>,
    /// Raw label values mapped to class 1; every other value maps to 0.
    /// When empty the label column must already be 0/1.
    pub positive_classes: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label: LabelColumn::Index(-1),
            has_header: true,
            missing_markers: ["?", ""].into_iter().map(String::from).collect(),
            positive_classes: Vec::new(),
        }
    }
}

/// Reads a comma-separated file. Rows holding any missing marker are dropped
/// and counted.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::DatasetNotFound(path.display().to_string()));
    }
    let file = std::fs::File::open(path)?;
    read_csv(file, opts)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::Data("empty CSV".into())),
    };
    let width = first.len();
    let (header, mut rows): (Vec<String>, Vec<csv::StringRecord>) = if opts.has_header {
        (first.iter().map(String::from).collect(), Vec::new())
    } else {
        ((0..width).map(|j| format!("c{j}")).collect(), vec![first])
    };
    for r in records {
        rows.push(r?);
    }

    let label_idx = match &opts.label {
        LabelColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("label column '{name}' not found")))?,
        LabelColumn::Index(i) => {
            let idx = if *i < 0 { width as isize + i } else { *i };
            if idx < 0 || idx as usize >= width {
                return Err(Error::Data(format!("label column index {i} out of range")));
            }
            idx as usize
        }
    };

    let feature_cols: Vec<usize> = (0..width).filter(|&j| j != label_idx).collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for (r, row) in rows.iter().enumerate() {
        if row.iter().any(|c| opts.missing_markers.contains(c)) {
            dropped += 1;
            continue;
        }
        for &j in &feature_cols {
            let cell = &row[j];
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "unparseable value '{cell}' at data row {} column '{}'",
                    r + 1,
                    header[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite value at data row {} column '{}'",
                    r + 1,
                    header[j]
                )));
            }
            values.push(v);
        }
        labels.push(row[label_idx].to_string());
    }

    let labels = binarize_labels(&labels, &opts.positive_classes)?;
    let n = labels.len();
    Ok(Dataset {
        features: DMatrix::from_row_slice(n, feature_cols.len(), &values),
        labels,
        column_names: feature_cols.iter().map(|&j| header[j].clone()).collect(),
        standardization: None,
        dropped_rows: dropped,
    })
}

fn binarize_labels(raw: &[String], positive: &[String]) -> Result<Vec<f64>> {
    if positive.is_empty() {
        return raw
            .iter()
            .map(|s| match s.parse::<f64>() {
                Ok(0.0) => Ok(0.0),
                Ok(1.0) => Ok(1.0),
                _ => Err(Error::Data(format!(
                    "label '{s}' is not 0/1; specify the positive class"
                ))),
            })
            .collect();
    }
    let numeric_pos: Vec<f64> = positive.iter().filter_map(|p| p.parse().ok()).collect();
    Ok(raw
        .iter()
        .map(|s| {
            let hit = positive.iter().any(|p| p == s)
                || s.parse::<f64>().is_ok_and(|v| numeric_pos.contains(&v));
            f64::from(u8::from(hit))
        })
        .collect())
}

/// Level counts for one column, keyed by the value's bit pattern so the
/// ordering is deterministic.
fn level_counts(col: impl Iterator<Item = f64>) -> BTreeMap<u64, usize> {
    let mut m = BTreeMap::new();
    for v in col {
        // fold -0.0 into 0.0
        let key = if v == 0.0 { 0.0f64 } else { v };
        *m.entry(key.to_bits()).or_insert(0) += 1;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRule {
    pub n_imbalanced: usize,
    pub n_regular: usize,
    /// A categorical column qualifies when its rarest level occurs at most
    /// this many times.
    pub rarity_threshold: usize,
    /// Columns with at most this many distinct values count as categorical.
    pub max_categorical_levels: usize,
}

impl Default for SelectionRule {
    fn default() -> Self {
        Self {
            n_imbalanced: 25,
            n_regular: 25,
            rarity_threshold: 2,
            max_categorical_levels: 10,
        }
    }
}

/// Whether a column is categorical with a rare level.
pub fn is_imbalanced(col: impl Iterator<Item = f64>, rule: &SelectionRule) -> bool {
    let counts = level_counts(col);
    counts.len() >= 2
        && counts.len() <= rule.max_categorical_levels
        && counts.values().copied().min().unwrap_or(0) <= rule.rarity_threshold
}

/// Keeps the first `n_imbalanced` qualifying columns and the first
/// `n_regular` of the rest, in original column order. Columns that never
/// vary are never chosen as regular columns.
pub fn select_covariates(ds: &Dataset, rule: &SelectionRule) -> Result<Dataset> {
    let mut imbalanced = Vec::new();
    let mut regular = Vec::new();
    for j in 0..ds.n_cols() {
        let col = ds.features.column(j);
        if is_imbalanced(col.iter().copied(), rule) {
            imbalanced.push(j);
        } else if level_counts(col.iter().copied()).len() >= 2 {
            regular.push(j);
        }
    }
    if imbalanced.len() < rule.n_imbalanced {
        return Err(Error::Data(format!(
            "only {} imbalanced columns qualify, {} requested",
            imbalanced.len(),
            rule.n_imbalanced
        )));
    }
    if regular.len() < rule.n_regular {
        return Err(Error::Data(format!(
            "only {} regular columns available, {} requested",
            regular.len(),
            rule.n_regular
        )));
    }
    let mut cols: Vec<usize> = imbalanced[..rule.n_imbalanced].to_vec();
    cols.extend_from_slice(&regular[..rule.n_regular]);
    Ok(ds.subset_columns(&cols))
}

/// Centres each column and divides by its sample standard deviation.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(invalid("standardization needs at least two rows"));
    }
    let mut features = ds.features.clone();
    let mut record = Vec::with_capacity(ds.n_cols());
    for j in 0..ds.n_cols() {
        let mut col = features.column_mut(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let scale = var.sqrt();
        if !(scale > 0.0) || scale < 1e-12 * mean.abs() {
            return Err(Error::Data(format!(
                "column '{}' has zero variance",
                ds.column_names[j]
            )));
        }
        col.apply(|v| *v = (*v - mean) / scale);
        record.push(ColumnScaling {
            column: ds.column_names[j].clone(),
            mean,
            scale,
        });
    }
    // compose with any earlier record so inverse_transform reaches raw data
    let record = match &ds.standardization {
        Some(prev) => prev
            .iter()
            .zip(record)
            .map(|(p, r)| ColumnScaling {
                column: r.column,
                mean: p.mean + p.scale * r.mean,
                scale: p.scale * r.scale,
            })
            .collect(),
        None => record,
    };
    Ok(Dataset {
        features,
        labels: ds.labels.clone(),
        column_names: ds.column_names.clone(),
        standardization: Some(record),
        dropped_rows: ds.dropped_rows,
    })
}

/// Parameters of [`synthesize_imbalanced`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d_imbalanced: usize,
    pub d_regular: usize,
    pub rare_count: usize,
    pub true_beta_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 452,
            d_imbalanced: 25,
            d_regular: 25,
            rare_count: 2,
            true_beta_scale: 1.0,
            seed: 1,
        }
    }
}

/// Rare-category logistic data.
///
/// Imbalanced columns are binary with exactly `rare_count` ones. Regular
/// columns are continuous with scales log-uniform on `[0.05, 32]` and
/// arbitrary offsets. Coefficients are drawn on the standardized scale with
/// standard deviation `true_beta_scale / √d` for regular columns, and with
/// standard deviation `true_beta_scale` for the rare columns.
pub fn synthesize_imbalanced(spec: &SyntheticSpec) -> Result<Dataset> {
    let SyntheticSpec {
        n,
        d_imbalanced,
        d_regular,
        rare_count,
        true_beta_scale,
        seed,
    } = *spec;
    if n == 0 || d_imbalanced + d_regular == 0 {
        return Err(invalid("need at least one row and one column"));
    }
    if rare_count == 0 || rare_count * 10 > n {
        return Err(invalid(format!(
            "rare_count must lie in 1..=n/10, got {rare_count}"
        )));
    }
    if !(true_beta_scale >= 0.0) {
        return Err(invalid("true_beta_scale must be ≥ 0"));
    }
    let d = d_imbalanced + d_regular;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = DMatrix::zeros(n, d);
    let mut names = Vec::with_capacity(d);

    for j in 0..d_imbalanced {
        for i in sample_indices(&mut rng, n, rare_count) {
            features[(i, j)] = 1.0;
        }
        names.push(format!("rare{j}"));
    }
    let (lo, hi) = (0.05f64.ln(), 32f64.ln());
    let mut scales = Vec::with_capacity(d_regular);
    for k in 0..d_regular {
        let scale = rng.random_range(lo..hi).exp();
        let offset = rng.random_range(-3.0..3.0) * scale;
        scales.push(scale);
        for i in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[(i, d_imbalanced + k)] = offset + scale * z;
        }
        names.push(format!("cont{k}"));
    }

    let reg_sd = true_beta_scale / (d as f64).sqrt();
    let mut beta = vec![0.0; d];
    for (j, b) in beta.iter_mut().enumerate() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *b = if j < d_imbalanced {
            true_beta_scale * z
        } else {
            reg_sd * z / scales[j - d_imbalanced]
        };
    }
    // centre the linear predictor so classes are roughly balanced
    let eta: Vec<f64> = (0..n)
        .map(|i| (0..d).map(|j| features[(i, j)] * beta[j]).sum())
        .collect();
    let centre = eta.iter().sum::<f64>() / n as f64;
    let labels = eta
        .iter()
        .map(|e| f64::from(u8::from(rng.random::<f64>() < sigmoid(e - centre))))
        .collect();

    Ok(Dataset {
        features,
        labels,
        column_names: names,
        standardization: None,
        dropped_rows: 0,
    })
}
