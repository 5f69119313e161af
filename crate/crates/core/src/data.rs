//! Tabular ingestion: CSV parsing, label encoding, z-score standardization and
//! seeded subsampling.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sum;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(String),
    #[error("empty file: no header row")]
    MissingHeader,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("label column not binary: found {0} distinct values")]
    LabelNotBinary(usize),
    #[error("positive label value {0} does not occur in the label column")]
    PositiveValueAbsent(f64),
    #[error("zero variance in column `{0}`")]
    ZeroVariance(String),
    #[error("standardization stats cover {stats} columns, data has {columns}")]
    StatsArity { stats: usize, columns: usize },
    #[error("subsample size {size} exceeds row count {n}")]
    SubsampleTooLarge { size: usize, n: usize },
    #[error("subsample size must be positive")]
    EmptySubsample,
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

/// Parsed numeric table with its header.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub label_column: String,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Number of non-label columns.
    pub fn n_features(&self) -> usize {
        self.header.len() - 1
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn label_index(&self) -> Result<usize, DataError> {
        self.column_index(&self.label_column)
            .ok_or_else(|| DataError::MissingColumn(self.label_column.clone()))
    }

    pub fn label_values(&self) -> Result<Vec<f64>, DataError> {
        let j = self.label_index()?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Load a header-first, comma separated numeric file.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<RawTable, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, label_column)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str) -> Result<RawTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DataError::MissingHeader);
    }
    if !header.iter().any(|h| h == label_column) {
        return Err(DataError::MissingColumn(label_column.to_owned()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        // data rows are 1-based after the header line
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(DataError::Ragged {
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let parsed = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DataError::NonNumeric {
                        row,
                        column: header[j].clone(),
                        value: cell.to_owned(),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(parsed);
    }
    Ok(RawTable {
        header,
        rows,
        label_column: label_column.to_owned(),
    })
}

/// Encode labels as ±1: `positive_value` maps to +1, the other value to −1.
pub fn transform_labels(raw: &RawTable, positive_value: f64) -> Result<Vec<f64>, DataError> {
    encode_labels(&raw.label_values()?, positive_value)
}

pub fn encode_labels(labels: &[f64], positive_value: f64) -> Result<Vec<f64>, DataError> {
    let distinct: BTreeSet<u64> = labels.iter().map(|v| v.to_bits()).collect();
    if distinct.len() != 2 {
        return Err(DataError::LabelNotBinary(distinct.len()));
    }
    if !labels.contains(&positive_value) {
        return Err(DataError::PositiveValueAbsent(positive_value));
    }
    Ok(labels
        .iter()
        .map(|&v| if v == positive_value { 1.0 } else { -1.0 })
        .collect())
}

/// Per-column location and (population) scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub mean: f64,
    pub stddev: f64,
}

/// Z-score each column of `features` (rows are individuals).
///
/// With `stats = None` the scales are fit on `features` using the population
/// standard deviation; otherwise the given scales are applied as-is.
pub fn standardize(
    features: &DMatrix<f64>,
    names: &[String],
    stats: Option<&[FeatureScale]>,
) -> Result<(DMatrix<f64>, Vec<FeatureScale>), DataError> {
    let (n, d) = features.shape();
    let scales = match stats {
        Some(s) => {
            if s.len() != d {
                return Err(DataError::StatsArity {
                    stats: s.len(),
                    columns: d,
                });
            }
            s.to_vec()
        }
        None => (0..d)
            .map(|j| {
                let col: Vec<f64> = features.column(j).iter().copied().collect();
                let mean = sum::mean(&col);
                let sq: Vec<f64> = col.iter().map(|v| (v - mean) * (v - mean)).collect();
                let stddev = if n == 0 { 0.0 } else { sum::mean(&sq).sqrt() };
                if stddev.is_nan() || stddev <= 1e-12 * mean.abs().max(1.0) {
                    let name = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
                    return Err(DataError::ZeroVariance(name));
                }
                Ok(FeatureScale { mean, stddev })
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let mut x = features.clone();
    for (j, s) in scales.iter().enumerate() {
        for v in x.column_mut(j).iter_mut() {
            *v = (*v - s.mean) / s.stddev;
        }
    }
    Ok((x, scales))
}

/// Declarative preprocessing of a raw table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub label_column: String,
    /// Raw label value that means "no default" (encoded +1).
    pub positive_value: f64,
    #[serde(default)]
    pub actionable: Vec<String>,
    #[serde(default)]
    pub drop: Vec<String>,
}

/// Standardized design matrix with ±1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// n × d, one row per individual.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub feature_names: Vec<String>,
    pub actionable: Vec<bool>,
    /// Scales of the standardized columns (the intercept column has none).
    pub standardization: Vec<FeatureScale>,
    /// Index of the constant bias column, if one was appended.
    pub intercept: Option<usize>,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        feature_names: Vec<String>,
        actionable: Vec<bool>,
        standardization: Vec<FeatureScale>,
    ) -> Result<Self, DataError> {
        let ds = Dataset {
            x,
            y,
            feature_names,
            actionable,
            standardization,
            intercept: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<(), DataError> {
        let (n, d) = self.x.shape();
        if self.y.len() != n {
            return Err(DataError::Invalid(format!(
                "{} labels for {n} rows",
                self.y.len()
            )));
        }
        if self.feature_names.len() != d || self.actionable.len() != d {
            return Err(DataError::Invalid(format!(
                "{d} columns but {} names and {} actionability flags",
                self.feature_names.len(),
                self.actionable.len()
            )));
        }
        if let Some(i) = self.y.iter().position(|&v| v != 1.0 && v != -1.0) {
            return Err(DataError::Invalid(format!("label at row {i} is not ±1")));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite feature value".into()));
        }
        if self
            .standardization
            .iter()
            .any(|s| s.stddev.is_nan() || s.stddev <= 0.0)
        {
            return Err(DataError::Invalid("non-positive stored stddev".into()));
        }
        Ok(())
    }

    /// Build from a raw table: drop columns, encode labels, fit the z-score.
    pub fn from_raw(raw: &RawTable, prep: &Preprocessing) -> Result<Self, DataError> {
        for name in prep.drop.iter().chain(&prep.actionable) {
            if raw.column_index(name).is_none() {
                return Err(DataError::MissingColumn(name.clone()));
            }
        }
        if prep.label_column != raw.label_column {
            return Err(DataError::Invalid(format!(
                "table label `{}` differs from preprocessing label `{}`",
                raw.label_column, prep.label_column
            )));
        }
        let y = transform_labels(raw, prep.positive_value)?;
        let keep: Vec<usize> = (0..raw.header.len())
            .filter(|&j| {
                let h = &raw.header[j];
                *h != raw.label_column && !prep.drop.contains(h)
            })
            .collect();
        let names: Vec<String> = keep.iter().map(|&j| raw.header[j].clone()).collect();
        let features = DMatrix::from_fn(raw.n_rows(), keep.len(), |i, k| raw.rows[i][keep[k]]);
        let (x, scales) = standardize(&features, &names, None)?;
        let actionable = names.iter().map(|n| prep.actionable.contains(n)).collect();
        Dataset::new(x, DVector::from_vec(y), names, actionable, scales)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    /// Dataset restricted to `indices` (in the given order).
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(indices),
            y: DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.y[i])),
            ..self.clone()
        }
    }
}

/// Size and seed of a row subsample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    pub size: usize,
    pub seed: u64,
}

/// Row indices drawn without replacement, returned in ascending order.
pub fn subsample_indices(n: usize, spec: SubsampleSpec) -> Result<Vec<usize>, DataError> {
    if spec.size == 0 {
        return Err(DataError::EmptySubsample);
    }
    if spec.size > n {
        return Err(DataError::SubsampleTooLarge { size: spec.size, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, spec.size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Seeded subsample; standardization stats are carried over unchanged.
pub fn subsample(ds: &Dataset, spec: SubsampleSpec) -> Result<Dataset, DataError> {
    let idx = subsample_indices(ds.n(), spec)?;
    Ok(ds.select_rows(&idx))
}
