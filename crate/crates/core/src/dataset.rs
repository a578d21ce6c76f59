//! Data ingestion, centering, synthetic designs and threshold expansion.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::support::{SubsetPartition, Support};

/// Centered regression data.
///
/// Columns of `x` and the response `y` have zero mean. The subtracted means
/// are kept so that predictions can be mapped back to the raw scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_names: Option<Vec<String>>,
    x_means: DVector<f64>,
    y_mean: f64,
}

impl Dataset {
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Column means removed by centering.
    pub fn x_means(&self) -> &DVector<f64> {
        &self.x_means
    }

    /// Response mean removed by centering.
    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "{} column names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    /// Name of coefficient `j`, falling back to `x{j+1}`.
    pub fn column_name(&self, j: usize) -> String {
        match &self.column_names {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    /// Re-centered dataset built from the listed rows of the raw data.
    ///
    /// The raw data are recovered by adding the stored means back, so the
    /// returned means are those of the selected rows on the original scale.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let raw_x = self.raw_rows(rows);
        let raw_y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i] + self.y_mean));
        let mut d = center(&raw_x, &raw_y)?;
        d.column_names = self.column_names.clone();
        Ok(d)
    }

    /// Listed rows of `x` on the original (uncentered) scale.
    pub fn raw_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let mut raw = self.x.select_rows(rows);
        for (j, mut col) in raw.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.x_means[j]);
        }
        raw
    }

    /// Listed raw responses.
    pub fn raw_response(&self, rows: &[usize]) -> DVector<f64> {
        DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i] + self.y_mean))
    }

    /// Predictions on the raw scale for raw covariate rows, using a
    /// coefficient vector fitted on this (centered) dataset.
    pub fn predict_raw(&self, raw_x: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
        let offset = self.y_mean - self.x_means.dot(beta);
        (raw_x * beta).add_scalar(offset)
    }
}

/// Subtracts column means from `raw_x` and the mean from `raw_y`.
pub fn center(raw_x: &DMatrix<f64>, raw_y: &DVector<f64>) -> Result<Dataset> {
    let (n, p) = raw_x.shape();
    if raw_y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows but response has {} entries",
            raw_y.len()
        )));
    }
    if n < 2 || p < 1 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 rows and 1 column, got {n}x{p}"
        )));
    }
    if raw_x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    if raw_y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    let x_means = DVector::from_iterator(p, raw_x.column_iter().map(|c| c.mean()));
    let mut x = raw_x.clone();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_means[j]);
    }
    let y_mean = raw_y.mean();
    let y = raw_y.add_scalar(-y_mean);
    Ok(Dataset {
        x,
        y,
        column_names: None,
        x_means,
        y_mean,
    })
}

/// A numeric CSV table with listwise deletion of incomplete rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub names: Vec<String>,
    /// Retained rows by columns.
    pub values: DMatrix<f64>,
    pub dropped_rows: usize,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn {
                name: name.to_string(),
                available: self.names.clone(),
            })
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        let j = self.column_index(name)?;
        Ok(self.values.column(j).into_owned())
    }

    /// Raw covariate block: every column except `response` and `exclude`.
    pub fn covariates(&self, response: &str, exclude: &[&str]) -> Result<(DMatrix<f64>, Vec<String>)> {
        self.column_index(response)?;
        for e in exclude {
            self.column_index(e)?;
        }
        let keep: Vec<usize> = (0..self.names.len())
            .filter(|&j| self.names[j] != response && !exclude.contains(&self.names[j].as_str()))
            .collect();
        let names = keep.iter().map(|&j| self.names[j].clone()).collect();
        Ok((self.values.select_columns(&keep), names))
    }

    /// Centered dataset with `response` as `y` and all other columns as `X`.
    pub fn to_dataset(&self, response: &str) -> Result<Dataset> {
        let y = self.column(response)?;
        let (x, names) = self.covariates(response, &[])?;
        center(&x, &y)?.with_column_names(names)
    }
}

/// Reads a header-first, comma-separated numeric file.
///
/// Rows with an empty cell are dropped; any other unparseable cell is an
/// error naming its (1-based) data row and column.
pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let m = names.len();
    let mut data = Vec::new();
    let mut kept = 0usize;
    let mut dropped = 0usize;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().any(str::is_empty) || record.len() < m {
            dropped += 1;
            continue;
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: names.get(c).cloned().unwrap_or_else(|| format!("#{}", c + 1)),
                value: cell.to_string(),
            })?;
            data.push(v);
        }
        kept += 1;
    }
    Ok(Table {
        names,
        values: DMatrix::from_row_slice(kept, m, &data),
        dropped_rows: dropped,
    })
}

/// Result of [`load_csv`].
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

/// Loads a CSV file and centers it with `response_column` as the response.
pub fn load_csv(path: &Path, response_column: &str) -> Result<LoadedCsv> {
    let table = read_table(path)?;
    let dataset = table.to_dataset(response_column)?;
    Ok(LoadedCsv {
        dataset,
        dropped_rows: table.dropped_rows,
    })
}

/// The three coefficient layouts of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// `(5,5,5 | 0.5 × 10 | 0 …)`.
    One,
    /// `(10,10,10 | 0.1 × 50 | 0 …)`.
    Two,
    /// `(10,10,10 | 0.1 × (p − 23) | 0 × 20)`.
    Three,
}

impl Case {
    pub fn from_id(id: u8) -> Result<Case> {
        match id {
            1 => Ok(Case::One),
            2 => Ok(Case::Two),
            3 => Ok(Case::Three),
            _ => Err(Error::InvalidArgument(format!("case must be 1, 2 or 3, got {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Case::One => 1,
            Case::Two => 2,
            Case::Three => 3,
        }
    }

    pub fn min_p(self) -> usize {
        match self {
            Case::One => 13,
            Case::Two => 53,
            Case::Three => 24,
        }
    }

    /// `(strong value, weak value, |S₁|, |S₂|)` for `p` coefficients.
    fn layout(self, p: usize) -> (f64, f64, usize, usize) {
        match self {
            Case::One => (5.0, 0.5, 3, 10),
            Case::Two => (10.0, 0.1, 3, 50),
            Case::Three => (10.0, 0.1, 3, p - 23),
        }
    }
}

/// Ground truth of a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub beta_star: DVector<f64>,
    pub partition: SubsetPartition,
    pub sigma: f64,
}

/// Draws one dataset from the simulation design.
///
/// Covariates are `x_is = (ξ¹_is)² + ξ²_is` with independent standard normal
/// `ξ`, errors are `σ ε` with standard normal `ε`, and every nonzero
/// coefficient gets an independent random sign. The stream order is: signs,
/// then covariates row by row, then errors.
pub fn simulate_case(case: Case, n: usize, p: usize, sigma: f64, seed: u64) -> Result<(Dataset, TrueModel)> {
    if p < case.min_p() {
        return Err(Error::InvalidArgument(format!(
            "case {} needs p >= {}, got {p}",
            case.id(),
            case.min_p()
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    let (strong, weak, p1, p2) = case.layout(p);
    let mut rng = rng::seeded(seed);

    let mut beta = DVector::zeros(p);
    for j in 0..p1 + p2 {
        let magnitude = if j < p1 { strong } else { weak };
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        beta[j] = sign * magnitude;
    }

    let mut xs = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        xs.push(a * a + b);
    }
    let raw_x = DMatrix::from_row_slice(n, p, &xs);
    let noise = DVector::from_iterator(n, (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)));
    let raw_y = &raw_x * &beta + noise;

    let partition = SubsetPartition {
        s1: Support::range(0, p1),
        s2: Support::range(p1, p1 + p2),
        s3: Support::range(p1 + p2, p),
    };
    let data = center(&raw_x, &raw_y)?;
    Ok((
        data,
        TrueModel {
            beta_star: beta,
            partition,
            sigma,
        },
    ))
}

/// Threshold variable `Q` and threshold `τ` for a two-regime design.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSpec {
    pub q: DVector<f64>,
    pub tau: f64,
}

/// Builds `[1, X, I(Q<τ), I(Q<τ)·X]` row by row.
pub fn expand_threshold_design(base_x: &DMatrix<f64>, spec: &ThresholdSpec) -> Result<DMatrix<f64>> {
    let (n, k) = base_x.shape();
    if spec.q.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "threshold variable has {} entries for {n} rows",
            spec.q.len()
        )));
    }
    if !spec.tau.is_finite() || spec.q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("threshold specification"));
    }
    if base_x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    let mut out = DMatrix::zeros(n, 2 * k + 2);
    for i in 0..n {
        let ind = if spec.q[i] < spec.tau { 1.0 } else { 0.0 };
        out[(i, 0)] = 1.0;
        out[(i, k + 1)] = ind;
        for j in 0..k {
            out[(i, 1 + j)] = base_x[(i, j)];
            out[(i, k + 2 + j)] = ind * base_x[(i, j)];
        }
    }
    Ok(out)
}

/// Column names matching [`expand_threshold_design`].
pub fn threshold_design_names(base: &[String]) -> Vec<String> {
    let mut names = Vec::with_capacity(2 * base.len() + 2);
    names.push("intercept".to_string());
    names.extend(base.iter().cloned());
    names.push("low_regime".to_string());
    names.extend(base.iter().map(|b| format!("low_regime:{b}")));
    names
}
