//! Observational data: the container, CSV input/output, group splitting and
//! within-group standardization.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{inverse_sqrt_from_eigen, ridge_if_needed, sym_eigen, Matrix};

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Control,
    Treated,
}

impl Group {
    pub fn label(self) -> u8 {
        match self {
            Group::Control => 0,
            Group::Treated => 1,
        }
    }

    pub fn from_label(t: u8) -> Option<Group> {
        match t {
            0 => Some(Group::Control),
            1 => Some(Group::Treated),
            _ => None,
        }
    }

    pub fn opposite(self) -> Group {
        match self {
            Group::Control => Group::Treated,
            Group::Treated => Group::Control,
        }
    }
}

/// `n` subjects with covariates `X`, binary treatment `T` and observed
/// outcome `Y(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalSample {
    covariates: Matrix,
    treatment: Vec<u8>,
    outcome: Vec<f64>,
    column_names: Option<Vec<String>>,
}

impl ObservationalSample {
    pub fn new(covariates: Matrix, treatment: Vec<u8>, outcome: Vec<f64>) -> Result<Self> {
        let n = covariates.rows();
        if treatment.len() != n || outcome.len() != n {
            return Err(Error::InvalidArgument(format!(
                "covariates have {n} rows but treatment has {} and outcome has {}",
                treatment.len(),
                outcome.len()
            )));
        }
        if n == 0 || covariates.cols() == 0 {
            return Err(Error::InvalidArgument("sample must be nonempty".into()));
        }
        if let Some(i) = treatment.iter().position(|&t| t > 1) {
            return Err(Error::InvalidArgument(format!(
                "treatment of subject {i} is {}, expected 0 or 1",
                treatment[i]
            )));
        }
        if let Some(i) = outcome.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidArgument(format!("outcome of subject {i} is not finite")));
        }
        Ok(ObservationalSample {
            covariates,
            treatment,
            outcome,
            column_names: None,
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::InvalidArgument(format!(
                "{} column names for {} covariates",
                names.len(),
                self.p()
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.covariates.rows()
    }

    pub fn p(&self) -> usize {
        self.covariates.cols()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn group_of(&self, i: usize) -> Group {
        if self.treatment[i] == 1 {
            Group::Treated
        } else {
            Group::Control
        }
    }

    /// Indices of the subjects in `group`, ascending.
    pub fn group_indices(&self, group: Group) -> Vec<usize> {
        let label = group.label();
        (0..self.n()).filter(|&i| self.treatment[i] == label).collect()
    }

    pub fn group_size(&self, group: Group) -> usize {
        let label = group.label();
        self.treatment.iter().filter(|&&t| t == label).count()
    }

    /// Covariate rows and outcomes of one group, in subject order.
    pub fn group_data(&self, group: Group) -> (Matrix, Vec<f64>) {
        let idx = self.group_indices(group);
        let y = idx.iter().map(|&i| self.outcome[i]).collect();
        (self.covariates.select_rows(&idx), y)
    }

    /// Same subjects with covariates replaced by `covariates`.
    pub fn with_covariates(&self, covariates: Matrix) -> Result<Self> {
        ObservationalSample::new(covariates, self.treatment.clone(), self.outcome.clone())
    }

    /// Reorders subjects so that new subject `k` is old subject `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        ObservationalSample {
            covariates: self.covariates.select_rows(order),
            treatment: order.iter().map(|&i| self.treatment[i]).collect(),
            outcome: order.iter().map(|&i| self.outcome[i]).collect(),
            column_names: self.column_names.clone(),
        }
    }
}

/// Column roles for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub treatment: String,
    pub outcome: String,
    pub covariates: Vec<String>,
}

impl CsvSchema {
    pub fn new(treatment: impl Into<String>, outcome: impl Into<String>, covariates: Vec<String>) -> Self {
        CsvSchema {
            treatment: treatment.into(),
            outcome: outcome.into(),
            covariates,
        }
    }
}

/// Reads a comma-separated file with a header row.
///
/// Every referenced cell must parse as a finite number; the treatment
/// column must hold 0 or 1. Row numbers in errors are 1-based data rows
/// (the header is row 0).
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<ObservationalSample> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<ObservationalSample> {
    if schema.covariates.is_empty() {
        return Err(Error::Schema("no covariate columns given".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header row: {e}")))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in header")))
    };
    let t_col = find(&schema.treatment)?;
    let y_col = find(&schema.outcome)?;
    let x_cols = schema
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut treatment = Vec::new();
    let mut outcome = Vec::new();
    let mut data = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: "missing value".into(),
                });
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("'{raw}' is not a finite number"),
                }),
            }
        };
        let t = cell(t_col, &schema.treatment)?;
        let t = if t == 0.0 {
            0
        } else if t == 1.0 {
            1
        } else {
            return Err(Error::Parse {
                row,
                column: schema.treatment.clone(),
                message: format!("treatment must be 0 or 1, got {t}"),
            });
        };
        treatment.push(t);
        outcome.push(cell(y_col, &schema.outcome)?);
        for (&col, name) in x_cols.iter().zip(&schema.covariates) {
            data.push(cell(col, name)?);
        }
    }
    if treatment.is_empty() {
        return Err(Error::InsufficientData("csv has no data rows".into()));
    }
    let covariates = Matrix::from_row_major(treatment.len(), x_cols.len(), data)?;
    ObservationalSample::new(covariates, treatment, outcome)?
        .with_column_names(schema.covariates.clone())
}

/// Writes `sample` with columns `treatment, outcome, covariates...`. Values
/// use Rust's shortest round-trip formatting, so reading the file back
/// reproduces every value bit for bit.
pub fn write_csv(
    sample: &ObservationalSample,
    path: impl AsRef<Path>,
    schema: &CsvSchema,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, csv_string(sample, schema)?).map_err(|e| Error::io(path, e))
}

pub fn csv_string(sample: &ObservationalSample, schema: &CsvSchema) -> Result<String> {
    if schema.covariates.len() != sample.p() {
        return Err(Error::Schema(format!(
            "{} covariate names for {} columns",
            schema.covariates.len(),
            sample.p()
        )));
    }
    let mut out = String::new();
    out.push_str(&schema.treatment);
    out.push(',');
    out.push_str(&schema.outcome);
    for c in &schema.covariates {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for i in 0..sample.n() {
        let _ = write!(out, "{},{}", sample.treatment[i], sample.outcome[i]);
        for v in sample.covariates.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// The affine map `x ↦ Σ̂^{-1/2} (x − μ̂)` fitted on one treatment group.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationMap {
    pub group: Group,
    pub mean: Vec<f64>,
    pub inv_sqrt_cov: Matrix,
    /// Ridge added to the covariance eigenvalues; zero unless the group
    /// covariance was near-singular.
    pub ridge: f64,
}

impl StandardizationMap {
    pub fn p(&self) -> usize {
        self.mean.len()
    }

    pub fn ridge_applied(&self) -> bool {
        self.ridge > 0.0
    }
}

/// Fits the group's sample mean and inverse square-root covariance
/// (denominator `n_t − 1`).
///
/// Near-constant columns are not rejected: when the smallest eigenvalue of
/// the covariance drops below `1e-8 · trace / p` the default ridge is added.
pub fn fit_standardization(
    sample: &ObservationalSample,
    group: Group,
) -> Result<StandardizationMap> {
    let (x, _) = sample.group_data(group);
    fit_standardization_rows(&x, group)
}

pub(crate) fn fit_standardization_rows(x: &Matrix, group: Group) -> Result<StandardizationMap> {
    let p = x.cols();
    if x.rows() < p + 1 {
        return Err(Error::InsufficientData(format!(
            "group {} has {} subjects; standardization needs at least p + 1 = {}",
            group.label(),
            x.rows(),
            p + 1
        )));
    }
    let mean = x.column_means();
    let cov = x.sample_covariance()?;
    let eig = sym_eigen(&cov)?;
    let ridge = ridge_if_needed(&cov, &eig);
    let inv_sqrt_cov = inverse_sqrt_from_eigen(&eig, ridge)?;
    Ok(StandardizationMap {
        group,
        mean,
        inv_sqrt_cov,
        ridge,
    })
}

/// Applies the map row-wise to any covariate matrix with `p` columns.
pub fn apply_standardization(map: &StandardizationMap, covariates: &Matrix) -> Result<Matrix> {
    let p = map.p();
    if covariates.cols() != p {
        return Err(Error::InvalidArgument(format!(
            "standardization expects {p} columns, got {}",
            covariates.cols()
        )));
    }
    let mut out = Matrix::zeros(covariates.rows(), p);
    let mut centered = vec![0.0; p];
    for i in 0..covariates.rows() {
        for ((c, x), m) in centered.iter_mut().zip(covariates.row(i)).zip(&map.mean) {
            *c = x - m;
        }
        let row = out.row_mut(i);
        for (a, r) in row.iter_mut().enumerate() {
            *r = map
                .inv_sqrt_cov
                .row(a)
                .iter()
                .zip(&centered)
                .map(|(w, c)| w * c)
                .sum();
        }
    }
    Ok(out)
}
