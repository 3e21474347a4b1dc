//! Synthetic instances (multivariate t covariates, linear outcomes with
//! Gaussian noise), row normalization, and CSV persistence.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::linalg::{row_norm, CovariateMatrix, NORMALIZED_TOL};
use crate::oracle::PotentialOutcomes;

/// Parameters of the synthetic instance: covariance `cov_scale * decay^|i-j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub cov_scale: f64,
    pub decay: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Defaults: covariance `2 * 0.5^|i-j|` and noise `1/sqrt(d)`.
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            sigma: 1.0 / (d.max(1) as f64).sqrt(),
            cov_scale: 2.0,
            decay: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidDimension(format!(
                "synthetic instance needs n, d >= 1, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.d;
        DMatrix::from_fn(d, d, |i, j| {
            self.cov_scale * self.decay.powi(i.abs_diff(j) as i32)
        })
    }
}

/// Covariates drawn i.i.d. from a multivariate t with one degree of freedom,
/// then globally row-normalized.
pub fn gen_t_covariates<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<CovariateMatrix> {
    spec.validate()?;
    let chol = spec
        .covariance()
        .cholesky()
        .ok_or(Error::CholeskyFailure("synthetic covariance is not positive definite"))?;
    let l = chol.l();
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    let (n, d) = (spec.n, spec.d);
    let mut x = DMatrix::zeros(n, d);
    let mut g = DVector::zeros(d);
    for j in 0..n {
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let w: f64 = chi.sample(rng);
        let scale = 1.0 / w.sqrt();
        let row = &l * &g * scale;
        x.row_mut(j).copy_from(&row.transpose());
    }
    Ok(row_normalize(&x)?.0)
}

/// Divides every row by the global maximum row norm. Returns the matrix and
/// the scale factor that was divided out. A matrix whose maximum row norm is
/// already 1 is returned unchanged with scale 1, so the operation is idempotent.
pub fn row_normalize(x: &DMatrix<f64>) -> Result<(CovariateMatrix, f64)> {
    let checked = CovariateMatrix::new(x.clone())?;
    let max = checked.max_row_norm();
    if max == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    if (max - 1.0).abs() <= NORMALIZED_TOL {
        return Ok((CovariateMatrix::from_normalized(checked.into_matrix()), 1.0));
    }
    let mut data = checked.into_matrix() / max;
    // Pin the attaining row so the flag invariant holds after round-off.
    let top = (0..data.nrows())
        .max_by(|&a, &b| row_norm(&data, a).total_cmp(&row_norm(&data, b)))
        .expect("n >= 1");
    let top_norm = row_norm(&data, top);
    if (top_norm - 1.0).abs() > NORMALIZED_TOL {
        data.row_mut(top).scale_mut(1.0 / top_norm);
    }
    Ok((CovariateMatrix::from_normalized(data), max))
}

/// Coefficients drawn uniformly from [0, 1] per coordinate, scaled to unit norm.
pub fn gen_unit_beta<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    assert!(d >= 1, "coefficient dimension must be >= 1");
    let unif = Uniform::new(0.0, 1.0).expect("valid range");
    loop {
        let beta = DVector::from_fn(d, |_, _| unif.sample(rng));
        let norm = beta.norm();
        if norm > 0.0 {
            return beta / norm;
        }
    }
}

/// `y1 = X beta1 + zeta1`, `y0 = X beta0 + zeta0` with i.i.d. N(0, sigma^2) noise.
pub fn gen_outcomes<R: Rng + ?Sized>(
    x: &CovariateMatrix,
    beta1: &DVector<f64>,
    beta0: &DVector<f64>,
    sigma: f64,
    rng: &mut R,
) -> Result<PotentialOutcomes> {
    for (what, b) in [("treatment coefficients", beta1), ("control coefficients", beta0)] {
        if b.len() != x.d() {
            return Err(Error::DimensionMismatch {
                what,
                expected: x.d(),
                got: b.len(),
            });
        }
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut y1 = x.matrix() * beta1;
    let mut y0 = x.matrix() * beta0;
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("finite sigma");
        y1.iter_mut().for_each(|v| *v += noise.sample(rng));
        y0.iter_mut().for_each(|v| *v += noise.sample(rng));
    }
    Ok(PotentialOutcomes {
        y1,
        y0,
        beta1: Some(beta1.clone()),
        beta0: Some(beta0.clone()),
        sigma: Some(sigma),
    })
}

/// The full synthetic instance: covariates, two unit coefficient vectors and outcomes.
pub fn gen_synthetic<R: Rng + ?Sized>(
    spec: &SyntheticSpec,
    rng: &mut R,
) -> Result<(CovariateMatrix, PotentialOutcomes)> {
    let x = gen_t_covariates(spec, rng)?;
    let beta1 = gen_unit_beta(spec.d, rng);
    let beta0 = gen_unit_beta(spec.d, rng);
    let outcomes = gen_outcomes(&x, &beta1, &beta0, spec.sigma, rng)?;
    Ok((x, outcomes))
}

/// Covariates and outcomes read from disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: CovariateMatrix,
    pub outcomes: PotentialOutcomes,
    /// Factor the raw covariates were divided by on ingest.
    pub scale: f64,
}

/// 17 significant digits: enough for any f64 to round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_field(field: &str, line: u64, column: usize) -> Result<f64> {
    let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        column,
        message: format!("not a number: {field:?}"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            column,
            message: format!("non-finite value {field:?}"),
        });
    }
    Ok(value)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(e),
        _ => Error::Parse {
            line,
            column: 0,
            message: e.to_string(),
        },
    }
}

/// Reads a covariate CSV (d numeric fields per row, optional header line).
/// Returns the raw, un-normalized matrix.
pub fn read_covariates(path: &Path, header: bool) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                line,
                column: record.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            values.push(parse_field(field, line, c + 1)?);
        }
        rows += 1;
    }
    let d = width.unwrap_or(0);
    if rows == 0 || d == 0 {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "covariate file has no data rows".into(),
        });
    }
    Ok(DMatrix::from_row_slice(rows, d, &values))
}

/// Reads an outcome CSV with the required `y1,y0` header.
pub fn read_outcomes(path: &Path) -> Result<PotentialOutcomes> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["y1", "y0"] {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("outcome header must be `y1,y0`, found `{}`", names.join(",")),
        });
    }
    let (mut y1, mut y0) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                column: record.len().min(2) + 1,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        y1.push(parse_field(&record[0], line, 1)?);
        y0.push(parse_field(&record[1], line, 2)?);
    }
    PotentialOutcomes::new(DVector::from_vec(y1), DVector::from_vec(y0))
}

/// Reads control outcomes for constant-shift use: either a single `y0`
/// column or the `y0` column of a `y1,y0` file.
pub fn read_control_outcomes(path: &Path) -> Result<DVector<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let col = match names.as_slice() {
        ["y0"] => 0,
        ["y1", "y0"] => 1,
        _ => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected header `y0` or `y1,y0`, found `{}`", names.join(",")),
            })
        }
    };
    let mut y0 = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != names.len() {
            return Err(Error::Parse {
                line,
                column: record.len().min(names.len()) + 1,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        y0.push(parse_field(&record[col], line, col + 1)?);
    }
    Ok(DVector::from_vec(y0))
}

/// Loads covariates and outcomes, normalizing covariates on ingest.
pub fn load_dataset(covariate_path: &Path, outcome_path: &Path, header: bool) -> Result<Dataset> {
    let raw = read_covariates(covariate_path, header)?;
    let outcomes = read_outcomes(outcome_path)?;
    if outcomes.n() != raw.nrows() {
        return Err(Error::DimensionMismatch {
            what: "outcome rows vs covariate rows",
            expected: raw.nrows(),
            got: outcomes.n(),
        });
    }
    let (x, scale) = row_normalize(&raw)?;
    Ok(Dataset { x, outcomes, scale })
}

pub fn write_covariates(path: &Path, x: &DMatrix<f64>, header: bool) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    if header {
        let names: Vec<String> = (1..=x.ncols()).map(|c| format!("x{c}")).collect();
        writeln!(out, "{}", names.join(","))?;
    }
    for row in x.row_iter() {
        let fields: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_outcomes(path: &Path, outcomes: &PotentialOutcomes) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "y1,y0")?;
    for (a, b) in outcomes.y1.iter().zip(outcomes.y0.iter()) {
        writeln!(out, "{},{}", fmt_f64(*a), fmt_f64(*b))?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(
    covariate_path: &Path,
    outcome_path: &Path,
    x: &CovariateMatrix,
    outcomes: &PotentialOutcomes,
    header: bool,
) -> Result<()> {
    if outcomes.n() != x.n() {
        return Err(Error::DimensionMismatch {
            what: "outcome rows vs covariate rows",
            expected: x.n(),
            got: outcomes.n(),
        });
    }
    write_covariates(covariate_path, x.matrix(), header)?;
    write_outcomes(outcome_path, outcomes)
}
