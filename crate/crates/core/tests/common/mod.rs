#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use scte::data::row_normalize;
use scte::CovariateMatrix;

pub fn gaussian(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

/// Product of n×r and r×d Gaussian factors: rank exactly `r` almost surely.
pub fn low_rank(n: usize, d: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    gaussian(n, r, rng) * gaussian(r, d, rng)
}

pub fn normalized(x: &DMatrix<f64>) -> CovariateMatrix {
    row_normalize(x).unwrap().0
}

/// Rows sharing a common factor, so covariates are strongly correlated across units.
pub fn correlated(n: usize, d: usize, rng: &mut ChaCha8Rng) -> CovariateMatrix {
    let common = gaussian(1, d, rng);
    let noise = gaussian(n, d, rng);
    let raw = DMatrix::from_fn(n, d, |i, j| 2.0 * common[(0, j)] + 0.5 * noise[(i, j)]);
    normalized(&raw)
}

/// Pseudo-inverse solve through the eigendecomposition of `AᵀA`,
/// independent of the SVD path used by the library.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let eig = (a.transpose() * a).symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let rhs = a.transpose() * b;
    let mut beta = DVector::zeros(a.ncols());
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > top * 1e-10 {
            let v = eig.eigenvectors.column(i);
            beta += v * (v.dot(&rhs) / lam);
        }
    }
    beta
}

/// Diagonal of the hat matrix `X (XᵀX)⁺ Xᵀ`.
pub fn hat_diagonal(x: &DMatrix<f64>) -> Vec<f64> {
    let eig = (x.transpose() * x).symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    (0..x.nrows())
        .map(|j| {
            let row = x.row(j).transpose();
            eig.eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &lam)| lam > top * 1e-10)
                .map(|(i, &lam)| row.dot(&eig.eigenvectors.column(i)).powi(2) / lam)
                .sum()
        })
        .collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the sample mean.
pub fn std_error(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    scte::experiments::percentile(&s, 50.0)
}
