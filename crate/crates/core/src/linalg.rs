//! Dense linear algebra shared by both designs: thin SVD, leverage scores,
//! spectral smoothing, minimum-norm least squares and the ridge quantity
//! that controls the Gram-Schmidt-Walk error bound.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative cutoff for numerical rank: `sigma_i > max(n, d) * sigma_1 * RANK_RTOL`.
pub const RANK_RTOL: f64 = 1e-12;

/// Tolerance on the maximum row norm of a normalized matrix.
pub const NORMALIZED_TOL: f64 = 1e-12;

pub(crate) fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFiniteInput { row: r, col: c });
            }
        }
    }
    Ok(())
}

pub(crate) fn check_finite_vec(v: &DVector<f64>) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(row) => Err(Error::NonFiniteInput { row, col: 0 }),
        None => Ok(()),
    }
}

pub(crate) fn row_norm(m: &DMatrix<f64>, j: usize) -> f64 {
    m.row(j).norm()
}

/// n x d covariate matrix, one row per individual.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    data: DMatrix<f64>,
    normalized: bool,
}

impl CovariateMatrix {
    /// Wraps a raw matrix. The normalized flag is set when the maximum row
    /// norm is already 1 (within [`NORMALIZED_TOL`]).
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidDimension(format!(
                "covariate matrix must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        check_finite(&data)?;
        let max = (0..data.nrows())
            .map(|j| row_norm(&data, j))
            .fold(0.0, f64::max);
        let normalized = (max - 1.0).abs() <= NORMALIZED_TOL;
        Ok(Self { data, normalized })
    }

    pub fn from_row_slice(n: usize, d: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::DimensionMismatch {
                what: "row-major values",
                expected: n * d,
                got: values.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, d, values))
    }

    pub(crate) fn from_normalized(data: DMatrix<f64>) -> Self {
        Self {
            data,
            normalized: true,
        }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.n()).map(|j| row_norm(&self.data, j)).collect()
    }

    pub fn max_row_norm(&self) -> f64 {
        self.row_norms().into_iter().fold(0.0, f64::max)
    }

    /// Covariate rows restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.data.select_rows(rows)
    }
}

/// Thin singular value decomposition `X = U diag(sigma) V^T` with singular
/// values sorted non-increasing. `rank` counts the numerically non-zero ones.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
    pub rank: usize,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.singular_values) * self.v.transpose()
    }
}

fn numerical_rank(sorted: &DVector<f64>, n: usize, d: usize) -> usize {
    let Some(&top) = sorted.iter().next() else {
        return 0;
    };
    let cutoff = n.max(d) as f64 * top * RANK_RTOL;
    sorted.iter().take_while(|&&s| s > cutoff && s > 0.0).count()
}

pub fn svd(x: &DMatrix<f64>) -> Result<SvdFactors> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(Error::InvalidDimension(format!(
            "svd needs a non-empty matrix, got {n}x{d}"
        )));
    }
    check_finite(x)?;
    let decomposition = faer::Mat::<f64>::from_fn(n, d, |i, j| x[(i, j)])
        .thin_svd()
        .map_err(|_| Error::SvdFailure)?;
    let (fu, fs, fv) = (decomposition.U(), decomposition.S(), decomposition.V());
    let k = n.min(d);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]));
    let singular_values = DVector::from_iterator(k, order.iter().map(|&i| fs[i].max(0.0)));
    let u = DMatrix::from_fn(n, k, |i, c| fu[(i, order[c])]);
    let v = DMatrix::from_fn(d, k, |i, c| fv[(i, order[c])]);
    let rank = numerical_rank(&singular_values, n, d);
    Ok(SvdFactors {
        u,
        singular_values,
        v,
        rank,
    })
}

/// Leverage scores of the rows of a matrix together with the rank of the
/// matrix they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageProfile {
    pub scores: Vec<f64>,
    pub source_rank: usize,
}

impl LeverageProfile {
    /// Squared row norms of the first `rank` columns of a column-orthonormal `u`.
    pub fn from_left_factor(u: &DMatrix<f64>, rank: usize) -> Self {
        let scores = (0..u.nrows())
            .map(|j| (0..rank).map(|c| u[(j, c)] * u[(j, c)]).sum())
            .collect();
        Self {
            scores,
            source_rank: rank,
        }
    }

    /// All-equal profile, the leverage of an orthogonal design; used for
    /// budget-matched uniform sampling.
    pub fn uniform(n: usize, rank: usize) -> Self {
        Self {
            scores: vec![rank as f64 / n as f64; n],
            source_rank: rank,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
}

/// `l_j = x_j^T (X^T X)^+ x_j`, computed as squared row norms of `U`
/// restricted to the numerical rank.
pub fn leverage_scores(x: &DMatrix<f64>) -> Result<LeverageProfile> {
    let f = svd(x)?;
    Ok(LeverageProfile::from_left_factor(&f.u, f.rank))
}

/// Projection of X onto its singular directions with `sigma_i >= sqrt(gamma)`.
#[derive(Debug, Clone)]
pub struct SmoothedMatrix {
    pub gamma: f64,
    /// Indices into the sorted spectrum of X.
    pub kept_indices: Vec<usize>,
    pub d_prime: usize,
    pub matrix: DMatrix<f64>,
    pub factors: SvdFactors,
}

impl SmoothedMatrix {
    /// Leverage of X*. Every retained singular value is positive when
    /// gamma > 0, so the retained columns of U are exactly the range of X*.
    pub fn leverage(&self) -> LeverageProfile {
        if self.gamma > 0.0 {
            LeverageProfile::from_left_factor(&self.factors.u, self.d_prime)
        } else {
            LeverageProfile::from_left_factor(&self.factors.u, self.factors.rank)
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Smoothed matrix from precomputed factors of X.
pub fn smooth_from_factors(x: &DMatrix<f64>, full: &SvdFactors, gamma: f64) -> Result<SmoothedMatrix> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gamma must be a finite non-negative number, got {gamma}"
        )));
    }
    if gamma == 0.0 {
        let all: Vec<usize> = (0..full.singular_values.len()).collect();
        return Ok(SmoothedMatrix {
            gamma,
            d_prime: all.len(),
            kept_indices: all,
            matrix: x.clone(),
            factors: full.clone(),
        });
    }
    let threshold = gamma.sqrt();
    let kept: Vec<usize> = full
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= threshold)
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        let top = full.singular_values.iter().next().copied().unwrap_or(0.0);
        return Err(Error::EmptySpectrum {
            gamma,
            top: top * top,
        });
    }
    let factors = SvdFactors {
        u: full.u.select_columns(&kept),
        singular_values: DVector::from_iterator(kept.len(), kept.iter().map(|&i| full.singular_values[i])),
        v: full.v.select_columns(&kept),
        rank: kept.len(),
    };
    let matrix = factors.reconstruct();
    Ok(SmoothedMatrix {
        gamma,
        d_prime: kept.len(),
        kept_indices: kept,
        matrix,
        factors,
    })
}

pub fn smoothed_matrix(x: &DMatrix<f64>, gamma: f64) -> Result<SmoothedMatrix> {
    let full = svd(x)?;
    smooth_from_factors(x, &full, gamma)
}

/// Minimum-Euclidean-norm minimizer of `||A beta - b||^2` (pseudo-inverse
/// semantics). An empty system returns the zero vector.
pub fn min_norm_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, k) = a.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            what: "right-hand side length",
            expected: m,
            got: b.len(),
        });
    }
    if m == 0 || k == 0 {
        return Ok(DVector::zeros(k));
    }
    check_finite_vec(b)?;
    let f = svd(a)?;
    let mut beta = DVector::zeros(k);
    for i in 0..f.rank {
        let coef = f.u.column(i).dot(b) / f.singular_values[i];
        beta.axpy(coef, &f.v.column(i), 1.0);
    }
    Ok(beta)
}

/// Ridge quantity `L = (2/n) min_beta ||(y1 + y0)/2 - X beta||^2 + ||beta||^2`.
pub fn ridge_loss(x: &DMatrix<f64>, y1: &DVector<f64>, y0: &DVector<f64>) -> Result<f64> {
    let (n, d) = x.shape();
    for (what, v) in [("treatment outcomes", y1), ("control outcomes", y0)] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                got: v.len(),
            });
        }
    }
    if n == 0 {
        return Err(Error::InvalidDimension("ridge loss needs n >= 1".into()));
    }
    let target = (y1 + y0) * 0.5;
    let gram = x.transpose() * x + DMatrix::<f64>::identity(d, d);
    let rhs = x.transpose() * &target;
    let chol = gram
        .cholesky()
        .ok_or(Error::CholeskyFailure("X^T X + I is not positive definite"))?;
    let beta = chol.solve(&rhs);
    let resid = target - x * &beta;
    Ok((2.0 / n as f64) * (resid.norm_squared() + beta.norm_squared()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn lcg_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        DMatrix::from_fn(n, d, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn svd_identity() {
        let f = svd(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(f.rank, 2);
        assert!(close(f.singular_values[0], 1.0, 1e-14));
        assert!(close(f.singular_values[1], 1.0, 1e-14));
        assert!((f.reconstruct() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn svd_diagonal_rank_one() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0]);
        let f = svd(&x).unwrap();
        assert!(close(f.singular_values[0], 3.0, 1e-14));
        assert!(close(f.singular_values[1], 0.0, 1e-14));
        assert_eq!(f.rank, 1);
    }

    #[test]
    fn svd_reconstructs_random() {
        let x = lcg_matrix(6, 3, 11);
        let f = svd(&x).unwrap();
        assert!((f.reconstruct() - &x).norm() < 1e-10);
        let utu = f.u.transpose() * &f.u;
        assert!((utu - DMatrix::<f64>::identity(3, 3)).amax() <= 1e-10);
        assert!(f.singular_values.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_rejects_nan() {
        let mut x = DMatrix::<f64>::identity(2, 2);
        x[(1, 0)] = f64::NAN;
        assert!(matches!(svd(&x), Err(Error::NonFiniteInput { row: 1, col: 0 })));
    }

    #[test]
    fn leverage_identity_and_hand_example() {
        let l = leverage_scores(&DMatrix::identity(3, 3)).unwrap();
        for s in &l.scores {
            assert!(close(*s, 1.0, 1e-12));
        }
        // Gram matrix diag(2, 1): l_j = x_j^T diag(1/2, 1) x_j.
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let l = leverage_scores(&x).unwrap();
        let expected = [0.5, 0.5, 1.0];
        for (s, e) in l.scores.iter().zip(expected) {
            assert!(close(*s, e, 1e-12), "{s} vs {e}");
        }
        assert_eq!(l.source_rank, 2);
    }

    #[test]
    fn zero_row_has_zero_leverage() {
        let mut x = lcg_matrix(5, 2, 3);
        x.row_mut(2).fill(0.0);
        let l = leverage_scores(&x).unwrap();
        assert!(l.scores[2].abs() < 1e-14);
    }

    #[test]
    fn smoothing_examples() {
        let x = lcg_matrix(7, 3, 5);
        let s = smoothed_matrix(&x, 0.0).unwrap();
        assert_eq!(s.matrix, x);

        let x = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let s = smoothed_matrix(&x, 1.0).unwrap();
        assert_eq!(s.d_prime, 1);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        assert!((s.matrix - expected).amax() < 1e-14);
    }

    #[test]
    fn smoothing_keeps_ties() {
        let x = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let s = smoothed_matrix(&x, 1.0).unwrap();
        assert_eq!(s.d_prime, 2);
    }

    #[test]
    fn smoothing_empty_spectrum() {
        let x = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]);
        assert!(matches!(
            smoothed_matrix(&x, 1.0),
            Err(Error::EmptySpectrum { .. })
        ));
        assert!(matches!(
            smoothed_matrix(&x, -1.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn least_squares_examples() {
        let b = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let beta = min_norm_least_squares(&DMatrix::identity(3, 3), &b).unwrap();
        assert!((beta - &b).amax() < 1e-14);

        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let beta = min_norm_least_squares(&a, &DVector::from_vec(vec![0.0, 2.0])).unwrap();
        assert!(close(beta[0], 1.0, 1e-14));

        let empty = DMatrix::<f64>::zeros(0, 4);
        let beta = min_norm_least_squares(&empty, &DVector::zeros(0)).unwrap();
        assert_eq!(beta, DVector::zeros(4));

        assert!(matches!(
            min_norm_least_squares(&a, &DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ridge_loss_examples() {
        let x = lcg_matrix(6, 2, 9);
        let z = DVector::zeros(6);
        assert_eq!(ridge_loss(&x, &z, &z).unwrap(), 0.0);

        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0]);
        let l = ridge_loss(&DMatrix::zeros(6, 2), &v, &v).unwrap();
        assert!(close(l, 2.0 * v.norm_squared() / 6.0, 1e-12));

        assert!(matches!(
            ridge_loss(&x, &DVector::zeros(5), &z),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn covariate_matrix_validation() {
        assert!(CovariateMatrix::new(DMatrix::zeros(0, 3)).is_err());
        let c = CovariateMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert!(c.is_normalized());
        let c = CovariateMatrix::from_row_slice(1, 2, &[3.0, 4.0]).unwrap();
        assert!(!c.is_normalized());
    }
}
