//! Gram-Schmidt-Walk covariate-balancing design.
//!
//! Each unit owns an augmented vector `b_j = (sqrt(phi) e_j ; sqrt(1 - phi) x_j / xi)`
//! with `xi` the largest covariate row norm. The walk moves a fractional
//! assignment from the origin to a vertex of `[-1, 1]^n`, freezing at least one
//! coordinate per step. Steps are martingale increments, so every unit ends up
//! treated with probability exactly 1/2, while the step direction keeps
//! `sum_j z_j b_j` small, which balances the covariates.
//!
//! The direction solves a least-squares problem over the alive augmented
//! columns. Because the identity block makes those columns an orthogonal
//! `sqrt(phi) I` plus a rank-`d` term, the solve reduces to a `d x d` system:
//! with `c = (1 - phi) / xi^2`, `G = sum_{j in A} x_j x_j^T` over the alive
//! non-pivot set `A`, the direction is `u_p = 1` and
//! `u_j = -c x_j^T (phi I + c G)^{-1} x_p` for `j in A`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, CovariateMatrix};
use crate::oracle::{Arm, OutcomeOracle};

/// Coordinates within this distance of +-1 are frozen and snapped.
pub const FREEZE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GswParams {
    /// Robustness weight in (0, 1]; 1 gives independent fair coins.
    pub phi: f64,
    /// Resampled partitions tried before a recursive split is declared degenerate.
    pub max_retries: usize,
}

impl Default for GswParams {
    fn default() -> Self {
        Self {
            phi: 0.5,
            max_retries: 8,
        }
    }
}

impl GswParams {
    pub fn with_phi(phi: f64) -> Self {
        Self {
            phi,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi > 0.0 && self.phi <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "phi must lie in (0, 1], got {}",
                self.phi
            )))
        }
    }
}

/// A +-1 treatment vector. `s_plus` is the treatment group.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub z: Vec<f64>,
    pub s_plus: Vec<usize>,
    pub s_minus: Vec<usize>,
}

impl Assignment {
    pub fn from_signs(z: Vec<f64>) -> Self {
        assert!(z.iter().all(|&v| v == 1.0 || v == -1.0), "entries must be +-1");
        let s_plus = (0..z.len()).filter(|&j| z[j] > 0.0).collect();
        let s_minus = (0..z.len()).filter(|&j| z[j] < 0.0).collect();
        Self { z, s_plus, s_minus }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }
}

/// Snapshot of the walk after one step.
#[derive(Debug, Clone, Copy)]
pub struct GswState<'a> {
    pub z_frac: &'a [f64],
    pub alive: &'a [usize],
    pub pivot: Option<usize>,
    pub iteration: usize,
    /// Coordinates frozen during this step.
    pub frozen_this_step: usize,
}

struct Walk {
    rows: Vec<f64>,
    d: usize,
    phi: f64,
    c: f64,
    z: Vec<f64>,
    alive: Vec<usize>,
    pos: Vec<usize>,
    pivot: Option<usize>,
    gram: DMatrix<f64>,
    gram_built_at: usize,
    /// Column-major copy of the rows alive at the last rebuild.
    active: DMatrix<f64>,
    active_ids: Vec<usize>,
    proj: DVector<f64>,
    u: Vec<f64>,
}

const DEAD: usize = usize::MAX;

impl Walk {
    fn new(x: &DMatrix<f64>, phi: f64) -> Result<Self> {
        let (n, d) = x.shape();
        let mut rows = Vec::with_capacity(n * d);
        for j in 0..n {
            rows.extend(x.row(j).iter());
        }
        let xi = (0..n)
            .map(|j| rows[j * d..(j + 1) * d].iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt();
        let c = if phi >= 1.0 {
            0.0
        } else if xi > 0.0 {
            (1.0 - phi) / (xi * xi)
        } else {
            return Err(Error::ZeroCovariates);
        };
        let mut walk = Self {
            rows,
            d,
            phi,
            c,
            z: vec![0.0; n],
            alive: (0..n).collect(),
            pos: (0..n).collect(),
            pivot: None,
            gram: DMatrix::zeros(d, d),
            gram_built_at: n,
            active: DMatrix::zeros(0, d),
            active_ids: Vec::new(),
            proj: DVector::zeros(0),
            u: vec![0.0; n],
        };
        walk.rebuild_gram();
        Ok(walk)
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.d..(j + 1) * self.d]
    }

    fn rebuild_gram(&mut self) {
        if self.c == 0.0 {
            return;
        }
        let d = self.d;
        self.active_ids = self.alive.clone();
        let ids = &self.active_ids;
        let rows = &self.rows;
        self.active = DMatrix::from_fn(ids.len(), d, |i, a| rows[ids[i] * d + a]);
        self.proj = DVector::zeros(ids.len());
        self.gram = self.active.tr_mul(&self.active);
        self.gram_built_at = self.alive.len();
        if let Some(p) = self.pivot {
            self.downdate(p);
        }
    }

    fn downdate(&mut self, j: usize) {
        if self.c == 0.0 {
            return;
        }
        let d = self.d;
        for a in 0..d {
            let ra = self.rows[j * d + a];
            for b in 0..d {
                self.gram[(a, b)] -= ra * self.rows[j * d + b];
            }
        }
    }

    fn remove_alive(&mut self, j: usize) {
        let p = self.pos[j];
        let last = *self.alive.last().expect("non-empty");
        self.alive.swap_remove(p);
        if last != j {
            self.pos[last] = p;
        }
        self.pos[j] = DEAD;
    }

    /// Fills `self.u` on the alive set.
    fn direction(&mut self, p: usize) -> Result<()> {
        if self.c == 0.0 || self.alive.len() == 1 {
            for &j in &self.alive {
                self.u[j] = 0.0;
            }
            self.u[p] = 1.0;
            return Ok(());
        }
        let d = self.d;
        let m = DMatrix::<f64>::identity(d, d) * self.phi + &self.gram * self.c;
        let chol = m
            .cholesky()
            .ok_or(Error::CholeskyFailure("phi I + c G is not positive definite"))?;
        let w = chol.solve(&DVector::from_column_slice(self.row(p)));
        self.proj.gemv(-self.c, &self.active, &w, 0.0);
        for (&j, &v) in self.active_ids.iter().zip(self.proj.iter()) {
            self.u[j] = v;
        }
        self.u[p] = 1.0;
        Ok(())
    }

    /// Largest step along `sign * u` that stays in the cube, and the blocking coordinate.
    fn max_step(&self, sign: f64) -> (f64, usize) {
        let mut best = (f64::INFINITY, DEAD);
        for &j in &self.alive {
            let uj = sign * self.u[j];
            if uj == 0.0 {
                continue;
            }
            let room = if uj > 0.0 { 1.0 - self.z[j] } else { -1.0 - self.z[j] };
            let step = (room / uj).max(0.0);
            if step < best.0 {
                best = (step, j);
            }
        }
        best
    }
}

/// Runs the walk on the rows of `x`, calling `observe` after every step.
pub fn gsw_walk<R, F>(x: &DMatrix<f64>, params: &GswParams, rng: &mut R, mut observe: F) -> Result<Assignment>
where
    R: Rng + ?Sized,
    F: FnMut(&GswState<'_>),
{
    params.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InvalidDimension("walk needs at least one unit".into()));
    }
    check_finite(x)?;
    let mut walk = Walk::new(x, params.phi)?;
    let mut iteration = 0;

    while !walk.alive.is_empty() {
        iteration += 1;
        let p = match walk.pivot {
            Some(p) => p,
            None => {
                let p = walk.alive[rng.random_range(0..walk.alive.len())];
                walk.pivot = Some(p);
                walk.downdate(p);
                p
            }
        };
        walk.direction(p)?;
        let (up, up_block) = walk.max_step(1.0);
        let (down, down_block) = walk.max_step(-1.0);
        debug_assert!(up_block != DEAD && down_block != DEAD);
        // P(+up) = down / (up + down) makes the increment mean-zero.
        let (delta, block, bound_sign) = if rng.random::<f64>() * (up + down) < down {
            (up, up_block, walk.u[up_block].signum())
        } else {
            (-down, down_block, -walk.u[down_block].signum())
        };
        for &j in &walk.alive {
            walk.z[j] += delta * walk.u[j];
        }
        walk.z[block] = bound_sign;

        let mut frozen = Vec::new();
        for &j in &walk.alive {
            let zj = walk.z[j];
            if zj.abs() >= 1.0 - FREEZE_TOL {
                walk.z[j] = zj.signum();
                frozen.push(j);
            }
        }
        for &j in &frozen {
            walk.remove_alive(j);
            if Some(j) == walk.pivot {
                walk.pivot = None;
            } else {
                walk.downdate(j);
            }
        }
        if walk.alive.len() * 2 < walk.gram_built_at {
            walk.rebuild_gram();
        }
        observe(&GswState {
            z_frac: &walk.z,
            alive: &walk.alive,
            pivot: walk.pivot,
            iteration,
            frozen_this_step: frozen.len(),
        });
    }
    Ok(Assignment::from_signs(walk.z))
}

/// One Gram-Schmidt-Walk assignment of the whole population.
pub fn gsw_assign<R: Rng + ?Sized>(x: &CovariateMatrix, params: &GswParams, rng: &mut R) -> Result<Assignment> {
    gsw_walk(x.matrix(), params, rng, |_| {})
}

/// Covariate imbalance `||X^T z||`.
pub fn imbalance(x: &CovariateMatrix, z: &Assignment) -> Result<f64> {
    if z.n() != x.n() {
        return Err(Error::DimensionMismatch {
            what: "assignment length",
            expected: x.n(),
            got: z.n(),
        });
    }
    let z = DVector::from_column_slice(&z.z);
    Ok((x.matrix().transpose() * z).norm())
}

/// `(scale / n) (sum_{plus} y1 - sum_{minus} y0)`, reading treatment outcomes
/// on `plus` and control outcomes on `minus`.
pub(crate) fn scaled_contrast(
    scale: f64,
    plus: &[usize],
    minus: &[usize],
    oracle: &mut OutcomeOracle<'_>,
    n: usize,
) -> Result<f64> {
    let mut treated = 0.0;
    for &j in plus {
        treated += oracle.reveal(j, Arm::Treatment)?;
    }
    let mut control = 0.0;
    for &j in minus {
        control += oracle.reveal(j, Arm::Control)?;
    }
    Ok(scale / n as f64 * (treated - control))
}

/// Horvitz-Thompson estimate `(2/n) (sum_{S+} y1 - sum_{S-} y0)`.
pub fn ht_estimate(z: &Assignment, oracle: &mut OutcomeOracle<'_>, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidDimension("population size must be >= 1".into()));
    }
    scaled_contrast(2.0, &z.s_plus, &z.s_minus, oracle, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::PotentialOutcomes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn walk_outputs_signs_within_n_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(10, 3, &mut rng);
        for phi in [0.1, 0.5, 1.0] {
            for _ in 0..500 {
                let mut steps = 0;
                let a = gsw_walk(&x, &GswParams::with_phi(phi), &mut rng, |s| {
                    steps = s.iteration;
                    assert!(s.frozen_this_step >= 1);
                    assert!(s.z_frac.iter().all(|v| v.abs() <= 1.0 + FREEZE_TOL));
                })
                .unwrap();
                assert!(steps <= 10);
                assert!(a.z.iter().all(|&v| v * v == 1.0));
                assert_eq!(a.s_plus.len() + a.s_minus.len(), 10);
            }
        }
    }

    #[test]
    fn single_unit() {
        let x = DMatrix::from_row_slice(1, 2, &[0.3, 0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = gsw_walk(&x, &GswParams::default(), &mut rng, |_| {}).unwrap();
        assert_eq!(a.n(), 1);
    }

    #[test]
    fn zero_covariates_need_phi_one() {
        let x = DMatrix::zeros(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            gsw_walk(&x, &GswParams::with_phi(0.5), &mut rng, |_| {}),
            Err(Error::ZeroCovariates)
        ));
        assert!(gsw_walk(&x, &GswParams::with_phi(1.0), &mut rng, |_| {}).is_ok());
        assert!(gsw_walk(&x, &GswParams::with_phi(0.0), &mut rng, |_| {}).is_err());
    }

    #[test]
    fn zero_rows_among_others() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = gaussian(12, 2, &mut rng);
        x.row_mut(3).fill(0.0);
        x.row_mut(7).fill(0.0);
        for _ in 0..200 {
            let a = gsw_walk(&x, &GswParams::default(), &mut rng, |_| {}).unwrap();
            assert_eq!(a.n(), 12);
        }
    }

    #[test]
    fn direction_matches_direct_least_squares() {
        // u_A must minimize || b_p + B_A u_A || over the augmented columns.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian(7, 3, &mut rng);
        let phi = 0.3;
        let mut walk = Walk::new(&x, phi).unwrap();
        walk.pivot = Some(2);
        walk.downdate(2);
        walk.direction(2).unwrap();

        let xi = (0..7).map(|j| x.row(j).norm()).fold(0.0, f64::max);
        let aug = |j: usize| {
            let mut b = DVector::zeros(7 + 3);
            b[j] = phi.sqrt();
            for k in 0..3 {
                b[7 + k] = (1.0 - phi).sqrt() * x[(j, k)] / xi;
            }
            b
        };
        let others: Vec<usize> = (0..7).filter(|&j| j != 2).collect();
        let mut ba = DMatrix::zeros(10, others.len());
        for (c, &j) in others.iter().enumerate() {
            ba.set_column(c, &aug(j));
        }
        let v = crate::linalg::min_norm_least_squares(&ba, &(-aug(2))).unwrap();
        for (c, &j) in others.iter().enumerate() {
            assert!((walk.u[j] - v[c]).abs() < 1e-10, "{} vs {}", walk.u[j], v[c]);
        }
    }

    #[test]
    fn imbalance_examples() {
        let x = CovariateMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        let z = Assignment::from_signs(vec![1.0, -1.0, 1.0]);
        assert_eq!(imbalance(&x, &z).unwrap(), 0.0);

        let x = CovariateMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[0.5, 0.2, 0.5, 0.2, 0.0, 0.0],
        ))
        .unwrap();
        let z = Assignment::from_signs(vec![1.0, -1.0, 1.0]);
        assert_eq!(imbalance(&x, &z).unwrap(), 0.0);
        assert!(imbalance(&x, &Assignment::from_signs(vec![1.0])).is_err());
    }

    #[test]
    fn ht_examples() {
        let po = PotentialOutcomes::new(
            DVector::from_vec(vec![3.0, 99.0]),
            DVector::from_vec(vec![-99.0, 1.0]),
        )
        .unwrap();
        let z = Assignment::from_signs(vec![1.0, -1.0]);
        let mut o = po.oracle();
        assert_eq!(ht_estimate(&z, &mut o, 2).unwrap(), 2.0);
        assert_eq!(o.revealed(Arm::Treatment), vec![0]);
        assert_eq!(o.revealed(Arm::Control), vec![1]);

        let po = PotentialOutcomes::new(DVector::from_element(4, 2.5), DVector::from_element(4, 2.5)).unwrap();
        let z = Assignment::from_signs(vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(ht_estimate(&z, &mut po.oracle(), 4).unwrap(), 0.0);
    }
}
