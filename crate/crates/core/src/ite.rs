//! Individual treatment effect estimation by leverage-score sampling.
//!
//! Two independent Bernoulli passes over the rows pick a control set S0 and a
//! treatment set S1; overlap is removed from S1 so that no unit is asked for
//! both outcomes. Each set feeds one reweighted least-squares fit on the
//! smoothed covariates X*, and the ITE estimate is `X* (beta1 - beta0)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    min_norm_least_squares, smooth_from_factors, svd, CovariateMatrix, LeverageProfile, SmoothedMatrix,
};
use crate::oracle::{Arm, OutcomeOracle};

/// Cap on every inclusion probability in budget mode; keeps `pi (1 - pi) >= pi / 2`.
pub const BUDGET_CAP: f64 = 0.5;

/// Relative tolerance of the budget bisection.
pub const BUDGET_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Theory,
    Budget,
    /// `pi_j = s / n` for every unit.
    LiteralUniform,
    /// Probabilities for a single subsampled regression with failure probability delta.
    Regression,
}

#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub pi: Vec<f64>,
    pub mode: PlanMode,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub c0: f64,
    pub target_s: Option<f64>,
    /// `sum_j pi_j + pi_j (1 - pi_j)`, the expected size of `S0 ∪ S1`.
    pub expected_total: f64,
    /// Budget mode only: every positive-leverage unit hit the cap before the target.
    pub saturated: bool,
}

impl SamplingPlan {
    fn from_pi(pi: Vec<f64>, mode: PlanMode, c0: f64) -> Self {
        let expected_total = expected_total(&pi);
        Self {
            pi,
            mode,
            epsilon: None,
            gamma: None,
            c0,
            target_s: None,
            expected_total,
            saturated: false,
        }
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn max_pi(&self) -> f64 {
        self.pi.iter().copied().fold(0.0, f64::max)
    }
}

fn expected_total(pi: &[f64]) -> f64 {
    pi.iter().map(|&p| p + p * (1.0 - p)).sum()
}

/// `epsilon = 120 c0 d ln(d) / s`.
pub fn theory_epsilon(d: usize, s: usize, c0: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "theory mode needs d >= 2 (ln d must be positive), got d = {d}"
        )));
    }
    if s == 0 {
        return Err(Error::InvalidParameter("sample size s must be >= 1".into()));
    }
    check_c0(c0)?;
    let d = d as f64;
    Ok(120.0 * c0 * d * d.ln() / s as f64)
}

/// `gamma = 4 c0 max(ln(rank_bound), 30 / epsilon)`.
pub fn theory_gamma(rank_bound: usize, epsilon: f64, c0: f64) -> Result<f64> {
    if rank_bound < 2 {
        return Err(Error::InvalidDimension(format!(
            "rank bound must be >= 2, got {rank_bound}"
        )));
    }
    check_epsilon(epsilon)?;
    check_c0(c0)?;
    Ok(4.0 * c0 * (rank_bound as f64).ln().max(30.0 / epsilon))
}

fn check_c0(c0: f64) -> Result<()> {
    if c0 > 0.0 && c0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")))
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")))
    }
}

fn ln_rank(rank: usize) -> f64 {
    if rank <= 1 {
        0.0
    } else {
        (rank as f64).ln()
    }
}

/// `pi_j = min(1, l_j c0 (ln rank + 30 / epsilon))` on the leverage of X*.
pub fn theory_probabilities(lev: &LeverageProfile, epsilon: f64, c0: f64) -> Result<SamplingPlan> {
    check_epsilon(epsilon)?;
    check_c0(c0)?;
    let factor = c0 * (ln_rank(lev.source_rank) + 30.0 / epsilon);
    let pi = lev.scores.iter().map(|&l| (l.max(0.0) * factor).min(1.0)).collect();
    let mut plan = SamplingPlan::from_pi(pi, PlanMode::Theory, c0);
    plan.epsilon = Some(epsilon);
    Ok(plan)
}

/// Probabilities for one subsampled regression that is a `(1 + epsilon)`
/// approximation with probability `1 - delta`:
/// `pi_j = min(1, l_j c (ln rank + 1 / (delta epsilon)))`.
pub fn regression_probabilities(lev: &LeverageProfile, epsilon: f64, delta: f64, c: f64) -> Result<SamplingPlan> {
    check_epsilon(epsilon)?;
    check_c0(c)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let factor = c * (ln_rank(lev.source_rank) + 1.0 / (delta * epsilon));
    let pi = lev.scores.iter().map(|&l| (l.max(0.0) * factor).min(1.0)).collect();
    let mut plan = SamplingPlan::from_pi(pi, PlanMode::Regression, c);
    plan.epsilon = Some(epsilon);
    Ok(plan)
}

/// `pi_j = min(1/2, lambda l_j)` with `lambda` chosen by bisection so that the
/// expected size of `S0 ∪ S1` equals `s`.
pub fn budget_probabilities(lev: &LeverageProfile, s: f64) -> Result<SamplingPlan> {
    let n = lev.len();
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter(format!("budget must be >= 0, got {s}")));
    }
    if s > n as f64 {
        return Err(Error::InvalidParameter(format!("budget {s} exceeds population {n}")));
    }
    let finish = |pi: Vec<f64>, saturated: bool| {
        let mut plan = SamplingPlan::from_pi(pi, PlanMode::Budget, 1.0);
        plan.target_s = Some(s);
        plan.saturated = saturated;
        plan
    };
    if s == 0.0 {
        return Ok(finish(vec![0.0; n], false));
    }
    if lev.total() <= 0.0 {
        return Err(Error::ZeroLeverage);
    }
    let probs = |lambda: f64| -> Vec<f64> {
        lev.scores
            .iter()
            .map(|&l| if l > 0.0 { (lambda * l).min(BUDGET_CAP) } else { 0.0 })
            .collect()
    };
    let capped = probs(f64::INFINITY);
    if expected_total(&capped) < s {
        return Ok(finish(capped, true));
    }
    // Expected total is continuous and non-decreasing in lambda.
    let (mut lo, mut hi) = (0.0, 1.0);
    while expected_total(&probs(hi)) < s {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let total = expected_total(&probs(mid));
        if (total - s).abs() <= 0.25 * BUDGET_RTOL * s {
            return Ok(finish(probs(mid), false));
        }
        if total < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(finish(probs(0.5 * (lo + hi)), false))
}

/// `pi_j = s / n` for every unit, capped at 1.
pub fn literal_uniform_probabilities(n: usize, s: f64) -> Result<SamplingPlan> {
    if n == 0 || !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("need n >= 1 and s >= 0, got n = {n}, s = {s}")));
    }
    let p = (s / n as f64).min(1.0);
    let mut plan = SamplingPlan::from_pi(vec![p; n], PlanMode::LiteralUniform, 1.0);
    plan.target_s = Some(s);
    Ok(plan)
}

/// Disjoint control and treatment sample sets with their reweighting factors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSets {
    pub s0: Vec<usize>,
    pub s1: Vec<usize>,
    /// `1 / sqrt(pi_j)` for `j` in `s0`.
    pub w0: Vec<f64>,
    /// `1 / sqrt(pi_j (1 - pi_j))` for `j` in `s1`.
    pub w1: Vec<f64>,
}

impl SampleSets {
    pub fn total(&self) -> usize {
        self.s0.len() + self.s1.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.s0.is_empty() || self.s1.is_empty()
    }
}

pub fn draw_sample_sets<R: Rng + ?Sized>(plan: &SamplingPlan, rng: &mut R) -> SampleSets {
    let n = plan.n();
    let mut in_s0 = vec![false; n];
    let mut sets = SampleSets::default();
    for (j, &p) in plan.pi.iter().enumerate() {
        if rng.random::<f64>() < p {
            in_s0[j] = true;
            sets.s0.push(j);
            sets.w0.push(1.0 / p.sqrt());
        }
    }
    for (j, &p) in plan.pi.iter().enumerate() {
        if rng.random::<f64>() < p && !in_s0[j] {
            sets.s1.push(j);
            sets.w1.push(1.0 / (p * (1.0 - p)).sqrt());
        }
    }
    sets
}

#[derive(Debug, Clone)]
pub struct IteEstimate {
    pub ite_hat: DVector<f64>,
    pub beta1_hat: DVector<f64>,
    pub beta0_hat: DVector<f64>,
    pub sets: SampleSets,
    pub realized_sample_size: usize,
    /// S0 or S1 came out empty; the corresponding coefficients are zero.
    pub degenerate: bool,
}

fn weighted_fit(
    design: &DMatrix<f64>,
    rows: &[usize],
    weights: &[f64],
    arm: Arm,
    oracle: &mut OutcomeOracle<'_>,
) -> Result<DVector<f64>> {
    let d = design.ncols();
    let mut a = DMatrix::zeros(rows.len(), d);
    let mut b = DVector::zeros(rows.len());
    for (r, (&j, &w)) in rows.iter().zip(weights).enumerate() {
        a.row_mut(r).copy_from(&(design.row(j) * w));
        b[r] = w * oracle.reveal(j, arm)?;
    }
    min_norm_least_squares(&a, &b)
}

/// Draws the sample sets from `plan`, reads control outcomes on S0 and
/// treatment outcomes on S1, and fits both reweighted regressions on `design`.
pub fn estimate_ite<R: Rng + ?Sized>(
    design: &DMatrix<f64>,
    plan: &SamplingPlan,
    oracle: &mut OutcomeOracle<'_>,
    rng: &mut R,
) -> Result<IteEstimate> {
    if plan.n() != design.nrows() || oracle.n() != design.nrows() {
        return Err(Error::DimensionMismatch {
            what: "plan / oracle length vs design rows",
            expected: design.nrows(),
            got: if plan.n() != design.nrows() { plan.n() } else { oracle.n() },
        });
    }
    let sets = draw_sample_sets(plan, rng);
    let beta0_hat = weighted_fit(design, &sets.s0, &sets.w0, Arm::Control, oracle)?;
    let beta1_hat = weighted_fit(design, &sets.s1, &sets.w1, Arm::Treatment, oracle)?;
    let ite_hat = design * (&beta1_hat - &beta0_hat);
    Ok(IteEstimate {
        ite_hat,
        beta1_hat,
        beta0_hat,
        realized_sample_size: sets.total(),
        degenerate: sets.is_degenerate(),
        sets,
    })
}

/// How the sampling probabilities are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanInputs {
    /// Theory constants: gamma from `theory_gamma(d, epsilon, c0)`.
    Theory { epsilon: f64, c0: f64 },
    /// Expected sample size `s`; gamma follows from `epsilon = 120 c0 d ln d / s`.
    Budget { s: f64, c0: f64 },
}

/// X*, its leverage-based plan and the smoothing metadata, reusable across draws.
#[derive(Debug, Clone)]
pub struct PreparedIte {
    pub smoothed: SmoothedMatrix,
    pub plan: SamplingPlan,
    /// Budget mode: the computed gamma emptied the spectrum and only the top
    /// singular direction was retained.
    pub top_direction_fallback: bool,
}

pub fn prepare_sampling_ite(x: &CovariateMatrix, inputs: PlanInputs) -> Result<PreparedIte> {
    if !x.is_normalized() {
        return Err(Error::InvalidParameter(
            "covariates must be row-normalized (max row norm 1)".into(),
        ));
    }
    let factors = svd(x.matrix())?;
    let d = x.d();
    match inputs {
        PlanInputs::Theory { epsilon, c0 } => {
            let gamma = theory_gamma(d, epsilon, c0)?;
            let smoothed = smooth_from_factors(x.matrix(), &factors, gamma)?;
            let mut plan = theory_probabilities(&smoothed.leverage(), epsilon, c0)?;
            plan.gamma = Some(gamma);
            Ok(PreparedIte {
                smoothed,
                plan,
                top_direction_fallback: false,
            })
        }
        PlanInputs::Budget { s, c0 } => {
            let (gamma, epsilon) = if d >= 2 && s >= 1.0 {
                let epsilon = 120.0 * c0 * (d as f64) * (d as f64).ln() / s;
                (theory_gamma(d, epsilon, c0)?, Some(epsilon))
            } else {
                (0.0, None)
            };
            let (smoothed, fallback) = match smooth_from_factors(x.matrix(), &factors, gamma) {
                Ok(sm) => (sm, false),
                Err(Error::EmptySpectrum { .. }) => {
                    let top = factors.singular_values[0];
                    (smooth_from_factors(x.matrix(), &factors, top * top)?, true)
                }
                Err(e) => return Err(e),
            };
            let mut plan = budget_probabilities(&smoothed.leverage(), s)?;
            plan.c0 = c0;
            plan.epsilon = epsilon;
            plan.gamma = Some(smoothed.gamma);
            Ok(PreparedIte {
                smoothed,
                plan,
                top_direction_fallback: fallback,
            })
        }
    }
}

impl PreparedIte {
    pub fn run<R: Rng + ?Sized>(&self, oracle: &mut OutcomeOracle<'_>, rng: &mut R) -> Result<IteEstimate> {
        estimate_ite(&self.smoothed.matrix, &self.plan, oracle, rng)
    }
}

/// Full leverage-score ITE design on row-normalized covariates.
pub fn sampling_ite<R: Rng + ?Sized>(
    x: &CovariateMatrix,
    inputs: PlanInputs,
    oracle: &mut OutcomeOracle<'_>,
    rng: &mut R,
) -> Result<IteEstimate> {
    if !oracle.is_fresh() {
        return Err(Error::InvalidParameter("oracle has already been read".into()));
    }
    prepare_sampling_ite(x, inputs)?.run(oracle, rng)
}

/// `(1 / sqrt(n)) ||ite_hat - (y1 - y0)||`.
pub fn rmse(ite_hat: &DVector<f64>, y1: &DVector<f64>, y0: &DVector<f64>) -> Result<f64> {
    let n = ite_hat.len();
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
        return Err(Error::InvalidDimension("rmse needs n >= 1".into()));
    }
    let sq: f64 = (0..n)
        .map(|j| {
            let e = ite_hat[j] - (y1[j] - y0[j]);
            e * e
        })
        .sum();
    Ok((sq / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::PotentialOutcomes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epsilon_examples() {
        let e = theory_epsilon(4, 240, 1.0).unwrap();
        assert!((e - 2.0 * 4f64.ln()).abs() < 1e-12);
        assert!((e - 2.772588722239781).abs() < 1e-12);
        let c0 = 240.0 / (120.0 * 4.0 * 4f64.ln());
        assert!((theory_epsilon(4, 240, c0).unwrap() - 1.0).abs() < 1e-14);
        let a = theory_epsilon(10, 100, 2.0).unwrap();
        let b = theory_epsilon(10, 200, 2.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(matches!(theory_epsilon(1, 10, 1.0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn gamma_examples() {
        assert!((theory_gamma(4, 1.0, 2.0).unwrap() - 240.0).abs() < 1e-12);
        assert!((theory_gamma(2, 30.0, 1.5).unwrap() - 6.0).abs() < 1e-12);
        let g = theory_gamma(7, 1e12, 1.0).unwrap();
        assert!((g - 4.0 * 7f64.ln()).abs() < 1e-9);
        assert!(theory_gamma(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn theory_probability_examples() {
        let lev = LeverageProfile {
            scores: vec![0.0, 1.0 / 240.0],
            source_rank: 4,
        };
        let plan = theory_probabilities(&lev, 1.0, 2.0).unwrap();
        assert_eq!(plan.pi[0], 0.0);
        let expected = (1.0 / 240.0) * 2.0 * (4f64.ln() + 30.0);
        assert!((plan.pi[1] - expected).abs() < 1e-15);
        assert!((plan.pi[1] - 0.26155).abs() < 1e-4);

        let gamma = theory_gamma(4, 1.0, 2.0).unwrap();
        let lev = LeverageProfile {
            scores: vec![1.0 / gamma; 5],
            source_rank: 4,
        };
        let plan = theory_probabilities(&lev, 1.0, 2.0).unwrap();
        assert!(plan.pi.iter().all(|&p| p == plan.pi[0] && p <= 0.5));
    }

    #[test]
    fn budget_examples() {
        let lev = LeverageProfile::uniform(4, 1);
        let plan = budget_probabilities(&lev, 0.0).unwrap();
        assert!(plan.pi.iter().all(|&p| p == 0.0));

        let plan = budget_probabilities(&lev, 2.0).unwrap();
        let root = 1.0 - 0.5f64.sqrt();
        for &p in &plan.pi {
            assert!((p - root).abs() < 1e-6, "{p} vs {root}");
        }
        assert!((plan.expected_total - 2.0).abs() <= 1e-6 * 2.0);
        assert!(!plan.saturated);

        let lev = LeverageProfile {
            scores: vec![1.0, 0.0, 0.0, 0.0],
            source_rank: 1,
        };
        let plan = budget_probabilities(&lev, 1.0).unwrap();
        assert_eq!(plan.pi, vec![0.5, 0.0, 0.0, 0.0]);
        assert_eq!(plan.expected_total, 0.75);
        assert!(plan.saturated);

        let zero = LeverageProfile {
            scores: vec![0.0; 3],
            source_rank: 0,
        };
        assert!(matches!(budget_probabilities(&zero, 1.0), Err(Error::ZeroLeverage)));
    }

    #[test]
    fn draw_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let none = SamplingPlan::from_pi(vec![0.0; 5], PlanMode::Budget, 1.0);
        let sets = draw_sample_sets(&none, &mut rng);
        assert!(sets.s0.is_empty() && sets.s1.is_empty());

        let all = SamplingPlan::from_pi(vec![1.0; 5], PlanMode::Budget, 1.0);
        let sets = draw_sample_sets(&all, &mut rng);
        assert_eq!(sets.s0, vec![0, 1, 2, 3, 4]);
        assert!(sets.s1.is_empty());
        assert!(sets.w0.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn identical_arms_full_information() {
        let x = CovariateMatrix::new(DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 1.0, 0.6, 0.8, 0.0, 0.5],
        ))
        .unwrap();
        let y = x.matrix() * DVector::from_vec(vec![0.3, -0.7]);
        let po = PotentialOutcomes::new(y.clone(), y).unwrap();
        let mut oracle = po.oracle();
        let mut rng = ChaCha8Rng::seed_from_u64(9);

        // pi = 1 for S0; S1 is a second full draw read through its own oracle.
        let full = SamplingPlan::from_pi(vec![1.0; 4], PlanMode::Budget, 1.0);
        let sets0 = draw_sample_sets(&full, &mut rng);
        let beta0 = weighted_fit(x.matrix(), &sets0.s0, &sets0.w0, Arm::Control, &mut oracle).unwrap();
        let mut oracle1 = po.oracle();
        let beta1 = weighted_fit(x.matrix(), &sets0.s0, &sets0.w0, Arm::Treatment, &mut oracle1).unwrap();
        let ite = x.matrix() * (beta1 - beta0);
        assert_eq!(rmse(&ite, &po.y1, &po.y0).unwrap(), 0.0);
    }

    #[test]
    fn empty_sets_are_flagged() {
        let x = CovariateMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let po = PotentialOutcomes::new(DVector::from_element(3, 1.0), DVector::zeros(3)).unwrap();
        let mut oracle = po.oracle();
        let plan = SamplingPlan::from_pi(vec![0.0; 3], PlanMode::Budget, 1.0);
        let est = estimate_ite(x.matrix(), &plan, &mut oracle, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.beta0_hat, DVector::zeros(3));
        assert_eq!(est.realized_sample_size, 0);
    }

    #[test]
    fn rmse_examples() {
        let y1 = DVector::from_vec(vec![3.0, 1.0, -2.0]);
        let y0 = DVector::from_vec(vec![1.0, 1.0, 0.5]);
        let ite = &y1 - &y0;
        assert_eq!(rmse(&ite, &y1, &y0).unwrap(), 0.0);
        assert!((rmse(&ite.add_scalar(1.0), &y1, &y0).unwrap() - 1.0).abs() < 1e-15);
        assert!(rmse(&ite, &y1, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn unnormalized_input_rejected() {
        let x = CovariateMatrix::new(DMatrix::from_element(3, 2, 2.0)).unwrap();
        assert!(prepare_sampling_ite(&x, PlanInputs::Budget { s: 1.0, c0: 1.0 }).is_err());
    }
}
