//! Average treatment effect designs: recursive covariate balancing under a
//! sample budget, and the three reference designs it is compared against.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gsw::{gsw_walk, scaled_contrast, Assignment, GswParams};
use crate::linalg::CovariateMatrix;
use crate::oracle::OutcomeOracle;

/// One level of the recursion: the units that were split and how.
#[derive(Debug, Clone)]
pub struct Split {
    /// Population indices of the partitioned subset.
    pub subset: Vec<usize>,
    /// Walk output over `subset` (local indices).
    pub assignment: Assignment,
    /// Walk runs discarded because the smaller side came out empty.
    pub retries: usize,
}

#[derive(Debug, Clone)]
pub struct RecursiveDesign {
    pub chain: Vec<Split>,
    /// Number of walk calls whose partitions were kept.
    pub depth_k: usize,
    pub final_plus: Vec<usize>,
    pub final_minus: Vec<usize>,
    /// `2^depth_k`.
    pub scale: f64,
    /// `ln(16 ln(n / s))`, reported only; `None` when `s >= n / e^(1/16)`.
    pub delta_prime: Option<f64>,
}

impl RecursiveDesign {
    pub fn final_size(&self) -> usize {
        self.final_plus.len() + self.final_minus.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AteMethod {
    RecursiveGsw,
    Uniform,
    GswPop,
    CompleteRandomization,
}

impl AteMethod {
    pub const ALL: [AteMethod; 4] = [
        AteMethod::RecursiveGsw,
        AteMethod::Uniform,
        AteMethod::GswPop,
        AteMethod::CompleteRandomization,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AteMethod::RecursiveGsw => "Recursive-GSW",
            AteMethod::Uniform => "Uniform",
            AteMethod::GswPop => "GSW-pop",
            AteMethod::CompleteRandomization => "Complete-randomization",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == label)
    }

    /// Designs that partition the whole population regardless of the budget.
    pub fn is_full_population(self) -> bool {
        matches!(self, AteMethod::GswPop | AteMethod::CompleteRandomization)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AteEstimate {
    pub tau_hat: f64,
    pub method: AteMethod,
    /// Units whose outcome was read.
    pub realized_sample_size: usize,
    pub depth: Option<usize>,
}

fn delta_prime(n: usize, s: usize) -> Option<f64> {
    let inner = 16.0 * (n as f64 / s as f64).ln();
    (inner > 1.0).then(|| inner.ln())
}

/// Repeatedly splits the current subset with the walk and recurses on the
/// smaller side (ties go to the control side) until the split subset has at
/// most `s` members. No outcome is read.
pub fn recursive_balance<R: Rng + ?Sized>(
    x: &CovariateMatrix,
    s: usize,
    params: &GswParams,
    rng: &mut R,
) -> Result<RecursiveDesign> {
    params.validate()?;
    if s == 0 {
        return Err(Error::InvalidParameter("budget s must be >= 1".into()));
    }
    let n = x.n();
    let mut subset: Vec<usize> = (0..n).collect();
    let mut chain = Vec::new();
    loop {
        let rows = x.select_rows(&subset);
        let size = subset.len();
        let mut retries = 0;
        let assignment = loop {
            let a = gsw_walk(&rows, params, rng, |_| {})?;
            let smaller = a.s_plus.len().min(a.s_minus.len());
            if size <= s || smaller > 0 {
                break a;
            }
            retries += 1;
            if retries > params.max_retries {
                return Err(Error::DegeneratePartition {
                    size,
                    attempts: retries,
                });
            }
        };
        let plus: Vec<usize> = assignment.s_plus.iter().map(|&j| subset[j]).collect();
        let minus: Vec<usize> = assignment.s_minus.iter().map(|&j| subset[j]).collect();
        chain.push(Split {
            subset: std::mem::take(&mut subset),
            assignment,
            retries,
        });
        if size <= s {
            let depth_k = chain.len();
            return Ok(RecursiveDesign {
                depth_k,
                final_plus: plus,
                final_minus: minus,
                scale: 2f64.powi(depth_k as i32),
                delta_prime: delta_prime(n, s),
                chain,
            });
        }
        subset = if plus.len() >= minus.len() { minus } else { plus };
    }
}

/// `(2^k / n) (sum_{Z+} y1 - sum_{Z-} y0)` over the final partition.
pub fn recursive_estimate(
    design: &RecursiveDesign,
    oracle: &mut OutcomeOracle<'_>,
    n: usize,
) -> Result<AteEstimate> {
    if n == 0 {
        return Err(Error::InvalidDimension("population size must be >= 1".into()));
    }
    let tau_hat = scaled_contrast(design.scale, &design.final_plus, &design.final_minus, oracle, n)?;
    Ok(AteEstimate {
        tau_hat,
        method: AteMethod::RecursiveGsw,
        realized_sample_size: oracle.revealed_count(),
        depth: Some(design.depth_k),
    })
}

/// Uniform subset of size `s` without replacement, a fair coin per sampled
/// unit, and `tau_hat = (2/s) (sum_T y1 - sum_C y0)`.
pub fn uniform_ate<R: Rng + ?Sized>(
    s: usize,
    oracle: &mut OutcomeOracle<'_>,
    rng: &mut R,
    n: usize,
) -> Result<AteEstimate> {
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!(
            "uniform design needs 1 <= s <= n, got s = {s}, n = {n}"
        )));
    }
    let mut sampled = index::sample(rng, n, s).into_vec();
    sampled.sort_unstable();
    let (mut treated, mut control) = (Vec::new(), Vec::new());
    for j in sampled {
        if rng.random::<bool>() {
            treated.push(j);
        } else {
            control.push(j);
        }
    }
    let tau_hat = scaled_contrast(2.0, &treated, &control, oracle, s)?;
    Ok(AteEstimate {
        tau_hat,
        method: AteMethod::Uniform,
        realized_sample_size: oracle.revealed_count(),
        depth: None,
    })
}

/// I.i.d. fair coins over the whole population with the Horvitz-Thompson estimator.
pub fn complete_randomization_ate<R: Rng + ?Sized>(
    oracle: &mut OutcomeOracle<'_>,
    rng: &mut R,
    n: usize,
) -> Result<AteEstimate> {
    if n == 0 {
        return Err(Error::InvalidDimension("population size must be >= 1".into()));
    }
    let z: Vec<f64> = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let a = Assignment::from_signs(z);
    let tau_hat = scaled_contrast(2.0, &a.s_plus, &a.s_minus, oracle, n)?;
    Ok(AteEstimate {
        tau_hat,
        method: AteMethod::CompleteRandomization,
        realized_sample_size: oracle.revealed_count(),
        depth: None,
    })
}

/// One walk over the whole population with the Horvitz-Thompson estimator.
pub fn gsw_pop_ate<R: Rng + ?Sized>(
    x: &CovariateMatrix,
    params: &GswParams,
    oracle: &mut OutcomeOracle<'_>,
    rng: &mut R,
) -> Result<AteEstimate> {
    let a = gsw_walk(x.matrix(), params, rng, |_| {})?;
    let tau_hat = scaled_contrast(2.0, &a.s_plus, &a.s_minus, oracle, x.n())?;
    Ok(AteEstimate {
        tau_hat,
        method: AteMethod::GswPop,
        realized_sample_size: oracle.revealed_count(),
        depth: Some(1),
    })
}
