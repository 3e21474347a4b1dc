//! Monte Carlo harness: sweeps sample fractions, runs every method over many
//! independently seeded trials, and aggregates the error distribution.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ate::{
    complete_randomization_ate, gsw_pop_ate, recursive_balance, recursive_estimate, uniform_ate,
    AteMethod,
};
use crate::data::{
    fmt_f64, gen_synthetic, load_dataset, read_control_outcomes, read_covariates, row_normalize,
    Dataset, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::gsw::GswParams;
use crate::ite::{
    budget_probabilities, estimate_ite, literal_uniform_probabilities, prepare_sampling_ite, rmse,
    theory_epsilon, PlanInputs, PreparedIte, SamplingPlan,
};
use crate::linalg::{leverage_scores, min_norm_least_squares, svd, LeverageProfile};
use crate::oracle::PotentialOutcomes;

pub const RECORDS_HEADER: [&str; 6] = ["method", "fraction", "trial", "metric", "value", "sample_size"];
pub const SUMMARY_HEADER: [&str; 7] = [
    "method",
    "fraction",
    "mean",
    "p30",
    "p70",
    "mean_sample_size",
    "trial_count",
];

pub const DEFAULT_TRIALS: usize = 1000;

pub fn default_fractions() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Ite,
    Ate,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Ite => "ite",
            Task::Ate => "ate",
        }
    }

    pub fn method_labels(self) -> Vec<&'static str> {
        match self {
            Task::Ite => IteMethod::ALL.iter().map(|m| m.label()).collect(),
            Task::Ate => AteMethod::ALL.iter().map(|m| m.label()).collect(),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ite" => Ok(Task::Ite),
            "ate" => Ok(Task::Ate),
            other => Err(Error::InvalidParameter(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IteMethod {
    Leverage,
    Uniform,
    LeverageNothresh,
    LinRegression,
}

impl IteMethod {
    pub const ALL: [IteMethod; 4] = [
        IteMethod::Leverage,
        IteMethod::Uniform,
        IteMethod::LeverageNothresh,
        IteMethod::LinRegression,
    ];

    pub fn label(self) -> &'static str {
        match self {
            IteMethod::Leverage => "Leverage",
            IteMethod::Uniform => "Uniform",
            IteMethod::LeverageNothresh => "Leverage-nothresh",
            IteMethod::LinRegression => "Lin-regression",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == label)
    }
}

/// How the leverage method turns a fraction into probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    Budget,
    Theory,
}

impl FromStr for PlanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "budget" => Ok(PlanKind::Budget),
            "theory" => Ok(PlanKind::Theory),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for PlanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanKind::Budget => "budget",
            PlanKind::Theory => "theory",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Files {
        x: PathBuf,
        y: Option<PathBuf>,
        header: bool,
        /// Constant treatment effect: `y1 := y0 + shift`.
        shift: Option<f64>,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic(spec) => {
                spec.validate()?;
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let (x, outcomes) = gen_synthetic(spec, &mut rng)?;
                Ok(Dataset {
                    x,
                    outcomes,
                    scale: 1.0,
                })
            }
            DatasetSource::Files { x, y, header, shift } => {
                let y = y.as_ref().ok_or(Error::MissingGroundTruth)?;
                match shift {
                    None => load_dataset(x, y, *header),
                    Some(tau) => {
                        let raw = read_covariates(x, *header)?;
                        let y0 = read_control_outcomes(y)?;
                        if y0.len() != raw.nrows() {
                            return Err(Error::DimensionMismatch {
                                what: "outcome rows vs covariate rows",
                                expected: raw.nrows(),
                                got: y0.len(),
                            });
                        }
                        let (x, scale) = row_normalize(&raw)?;
                        Ok(Dataset {
                            x,
                            outcomes: PotentialOutcomes::constant_shift(y0, *tau),
                            scale,
                        })
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub task: Task,
    pub methods: Vec<String>,
    pub fractions: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub phi: f64,
    pub c0: f64,
    pub plan: PlanKind,
    /// Uniform ITE baseline with `pi_j = s / n` instead of a budget-matched plan.
    pub literal_uniform: bool,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
}

impl ExperimentConfig {
    /// All methods of `task`, the default fraction grid and 1000 trials.
    pub fn new(dataset: DatasetSource, task: Task) -> Self {
        Self {
            dataset,
            task,
            methods: task.method_labels().into_iter().map(String::from).collect(),
            fractions: default_fractions(),
            trials: DEFAULT_TRIALS,
            master_seed: 0,
            phi: GswParams::default().phi,
            c0: 1.0,
            plan: PlanKind::Budget,
            literal_uniform: false,
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.fractions.is_empty() {
            return Err(Error::InvalidParameter("at least one fraction is required".into()));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::InvalidParameter(format!("fraction {f} is outside (0, 1]")));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("at least one method is required".into()));
        }
        let known = self.task.method_labels();
        if let Some(m) = self.methods.iter().find(|m| !known.contains(&m.as_str())) {
            return Err(Error::InvalidParameter(format!(
                "unknown {} method {m:?}; expected one of {}",
                self.task.as_str(),
                known.join(", ")
            )));
        }
        if !(self.c0 > 0.0) || !self.c0.is_finite() {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {}", self.c0)));
        }
        GswParams::with_phi(self.phi).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Rmse,
    Deviation,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Deviation => "deviation",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(Metric::Rmse),
            "deviation" => Ok(Metric::Deviation),
            other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: String,
    pub fraction: f64,
    pub trial: usize,
    pub metric: Metric,
    pub value: f64,
    pub sample_size: usize,
}

/// A trial left out of the records because the design degenerated.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateTrial {
    pub method: String,
    pub fraction: f64,
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub degenerate: Vec<DegenerateTrial>,
}

/// `ceil(fraction * n)` clamped to `[1, n]`, with a small guard so that
/// e.g. `0.3 * 1000` is 300 and not 301.
pub fn budget_size(fraction: f64, n: usize) -> usize {
    let raw = (fraction * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

/// Seed for one (method, fraction, trial) cell: the four indices laid side
/// by side, so distinct cells never share a stream.
pub fn trial_seed(master: u64, method: usize, fraction: usize, trial: usize) -> [u8; 32] {
    let mut seed = [0u8; 32];
    for (k, v) in [master, method as u64, fraction as u64, trial as u64].into_iter().enumerate() {
        seed[8 * k..8 * k + 8].copy_from_slice(&v.to_le_bytes());
    }
    seed
}

pub fn trial_rng(master: u64, method: usize, fraction: usize, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(trial_seed(master, method, fraction, trial))
}

enum Outcome {
    Value { value: f64, sample_size: usize },
    Degenerate(String),
}

impl Outcome {
    fn from_result(r: Result<(f64, usize)>) -> Result<Self> {
        match r {
            Ok((value, sample_size)) => Ok(Outcome::Value { value, sample_size }),
            Err(e) if e.is_degenerate() => Ok(Outcome::Degenerate(e.to_string())),
            Err(e) => Err(e),
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
}

/// Runs every cell in parallel and assembles records in method, fraction,
/// trial order. Full-population methods run once per trial and are copied
/// to every fraction.
fn run_grid<F>(
    config: &ExperimentConfig,
    full_population: &[bool],
    metric: Metric,
    cell: F,
) -> Result<ExperimentOutput>
where
    F: Fn(usize, usize, usize) -> Result<Outcome> + Sync,
{
    let nf = config.fractions.len();
    let cells: Vec<(usize, usize, usize)> = (0..config.methods.len())
        .flat_map(|m| {
            let fs = if full_population[m] { 1 } else { nf };
            (0..fs).flat_map(move |f| (0..config.trials).map(move |t| (m, f, t)))
        })
        .collect();
    let results: Vec<Result<Outcome>> =
        pool(config.jobs)?.install(|| cells.par_iter().map(|&(m, f, t)| cell(m, f, t)).collect());
    let mut by_cell = HashMap::with_capacity(cells.len());
    for (key, r) in cells.into_iter().zip(results) {
        by_cell.insert(key, r?);
    }

    let mut out = ExperimentOutput::default();
    for (m, method) in config.methods.iter().enumerate() {
        for (f, &fraction) in config.fractions.iter().enumerate() {
            let source_f = if full_population[m] { 0 } else { f };
            for trial in 0..config.trials {
                match &by_cell[&(m, source_f, trial)] {
                    Outcome::Value { value, sample_size } => out.records.push(TrialRecord {
                        method: method.clone(),
                        fraction,
                        trial,
                        metric,
                        value: *value,
                        sample_size: *sample_size,
                    }),
                    Outcome::Degenerate(reason) => out.degenerate.push(DegenerateTrial {
                        method: method.clone(),
                        fraction,
                        trial,
                        reason: reason.clone(),
                    }),
                }
            }
        }
    }
    Ok(out)
}

/// Loads the configured dataset and runs the configured task.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let data = config.dataset.load()?;
    match config.task {
        Task::Ite => run_ite_experiment(config, &data),
        Task::Ate => run_ate_experiment(config, &data),
    }
}

enum IteSetup {
    Prepared(Vec<PreparedIte>),
    Plans(Vec<SamplingPlan>),
    Fixed(f64),
}

pub fn run_ite_experiment(config: &ExperimentConfig, data: &Dataset) -> Result<ExperimentOutput> {
    config.validate()?;
    let x = &data.x;
    let outcomes = &data.outcomes;
    let n = x.n();
    let methods: Vec<IteMethod> = config
        .methods
        .iter()
        .map(|m| IteMethod::from_label(m).expect("validated"))
        .collect();

    let budgets: Vec<f64> = config.fractions.iter().map(|f| f * n as f64).collect();
    let mut setups = Vec::with_capacity(methods.len());
    for &method in &methods {
        let setup = match method {
            IteMethod::Leverage => IteSetup::Prepared(
                config
                    .fractions
                    .iter()
                    .zip(&budgets)
                    .map(|(&f, &s)| {
                        let inputs = match config.plan {
                            PlanKind::Budget => PlanInputs::Budget { s, c0: config.c0 },
                            PlanKind::Theory => PlanInputs::Theory {
                                epsilon: theory_epsilon(x.d(), budget_size(f, n), config.c0)?,
                                c0: config.c0,
                            },
                        };
                        prepare_sampling_ite(x, inputs)
                    })
                    .collect::<Result<_>>()?,
            ),
            IteMethod::Uniform => {
                let rank = svd(x.matrix())?.rank;
                IteSetup::Plans(
                    budgets
                        .iter()
                        .map(|&s| {
                            if config.literal_uniform {
                                literal_uniform_probabilities(n, s)
                            } else {
                                budget_probabilities(&LeverageProfile::uniform(n, rank), s)
                            }
                        })
                        .collect::<Result<_>>()?,
                )
            }
            IteMethod::LeverageNothresh => {
                let lev = leverage_scores(x.matrix())?;
                IteSetup::Plans(
                    budgets
                        .iter()
                        .map(|&s| budget_probabilities(&lev, s))
                        .collect::<Result<_>>()?,
                )
            }
            IteMethod::LinRegression => {
                let b1 = min_norm_least_squares(x.matrix(), &outcomes.y1)?;
                let b0 = min_norm_least_squares(x.matrix(), &outcomes.y0)?;
                let ite_hat = x.matrix() * (b1 - b0);
                IteSetup::Fixed(rmse(&ite_hat, &outcomes.y1, &outcomes.y0)?)
            }
        };
        setups.push(setup);
    }

    let full: Vec<bool> = methods.iter().map(|&m| m == IteMethod::LinRegression).collect();
    run_grid(config, &full, Metric::Rmse, |m, f, t| {
        let mut rng = trial_rng(config.master_seed, m, f, t);
        let mut oracle = outcomes.oracle();
        let est = match &setups[m] {
            IteSetup::Fixed(v) => return Ok(Outcome::Value { value: *v, sample_size: n }),
            IteSetup::Prepared(p) => p[f].run(&mut oracle, &mut rng),
            IteSetup::Plans(p) => estimate_ite(x.matrix(), &p[f], &mut oracle, &mut rng),
        };
        match est {
            Ok(e) if e.degenerate => Ok(Outcome::Degenerate(format!(
                "empty sample set (|S0| = {}, |S1| = {})",
                e.sets.s0.len(),
                e.sets.s1.len()
            ))),
            Ok(e) => Ok(Outcome::Value {
                value: rmse(&e.ite_hat, &outcomes.y1, &outcomes.y0)?,
                sample_size: e.realized_sample_size,
            }),
            Err(e) => Outcome::from_result(Err(e)),
        }
    })
}

pub fn run_ate_experiment(config: &ExperimentConfig, data: &Dataset) -> Result<ExperimentOutput> {
    config.validate()?;
    let x = &data.x;
    let outcomes = &data.outcomes;
    let n = x.n();
    let tau = outcomes.ate();
    let params = GswParams::with_phi(config.phi);
    let methods: Vec<AteMethod> = config
        .methods
        .iter()
        .map(|m| AteMethod::from_label(m).expect("validated"))
        .collect();
    let sizes: Vec<usize> = config.fractions.iter().map(|&f| budget_size(f, n)).collect();
    let full: Vec<bool> = methods.iter().map(|m| m.is_full_population()).collect();

    run_grid(config, &full, Metric::Deviation, |m, f, t| {
        let mut rng = trial_rng(config.master_seed, m, f, t);
        let mut oracle = outcomes.oracle();
        let est = match methods[m] {
            AteMethod::RecursiveGsw => recursive_balance(x, sizes[f], &params, &mut rng)
                .and_then(|design| recursive_estimate(&design, &mut oracle, n)),
            AteMethod::Uniform => uniform_ate(sizes[f], &mut oracle, &mut rng, n),
            AteMethod::GswPop => gsw_pop_ate(x, &params, &mut oracle, &mut rng),
            AteMethod::CompleteRandomization => complete_randomization_ate(&mut oracle, &mut rng, n),
        };
        Outcome::from_result(est.map(|e| ((e.tau_hat - tau).abs(), e.realized_sample_size)))
    })
}

/// Aggregates over one (method, fraction) group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub fraction: f64,
    pub mean: f64,
    pub p30: f64,
    pub p70: f64,
    pub mean_sample_size: f64,
    pub trial_count: usize,
}

/// Percentile of sorted data by linear interpolation between order
/// statistics at position `p/100 * (len - 1)`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (p / 100.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Groups records by (method, fraction) in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut order: Vec<(String, f64)> = Vec::new();
    let mut groups: HashMap<(String, u64), Vec<&TrialRecord>> = HashMap::new();
    for r in records {
        let key = (r.method.clone(), r.fraction.to_bits());
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push((r.method.clone(), r.fraction));
                Vec::new()
            })
            .push(r);
    }
    Ok(order
        .into_iter()
        .map(|(method, fraction)| {
            let rs = &groups[&(method.clone(), fraction.to_bits())];
            let k = rs.len() as f64;
            let mut values: Vec<f64> = rs.iter().map(|r| r.value).collect();
            values.sort_by(f64::total_cmp);
            SummaryRow {
                mean: values.iter().sum::<f64>() / k,
                p30: percentile(&values, 30.0),
                p70: percentile(&values, 70.0),
                mean_sample_size: rs.iter().map(|r| r.sample_size as f64).sum::<f64>() / k,
                trial_count: rs.len(),
                method,
                fraction,
            }
        })
        .collect())
}

pub fn write_records<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.method.clone(),
            r.fraction.to_string(),
            r.trial.to_string(),
            r.metric.as_str().to_string(),
            fmt_f64(r.value),
            r.sample_size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(RECORDS_HEADER) {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("records header must be `{}`", RECORDS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |c: usize| -> &str { &record[c] };
        let bad = |c: usize, what: &str| Error::Parse {
            line,
            column: c + 1,
            message: format!("invalid {what}: {:?}", &record[c]),
        };
        let value: f64 = field(4).parse().map_err(|_| bad(4, "value"))?;
        if !value.is_finite() || value < 0.0 {
            return Err(bad(4, "value"));
        }
        out.push(TrialRecord {
            method: field(0).to_string(),
            fraction: field(1).parse().map_err(|_| bad(1, "fraction"))?,
            trial: field(2).parse().map_err(|_| bad(2, "trial"))?,
            metric: field(3).parse().map_err(|_| bad(3, "metric"))?,
            value,
            sample_size: field(5).parse().map_err(|_| bad(5, "sample_size"))?,
        });
    }
    Ok(out)
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.fraction.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.p30),
            fmt_f64(r.p70),
            fmt_f64(r.mean_sample_size),
            r.trial_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: &str, fraction: f64, value: f64) -> TrialRecord {
        TrialRecord {
            method: method.into(),
            fraction,
            trial: 0,
            metric: Metric::Deviation,
            value,
            sample_size: 3,
        }
    }

    #[test]
    fn percentiles_of_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(&v, 30.0) - 30.7).abs() < 1e-12);
        assert!((percentile(&v, 70.0) - 70.3).abs() < 1e-12);
    }

    #[test]
    fn summary_edge_cases() {
        let rows = summarize(&[rec("Uniform", 0.1, 2.5)]).unwrap();
        assert_eq!((rows[0].mean, rows[0].p30, rows[0].p70), (2.5, 2.5, 2.5));
        let same: Vec<_> = (0..7).map(|_| rec("Uniform", 0.1, 4.0)).collect();
        let rows = summarize(&same).unwrap();
        assert_eq!(rows[0].p30, rows[0].p70);
        assert_eq!(rows[0].trial_count, 7);
        assert!(matches!(summarize(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn summary_groups_keep_first_appearance_order() {
        let rows = summarize(&[rec("B", 0.2, 1.0), rec("A", 0.1, 1.0), rec("B", 0.2, 3.0)]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].method.as_str(), rows[0].mean), ("B", 2.0));
        assert_eq!(rows[1].method, "A");
    }

    #[test]
    fn budget_sizes() {
        assert_eq!(budget_size(0.3, 1000), 300);
        assert_eq!(budget_size(0.1, 2000), 200);
        assert_eq!(budget_size(0.001, 10), 1);
        assert_eq!(budget_size(1.0, 7), 7);
        assert_eq!(budget_size(0.25, 10), 3);
    }

    #[test]
    fn seeds_are_distinct() {
        let a = trial_seed(1, 0, 0, 1);
        let b = trial_seed(1, 0, 1, 0);
        let c = trial_seed(1, 1, 0, 0);
        assert!(a != b && b != c && a != c);
    }

    #[test]
    fn records_round_trip() {
        let records = vec![rec("Recursive-GSW", 0.3, 0.125), rec("GSW-pop", 1.0, 1e-300)];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,fraction,trial,metric,value,sample_size\n"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn config_validation() {
        let src = DatasetSource::Synthetic(SyntheticSpec::new(10, 2, 0));
        let mut c = ExperimentConfig::new(src, Task::Ate);
        assert!(c.validate().is_ok());
        c.fractions = vec![0.0];
        assert!(c.validate().is_err());
        c.fractions = vec![0.5];
        c.methods = vec!["Leverage".into()];
        assert!(c.validate().is_err());
        c.task = Task::Ite;
        assert!(c.validate().is_ok());
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_outcomes_is_missing_ground_truth() {
        let src = DatasetSource::Files {
            x: "x.csv".into(),
            y: None,
            header: false,
            shift: None,
        };
        assert!(matches!(src.load(), Err(Error::MissingGroundTruth)));
    }
}
