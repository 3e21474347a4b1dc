mod args;
mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use args::{
    Cli, Command, DataArgs, DesignAteArgs, DesignIteArgs, ExperimentArgs, ExperimentTask, GenArgs,
    LeverageArgs, Mode, SummarizeArgs,
};
use scte::ate::{recursive_balance, recursive_estimate};
use scte::data::{fmt_f64, row_normalize, save_dataset};
use scte::experiments::{
    budget_size, read_records, run_experiment, summarize, write_records, write_summary,
    DatasetSource, ExperimentConfig, PlanKind, Task,
};
use scte::ite::{
    estimate_ite, literal_uniform_probabilities, prepare_sampling_ite, rmse, theory_epsilon,
    PlanInputs,
};
use scte::linalg::smoothed_matrix;
use scte::{GswParams, SyntheticSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] scte::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_degenerate() || matches!(e, scte::Error::ZeroCovariates) => 3,
            CliError::Core(scte::Error::InvalidParameter(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match parse(&argv).and_then(run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(if e.use_stderr() { 1 } else { 0 })
        }
        Err(Exit::Cli(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

enum Exit {
    Clap(clap::Error),
    Cli(CliError),
}

impl From<CliError> for Exit {
    fn from(e: CliError) -> Self {
        Exit::Cli(e)
    }
}

/// Parses argv, filling flags that were not given from `--config`.
fn parse(argv: &[String]) -> std::result::Result<Cli, Exit> {
    let root = Cli::command();
    let matches = root.clone().try_get_matches_from(argv).map_err(Exit::Clap)?;
    let Some(path) = matches.get_one::<PathBuf>("config") else {
        return Cli::from_arg_matches(&matches).map_err(Exit::Clap);
    };
    let entries = config::load(path)?;
    let mut full = argv.to_vec();
    full.extend(config::tokens(&root, &matches, &entries)?);
    let matches = root.try_get_matches_from(&full).map_err(Exit::Clap)?;
    Cli::from_arg_matches(&matches).map_err(Exit::Clap)
}

fn run(cli: Cli) -> std::result::Result<(), Exit> {
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Leverage(a) => leverage(a),
        Command::DesignIte(a) => design_ite(a),
        Command::DesignAte(a) => design_ate(a),
        Command::Experiment(ExperimentTask::Ite(a)) => experiment(Task::Ite, a),
        Command::Experiment(ExperimentTask::Ate(a)) => experiment(Task::Ate, a),
        Command::Summarize(a) => summarize_cmd(a),
    };
    result.map_err(Exit::Cli)
}

fn required<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

fn show(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("-".into(), |p| p.display().to_string())
}

/// `n=.. d=..` pairs into a synthetic spec.
fn synthetic_spec(pairs: &[String], sigma: Option<f64>, seed: u64) -> Result<SyntheticSpec> {
    let (mut n, mut d) = (None, None);
    for pair in pairs {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--synthetic expects KEY=VALUE, got {pair:?}")))?;
        let v: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("--synthetic {k} must be a positive integer")))?;
        match k {
            "n" => n = Some(v),
            "d" => d = Some(v),
            _ => return Err(CliError::Usage(format!("--synthetic: unknown key {k:?} (use n, d)"))),
        }
    }
    let (Some(n), Some(d)) = (n, d) else {
        return Err(CliError::Usage("--synthetic needs both n=.. and d=..".into()));
    };
    let mut spec = SyntheticSpec::new(n, d, seed);
    if let Some(s) = sigma {
        spec.sigma = s;
    }
    spec.validate()?;
    Ok(spec)
}

impl DataArgs {
    fn source(&self, seed: u64) -> Result<DatasetSource> {
        if !self.synthetic.is_empty() {
            if self.x.is_some() || self.y.is_some() {
                return Err(CliError::Usage("use either --synthetic or --x/--y, not both".into()));
            }
            return Ok(DatasetSource::Synthetic(synthetic_spec(&self.synthetic, self.sigma, seed)?));
        }
        Ok(DatasetSource::Files {
            x: required(&self.x, "x")?.to_path_buf(),
            y: self.y.clone(),
            header: self.header,
            shift: self.shift,
        })
    }

    fn describe(&self) -> String {
        if self.synthetic.is_empty() {
            format!(
                "x={} y={} header={} shift={}",
                show(&self.x),
                show(&self.y),
                self.header,
                self.shift.map_or("-".into(), |s| s.to_string())
            )
        } else {
            format!(
                "synthetic={} sigma={}",
                self.synthetic.join(","),
                self.sigma.map_or("1/sqrt(d)".into(), |s| s.to_string())
            )
        }
    }
}

fn out_writer(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn gen(a: GenArgs) -> Result<()> {
    if a.synthetic.is_empty() {
        return Err(CliError::Usage("gen needs --synthetic n=.. d=..".into()));
    }
    let out_x = required(&a.out_x, "out-x")?;
    let out_y = required(&a.out_y, "out-y")?;
    let spec = synthetic_spec(&a.synthetic, a.sigma, a.seed)?;
    eprintln!(
        "scte gen: n={} d={} sigma={} seed={} out-x={} out-y={} header={}",
        spec.n,
        spec.d,
        spec.sigma,
        a.seed,
        out_x.display(),
        out_y.display(),
        a.header
    );
    let data = DatasetSource::Synthetic(spec).load()?;
    save_dataset(out_x, out_y, &data.x, &data.outcomes, a.header)?;
    Ok(())
}

fn leverage(a: LeverageArgs) -> Result<()> {
    let x = required(&a.x, "x")?;
    eprintln!(
        "scte leverage: x={} header={} gamma={} out={}",
        x.display(),
        a.header,
        a.gamma,
        show(&a.out)
    );
    let raw = scte::data::read_covariates(x, a.header)?;
    let (x, _) = row_normalize(&raw)?;
    let scores = smoothed_matrix(x.matrix(), a.gamma)?.leverage().scores;
    let mut out = out_writer(&a.out)?;
    for s in scores {
        writeln!(out, "{}", fmt_f64(s))?;
    }
    out.flush()?;
    Ok(())
}

fn design_ite(a: DesignIteArgs) -> Result<()> {
    eprintln!(
        "scte design-ite: {} seed={} fraction={} mode={:?} c0={} literal-uniform={} out={}",
        a.data.describe(),
        a.seed,
        a.fraction,
        a.mode,
        a.c0,
        a.literal_uniform,
        show(&a.out)
    );
    if !(a.fraction > 0.0 && a.fraction <= 1.0) {
        return Err(CliError::Usage(format!("--fraction {} is outside (0, 1]", a.fraction)));
    }
    let data = a.data.source(a.seed)?.load()?;
    let n = data.x.n();
    let s = a.fraction * n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut oracle = data.outcomes.oracle();
    let (est, gamma) = if a.literal_uniform {
        let plan = literal_uniform_probabilities(n, s)?;
        (estimate_ite(data.x.matrix(), &plan, &mut oracle, &mut rng)?, 0.0)
    } else {
        let inputs = match a.mode {
            Mode::Budget => PlanInputs::Budget { s, c0: a.c0 },
            Mode::Theory => PlanInputs::Theory {
                epsilon: theory_epsilon(data.x.d(), budget_size(a.fraction, n), a.c0)?,
                c0: a.c0,
            },
        };
        let prepared = prepare_sampling_ite(&data.x, inputs)?;
        if prepared.top_direction_fallback {
            eprintln!("note: gamma exceeded the spectrum; kept the top singular direction only");
        }
        (prepared.run(&mut oracle, &mut rng)?, prepared.smoothed.gamma)
    };
    if est.degenerate {
        eprintln!("warning: an arm's sample set is empty; its coefficients are zero");
    }
    println!("n={n}");
    println!("gamma={}", fmt_f64(gamma));
    println!("s0={}", est.sets.s0.len());
    println!("s1={}", est.sets.s1.len());
    println!("sample_size={}", est.realized_sample_size);
    println!("rmse={}", fmt_f64(rmse(&est.ite_hat, &data.outcomes.y1, &data.outcomes.y0)?));
    if a.out.is_some() {
        let mut out = out_writer(&a.out)?;
        writeln!(out, "ite_hat")?;
        for v in est.ite_hat.iter() {
            writeln!(out, "{}", fmt_f64(*v))?;
        }
        out.flush()?;
    }
    Ok(())
}

fn design_ate(a: DesignAteArgs) -> Result<()> {
    eprintln!(
        "scte design-ate: {} seed={} fraction={} phi={} out={}",
        a.data.describe(),
        a.seed,
        a.fraction,
        a.phi,
        show(&a.out)
    );
    if !(a.fraction > 0.0 && a.fraction <= 1.0) {
        return Err(CliError::Usage(format!("--fraction {} is outside (0, 1]", a.fraction)));
    }
    let params = GswParams::with_phi(a.phi);
    params.validate()?;
    let data = a.data.source(a.seed)?.load()?;
    let n = data.x.n();
    let s = budget_size(a.fraction, n);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let design = recursive_balance(&data.x, s, &params, &mut rng)?;
    let est = recursive_estimate(&design, &mut data.outcomes.oracle(), n)?;
    let tau = data.outcomes.ate();
    println!("n={n}");
    println!("s={s}");
    println!("depth={}", design.depth_k);
    println!("final_size={}", design.final_size());
    println!("tau_hat={}", fmt_f64(est.tau_hat));
    println!("tau={}", fmt_f64(tau));
    println!("deviation={}", fmt_f64((est.tau_hat - tau).abs()));
    if a.out.is_some() {
        let mut units: Vec<(usize, i8)> = design
            .final_plus
            .iter()
            .map(|&j| (j, 1))
            .chain(design.final_minus.iter().map(|&j| (j, -1)))
            .collect();
        units.sort_unstable();
        let mut out = out_writer(&a.out)?;
        writeln!(out, "unit,z")?;
        for (j, z) in units {
            writeln!(out, "{j},{z}")?;
        }
        out.flush()?;
    }
    Ok(())
}

fn experiment(task: Task, a: ExperimentArgs) -> Result<()> {
    let out_path = required(&a.out, "out")?.to_path_buf();
    let mut config = ExperimentConfig::new(a.data.source(a.seed)?, task);
    if !a.methods.is_empty() {
        config.methods = a.methods.clone();
    }
    config.fractions = a.fractions.clone();
    config.trials = a.trials;
    config.master_seed = a.seed;
    config.phi = a.phi;
    config.c0 = a.c0;
    config.plan = match a.mode {
        Mode::Budget => PlanKind::Budget,
        Mode::Theory => PlanKind::Theory,
    };
    config.literal_uniform = a.literal_uniform;
    config.jobs = a.jobs;
    eprintln!(
        "scte experiment {}: {} seed={} trials={} fractions={} methods={} phi={} c0={} mode={} literal-uniform={} jobs={} out={} summary={}",
        task.as_str(),
        a.data.describe(),
        config.master_seed,
        config.trials,
        config.fractions.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        config.methods.join(","),
        config.phi,
        config.c0,
        config.plan,
        config.literal_uniform,
        config.jobs,
        out_path.display(),
        show(&a.summary)
    );
    let output = run_experiment(&config)?;
    for d in &output.degenerate {
        eprintln!(
            "degenerate trial: method={} fraction={} trial={}: {}",
            d.method, d.fraction, d.trial, d.reason
        );
    }
    write_records(BufWriter::new(File::create(&out_path)?), &output.records)?;
    if let Some(path) = &a.summary {
        let rows = summarize(&output.records)?;
        write_summary(BufWriter::new(File::create(path)?), &rows)?;
    }
    Ok(())
}

fn summarize_cmd(a: SummarizeArgs) -> Result<()> {
    let records = required(&a.records, "records")?;
    eprintln!("scte summarize: records={} out={}", records.display(), show(&a.out));
    let records = read_records(File::open(records)?)?;
    let rows = summarize(&records)?;
    write_summary(out_writer(&a.out)?, &rows)?;
    Ok(())
}
