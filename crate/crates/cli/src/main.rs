//! `selfsim`: simulation, limit covariances and verification experiments for
//! quantile processes of self-similar processes.
//!
//! Exit codes: 0 success, 1 a verification verdict failed, 2 usage or
//! validation error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use selfsim_core::simulate::FbmMethod;
use selfsim_core::Family;

use commands::Failure;
use config::{ExperimentName, Format, Overrides, RunConfig, OUT_DIR_ENV};

#[derive(Parser, Debug)]
#[command(name = "selfsim", version, about = "Quantile processes of self-similar processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample paths on the time grid: paths.csv and paths.json.
    Simulate,
    /// Fluctuation fields W_n(t, α), one per replication.
    QuantileField,
    /// Limit covariance table over `times × alphas`.
    LimitCov,
    /// Run a verification experiment and write its report.
    Verify {
        /// Defaults to `experiment.name` from the config file.
        #[command(subcommand)]
        experiment: Option<Experiment>,
    },
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Experiment {
    /// Monte Carlo mean and covariance of the field against the limit.
    CltCov,
    /// Kolmogorov–Smirnov test of one standardized field value.
    Normality,
    /// W_n(c t0, α0) against c^H W_n(t0, α0).
    Scalability,
    /// Scaling-moment bound near the origin.
    Lemma1,
    /// Field suprema over (0, δ] as δ shrinks.
    NearZero,
    /// Tail exponent of the path supremum over [1, 2].
    Tail,
    /// Deterministic property suite.
    Properties,
    /// Diagonal error as n grows.
    Convergence,
}

impl From<Experiment> for ExperimentName {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::CltCov => ExperimentName::CltCov,
            Experiment::Normality => ExperimentName::Normality,
            Experiment::Scalability => ExperimentName::Scalability,
            Experiment::Lemma1 => ExperimentName::Lemma1,
            Experiment::NearZero => ExperimentName::NearZero,
            Experiment::Tail => ExperimentName::Tail,
            Experiment::Properties => ExperimentName::Properties,
            Experiment::Convergence => ExperimentName::Convergence,
        }
    }
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let (t, a) = s
        .split_once(':')
        .ok_or_else(|| format!("point `{s}` must be written t:alpha"))?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("point `{s}`: {e}"));
    Ok([num(t)?, num(a)?])
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        _ => Err(format!("unknown format `{s}` (expected csv or json)")),
    }
}

fn parse_fbm_method(s: &str) -> Result<FbmMethod, String> {
    match s {
        "cholesky" => Ok(FbmMethod::Cholesky),
        "circulant" => Ok(FbmMethod::Circulant),
        _ => Err(format!("unknown fBm method `{s}` (expected cholesky or circulant)")),
    }
}

/// Every flag sets the config key of the same name and overrides the file.
#[derive(Args, Debug)]
struct Flags {
    /// TOML config file with sections process, grid, experiment, tolerances, simulation.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the resolved config as TOML and exit without running.
    #[arg(long, global = true)]
    explain: bool,
    /// Output directory [default: $SELFSIM_OUT_DIR, else selfsim-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_format)]
    formats: Option<Vec<Format>>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// fbm, stable, bm, integrated-bm or iterated-bm.
    #[arg(long, global = true)]
    family: Option<Family>,
    /// fBm or stable index in (0, 2).
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Stable scale constant.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Integration order of integrated Brownian motion.
    #[arg(long, global = true)]
    m: Option<u32>,

    /// Time horizon.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    time_points: Option<usize>,
    /// Level interval as a,b.
    #[arg(long, global = true, value_delimiter = ',', num_args = 2)]
    level_interval: Option<Vec<f64>>,
    #[arg(long, global = true)]
    level_points: Option<usize>,

    /// Paths per quantile field.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Replications.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Paths written by simulate.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Comparison points t:alpha, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_point)]
    points: Option<Vec<[f64; 2]>>,
    /// Normality test point t:alpha.
    #[arg(long, global = true, value_parser = parse_point)]
    point: Option<[f64; 2]>,
    #[arg(long, global = true)]
    t0: Option<f64>,
    #[arg(long, global = true)]
    alpha0: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    factors: Option<Vec<f64>>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    u_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    tail_paths: Option<usize>,
    #[arg(long, global = true)]
    per_unit: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    /// Times tabulated by limit-cov.
    #[arg(long, global = true, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Levels tabulated by limit-cov.
    #[arg(long, global = true, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,

    #[arg(long, global = true)]
    z: Option<f64>,
    #[arg(long, global = true)]
    diag_rel: Option<f64>,
    #[arg(long, global = true)]
    coverage: Option<f64>,
    #[arg(long, global = true)]
    ks_level: Option<f64>,
    #[arg(long, global = true)]
    family_level: Option<f64>,
    #[arg(long, global = true)]
    monotone_z: Option<f64>,
    #[arg(long, global = true, value_parser = parse_fbm_method)]
    fbm_method: Option<FbmMethod>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            formats: self.formats.clone(),
            workers: self.workers,
            family: self.family,
            r: self.r,
            c: self.c,
            m: self.m,
            horizon: self.horizon,
            time_points: self.time_points,
            level_interval: self.level_interval.as_ref().map(|v| [v[0], v[1]]),
            level_points: self.level_points,
            n: self.n,
            reps: self.reps,
            paths: self.paths,
            points: self.points.clone(),
            point: self.point,
            t0: self.t0,
            alpha0: self.alpha0,
            factors: self.factors.clone(),
            delta: self.delta,
            q: self.q,
            deltas: self.deltas.clone(),
            epsilons: self.epsilons.clone(),
            u_grid: self.u_grid.clone(),
            tail_paths: self.tail_paths,
            per_unit: self.per_unit,
            ns: self.ns.clone(),
            times: self.times.clone(),
            alphas: self.alphas.clone(),
            z: self.z,
            diag_rel: self.diag_rel,
            coverage: self.coverage,
            ks_level: self.ks_level,
            family_level: self.family_level,
            monotone_z: self.monotone_z,
            fbm_method: self.fbm_method,
        }
    }
}

/// Resolves and validates the config; nothing is simulated before this
/// succeeds.
fn prepare(cli: &Cli) -> Result<(RunConfig, Option<ExperimentName>), Failure> {
    let env_dir = std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let mut cfg = RunConfig::load(env_dir, cli.flags.config.as_deref(), &cli.flags.overrides())
        .map_err(Failure::Usage)?
        .resolve();
    let experiment = match &cli.command {
        Command::Verify { experiment } => {
            let name = experiment
                .map(ExperimentName::from)
                .or(cfg.experiment.name)
                .ok_or_else(|| {
                    Failure::Usage("verify needs an experiment: name one or set experiment.name in the config".into())
                })?;
            cfg.experiment.name = Some(name);
            Some(name)
        }
        _ => None,
    };
    cfg.validate().map_err(Failure::Usage)?;
    cfg.spec()?;
    cfg.grid_spec()?;
    Ok((cfg, experiment))
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    let (cfg, experiment) = prepare(cli)?;
    if cli.flags.explain {
        print!("{}", cfg.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start {w} workers: {e}")))?;
    }
    let outcome = match (&cli.command, experiment) {
        (Command::Simulate, _) => commands::simulate(&cfg)?,
        (Command::QuantileField, _) => commands::quantile_field(&cfg)?,
        (Command::LimitCov, _) => commands::limit_cov(&cfg)?,
        (Command::Verify { .. }, Some(name)) => commands::verify(&cfg, name)?,
        (Command::Verify { .. }, None) => unreachable!("resolved in prepare"),
    };
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(if outcome.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("verification failed; see the report verdicts");
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
