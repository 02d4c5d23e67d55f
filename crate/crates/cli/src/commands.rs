//! Command execution and output files.

use std::path::PathBuf;

use serde_json::{json, Value};

use selfsim_core::empirical::write_fields;
use selfsim_core::harness::{
    convergence_direction, lemma1_bound_check, mc_normality, mc_quantile_clt, near_zero_check, property_suite,
    replicate_fields, scalability_check, tail_report, VerificationReport,
};
use selfsim_core::limit::LimitCovariance;
use selfsim_core::simulate::Simulator;
use selfsim_core::{Error, VERSION};

use crate::config::{ExperimentName, Format, RunConfig};

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

/// Files written and whether every verdict passed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

fn provenance(cfg: &RunConfig, command: &str) -> Value {
    json!({"command": command, "config": cfg, "seed": cfg.seed, "version": VERSION})
}

fn write_json(cfg: &RunConfig, name: &str, value: &Value, out: &mut Outcome) -> Result<(), Failure> {
    let path = cfg.output_dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).map_err(Error::from)? + "\n")?;
    out.files.push(path);
    Ok(())
}

fn write_text(cfg: &RunConfig, name: &str, text: &str, out: &mut Outcome) -> Result<(), Failure> {
    let path = cfg.output_dir.join(name);
    std::fs::write(&path, text)?;
    out.files.push(path);
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let spec = cfg.spec()?;
    let grid = cfg.grid_spec()?;
    if cfg.experiment.paths == 0 {
        return Err(Failure::Usage("paths must be at least 1".into()));
    }
    let sim = Simulator::new(&spec, &grid, &cfg.simulation)?;
    let ens = sim.ensemble(cfg.experiment.paths, cfg.seed, 0);
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Outcome {
        passed: true,
        ..Default::default()
    };
    if cfg.writes(Format::Csv) {
        write_text(cfg, "paths.csv", &ens.to_csv(), &mut out)?;
    }
    let mut side = provenance(cfg, "simulate");
    side["ensemble"] = ens.sidecar();
    write_json(cfg, "paths.json", &side, &mut out)?;
    Ok(out)
}

pub fn quantile_field(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let spec = cfg.spec()?;
    let grid = cfg.grid_spec()?;
    let e = &cfg.experiment;
    if e.n == 0 || e.reps == 0 {
        return Err(Failure::Usage("n and reps must be at least 1".into()));
    }
    let fields = replicate_fields(&spec, &grid, e.n, e.reps, cfg.seed, &cfg.simulation)?;
    let mut meta = provenance(cfg, "quantile-field");
    meta["spec"] = json!(spec);
    meta["grid"] = json!(grid);
    let mut out = Outcome {
        passed: true,
        ..Default::default()
    };
    if cfg.writes(Format::Csv) {
        write_fields(&cfg.output_dir, "quantile_field", &fields, meta)?;
        out.files.push(cfg.output_dir.join("quantile_field.csv"));
        out.files.push(cfg.output_dir.join("quantile_field.json"));
    } else {
        std::fs::create_dir_all(&cfg.output_dir)?;
        meta["rows"] = json!(fields.len() * grid.times.len() * grid.alphas.len());
        write_json(cfg, "quantile_field.json", &meta, &mut out)?;
    }
    Ok(out)
}

pub fn limit_cov(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let spec = cfg.spec()?;
    let e = &cfg.experiment;
    let times = e.times.clone().unwrap_or_default();
    let alphas = e.alphas.clone().unwrap_or_default();
    if times.is_empty() || alphas.is_empty() {
        return Err(Failure::Usage("limit-cov needs at least one time and one level".into()));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Failure::Usage(format!("time {t} must be nonnegative")));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Failure::Usage(format!("level {a} must lie in (0, 1)")));
    }
    let table = LimitCovariance::evaluate(&spec, LimitCovariance::grid_pairs(&times, &alphas))?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Outcome {
        passed: true,
        ..Default::default()
    };
    if cfg.writes(Format::Csv) {
        write_text(cfg, "limit_cov.csv", &table.to_csv(), &mut out)?;
    }
    let mut side = provenance(cfg, "limit-cov");
    side["spec"] = json!(spec);
    side["rows"] = json!(table.values.len());
    write_json(cfg, "limit_cov.json", &side, &mut out)?;
    Ok(out)
}

fn run_experiment(cfg: &RunConfig, name: ExperimentName) -> Result<(VerificationReport, Option<String>), Failure> {
    let e = &cfg.experiment;
    let settings = cfg.settings();
    let seed = cfg.seed;
    if name == ExperimentName::Properties {
        return Ok((property_suite(seed)?, None));
    }
    let spec = cfg.spec()?;
    let grid = cfg.grid_spec()?;
    let rep = match name {
        ExperimentName::CltCov => mc_quantile_clt(&spec, &grid, &cfg.points(), e.n, e.reps, seed, &settings)?,
        ExperimentName::Normality => {
            let p = e.point.unwrap_or([grid.horizon, 0.5]);
            mc_normality(&spec, (p[0], p[1]), e.n, e.reps, seed, &settings)?
        }
        ExperimentName::Scalability => {
            scalability_check(&spec, e.t0, e.alpha0, &e.factors, e.n, e.reps, seed, &settings)?
        }
        ExperimentName::Lemma1 => lemma1_bound_check(&spec, &grid.alphas, e.delta, e.q, e.n, e.reps, seed, &settings)?,
        ExperimentName::NearZero => {
            near_zero_check(&spec, &grid, &e.deltas, &e.epsilons, e.n, e.reps, seed, &settings)?
        }
        ExperimentName::Tail => {
            let u = e.u_grid.clone().unwrap_or_default();
            let (rep, est) = tail_report(&spec, &u, e.tail_paths, e.per_unit, seed, &settings)?;
            return Ok((rep, Some(est.to_csv())));
        }
        ExperimentName::Convergence => convergence_direction(&spec, &cfg.points(), &e.ns, e.reps, seed, &settings)?,
        ExperimentName::Properties => unreachable!("handled above"),
    };
    Ok((rep, None))
}

pub fn verify(cfg: &RunConfig, name: ExperimentName) -> Result<Outcome, Failure> {
    let (mut rep, extra) = run_experiment(cfg, name)?;
    // The harness echoes its own inputs; keep them next to the full run config.
    let inner = std::mem::take(&mut rep.config);
    rep.config = json!({"run": cfg, "experiment": inner});
    std::fs::create_dir_all(&cfg.output_dir)?;
    let stem = name.name();
    let mut out = Outcome {
        passed: rep.passed(),
        ..Default::default()
    };
    write_text(cfg, &format!("{stem}.json"), &rep.to_json()?, &mut out)?;
    if cfg.writes(Format::Csv) {
        write_text(cfg, &format!("{stem}.estimates.csv"), &rep.estimates_csv(), &mut out)?;
        if let Some(csv) = extra {
            write_text(cfg, &format!("{stem}.exceedances.csv"), &csv, &mut out)?;
        }
    }
    for v in &rep.verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.check, v.detail);
    }
    Ok(out)
}
