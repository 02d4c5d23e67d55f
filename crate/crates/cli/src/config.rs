//! Layered run configuration: built-in defaults, then the output-directory
//! environment variable, then a TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use selfsim_core::harness::{log_grid, Settings};
use selfsim_core::limit::Point;
use selfsim_core::simulate::{FbmMethod, GridSpec, SimOptions};
use selfsim_core::{Family, ProcessSpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SELFSIM_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "selfsim-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
    /// Worker threads; all outputs are identical for any value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub process: ProcessBlock,
    pub grid: GridBlock,
    pub experiment: ExperimentBlock,
    pub tolerances: Tolerances,
    pub simulation: SimOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            output_dir: PathBuf::from(DEFAULT_OUT_DIR),
            formats: vec![Format::Csv, Format::Json],
            workers: None,
            process: ProcessBlock::default(),
            grid: GridBlock::default(),
            experiment: ExperimentBlock::default(),
            tolerances: Tolerances::default(),
            simulation: SimOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Long-format tables.
    Csv,
    /// Reports and sidecars.
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessBlock {
    pub family: Family,
    pub r: f64,
    pub c: f64,
    pub m: u32,
}

impl Default for ProcessBlock {
    fn default() -> Self {
        ProcessBlock {
            family: Family::Bm,
            r: 1.0,
            c: 1.0,
            m: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub time_points: usize,
    pub level_interval: [f64; 2],
    pub level_points: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            horizon: 2.0,
            time_points: 33,
            level_interval: [0.25, 0.75],
            level_points: 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    CltCov,
    Normality,
    Scalability,
    Lemma1,
    NearZero,
    Tail,
    Properties,
    Convergence,
}

impl ExperimentName {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentName::CltCov => "clt-cov",
            ExperimentName::Normality => "normality",
            ExperimentName::Scalability => "scalability",
            ExperimentName::Lemma1 => "lemma1",
            ExperimentName::NearZero => "near-zero",
            ExperimentName::Tail => "tail",
            ExperimentName::Properties => "properties",
            ExperimentName::Convergence => "convergence",
        }
    }
}

/// Experiment parameters. Keys left unset are filled from the grid by
/// [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<ExperimentName>,
    /// Paths per quantile field.
    pub n: usize,
    /// Replications of the field.
    #[serde(alias = "m")]
    pub reps: usize,
    /// Paths written by `simulate`.
    pub paths: usize,
    /// Comparison points `[t, α]` (clt-cov, convergence).
    pub points: Option<Vec<[f64; 2]>>,
    /// Point for the normality test.
    pub point: Option<[f64; 2]>,
    pub t0: f64,
    pub alpha0: f64,
    pub factors: Vec<f64>,
    /// Window `(0, δ]` and moment order of the scaling-moment bound.
    pub delta: f64,
    pub q: f64,
    pub deltas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub u_grid: Option<Vec<f64>>,
    pub tail_paths: usize,
    /// Grid points per unit time on `J = [1, 2]` for the tail experiment.
    pub per_unit: usize,
    pub ns: Vec<usize>,
    /// Times and levels tabulated by `limit-cov`.
    pub times: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        ExperimentBlock {
            name: None,
            n: 400,
            reps: 1000,
            paths: 100,
            points: None,
            point: None,
            t0: 0.5,
            alpha0: 0.5,
            factors: vec![2.0, 4.0],
            delta: 0.25,
            q: 1.0,
            deltas: vec![0.5, 0.25, 0.125, 0.0625, 0.03125],
            epsilons: vec![0.25, 0.5, 1.0],
            u_grid: None,
            tail_paths: 20000,
            per_unit: 32,
            ns: vec![100, 400, 1600],
            times: None,
            alphas: None,
        }
    }
}

/// Statistical thresholds; see [`Settings`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub z: f64,
    pub diag_rel: f64,
    pub coverage: f64,
    pub ks_level: f64,
    pub family_level: f64,
    pub monotone_z: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = Settings::default();
        Tolerances {
            z: s.z,
            diag_rel: s.diag_rel,
            coverage: s.coverage,
            ks_level: s.ks_level,
            family_level: s.family_level,
            monotone_z: s.monotone_z,
        }
    }
}

/// Command-line values; `None` leaves the lower layers in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
    pub workers: Option<usize>,
    pub family: Option<Family>,
    pub r: Option<f64>,
    pub c: Option<f64>,
    pub m: Option<u32>,
    pub horizon: Option<f64>,
    pub time_points: Option<usize>,
    pub level_interval: Option<[f64; 2]>,
    pub level_points: Option<usize>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub paths: Option<usize>,
    pub points: Option<Vec<[f64; 2]>>,
    pub point: Option<[f64; 2]>,
    pub t0: Option<f64>,
    pub alpha0: Option<f64>,
    pub factors: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub q: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub epsilons: Option<Vec<f64>>,
    pub u_grid: Option<Vec<f64>>,
    pub tail_paths: Option<usize>,
    pub per_unit: Option<usize>,
    pub ns: Option<Vec<usize>>,
    pub times: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
    pub z: Option<f64>,
    pub diag_rel: Option<f64>,
    pub coverage: Option<f64>,
    pub ks_level: Option<f64>,
    pub family_level: Option<f64>,
    pub monotone_z: Option<f64>,
    pub fbm_method: Option<FbmMethod>,
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
    (opt $dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = Some(v);
        }
    };
}

/// Recursively overlays `top` on `base`; tables merge key by key, anything
/// else is replaced.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Defaults, then `env_out_dir`, then `file`, then `flags`.
    pub fn layered(env_out_dir: Option<PathBuf>, file: Option<&str>, flags: &Overrides) -> Result<Self, String> {
        let mut base = RunConfig::default();
        if let Some(dir) = env_out_dir {
            base.output_dir = dir;
        }
        let mut cfg = match file {
            None => base,
            Some(text) => {
                let top: Table = toml::from_str(text).map_err(|e| format!("config file: {e}"))?;
                let mut table = Table::try_from(&base).map_err(|e| format!("config defaults: {e}"))?;
                merge(&mut table, top);
                table.try_into().map_err(|e| format!("config file: {e}"))?
            }
        };
        cfg.apply(flags);
        Ok(cfg)
    }

    /// Reads the TOML file at `path` (if any) and layers it.
    pub fn load(env_out_dir: Option<PathBuf>, path: Option<&Path>, flags: &Overrides) -> Result<Self, String> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?),
            None => None,
        };
        Self::layered(env_out_dir, text.as_deref(), flags)
    }

    fn apply(&mut self, o: &Overrides) {
        let o = o.clone();
        set!(self.seed, o.seed);
        set!(self.output_dir, o.output_dir);
        set!(self.formats, o.formats);
        set!(opt self.workers, o.workers);
        let p = &mut self.process;
        set!(p.family, o.family);
        set!(p.r, o.r);
        set!(p.c, o.c);
        set!(p.m, o.m);
        let g = &mut self.grid;
        set!(g.horizon, o.horizon);
        set!(g.time_points, o.time_points);
        set!(g.level_interval, o.level_interval);
        set!(g.level_points, o.level_points);
        let e = &mut self.experiment;
        set!(e.n, o.n);
        set!(e.reps, o.reps);
        set!(e.paths, o.paths);
        set!(opt e.points, o.points);
        set!(opt e.point, o.point);
        set!(e.t0, o.t0);
        set!(e.alpha0, o.alpha0);
        set!(e.factors, o.factors);
        set!(e.delta, o.delta);
        set!(e.q, o.q);
        set!(e.deltas, o.deltas);
        set!(e.epsilons, o.epsilons);
        set!(opt e.u_grid, o.u_grid);
        set!(e.tail_paths, o.tail_paths);
        set!(e.per_unit, o.per_unit);
        set!(e.ns, o.ns);
        set!(opt e.times, o.times);
        set!(opt e.alphas, o.alphas);
        let t = &mut self.tolerances;
        set!(t.z, o.z);
        set!(t.diag_rel, o.diag_rel);
        set!(t.coverage, o.coverage);
        set!(t.ks_level, o.ks_level);
        set!(t.family_level, o.family_level);
        set!(t.monotone_z, o.monotone_z);
        set!(self.simulation.fbm_method, o.fbm_method);
    }

    /// Fills grid-dependent defaults so the echoed config is complete.
    pub fn resolve(mut self) -> Self {
        let t = self.grid.horizon;
        let e = &mut self.experiment;
        e.points.get_or_insert_with(|| vec![[t / 2.0, 0.5], [t, 0.5]]);
        e.point.get_or_insert([t, 0.5]);
        e.u_grid.get_or_insert_with(|| log_grid(-1.0, 4.0, 10));
        e.times.get_or_insert_with(|| vec![0.0, t / 2.0, t]);
        e.alphas.get_or_insert_with(|| vec![0.5]);
        self
    }

    pub fn spec(&self) -> Result<ProcessSpec, selfsim_core::Error> {
        let p = &self.process;
        ProcessSpec::new(p.family, p.r, p.c, p.m)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, selfsim_core::Error> {
        let g = &self.grid;
        GridSpec::uniform(
            g.horizon,
            g.time_points,
            g.level_interval[0],
            g.level_interval[1],
            g.level_points,
        )
    }

    pub fn settings(&self) -> Settings {
        let t = &self.tolerances;
        Settings {
            sim: self.simulation,
            z: t.z,
            diag_rel: t.diag_rel,
            coverage: t.coverage,
            ks_level: t.ks_level,
            family_level: t.family_level,
            monotone_z: t.monotone_z,
        }
    }

    pub fn points(&self) -> Vec<Point> {
        self.experiment
            .points
            .as_deref()
            .unwrap_or_default()
            .iter()
            .map(|p| (p[0], p[1]))
            .collect()
    }

    pub fn writes(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// Checks that do not depend on the command; the process and grid are
    /// validated by their constructors.
    pub fn validate(&self) -> Result<(), String> {
        if self.formats.is_empty() {
            return Err("formats must name at least one of csv, json".into());
        }
        if self.writes(Format::Csv) && !self.writes(Format::Json) {
            return Err("csv output needs json as well: every table is written next to its JSON sidecar".into());
        }
        if self.workers == Some(0) {
            return Err("workers must be at least 1".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("coverage", t.coverage),
            ("ks_level", t.ks_level),
            ("family_level", t.family_level),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!("tolerance {name} = {v} must lie in (0, 1)"));
            }
        }
        for (name, v) in [("z", t.z), ("diag_rel", t.diag_rel), ("monotone_z", t.monotone_z)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("tolerance {name} = {v} must be positive"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default().resolve();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn flags_override_file_overrides_env_and_defaults() {
        let file = "seed = 5\noutput_dir = \"from-file\"\n[process]\nfamily = \"stable\"\nr = 1.5\n[grid]\nT = 4.0\n";
        let flags = Overrides {
            r: Some(1.2),
            ..Default::default()
        };
        let cfg = RunConfig::layered(Some("from-env".into()), Some(file), &flags).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.output_dir, PathBuf::from("from-file"));
        assert_eq!(cfg.process.family, Family::Stable);
        assert_eq!(cfg.process.r, 1.2);
        // Untouched keys in a partially given section keep their defaults.
        assert_eq!(cfg.process.c, 1.0);
        assert_eq!(cfg.grid.horizon, 4.0);
        assert_eq!(cfg.grid.time_points, 33);

        let cfg = RunConfig::layered(Some("from-env".into()), None, &Overrides::default()).unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("from-env"));
        let flags = Overrides {
            output_dir: Some("from-flag".into()),
            ..Default::default()
        };
        let cfg = RunConfig::layered(Some("from-env".into()), Some(file), &flags).unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("from-flag"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::layered(None, Some("[process]\nfamliy = \"bm\"\n"), &Overrides::default()).unwrap_err();
        assert!(err.contains("famliy"), "{err}");
    }

    #[test]
    fn resolution_uses_the_horizon() {
        let mut cfg = RunConfig::default();
        cfg.grid.horizon = 4.0;
        let cfg = cfg.resolve();
        assert_eq!(cfg.points(), vec![(2.0, 0.5), (4.0, 0.5)]);
        assert_eq!(cfg.experiment.times, Some(vec![0.0, 2.0, 4.0]));
    }

    #[test]
    fn validation_messages() {
        let mut cfg = RunConfig {
            formats: vec![Format::Csv],
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().contains("sidecar"));
        cfg.formats = vec![Format::Json];
        cfg.tolerances.ks_level = 1.5;
        assert!(cfg.validate().unwrap_err().contains("ks_level"));
    }
}
