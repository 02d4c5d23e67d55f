//! Monte Carlo experiments and deterministic property sweeps, each producing
//! a [`VerificationReport`] with estimates, standard errors, test statistics
//! and pass/fail verdicts.
//!
//! Replications run in parallel; every replication draws from its own random
//! streams and the results are reduced in replication order, so a report is a
//! pure function of its configuration and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::empirical::{
    ecdf, empirical_quantile, order_statistics, quantile_rank, reflected_quantile_check, FieldBuilder, QuantileField,
};
use crate::error::{invalid, Error, Result};
use crate::limit::{limit_cov_entry, median_cov_fbm_routes, median_cov_stable_routes, Point};
use crate::models::{marginal_quantile, stable_cdf, stable_density, stable_quantile, ProcessSpec};
use crate::normal;
use crate::rng::aux_stream;
use crate::simulate::{merge_times, GridSpec, SimOptions, Simulator};
use crate::stats::{covariance_se, ks_one_sample, ks_two_sample, mean_se, variance_se};
use crate::VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Experiment {
    CltCov,
    CltNormality,
    Scalability,
    TailExponent,
    NearZero,
    Lemma1Bound,
    PropertySuite,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub name: String,
    pub coords: BTreeMap<String, f64>,
    pub value: f64,
    /// Monte Carlo standard error; zero for deterministic quantities.
    pub se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRow {
    pub name: String,
    pub statistic: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub experiment: Experiment,
    pub config: Value,
    pub seed: u64,
    pub estimates: Vec<EstimateRow>,
    pub tests: Vec<TestRow>,
    pub verdicts: Vec<Verdict>,
    pub version: String,
    pub wall_time_s: f64,
}

impl VerificationReport {
    fn new(experiment: Experiment, config: Value, seed: u64) -> Self {
        VerificationReport {
            experiment,
            config,
            seed,
            estimates: Vec::new(),
            tests: Vec::new(),
            verdicts: Vec::new(),
            version: VERSION.to_string(),
            wall_time_s: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, check: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.check == check)
    }

    pub fn estimate(&self, name: &str, coords: &[(&str, f64)]) -> Option<&EstimateRow> {
        self.estimates
            .iter()
            .find(|e| e.name == name && coords.iter().all(|(k, v)| e.coords.get(*k) == Some(v)))
    }

    fn estimate_row(&mut self, name: &str, coords: &[(&str, f64)], value: f64, se: f64, reference: Option<f64>) {
        self.estimates.push(EstimateRow {
            name: name.to_string(),
            coords: coords.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value,
            se,
            reference,
        });
    }

    fn test_row(&mut self, name: String, statistic: f64, p: f64) {
        self.tests.push(TestRow { name, statistic, p });
    }

    fn verdict_row(&mut self, check: &str, pass: bool, detail: String) {
        self.verdicts.push(Verdict {
            check: check.to_string(),
            pass,
            detail,
        });
    }

    /// Full JSON, wall time included.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// JSON without the wall time; identical across runs with the same
    /// configuration and seed.
    pub fn payload_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Value::Object(map) = &mut v {
            map.remove("wall_time_s");
        }
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    /// Long-format estimate table: `name,<coordinate columns>,value,se,reference`.
    pub fn estimates_csv(&self) -> String {
        let mut keys: Vec<&str> = self
            .estimates
            .iter()
            .flat_map(|e| e.coords.keys().map(String::as_str))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let mut out = String::from("name");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push_str(",value,se,reference\n");
        for e in &self.estimates {
            out.push_str(&e.name);
            for k in &keys {
                out.push(',');
                if let Some(v) = e.coords.get(*k) {
                    let _ = write!(out, "{v}");
                }
            }
            let _ = write!(out, ",{},{},", e.value, e.se);
            if let Some(r) = e.reference {
                let _ = write!(out, "{r}");
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.estimates.csv`; the JSON doubles as
    /// the CSV's provenance record.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        std::fs::write(dir.join(format!("{stem}.estimates.csv")), self.estimates_csv())?;
        Ok(())
    }

    fn finish(mut self, start: Instant) -> Self {
        self.wall_time_s = start.elapsed().as_secs_f64();
        self
    }
}

/// Simulation options and statistical thresholds shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub sim: SimOptions,
    /// Width, in standard errors, of the agreement band for estimates.
    pub z: f64,
    /// Largest relative error allowed on compared variances.
    pub diag_rel: f64,
    /// Fraction of compared entries that must fall inside the band.
    pub coverage: f64,
    /// Level of the Kolmogorov–Smirnov tests.
    pub ks_level: f64,
    /// Family-wise level of the mean-field check (Bonferroni).
    pub family_level: f64,
    /// Slack, in standard errors, for monotonicity checks.
    pub monotone_z: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            sim: SimOptions::default(),
            z: 3.0,
            diag_rel: 0.10,
            coverage: 0.95,
            ks_level: 0.01,
            family_level: 0.01,
            monotone_z: 2.0,
        }
    }
}

/// `m` independent fluctuation fields; replication `i` is built from `n`
/// paths keyed by `(seed, i, ·)`.
pub fn replicate_fields(
    spec: &ProcessSpec,
    grid: &GridSpec,
    n: usize,
    m: usize,
    seed: u64,
    sim: &SimOptions,
) -> Result<Vec<QuantileField>> {
    let simulator = Simulator::new(spec, grid, sim)?;
    let builder = FieldBuilder::new(spec, grid)?;
    (0..m as u64)
        .into_par_iter()
        .map(|rep| builder.field(&simulator.ensemble_seq(n, seed, rep)))
        .collect()
}

fn series(fields: &[QuantileField], k: usize, i: usize) -> Vec<f64> {
    fields.iter().map(|f| f.get(k, i)).collect()
}

/// Limit variance at `(1, α)`: `α(1−α)/f(1,τ_α(1))²`; at time `t` it scales by `t^{2H}`.
fn unit_variance(spec: &ProcessSpec, alpha: f64) -> Result<f64> {
    limit_cov_entry((1.0, alpha), (1.0, alpha), spec).map(|e| e.value)
}

/// Leading-order mean of `W_n(1, α)` at finite `n`, from the expansion
/// `E x_(j) ≈ Q(p) + p(1−p) Q''(p) / (2(n+2))`, `p = j/(n+1)`,
/// `Q'' = −f'(Q)/f(Q)³`. At time `t` it scales by `t^H`.
pub fn finite_n_mean(spec: &ProcessSpec, alpha: f64, n: usize) -> Result<f64> {
    let j = quantile_rank(n, alpha);
    let nf = n as f64;
    let p = j as f64 / (nf + 1.0);
    let q = spec.unit_quantile(p)?;
    let f = spec.unit_density(q)?;
    let h = 1e-4 * q.abs().max(1.0);
    let df = (spec.unit_density(q + h)? - spec.unit_density(q - h)?) / (2.0 * h);
    let q2 = -df / (f * f * f);
    let expected = q + p * (1.0 - p) * q2 / (2.0 * (nf + 2.0));
    Ok(nf.sqrt() * (expected - spec.unit_quantile(alpha)?))
}

fn check_sizes(n: usize, m: usize, min_n: usize, min_m: usize) -> Result<()> {
    if n < min_n || m < min_m {
        return Err(Error::InsufficientData(format!(
            "need n ≥ {min_n} paths and m ≥ {min_m} replications for standard errors, got n = {n}, m = {m}"
        )));
    }
    Ok(())
}

fn grid_echo(grid: &GridSpec) -> Value {
    json!({
        "T": grid.horizon,
        "time_points": grid.times.len(),
        "level_interval": [grid.level_interval.0, grid.level_interval.1],
        "level_points": grid.alphas.len(),
        "times": grid.times,
        "alphas": grid.alphas,
    })
}

/// Sample mean and covariance of the fluctuation field against the limit
/// covariance.
///
/// * mean: every grid point with `t > 0` within a Bonferroni band, at
///   family-wise level `family_level`, of the leading-order finite-`n` mean
///   [`finite_n_mean`] (zero in the limit);
/// * coverage: at least `coverage` of the compared entries (all diagonal
///   grid points, plus every pair of `points`) within `z` standard errors;
/// * diagonal: relative error at each of `points` at most `diag_rel`.
///
/// Pairs whose joint law has no analytic evaluation are reported without a
/// reference.
pub fn mc_quantile_clt(
    spec: &ProcessSpec,
    grid: &GridSpec,
    points: &[Point],
    n: usize,
    m: usize,
    seed: u64,
    settings: &Settings,
) -> Result<VerificationReport> {
    let start = Instant::now();
    check_sizes(n, m, 100, 200)?;
    let idx: Vec<(usize, usize)> = points
        .iter()
        .map(|&(t, a)| match (grid.time_index(t), grid.alpha_index(a)) {
            (Some(k), Some(i)) => Ok((k, i)),
            _ => Err(invalid(format!("comparison point ({t}, {a}) is not on the grid"))),
        })
        .collect::<Result<_>>()?;
    let config = json!({
        "process": spec, "grid": grid_echo(grid), "n": n, "m": m,
        "points": points, "settings": settings,
    });
    let mut rep = VerificationReport::new(Experiment::CltCov, config, seed);
    let fields = replicate_fields(spec, grid, n, m, seed, &settings.sim)?;
    let h = spec.hurst();
    let unit_var: Vec<f64> = grid
        .alphas
        .iter()
        .map(|&a| unit_variance(spec, a))
        .collect::<Result<_>>()?;
    let unit_bias: Vec<f64> = grid
        .alphas
        .iter()
        .map(|&a| finite_n_mean(spec, a, n))
        .collect::<Result<_>>()?;

    let positive: Vec<usize> = (0..grid.times.len()).filter(|&k| grid.times[k] > 0.0).collect();
    let n_points = positive.len() * grid.alphas.len();
    let z_mean = normal::quantile(1.0 - settings.family_level / (2.0 * n_points as f64));
    let mut worst_mean = 0.0f64;
    let mut covered = 0usize;
    let mut compared = 0usize;
    for &k in &positive {
        let t = grid.times[k];
        for (i, &alpha) in grid.alphas.iter().enumerate() {
            let x = series(&fields, k, i);
            let mu = mean_se(&x)?;
            let centre = t.powf(h) * unit_bias[i];
            worst_mean = worst_mean.max(((mu.value - centre) / mu.se).abs());
            rep.estimate_row("mean", &[("t", t), ("alpha", alpha)], mu.value, mu.se, Some(centre));
            let v = variance_se(&x)?;
            let theory = t.powf(2.0 * h) * unit_var[i];
            compared += 1;
            covered += usize::from((v.value - theory).abs() <= settings.z * v.se);
            rep.estimate_row("var", &[("t", t), ("alpha", alpha)], v.value, v.se, Some(theory));
        }
    }
    rep.verdict_row(
        "mean_field",
        worst_mean <= z_mean,
        format!(
            "max |mean − finite-n centre|/se = {worst_mean:.3} over {n_points} points, Bonferroni bound {z_mean:.3}"
        ),
    );

    let mut worst_diag = 0.0f64;
    let mut skipped = 0usize;
    for (a, &(ka, ia)) in idx.iter().enumerate() {
        for &(kb, ib) in &idx[a..] {
            let (p, q) = ((grid.times[ka], grid.alphas[ia]), (grid.times[kb], grid.alphas[ib]));
            let c = covariance_se(&series(&fields, ka, ia), &series(&fields, kb, ib))?;
            let theory = match limit_cov_entry(p, q, spec) {
                Ok(e) => Some(e.value),
                Err(Error::MonteCarloOnly(_)) => {
                    skipped += 1;
                    None
                }
                Err(e) => return Err(e),
            };
            if let Some(th) = theory {
                if (ka, ia) == (kb, ib) {
                    if th > 0.0 {
                        worst_diag = worst_diag.max((c.value - th).abs() / th);
                    }
                } else {
                    compared += 1;
                    covered += usize::from((c.value - th).abs() <= settings.z * c.se);
                }
            }
            rep.estimate_row(
                "cov",
                &[("s", p.0), ("beta", p.1), ("t", q.0), ("alpha", q.1)],
                c.value,
                c.se,
                theory,
            );
        }
    }
    let frac = covered as f64 / compared.max(1) as f64;
    rep.verdict_row(
        "coverage",
        frac >= settings.coverage,
        format!("{covered}/{compared} compared entries within {} se", settings.z),
    );
    rep.verdict_row(
        "diagonal",
        worst_diag <= settings.diag_rel,
        format!("max relative diagonal error {worst_diag:.4} at the comparison points"),
    );
    if skipped > 0 {
        rep.verdict_row(
            "monte_carlo_only",
            true,
            format!("{skipped} pairs have no analytic joint law and were not compared"),
        );
    }
    Ok(rep.finish(start))
}

/// One-sample Kolmogorov–Smirnov test of `W_n(t,α)` standardized by the
/// limit standard deviation.
pub fn mc_normality(
    spec: &ProcessSpec,
    point: Point,
    n: usize,
    m: usize,
    seed: u64,
    settings: &Settings,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let (t, alpha) = point;
    let config = json!({"process": spec, "point": [t, alpha], "n": n, "m": m, "settings": settings});
    let mut rep = VerificationReport::new(Experiment::CltNormality, config, seed);
    if t == 0.0 {
        rep.verdict_row("boundary", true, "W_n(0, α) = 0 identically; nothing to test".into());
        return Ok(rep.finish(start));
    }
    check_sizes(n, m, 1, 2)?;
    let grid = GridSpec::new(vec![0.0, t], vec![alpha], (alpha, alpha))?;
    let fields = replicate_fields(spec, &grid, n, m, seed, &settings.sim)?;
    let sd = limit_cov_entry(point, point, spec)?.value.sqrt();
    let x: Vec<f64> = series(&fields, 1, 0).into_iter().map(|w| w / sd).collect();
    let ks = ks_one_sample(&x, normal::cdf)?;
    let mu = mean_se(&x)?;
    let v = variance_se(&x)?;
    rep.estimate_row(
        "standardized_mean",
        &[("t", t), ("alpha", alpha)],
        mu.value,
        mu.se,
        Some(0.0),
    );
    rep.estimate_row(
        "standardized_var",
        &[("t", t), ("alpha", alpha)],
        v.value,
        v.se,
        Some(1.0),
    );
    rep.test_row(format!("ks_normal(t={t},alpha={alpha})"), ks.statistic, ks.p_value);
    rep.verdict_row(
        "normality",
        ks.p_value >= settings.ks_level,
        format!("KS p = {:.4} against level {}", ks.p_value, settings.ks_level),
    );
    Ok(rep.finish(start))
}

/// Two-sample tests of `W_n(c t₀, α₀)` against `c^H W_n(t₀, α₀)`, one per
/// factor `c`. Both samples come from the same replications.
#[allow(clippy::too_many_arguments)]
pub fn scalability_check(
    spec: &ProcessSpec,
    t0: f64,
    alpha0: f64,
    factors: &[f64],
    n: usize,
    m: usize,
    seed: u64,
    settings: &Settings,
) -> Result<VerificationReport> {
    let start = Instant::now();
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(invalid(format!("t0 = {t0} must be positive")));
    }
    if factors.is_empty() || factors.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(invalid("scaling factors must be positive"));
    }
    check_sizes(n, m, 1, 2)?;
    let scaled: Vec<f64> = factors.iter().map(|c| c * t0).collect();
    let times = merge_times(&[&[0.0, t0], &scaled]);
    let grid = GridSpec::new(times, vec![alpha0], (alpha0, alpha0))?;
    let config = json!({
        "process": spec, "t0": t0, "alpha0": alpha0, "factors": factors,
        "n": n, "m": m, "settings": settings,
    });
    let mut rep = VerificationReport::new(Experiment::Scalability, config, seed);
    let fields = replicate_fields(spec, &grid, n, m, seed, &settings.sim)?;
    let h = spec.hurst();
    let k0 = grid.time_index(t0).expect("t0 on grid");
    let base = series(&fields, k0, 0);
    for (&c, &ct) in factors.iter().zip(&scaled) {
        let kc = grid.time_index(ct).expect("scaled time on grid");
        let a = series(&fields, kc, 0);
        let b: Vec<f64> = base.iter().map(|w| c.powf(h) * w).collect();
        let ks = ks_two_sample(&a, &b)?;
        let (va, vb) = (variance_se(&a)?, variance_se(&b)?);
        rep.estimate_row("var_scaled_time", &[("c", c)], va.value, va.se, None);
        rep.estimate_row("var_rescaled_field", &[("c", c)], vb.value, vb.se, None);
        rep.test_row(format!("ks_two_sample(c={c})"), ks.statistic, ks.p_value);
        rep.verdict_row(
            &format!("scalability(c={c})"),
            ks.p_value >= settings.ks_level,
            format!("KS p = {:.4} against level {}", ks.p_value, settings.ks_level),
        );
    }
    Ok(rep.finish(start))
}

/// Grid times for the scaling-moment bound: dyadic blocks
/// `δ2^{−k−1}(1 + j/P)`, `k < blocks`, `j ≤ P`, covering `(0, δ]`, and the
/// matching block `1 + j/P` covering `J = [1, 2]`.
pub fn lemma1_times(delta: f64, blocks: usize, per_block: usize) -> Vec<f64> {
    let unit: Vec<f64> = (0..=per_block).map(|j| 1.0 + j as f64 / per_block as f64).collect();
    let mut lists: Vec<Vec<f64>> = vec![vec![0.0], unit.clone()];
    for k in 0..blocks {
        let s = delta * 0.5f64.powi(k as i32 + 1);
        lists.push(unit.iter().map(|u| s * u).collect());
    }
    let refs: Vec<&[f64]> = lists.iter().map(Vec::as_slice).collect();
    merge_times(&refs)
}

/// `δ^{Hq} / (1 − 2^{−Hq})`.
pub fn lemma1_constant(h: f64, q: f64, delta: f64) -> f64 {
    delta.powf(h * q) / (1.0 - 2f64.powf(-h * q))
}

/// Monte Carlo check of
/// `E sup_{(0,δ]×A} |W|^q ≤ δ^{Hq}/(1−2^{−Hq}) · E sup_{J×A} |W|^q`
/// with grid suprema and `A` the grid levels.
#[allow(clippy::too_many_arguments)]
pub fn lemma1_bound_check(
    spec: &ProcessSpec,
    alphas: &[f64],
    delta: f64,
    q: f64,
    n: usize,
    m: usize,
    seed: u64,
    settings: &Settings,
) -> Result<VerificationReport> {
    let start = Instant::now();
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("δ = {delta} must lie in (0, 1]")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid(format!("q = {q} must lie in (0, 1]")));
    }
    check_sizes(n, m, 1, 2)?;
    let (blocks, per_block) = (8, 16);
    let times = lemma1_times(delta, blocks, per_block);
    let lo = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let grid = GridSpec::new(times, alphas.to_vec(), (lo, hi))?;
    let config = json!({
        "process": spec, "alphas": alphas, "delta": delta, "q": q, "n": n, "m": m,
        "blocks": blocks, "per_block": per_block, "settings": settings,
    });
    let mut rep = VerificationReport::new(Experiment::Lemma1Bound, config, seed);
    let fields = replicate_fields(spec, &grid, n, m, seed, &settings.sim)?;
    let near: Vec<usize> = (0..grid.times.len())
        .filter(|&k| grid.times[k] > 0.0 && grid.times[k] <= delta)
        .collect();
    let far: Vec<usize> = (0..grid.times.len())
        .filter(|&k| (1.0..=2.0).contains(&grid.times[k]))
        .collect();
    let sup_q = |f: &QuantileField, ks: &[usize]| {
        ks.iter()
            .flat_map(|&k| (0..f.grid.alphas.len()).map(move |i| (k, i)))
            .map(|(k, i)| f.get(k, i).abs())
            .fold(0.0, f64::max)
            .powf(q)
    };
    let lhs: Vec<f64> = fields.iter().map(|f| sup_q(f, &near)).collect();
    let rhs: Vec<f64> = fields.iter().map(|f| sup_q(f, &far)).collect();
    let (l, r) = (mean_se(&lhs)?, mean_se(&rhs)?);
    let k = lemma1_constant(spec.hurst(), q, delta);
    let bound = k * r.value;
    let rel = ((l.se / l.value).powi(2) + (r.se / r.value).powi(2)).sqrt();
    rep.estimate_row("constant", &[("delta", delta), ("q", q)], k, 0.0, None);
    rep.estimate_row("lhs_sup_near_zero", &[("delta", delta), ("q", q)], l.value, l.se, None);
    rep.estimate_row("sup_over_J", &[("delta", delta), ("q", q)], r.value, r.se, None);
    rep.estimate_row("rhs_bound", &[("delta", delta), ("q", q)], bound, k * r.se, None);
    rep.verdict_row(
        "scaling_moment_bound",
        l.value <= bound * (1.0 + settings.z * rel),
        format!(
            "E sup near zero = {:.4} vs bound {:.4} (constant {k:.5}, combined relative se {rel:.4})",
            l.value, bound
        ),
    );
    Ok(rep.finish(start))
}

/// Estimates `P(sup_{t≤δ, α∈A} |W_n(t,α)| > ε)` for each `(δ, ε)`.
///
/// The base grid is refined with the points `δj/4`, `j = 1..4`, for every
/// `δ` so that each window holds simulated times.
#[allow(clippy::too_many_arguments)]
pub fn near_zero_check(
    spec: &ProcessSpec,
    grid: &GridSpec,
    deltas: &[f64],
    epsilons: &[f64],
    n: usize,
    m: usize,
    seed: u64,
    settings: &Settings,
) -> Result<VerificationReport> {
    let start = Instant::now();
    if deltas.is_empty() || deltas.windows(2).any(|w| w[1] >= w[0]) || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(invalid("deltas must be positive and strictly decreasing"));
    }
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("epsilons must be positive"));
    }
    check_sizes(n, m, 1, 2)?;
    let extra: Vec<f64> = deltas
        .iter()
        .flat_map(|&d| (1..=4).map(move |j| d * j as f64 / 4.0))
        .filter(|&t| t <= grid.horizon)
        .collect();
    let grid = grid.with_times(merge_times(&[&grid.times, &extra]))?;
    let config = json!({
        "process": spec, "grid": grid_echo(&grid), "deltas": deltas, "epsilons": epsilons,
        "n": n, "m": m, "settings": settings,
    });
    let mut rep = VerificationReport::new(Experiment::NearZero, config, seed);
    let fields = replicate_fields(spec, &grid, n, m, seed, &settings.sim)?;
    let mf = m as f64;
    // prob[d][e] with its standard error.
    let mut table = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let ks: Vec<usize> = (0..grid.times.len()).filter(|&k| grid.times[k] <= d).collect();
        let sups: Vec<f64> = fields
            .iter()
            .map(|f| {
                ks.iter()
                    .flat_map(|&k| (0..grid.alphas.len()).map(move |i| f.get(k, i).abs()))
                    .fold(0.0, f64::max)
            })
            .collect();
        let mut row = Vec::with_capacity(epsilons.len());
        for &e in epsilons {
            let p = sups.iter().filter(|&&s| s > e).count() as f64 / mf;
            let se = (p * (1.0 - p) / mf).sqrt();
            rep.estimate_row("exceedance", &[("delta", d), ("epsilon", e)], p, se, None);
            row.push((p, se));
        }
        table.push(row);
    }
    let mut monotone = true;
    let mut detail = String::from("nonincreasing as δ decreases");
    for w in 1..deltas.len() {
        for (j, &e) in epsilons.iter().enumerate() {
            let ((p0, s0), (p1, s1)) = (table[w - 1][j], table[w][j]);
            if p1 > p0 + settings.monotone_z * (s0 * s0 + s1 * s1).sqrt() {
                monotone = false;
                detail = format!("increase at ε = {e} from δ = {} to δ = {}", deltas[w - 1], deltas[w]);
            }
        }
    }
    rep.verdict_row("monotone_in_delta", monotone, detail);
    let last = table.last().expect("nonempty");
    let small = epsilons.iter().zip(last).find(|(e, (p, _))| p < *e).map(|(e, _)| *e);
    rep.verdict_row(
        "small_at_smallest_delta",
        small.is_some(),
        match small {
            Some(e) => format!("P < ε at δ = {} for ε = {e}", deltas[deltas.len() - 1]),
            None => "no tabulated ε has P < ε at the smallest δ".into(),
        },
    );
    Ok(rep.finish(start))
}

/// Exceedance probabilities of `sup_{t∈J} |X(t)|` and the fitted tail index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub u_grid: Vec<f64>,
    pub exceedances: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub n_paths: usize,
    /// Fitting window `[u_max/10, u_max]`.
    pub fit_range: (f64, f64),
    pub theta_hat: f64,
    pub theta_se: f64,
    /// `θ̂ ± z·se`.
    pub band: (f64, f64),
    /// Slopes of `log P` on the lower and upper halves of the window.
    pub half_slopes: ((f64, f64), (f64, f64)),
    /// The decay steepens significantly across the window: faster than any
    /// power, as for Gaussian inputs.
    pub super_polynomial: bool,
}

impl TailEstimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,exceedances,probability,se\n");
        let nf = self.n_paths as f64;
        for ((u, c), p) in self.u_grid.iter().zip(&self.exceedances).zip(&self.probabilities) {
            let _ = writeln!(out, "{u},{c},{p},{}", (p * (1.0 - p) / nf).sqrt());
        }
        out
    }
}

/// Least-squares slope of `ln p` on `ln u`, with the binomial variance
/// `(1−p)/(Np)` of each `ln p` propagated as if the points were independent.
fn ls_slope(u: &[f64], p: &[f64], n: f64) -> Option<(f64, f64)> {
    if u.len() < 2 {
        return None;
    }
    let x: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(&y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = x
        .iter()
        .zip(p)
        .map(|(x, p)| ((x - mx) / sxx).powi(2) * (1.0 - p) / (n * p))
        .sum();
    Some((sxy / sxx, var.sqrt()))
}

/// Simulates `n_paths` paths on `{0} ∪ {1 + j/per_unit}` and fits the tail
/// of the grid supremum over `J = [1, 2]`.
pub fn tail_exponent(
    spec: &ProcessSpec,
    u_grid: &[f64],
    n_paths: usize,
    per_unit: usize,
    seed: u64,
    settings: &Settings,
) -> Result<TailEstimate> {
    if u_grid.len() < 3 || u_grid.windows(2).any(|w| w[1] <= w[0]) || !(u_grid[0] > 0.0) {
        return Err(invalid(
            "u_grid must hold at least three increasing positive thresholds",
        ));
    }
    if u_grid[u_grid.len() - 1] < 10.0 * u_grid[0] {
        return Err(invalid("u_grid must span at least one decade"));
    }
    if per_unit == 0 {
        return Err(invalid("per_unit must be positive"));
    }
    let mut times = vec![0.0];
    times.extend((0..=per_unit).map(|j| 1.0 + j as f64 / per_unit as f64));
    let grid = GridSpec::new(times, vec![0.5], (0.5, 0.5))?;
    let ens = Simulator::new(spec, &grid, &settings.sim)?.ensemble(n_paths, seed, 0);
    let sups: Vec<f64> = (0..n_paths)
        .map(|j| ens.path(j)[1..].iter().map(|v| v.abs()).fold(0.0, f64::max))
        .collect();
    let nf = n_paths as f64;
    let exceedances: Vec<usize> = u_grid
        .iter()
        .map(|&u| sups.iter().filter(|&&s| s > u).count())
        .collect();
    let probabilities: Vec<f64> = exceedances.iter().map(|&c| c as f64 / nf).collect();
    let Some(top) = (0..u_grid.len()).rev().find(|&i| exceedances[i] >= 50) else {
        return Err(Error::InsufficientData(format!(
            "no threshold has 50 exceedances among {n_paths} paths; extend u_grid below {}",
            u_grid[0]
        )));
    };
    let u_max = u_grid[top];
    let lo = u_max / 10.0;
    if lo < u_grid[0] * (1.0 - 1e-12) {
        return Err(Error::InsufficientData(format!(
            "the fitting decade [{lo}, {u_max}] starts below the grid; extend u_grid below {lo}"
        )));
    }
    let sel: Vec<usize> = (0..=top).filter(|&i| u_grid[i] >= lo * (1.0 - 1e-12)).collect();
    if sel.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} thresholds in [{lo}, {u_max}]; use a denser u_grid",
            sel.len()
        )));
    }
    let pick = |ix: &[usize]| -> (Vec<f64>, Vec<f64>) {
        (
            ix.iter().map(|&i| u_grid[i]).collect(),
            ix.iter().map(|&i| probabilities[i]).collect(),
        )
    };
    let (u, p) = pick(&sel);
    let (slope, se) = ls_slope(&u, &p, nf).ok_or_else(|| Error::InsufficientData("degenerate fit".into()))?;
    let mid = (lo * u_max).sqrt();
    let (first, second): (Vec<usize>, Vec<usize>) = sel.iter().partition(|&&i| u_grid[i] <= mid);
    let halves = if first.len() >= 2 && second.len() >= 2 {
        let (u1, p1) = pick(&first);
        let (u2, p2) = pick(&second);
        ls_slope(&u1, &p1, nf).zip(ls_slope(&u2, &p2, nf))
    } else {
        None
    };
    let (half_slopes, super_polynomial) = match halves {
        Some((a, b)) => ((a, b), b.0 - a.0 < -settings.z * (a.1 * a.1 + b.1 * b.1).sqrt()),
        None => (((f64::NAN, f64::NAN), (f64::NAN, f64::NAN)), false),
    };
    let theta = -slope;
    Ok(TailEstimate {
        u_grid: u_grid.to_vec(),
        exceedances,
        probabilities,
        n_paths,
        fit_range: (lo, u_max),
        theta_hat: theta,
        theta_se: se,
        band: (theta - settings.z * se, theta + settings.z * se),
        half_slopes,
        super_polynomial,
    })
}

/// `10^{lo}` to `10^{hi}` with `per_decade` points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let steps = ((hi - lo) * per_decade as f64).round() as usize;
    (0..=steps)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / steps as f64))
        .collect()
}

/// Report for [`tail_exponent`]: a finite positive exponent must exist
/// (polynomial decay, or faster); for stable inputs the index `r` must lie
/// in the band.
pub fn tail_report(
    spec: &ProcessSpec,
    u_grid: &[f64],
    n_paths: usize,
    per_unit: usize,
    seed: u64,
    settings: &Settings,
) -> Result<(VerificationReport, TailEstimate)> {
    let start = Instant::now();
    let est = tail_exponent(spec, u_grid, n_paths, per_unit, seed, settings)?;
    let config = json!({
        "process": spec, "u_grid": u_grid, "n_paths": n_paths, "per_unit": per_unit, "settings": settings,
    });
    let mut rep = VerificationReport::new(Experiment::TailExponent, config, seed);
    for (u, p) in est.u_grid.iter().zip(&est.probabilities) {
        rep.estimate_row(
            "exceedance",
            &[("u", *u)],
            *p,
            (p * (1.0 - p) / n_paths as f64).sqrt(),
            None,
        );
    }
    rep.estimate_row(
        "theta_hat",
        &[("u_lo", est.fit_range.0), ("u_hi", est.fit_range.1)],
        est.theta_hat,
        est.theta_se,
        (spec.family == crate::Family::Stable).then_some(spec.r),
    );
    let monotone = est.probabilities.windows(2).all(|w| w[1] <= w[0]);
    rep.verdict_row("nonincreasing_in_u", monotone, "exceedance probabilities".into());
    if est.super_polynomial {
        rep.verdict_row(
            "tail_bound",
            true,
            format!(
                "decay steepens from slope {:.3} to {:.3}: faster than any power, the bound holds for every θ",
                est.half_slopes.0 .0, est.half_slopes.1 .0
            ),
        );
    } else {
        rep.verdict_row(
            "tail_bound",
            est.band.0 > 0.0,
            format!("θ̂ = {:.4} ± {:.4}", est.theta_hat, est.theta_se),
        );
    }
    if spec.family == crate::Family::Stable {
        rep.verdict_row(
            "stable_index",
            est.band.0 <= spec.r && spec.r <= est.band.1,
            format!("r = {} against band [{:.4}, {:.4}]", spec.r, est.band.0, est.band.1),
        );
    }
    Ok((rep.finish(start), est))
}

/// Maximal relative diagonal error against the limit variance at `points`,
/// for each sample size in `ns`; must not increase by more than
/// `monotone_z` combined standard errors from one size to the next.
pub fn convergence_direction(
    spec: &ProcessSpec,
    points: &[Point],
    ns: &[usize],
    m: usize,
    seed: u64,
    settings: &Settings,
) -> Result<VerificationReport> {
    let start = Instant::now();
    if points.is_empty() || points.iter().any(|p| !(p.0 > 0.0)) {
        return Err(invalid("convergence points need positive times"));
    }
    if ns.len() < 2 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("sample sizes must be increasing"));
    }
    check_sizes(ns[0], m, 1, 2)?;
    let times: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut alphas: Vec<f64> = points.iter().map(|p| p.1).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let times = merge_times(&[&[0.0], &times]);
    let grid = GridSpec::new(times, alphas.clone(), (alphas[0], alphas[alphas.len() - 1]))?;
    let config = json!({"process": spec, "points": points, "ns": ns, "m": m, "settings": settings});
    let mut rep = VerificationReport::new(Experiment::Convergence, config, seed);
    let theory: Vec<f64> = points
        .iter()
        .map(|&p| limit_cov_entry(p, p, spec).map(|e| e.value))
        .collect::<Result<_>>()?;
    let mut worst = Vec::with_capacity(ns.len());
    for (level, &n) in ns.iter().enumerate() {
        // Distinct sample sizes use disjoint replication ranges.
        let fields = replicate_fields(spec, &grid, n, m, seed.wrapping_add(level as u64), &settings.sim)?;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for (&(t, a), th) in points.iter().zip(&theory) {
            let (k, i) = (
                grid.time_index(t).expect("on grid"),
                grid.alpha_index(a).expect("on grid"),
            );
            let v = variance_se(&series(&fields, k, i))?;
            let rel = (v.value - th).abs() / th;
            if rel > best.0 {
                best = (rel, v.se / th);
            }
        }
        rep.estimate_row(
            "max_relative_diagonal_error",
            &[("n", n as f64)],
            best.0,
            best.1,
            Some(0.0),
        );
        worst.push(best);
    }
    let mut ok = true;
    let mut detail = String::from("nonincreasing within tolerance");
    for w in 1..ns.len() {
        let ((e0, s0), (e1, s1)) = (worst[w - 1], worst[w]);
        if e1 > e0 + settings.monotone_z * (s0 * s0 + s1 * s1).sqrt() {
            ok = false;
            detail = format!(
                "error rises from {e0:.4} at n = {} to {e1:.4} at n = {}",
                ns[w - 1],
                ns[w]
            );
        }
    }
    rep.verdict_row("convergence_direction", ok, detail);
    Ok(rep.finish(start))
}

/// `x_(k) = min_{|J| ≥ k} max_{i∈J} x_i`, by enumeration of index subsets.
fn min_max_order_statistic(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    (1u32..(1 << n))
        .filter(|mask| mask.count_ones() as usize >= k)
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| x[i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Deterministic checks of the empirical and model layers.
pub fn property_suite(seed: u64) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut rep = VerificationReport::new(Experiment::PropertySuite, json!({"seed": seed}), seed);
    let count = |rep: &mut VerificationReport, check: &str, trials: usize, violations: usize| {
        rep.estimate_row(check, &[("trials", trials as f64)], violations as f64, 0.0, Some(0.0));
        rep.verdict_row(
            check,
            violations == 0,
            format!("{violations} violations in {trials} trials"),
        );
    };

    // Contraction of sorting in the sup metric.
    let mut rng = aux_stream(seed, 0);
    let mut bad = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=40);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (ox, oy) = (order_statistics(&x), order_statistics(&y));
        let lhs = ox.iter().zip(&oy).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let rhs = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        bad += usize::from(lhs > rhs);
    }
    count(&mut rep, "order_statistic_contraction", 10_000, bad);

    // Min-max identity, exhaustive over subsets, with ties.
    let mut rng = aux_stream(seed, 1);
    let (mut bad, mut trials) = (0, 0);
    for n in 1..=6 {
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
            let sorted = order_statistics(&x);
            for k in 1..=n {
                trials += 1;
                bad += usize::from(sorted[k - 1] != min_max_order_statistic(&x, k));
            }
        }
    }
    count(&mut rep, "min_max_identity", trials, bad);

    // Reflected quantile: 200 samples × 9 levels.
    let mut rng = aux_stream(seed, 2);
    let mut bad = 0;
    for s in 0..200 {
        let n = 1 + s % 50;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5..6) as f64).collect();
        for k in 1..=9 {
            bad += usize::from(!reflected_quantile_check(&x, k as f64 / 10.0)?);
        }
    }
    count(&mut rep, "quantile_reflection", 1800, bad);

    // Left-continuous inverse: F_n(q) ≥ α and F_n(q−) < α.
    let mut rng = aux_stream(seed, 3);
    let (mut bad, mut trials) = (0, 0);
    for _ in 0..500 {
        let n = rng.random_range(1..=60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-20..20) as f64 / 4.0).collect();
        for _ in 0..10 {
            let alpha: f64 = rng.random_range(1e-6..1.0 - 1e-6);
            let q = empirical_quantile(&x, alpha)?;
            let strictly_below = x.iter().filter(|&&v| v < q).count() as f64 / n as f64;
            trials += 1;
            bad += usize::from(!(ecdf(&x, q) >= alpha && strictly_below < alpha));
        }
    }
    count(&mut rep, "ecdf_quantile_inverse", trials, bad);

    // W_n(0, ·) ≡ 0 for every family.
    let grid = GridSpec::uniform(1.0, 5, 0.25, 0.75, 5)?;
    let specs = [
        ProcessSpec::fbm(0.6)?,
        ProcessSpec::bm(),
        ProcessSpec::stable(1.2, 1.0)?,
        ProcessSpec::integrated_bm(1)?,
        ProcessSpec::iterated_bm(),
    ];
    let mut bad = 0;
    for (j, spec) in specs.iter().enumerate() {
        let f = replicate_fields(spec, &grid, 20, 2, seed.wrapping_add(j as u64), &SimOptions::default())?;
        bad += f
            .iter()
            .flat_map(|f| (0..5).map(move |i| f.get(0, i)))
            .filter(|v| *v != 0.0)
            .count();
    }
    count(&mut rep, "zero_row", specs.len() * 10, bad);

    // Scaling identities for a stable law: F(t,x) = F(1, t^{−H}x),
    // f(t,x) = t^{−H} f(1, t^{−H}x), τ_α(t) = t^H τ_α(1).
    let (r, c) = (1.3, 0.8);
    let spec = ProcessSpec::stable(r, c)?;
    let h = spec.hurst();
    let mut gap = 0.0f64;
    for &t in &[0.3f64, 1.7, 4.0] {
        let th = t.powf(h);
        for &x in &[-2.0, 0.3, 1.1] {
            gap = gap.max((stable_cdf(x, r, c * t)? - stable_cdf(x / th, r, c)?).abs());
            gap = gap.max((stable_density(x, r, c * t)? - stable_density(x / th, r, c)? / th).abs());
        }
        for &a in &[0.25, 0.6, 0.9] {
            gap = gap.max((stable_quantile(a, r, c * t)? - marginal_quantile(t, a, &spec)?).abs() / th);
        }
    }
    rep.estimate_row("scaling_identity_gap", &[], gap, 0.0, Some(0.0));
    rep.verdict_row("scaling_identities", gap <= 1e-8, format!("max gap {gap:.3e}"));

    // Dual-route median covariances.
    let mut gap = 0.0f64;
    for &r in &[0.5, 1.0, 1.5] {
        for &s in &[0.25, 0.5, 1.0, 2.0] {
            for &t in &[0.25, 0.5, 1.0, 2.0] {
                let (a, b) = median_cov_fbm_routes(s, t, r)?;
                gap = gap.max((a - b).abs());
            }
        }
    }
    rep.estimate_row("fbm_median_route_gap", &[], gap, 0.0, Some(0.0));
    rep.verdict_row("fbm_median_routes", gap <= 1e-6, format!("max gap {gap:.3e}"));
    let mut gap = 0.0f64;
    for &r in &[0.8, 1.0, 1.3] {
        for &(s, t) in &[(1.0, 2.0), (0.5, 1.0)] {
            let (a, b) = median_cov_stable_routes(s, t, r, 1.0)?;
            gap = gap.max((a - b).abs());
        }
    }
    rep.estimate_row("stable_median_route_gap", &[], gap, 0.0, Some(0.0));
    rep.verdict_row("stable_median_routes", gap <= 1e-6, format!("max gap {gap:.3e}"));
    Ok(rep.finish(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn lemma1_constant_value() {
        assert_abs_diff_eq!(
            lemma1_constant(0.5, 1.0, 0.25),
            0.5 / (1.0 - 0.5f64.sqrt()),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(lemma1_constant(0.5, 1.0, 0.25), 1.707_106_781_186_547, epsilon = 1e-12);
        assert_abs_diff_eq!(
            lemma1_constant(0.5, 1.0, 1.0),
            1.0 / (1.0 - 0.5f64.sqrt()),
            epsilon = 1e-15
        );
    }

    #[test]
    fn lemma1_times_cover_blocks() {
        let t = lemma1_times(0.25, 3, 4);
        assert_eq!(t[0], 0.0);
        assert!(t.contains(&0.25) && t.contains(&0.125) && t.contains(&1.0) && t.contains(&2.0));
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ls_recovers_power_law() {
        let u = log_grid(0.0, 1.0, 10);
        let p: Vec<f64> = u.iter().map(|u| 0.3 * u.powf(-1.25)).collect();
        let (slope, _) = ls_slope(&u, &p, 1e4).unwrap();
        assert_abs_diff_eq!(slope, -1.25, epsilon = 1e-12);
    }

    #[test]
    fn finite_n_mean_examples() {
        // BM median, p = j/(n+1) just below ½, Q''(p) = Q/φ(Q)².
        let n = 400;
        let p = 200.0 / 401.0;
        let q = normal::quantile(p);
        let expect = 20.0 * (q + p * (1.0 - p) * q / normal::pdf(q).powi(2) / (2.0 * 402.0));
        assert_abs_diff_eq!(
            finite_n_mean(&ProcessSpec::bm(), 0.5, n).unwrap(),
            expect,
            epsilon = 1e-9
        );
        // Cauchy lower quartile: Q(p) = tan(π(p − ½)), Q''(p) = 2π² tan(π(p−½)) sec²(π(p−½)).
        let p = 100.0 / 401.0;
        let a = PI * (p - 0.5);
        let q2 = 2.0 * PI * PI * a.tan() / (a.cos() * a.cos());
        let expect = 20.0 * (a.tan() + p * (1.0 - p) * q2 / (2.0 * 402.0) + 1.0);
        let got = finite_n_mean(&ProcessSpec::stable(1.0, 1.0).unwrap(), 0.25, n).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-6);
    }

    #[test]
    fn min_max_helper() {
        assert_eq!(min_max_order_statistic(&[3.0, 1.0, 2.0], 1), 1.0);
        assert_eq!(min_max_order_statistic(&[3.0, 1.0, 2.0], 2), 2.0);
        assert_eq!(min_max_order_statistic(&[3.0, 1.0, 2.0], 3), 3.0);
    }

    #[test]
    fn normality_boundary_is_skipped() {
        let r = mc_normality(&ProcessSpec::bm(), (0.0, 0.5), 10, 10, 1, &Settings::default()).unwrap();
        assert!(r.passed());
        assert_eq!(r.verdicts[0].check, "boundary");
        assert!(r.tests.is_empty());
    }

    #[test]
    fn scalability_identity_factor() {
        let r = scalability_check(&ProcessSpec::bm(), 0.5, 0.5, &[1.0], 50, 200, 3, &Settings::default()).unwrap();
        assert_eq!(r.tests[0].statistic, 0.0);
        assert_eq!(r.tests[0].p, 1.0);
    }

    #[test]
    fn clt_preconditions() {
        let g = GridSpec::uniform(2.0, 3, 0.25, 0.75, 3).unwrap();
        let s = Settings::default();
        assert!(matches!(
            mc_quantile_clt(&ProcessSpec::bm(), &g, &[(1.0, 0.5)], 50, 300, 1, &s),
            Err(Error::InsufficientData(_))
        ));
        assert!(mc_quantile_clt(&ProcessSpec::bm(), &g, &[(0.7, 0.5)], 100, 200, 1, &s).is_err());
    }

    #[test]
    fn clt_report_is_deterministic_and_sane() {
        let g = GridSpec::uniform(2.0, 3, 0.25, 0.75, 3).unwrap();
        let s = Settings::default();
        let pts = [(1.0, 0.5), (2.0, 0.5)];
        let a = mc_quantile_clt(&ProcessSpec::bm(), &g, &pts, 100, 200, 11, &s).unwrap();
        let b = mc_quantile_clt(&ProcessSpec::bm(), &g, &pts, 100, 200, 11, &s).unwrap();
        assert_eq!(a.payload_json().unwrap(), b.payload_json().unwrap());
        // Mean and variance at each of 2 × 3 positive grid points, plus 3 pairs.
        assert_eq!(a.estimates.len(), 6 + 6 + 3);
        assert!(a.verdict("mean_field").unwrap().pass);
        let csv = a.estimates_csv();
        assert!(csv.starts_with("name,alpha,beta,s,t,value,se,reference\n"));
    }

    #[test]
    fn tail_fit_needs_exceedances() {
        let err = tail_exponent(
            &ProcessSpec::bm(),
            &log_grid(2.0, 3.0, 10),
            1000,
            4,
            1,
            &Settings::default(),
        );
        assert!(matches!(err, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn gaussian_tail_is_super_polynomial() {
        let est = tail_exponent(
            &ProcessSpec::bm(),
            &log_grid(-1.0, 1.0, 20),
            20_000,
            16,
            5,
            &Settings::default(),
        )
        .unwrap();
        assert!(est.super_polynomial, "{est:?}");
        assert!(est.probabilities.windows(2).all(|w| w[1] <= w[0]));
    }
}
