//! Path ensembles of the input processes on a time grid.
//!
//! Paths are exact in distribution at the grid points, except for the
//! integrated Brownian family, whose integrals are taken by the trapezoid
//! rule on a refined grid.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Exp1, Open01, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{Family, ProcessSpec};
use crate::rng::{path_stream, PathRng};

/// Time grid on `[0, T]` and level grid inside `I = [a, b] ⊂ (0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    pub level_interval: (f64, f64),
}

impl GridSpec {
    pub fn new(times: Vec<f64>, alphas: Vec<f64>, level_interval: (f64, f64)) -> Result<Self> {
        if times.len() < 2 {
            return Err(invalid("time grid needs at least the origin and one positive time"));
        }
        if times[0] != 0.0 {
            return Err(invalid("time grid must start at 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(invalid("times must be finite and strictly increasing"));
        }
        let (a, b) = level_interval;
        if !(a > 0.0 && a <= b && b < 1.0) {
            return Err(invalid(format!(
                "level interval [{a}, {b}] must satisfy 0 < a <= b < 1"
            )));
        }
        if alphas.is_empty() {
            return Err(invalid("level grid is empty"));
        }
        if alphas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("levels must be strictly increasing"));
        }
        if alphas.iter().any(|&x| !(x >= a && x <= b)) {
            return Err(invalid(format!("levels must lie in [{a}, {b}]")));
        }
        Ok(GridSpec {
            horizon: *times.last().expect("nonempty"),
            times,
            alphas,
            level_interval,
        })
    }

    /// `time_points` equally spaced times on `[0, T]` and `level_points`
    /// equally spaced levels on `[a, b]`.
    pub fn uniform(horizon: f64, time_points: usize, a: f64, b: f64, level_points: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon T = {horizon} must be positive")));
        }
        if time_points < 2 || level_points < 1 {
            return Err(invalid("need at least 2 time points and 1 level"));
        }
        let times = linspace(0.0, horizon, time_points);
        let alphas = if level_points == 1 {
            vec![0.5 * (a + b)]
        } else {
            linspace(a, b, level_points)
        };
        GridSpec::new(times, alphas, (a, b))
    }

    /// Same levels, new times.
    pub fn with_times(&self, times: Vec<f64>) -> Result<Self> {
        GridSpec::new(times, self.alphas.clone(), self.level_interval)
    }

    /// Same times, new levels.
    pub fn with_alphas(&self, alphas: Vec<f64>) -> Result<Self> {
        GridSpec::new(self.times.clone(), alphas, self.level_interval)
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&x| (x - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }

    pub fn alpha_index(&self, alpha: f64) -> Option<usize> {
        self.alphas.iter().position(|&x| (x - alpha).abs() <= 1e-12)
    }

    /// Spacing if the times are equally spaced.
    pub fn uniform_step(&self) -> Option<f64> {
        let n = self.times.len() - 1;
        let h = self.horizon / n as f64;
        self.times
            .iter()
            .enumerate()
            .all(|(k, &t)| (t - k as f64 * h).abs() <= 1e-9 * h)
            .then_some(h)
    }
}

impl Default for GridSpec {
    /// 33 times on `[0, 2]`, 17 levels on `[0.25, 0.75]`.
    fn default() -> Self {
        GridSpec::uniform(2.0, 33, 0.25, 0.75, 17).expect("valid default grid")
    }
}

/// Equally spaced points including both ends; the last point is exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    if let Some(last) = v.last_mut() {
        *last = hi;
    }
    v
}

/// Sorted union of time lists, merging points closer than `1e-12`.
pub fn merge_times(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        match out.last() {
            Some(&p) if (t - p).abs() <= 1e-12 * (1.0 + t.abs()) => {}
            _ => out.push(t),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cholesky,
    Circulant,
    Increments,
    Cumsum,
    Compose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    #[default]
    Cholesky,
    Circulant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub fbm_method: FbmMethod,
    /// Largest grid handled by dense factorization.
    pub max_dense: usize,
    /// Largest trapezoid step for integrated Brownian motion.
    pub max_step: f64,
    /// Largest refined grid for integrated Brownian motion.
    pub refinement_budget: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            fbm_method: FbmMethod::Cholesky,
            max_dense: 512,
            max_step: 1e-3,
            refinement_budget: 1 << 22,
        }
    }
}

/// Root-mean-square trapezoid error bound at time `t` for the `m`-times
/// integrated Brownian motion with step `h`.
///
/// For `m = 1` each panel contributes the integral of a Brownian bridge,
/// with variance `h³/12`, so the error at `t` has standard deviation
/// `h √(t/12)`. Each further integration multiplies the bound by at most `t`
/// and divides by the order.
pub fn trapezoid_error_bound(m: u32, h: f64, t: f64) -> f64 {
    let mut bound = h * (t / 12.0).sqrt();
    for k in 1..m {
        bound *= t / k as f64;
    }
    bound
}

/// `n` sampled paths, row `j` being the path `X_j` at the grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub spec: ProcessSpec,
    pub grid: GridSpec,
    pub seed: u64,
    pub replication: u64,
    pub method: Method,
    n: usize,
    values: Vec<f64>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.n
    }

    pub fn n_times(&self) -> usize {
        self.grid.times.len()
    }

    pub fn path(&self, j: usize) -> &[f64] {
        let k = self.n_times();
        &self.values[j * k..(j + 1) * k]
    }

    pub fn value(&self, j: usize, time_index: usize) -> f64 {
        self.values[j * self.n_times() + time_index]
    }

    /// Values of all paths at one time.
    pub fn column(&self, time_index: usize) -> Vec<f64> {
        let k = self.n_times();
        (0..self.n).map(|j| self.values[j * k + time_index]).collect()
    }

    /// Long-format CSV `path_id,t,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24);
        out.push_str("path_id,t,value\n");
        for j in 0..self.n {
            for (k, t) in self.grid.times.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", j, t, self.value(j, k));
            }
        }
        out
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "spec": self.spec,
            "grid": self.grid,
            "seed": self.seed,
            "replication": self.replication,
            "n_paths": self.n,
            "method": self.method,
            "version": crate::VERSION,
        })
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::File::create(dir.join(format!("{stem}.csv")))?.write_all(self.to_csv().as_bytes())?;
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
        Ok(())
    }
}

enum Kind {
    /// Lower Cholesky factor of the covariance at the positive times.
    Cholesky {
        factor: Vec<f64>,
        dim: usize,
    },
    Circulant {
        sqrt_eig: Vec<f64>,
        steps: usize,
        fft: Arc<dyn Fft<f64>>,
    },
    /// Gaussian increments with the given standard deviations.
    GaussIncrements {
        sd: Vec<f64>,
    },
    /// Stable increments with the given scale factors `(c Δt)^{1/r}`.
    StableIncrements {
        scale: Vec<f64>,
        r: f64,
    },
    Cumsum {
        order: u32,
        sub_steps: Vec<usize>,
        sub_h: Vec<f64>,
    },
    Compose {
        sd: Vec<f64>,
    },
}

/// Prepared sampler for one process on one grid.
///
/// Preparation (factorizations, FFT plans) happens once; every path is then
/// drawn from its own counter-keyed stream.
pub struct Simulator {
    spec: ProcessSpec,
    grid: GridSpec,
    method: Method,
    kind: Kind,
}

impl Simulator {
    pub fn new(spec: &ProcessSpec, grid: &GridSpec, opts: &SimOptions) -> Result<Self> {
        let dt: Vec<f64> = grid.times.windows(2).map(|w| w[1] - w[0]).collect();
        let (method, kind) = match spec.family {
            Family::Fbm => match opts.fbm_method {
                FbmMethod::Cholesky => (Method::Cholesky, cholesky_kind(spec, grid, opts)?),
                FbmMethod::Circulant => (Method::Circulant, circulant_kind(spec.r, grid)?),
            },
            Family::Bm => (
                Method::Increments,
                Kind::GaussIncrements {
                    sd: dt.iter().map(|d| d.sqrt()).collect(),
                },
            ),
            Family::Stable => (
                Method::Increments,
                Kind::StableIncrements {
                    scale: dt.iter().map(|d| (spec.c * d).powf(1.0 / spec.r)).collect(),
                    r: spec.r,
                },
            ),
            Family::IntegratedBm => {
                if !(opts.max_step > 0.0) {
                    return Err(invalid("max_step must be positive"));
                }
                let sub_steps: Vec<usize> = dt
                    .iter()
                    .map(|d| (d / opts.max_step).ceil().max(1.0) as usize)
                    .collect();
                let required: usize = sub_steps.iter().sum::<usize>() + 1;
                if required > opts.refinement_budget {
                    return Err(Error::RefinementBudget {
                        required,
                        budget: opts.refinement_budget,
                    });
                }
                let sub_h = dt.iter().zip(&sub_steps).map(|(d, &s)| d / s as f64).collect();
                (
                    Method::Cumsum,
                    Kind::Cumsum {
                        order: spec.m,
                        sub_steps,
                        sub_h,
                    },
                )
            }
            Family::IteratedBm => (
                Method::Compose,
                Kind::Compose {
                    sd: dt.iter().map(|d| d.sqrt()).collect(),
                },
            ),
        };
        Ok(Simulator {
            spec: *spec,
            grid: grid.clone(),
            method,
            kind,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Fill `out` (one value per grid time) with a path drawn from `rng`.
    pub fn sample_path(&self, rng: &mut PathRng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.grid.times.len());
        out[0] = 0.0;
        match &self.kind {
            Kind::Cholesky { factor, dim } => {
                let z: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..*dim {
                    let row = &factor[i * dim..i * dim + i + 1];
                    out[i + 1] = row.iter().zip(&z).map(|(l, z)| l * z).sum();
                }
            }
            Kind::Circulant { sqrt_eig, steps, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                let mut acc = 0.0;
                for k in 0..*steps {
                    acc += buf[k].re;
                    out[k + 1] = acc;
                }
            }
            Kind::GaussIncrements { sd } => {
                let mut acc = 0.0;
                for (k, s) in sd.iter().enumerate() {
                    acc += s * rng.sample::<f64, _>(StandardNormal);
                    out[k + 1] = acc;
                }
            }
            Kind::StableIncrements { scale, r } => {
                let mut acc = 0.0;
                for (k, s) in scale.iter().enumerate() {
                    acc += s * standard_stable(*r, rng);
                    out[k + 1] = acc;
                }
            }
            Kind::Cumsum {
                order,
                sub_steps,
                sub_h,
            } => {
                let total: usize = sub_steps.iter().sum();
                let mut level = Vec::with_capacity(total + 1);
                let mut hs = Vec::with_capacity(total);
                level.push(0.0);
                let mut acc = 0.0;
                for (&s, &h) in sub_steps.iter().zip(sub_h) {
                    let sd = h.sqrt();
                    for _ in 0..s {
                        acc += sd * rng.sample::<f64, _>(StandardNormal);
                        level.push(acc);
                        hs.push(h);
                    }
                }
                for _ in 0..*order {
                    let mut integral = 0.0;
                    let mut prev = level[0];
                    level[0] = 0.0;
                    for j in 0..total {
                        let cur = level[j + 1];
                        integral += 0.5 * hs[j] * (prev + cur);
                        prev = cur;
                        level[j + 1] = integral;
                    }
                }
                let mut idx = 0;
                for (k, &s) in sub_steps.iter().enumerate() {
                    idx += s;
                    out[k + 1] = level[idx];
                }
            }
            Kind::Compose { sd } => {
                // Inner clock |B'(t)| at the grid times.
                let mut clock = Vec::with_capacity(sd.len() + 1);
                clock.push(0.0);
                let mut acc = 0.0;
                for s in sd {
                    acc += s * rng.sample::<f64, _>(StandardNormal);
                    clock.push(acc.abs());
                }
                let outer = two_sided_bm(&clock, rng);
                out.copy_from_slice(&outer);
            }
        }
    }

    /// `n` paths for replication `replication`, path `j` keyed by
    /// `(seed, replication, j)`.
    pub fn ensemble(&self, n: usize, seed: u64, replication: u64) -> PathEnsemble {
        let k = self.grid.times.len();
        let mut values = vec![0.0; n * k];
        values.par_chunks_mut(k).enumerate().for_each(|(j, row)| {
            let mut rng = path_stream(seed, replication, j as u64);
            self.sample_path(&mut rng, row);
        });
        PathEnsemble {
            spec: self.spec,
            grid: self.grid.clone(),
            seed,
            replication,
            method: self.method,
            n,
            values,
        }
    }

    /// As [`Simulator::ensemble`] but sequential; used inside replications
    /// that are already parallel.
    pub fn ensemble_seq(&self, n: usize, seed: u64, replication: u64) -> PathEnsemble {
        let k = self.grid.times.len();
        let mut values = vec![0.0; n * k];
        for (j, row) in values.chunks_mut(k).enumerate() {
            let mut rng = path_stream(seed, replication, j as u64);
            self.sample_path(&mut rng, row);
        }
        PathEnsemble {
            spec: self.spec,
            grid: self.grid.clone(),
            seed,
            replication,
            method: self.method,
            n,
            values,
        }
    }
}

fn cholesky_kind(spec: &ProcessSpec, grid: &GridSpec, opts: &SimOptions) -> Result<Kind> {
    let times = &grid.times[1..];
    let dim = times.len();
    if grid.times.len() > opts.max_dense {
        return Err(invalid(format!(
            "{} grid points exceed the dense factorization limit {}; use the circulant method",
            grid.times.len(),
            opts.max_dense
        )));
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let v = spec
                .gaussian_covariance(times[i], times[j])?
                .ok_or_else(|| invalid("dense factorization needs a Gaussian family"))?;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let chol = match cov.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = 1e-12;
            let mut jittered = cov;
            for i in 0..dim {
                jittered[(i, i)] += jitter;
            }
            jittered.cholesky().ok_or_else(|| {
                Error::Factorization(format!(
                    "covariance on {dim} times is not positive definite even with diagonal jitter {jitter:e}"
                ))
            })?
        }
    };
    let l = chol.l();
    let mut factor = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            factor[i * dim + j] = l[(i, j)];
        }
    }
    Ok(Kind::Cholesky { factor, dim })
}

/// Circulant embedding of fractional Gaussian noise on an equally spaced
/// grid. With eigenvalues `λ` of the embedding and `Z` complex standard
/// normal, the real part of the DFT of `√(λ/M) Z` has exactly the noise
/// autocovariance.
fn circulant_kind(r: f64, grid: &GridSpec) -> Result<Kind> {
    let h = grid
        .uniform_step()
        .ok_or_else(|| invalid("circulant embedding needs equally spaced times"))?;
    let steps = grid.times.len() - 1;
    let gamma = |k: usize| {
        let k = k as f64;
        0.5 * h.powf(r) * ((k + 1.0).powf(r) - 2.0 * k.powf(r) + (k - 1.0).abs().powf(r))
    };
    let m = 2 * steps;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let k = if j <= steps { j } else { m - j };
            Complex::new(gamma(k), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
    let mut sqrt_eig = Vec::with_capacity(m);
    for c in &row {
        if c.re < -1e-10 * max {
            return Err(Error::Factorization(format!(
                "circulant embedding has negative eigenvalue {:e}",
                c.re
            )));
        }
        sqrt_eig.push((c.re.max(0.0) / m as f64).sqrt());
    }
    Ok(Kind::Circulant { sqrt_eig, steps, fft })
}

/// Symmetric stable variate with characteristic function `exp(-|u|^r)` by
/// the Chambers-Mallows-Stuck transform of a uniform angle and a unit
/// exponential.
pub fn standard_stable<R: Rng + ?Sized>(r: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let v = std::f64::consts::PI * (u - 0.5);
    if r == 1.0 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    (r * v).sin() / v.cos().powf(1.0 / r) * (((1.0 - r) * v).cos() / w).powf((1.0 - r) / r)
}

/// Two-sided Brownian motion `B` on `ℝ` with `E B(s)B(t) = min(|s|,|t|)` for
/// arguments of the same sign and 0 otherwise, evaluated at arbitrary points.
/// The two half-lines are independent Brownian motions glued at 0.
pub fn two_sided_bm<R: Rng + ?Sized>(points: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; points.len()];
    for positive in [true, false] {
        let mut idx: Vec<usize> = (0..points.len())
            .filter(|&i| if positive { points[i] > 0.0 } else { points[i] < 0.0 })
            .collect();
        idx.sort_by(|&a, &b| points[a].abs().total_cmp(&points[b].abs()).then(a.cmp(&b)));
        let mut last = 0.0;
        let mut acc = 0.0;
        for i in idx {
            let p = points[i].abs();
            acc += (p - last).sqrt() * rng.sample::<f64, _>(StandardNormal);
            last = p;
            out[i] = acc;
        }
    }
    out
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("need at least one path"));
    }
    Ok(())
}

/// Fractional Brownian motion paths by dense Cholesky factorization.
pub fn simulate_fbm(grid: &GridSpec, r: f64, n: usize, seed: u64) -> Result<PathEnsemble> {
    check_n(n)?;
    let spec = ProcessSpec::fbm(r)?;
    Ok(Simulator::new(&spec, grid, &SimOptions::default())?.ensemble(n, seed, 0))
}

/// Symmetric stable Lévy paths from independent stable increments.
pub fn simulate_stable(grid: &GridSpec, r: f64, c: f64, n: usize, seed: u64) -> Result<PathEnsemble> {
    check_n(n)?;
    let spec = ProcessSpec::stable(r, c)?;
    Ok(Simulator::new(&spec, grid, &SimOptions::default())?.ensemble(n, seed, 0))
}

/// `m`-times integrated Brownian motion by repeated trapezoid integration
/// of Brownian paths on a grid refined to `opts.max_step`.
pub fn simulate_integrated_bm(grid: &GridSpec, m: u32, n: usize, seed: u64, opts: &SimOptions) -> Result<PathEnsemble> {
    check_n(n)?;
    let spec = ProcessSpec::integrated_bm(m)?;
    Ok(Simulator::new(&spec, grid, opts)?.ensemble(n, seed, 0))
}

/// Iterated Brownian motion `B(|B'(t)|)`.
pub fn simulate_iterated_bm(grid: &GridSpec, n: usize, seed: u64) -> Result<PathEnsemble> {
    check_n(n)?;
    let spec = ProcessSpec::iterated_bm();
    Ok(Simulator::new(&spec, grid, &SimOptions::default())?.ensemble(n, seed, 0))
}

/// Any family with the given options.
pub fn simulate(spec: &ProcessSpec, grid: &GridSpec, n: usize, seed: u64, opts: &SimOptions) -> Result<PathEnsemble> {
    check_n(n)?;
    Ok(Simulator::new(spec, grid, opts)?.ensemble(n, seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::aux_stream;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![0.0, 1.0], vec![0.5], (0.25, 0.75)).is_ok());
        assert!(GridSpec::new(vec![0.1, 1.0], vec![0.5], (0.25, 0.75)).is_err());
        assert!(GridSpec::new(vec![0.0, 1.0, 1.0], vec![0.5], (0.25, 0.75)).is_err());
        assert!(GridSpec::new(vec![0.0, 1.0], vec![0.8], (0.25, 0.75)).is_err());
        assert!(GridSpec::new(vec![0.0, 1.0], vec![0.5], (0.0, 0.75)).is_err());
        assert!(GridSpec::new(vec![0.0, 1.0], vec![0.6, 0.5], (0.25, 0.75)).is_err());
        let g = GridSpec::default();
        assert_eq!(g.times.len(), 33);
        assert_eq!(g.horizon, 2.0);
        assert_eq!(g.alphas.len(), 17);
        assert_eq!(g.time_index(1.0), Some(16));
        assert_eq!(g.alpha_index(0.5), Some(8));
        assert!(g.uniform_step().is_some());
    }

    #[test]
    fn zero_column_for_every_family() {
        let grid = GridSpec::uniform(1.0, 9, 0.25, 0.75, 3).unwrap();
        let specs = [
            ProcessSpec::fbm(0.6).unwrap(),
            ProcessSpec::bm(),
            ProcessSpec::stable(0.9, 2.0).unwrap(),
            ProcessSpec::integrated_bm(2).unwrap(),
            ProcessSpec::iterated_bm(),
        ];
        for spec in &specs {
            let e = simulate(spec, &grid, 50, 3, &SimOptions::default()).unwrap();
            assert!(e.column(0).iter().all(|&v| v == 0.0), "{}", spec.family);
            assert!((0..50).all(|j| e.path(j).iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn circulant_requires_uniform_grid() {
        let grid = GridSpec::new(vec![0.0, 0.1, 0.5, 1.0], vec![0.5], (0.25, 0.75)).unwrap();
        let opts = SimOptions {
            fbm_method: FbmMethod::Circulant,
            ..SimOptions::default()
        };
        assert!(Simulator::new(&ProcessSpec::fbm(1.2).unwrap(), &grid, &opts).is_err());
    }

    #[test]
    fn dense_limit_enforced() {
        let grid = GridSpec::uniform(1.0, 600, 0.25, 0.75, 1).unwrap();
        assert!(simulate_fbm(&grid, 1.0, 2, 0).is_err());
    }

    #[test]
    fn refinement_budget_enforced() {
        let grid = GridSpec::uniform(10.0, 3, 0.25, 0.75, 1).unwrap();
        let opts = SimOptions {
            max_step: 1e-3,
            refinement_budget: 1000,
            ..SimOptions::default()
        };
        let err = simulate_integrated_bm(&grid, 1, 2, 0, &opts).unwrap_err();
        assert!(matches!(err, Error::RefinementBudget { .. }));
    }

    #[test]
    fn two_sided_bm_sides_are_independent() {
        let mut rng = aux_stream(11, 0);
        let n = 20000;
        let mut prod = 0.0;
        let mut same = 0.0;
        for _ in 0..n {
            let b = two_sided_bm(&[1.0, -1.0, 2.0], &mut rng);
            prod += b[0] * b[1];
            same += b[0] * b[2];
        }
        let se = 1.0 / (n as f64).sqrt();
        assert!((prod / n as f64).abs() < 4.0 * se * 2f64.sqrt());
        assert!((same / n as f64 - 1.0).abs() < 4.0 * 3f64.sqrt() * se);
    }

    #[test]
    fn csv_shape() {
        let grid = GridSpec::uniform(1.0, 5, 0.25, 0.75, 1).unwrap();
        let e = simulate_fbm(&grid, 1.0, 3, 1).unwrap();
        let csv = e.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "path_id,t,value");
        assert_eq!(lines.len(), 1 + 3 * 5);
        assert!(lines[1].starts_with("0,0,0"));
    }
}

/// Statistical checks against exact marginal laws and covariances.
#[cfg(test)]
mod statistical_tests {
    use super::*;
    use crate::models::{fbm_covariance, integrated_bm_covariance};
    use crate::stats::{covariance_se, ks_one_sample};

    fn ensemble(spec: &ProcessSpec, grid: &GridSpec, opts: &SimOptions, n: usize, seed: u64) -> PathEnsemble {
        Simulator::new(spec, grid, opts).unwrap().ensemble(n, seed, 0)
    }

    fn marginals_match(spec: ProcessSpec, seed: u64) {
        let grid = GridSpec::default();
        let ens = ensemble(&spec, &grid, &SimOptions::default(), 4000, seed);
        for t in [0.5, 2.0] {
            let k = grid.time_index(t).unwrap();
            let law = spec.marginal(t).unwrap();
            let ks = ks_one_sample(&ens.column(k), |x| law.cdf(x).unwrap()).unwrap();
            assert!(ks.p_value > 1e-3, "{} at t = {t}: KS p = {}", spec.family, ks.p_value);
        }
    }

    #[test]
    fn marginal_laws() {
        marginals_match(ProcessSpec::bm(), 1);
        marginals_match(ProcessSpec::fbm(0.6).unwrap(), 2);
        marginals_match(ProcessSpec::fbm(1.6).unwrap(), 3);
        marginals_match(ProcessSpec::stable(1.0, 1.0).unwrap(), 4);
        marginals_match(ProcessSpec::stable(1.5, 2.0).unwrap(), 5);
        marginals_match(ProcessSpec::stable(0.7, 1.0).unwrap(), 6);
        marginals_match(ProcessSpec::integrated_bm(1).unwrap(), 7);
        marginals_match(ProcessSpec::iterated_bm(), 8);
    }

    /// Sample covariances at a few time pairs within 4 standard errors.
    fn covariances_match(spec: ProcessSpec, grid: &GridSpec, opts: &SimOptions, exact: impl Fn(f64, f64) -> f64) {
        let ens = ensemble(&spec, grid, opts, 20000, 42);
        let last = grid.times.len() - 1;
        for (a, b) in [(1, 1), (1, last), (last / 2, last), (last, last)] {
            let (s, t) = (grid.times[a], grid.times[b]);
            let est = covariance_se(&ens.column(a), &ens.column(b)).unwrap();
            let want = exact(s, t);
            assert!(
                (est.value - want).abs() < 4.0 * est.se,
                "{} cov({s}, {t}) = {} ± {}, exact {want}",
                spec.family,
                est.value,
                est.se
            );
        }
    }

    #[test]
    fn fbm_covariance_both_methods() {
        let grid = GridSpec::default();
        for r in [0.5, 1.0, 1.8] {
            let spec = ProcessSpec::fbm(r).unwrap();
            for method in [FbmMethod::Cholesky, FbmMethod::Circulant] {
                let opts = SimOptions {
                    fbm_method: method,
                    ..SimOptions::default()
                };
                covariances_match(spec, &grid, &opts, |s, t| fbm_covariance(s, t, r).unwrap());
            }
        }
    }

    #[test]
    fn integrated_bm_covariance_matches() {
        let grid = GridSpec::uniform(1.0, 9, 0.25, 0.75, 3).unwrap();
        for m in [1, 2] {
            let spec = ProcessSpec::integrated_bm(m).unwrap();
            covariances_match(spec, &grid, &SimOptions::default(), |s, t| {
                integrated_bm_covariance(s, t, m)
            });
        }
    }

    #[test]
    fn brownian_increments_are_uncorrelated() {
        let grid = GridSpec::default();
        let ens = ensemble(&ProcessSpec::bm(), &grid, &SimOptions::default(), 20000, 9);
        let (a, b, c) = (
            grid.time_index(0.5).unwrap(),
            grid.time_index(1.0).unwrap(),
            grid.time_index(2.0).unwrap(),
        );
        let x = ens.column(a);
        let inc: Vec<f64> = ens.column(c).iter().zip(ens.column(b)).map(|(u, v)| u - v).collect();
        let est = covariance_se(&x, &inc).unwrap();
        assert!(est.value.abs() < 4.0 * est.se, "{} ± {}", est.value, est.se);
    }

    #[test]
    fn parallel_and_sequential_ensembles_agree() {
        let grid = GridSpec::default();
        for spec in [
            ProcessSpec::stable(1.3, 1.0).unwrap(),
            ProcessSpec::iterated_bm(),
            ProcessSpec::fbm(0.8).unwrap(),
        ] {
            let sim = Simulator::new(&spec, &grid, &SimOptions::default()).unwrap();
            assert_eq!(sim.ensemble(300, 5, 2), sim.ensemble_seq(300, 5, 2));
            // A prefix of a larger ensemble is the smaller ensemble.
            let big = sim.ensemble_seq(301, 5, 2);
            assert_eq!(big.path(17), sim.ensemble_seq(300, 5, 2).path(17));
            assert_ne!(sim.ensemble_seq(10, 5, 2).path(0), sim.ensemble_seq(10, 5, 3).path(0));
        }
    }
}
