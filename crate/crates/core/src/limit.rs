//! Covariance of the limiting Gaussian field `G̃`:
//!
//! `E G̃(s,β) G̃(t,α) = [P(X_s ≤ τ_β(s), X_t ≤ τ_α(t)) − αβ] / [f(s,τ_β(s)) f(t,τ_α(t))]`,
//!
//! zero when `s·t = 0`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{check_level, density_at_quantile, marginal_quantile, Family, ProcessSpec};
use crate::models::{envelope_integral, stable_cdf, stable_density, stable_quantile};
use crate::normal;
use crate::quad::{integrate, integrate_breaks, Tolerance};

/// Mass left out below the lower cutoff of the convolution integral.
const TRUNCATION_MASS: f64 = 1e-8;
/// Largest allowed gap between the two median routes.
const ROUTE_GAP: f64 = 1e-6;

/// `P(Z₁ ≤ 0, Z₂ ≤ 0) = ¼ + asin(ρ)/(2π)` for standard normals with
/// correlation `ρ`.
pub fn bivariate_orthant(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(0.25 + rho.asin() / (2.0 * PI))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() <= 1.0) {
        return Err(invalid(format!("correlation {rho} must lie in [-1, 1]")));
    }
    Ok(())
}

/// `Φ₂(a, b; ρ) = P(Z₁ ≤ a, Z₂ ≤ b)` from
/// `Φ(a)Φ(b) + (2π)⁻¹ ∫₀^{asin ρ} exp(−(a² − 2ab sin θ + b²)/(2cos² θ)) dθ`.
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if a.is_nan() || b.is_nan() {
        return Err(invalid("bivariate normal arguments must not be NaN"));
    }
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if a == f64::INFINITY {
        return Ok(normal::cdf(b));
    }
    if b == f64::INFINITY {
        return Ok(normal::cdf(a));
    }
    if rho >= 1.0 - 1e-12 {
        return Ok(normal::cdf(a.min(b)));
    }
    if rho <= -1.0 + 1e-12 {
        return Ok((normal::cdf(a) + normal::cdf(b) - 1.0).max(0.0));
    }
    let (sa, sb) = (a * a + b * b, 2.0 * a * b);
    let integrand = |theta: f64| {
        let c = theta.cos();
        (-(sa - sb * theta.sin()) / (2.0 * c * c)).exp()
    };
    let theta = rho.asin();
    let tol = Tolerance::new(1e-12, 0.0);
    let signed = if theta >= 0.0 {
        integrate(integrand, 0.0, theta, tol)?.value
    } else {
        -integrate(integrand, theta, 0.0, tol)?.value
    };
    Ok((normal::cdf(a) * normal::cdf(b) + signed / (2.0 * PI)).clamp(0.0, 1.0))
}

/// `P(X_s ≤ x, X_t ≤ y)` for the symmetric stable Lévy process with
/// characteristic function `exp(−ct|u|^r)`, through independent increments:
/// `∫_{−∞}^x f(s,u) F(t−s, y−u) du`.
///
/// The integral is cut at the `1e−8` quantile `L` of `X_s`; the piece below
/// is replaced by its lower bound `F(s,L) F(t−s, y−L)`.
pub fn stable_joint_cdf(s: f64, t: f64, x: f64, y: f64, r: f64, c: f64) -> Result<f64> {
    if !(s > 0.0 && t > 0.0 && s.is_finite() && t.is_finite()) {
        return Err(invalid(format!("times ({s}, {t}) must be positive and finite")));
    }
    if x.is_nan() || y.is_nan() {
        return Err(invalid("joint cdf arguments must not be NaN"));
    }
    if s > t {
        return stable_joint_cdf(t, s, y, x, r, c);
    }
    let cs = c * s;
    if s == t {
        return stable_cdf(x.min(y), r, cs);
    }
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if y == f64::INFINITY {
        return stable_cdf(x, r, cs);
    }
    let cd = c * (t - s);
    let lower = stable_quantile(TRUNCATION_MASS, r, cs)?;
    if x <= lower {
        // All of the mass is below the cutoff; bound as above.
        return Ok(stable_cdf(x, r, cs)? * stable_cdf(y - x, r, cd)?);
    }
    // With x = +∞ the piece above the 1 − 1e−8 quantile is dropped.
    let upper = if x == f64::INFINITY {
        stable_quantile(1.0 - TRUNCATION_MASS, r, cs)?
    } else {
        x
    };
    let breaks = convolution_breaks(lower, upper, y, cs.powf(1.0 / r), cd.powf(1.0 / r));
    let integrand = |u: f64| {
        let d = stable_density(u, r, cs).unwrap_or(f64::NAN);
        if d == 0.0 {
            return 0.0;
        }
        d * stable_cdf(y - u, r, cd).unwrap_or(f64::NAN)
    };
    let tol = Tolerance::new(1e-10, 0.0).with_max_intervals(20_000);
    let body = integrate_breaks(integrand, &breaks, tol)?;
    let below = TRUNCATION_MASS * stable_cdf(y - lower, r, cd)?;
    Ok((body.value + below).clamp(0.0, 1.0))
}

/// Geometric breakpoints around the two places where the integrand changes
/// shape: `u = 0` (density peak) and `u = y` (middle of the cdf factor).
fn convolution_breaks(lower: f64, upper: f64, y: f64, scale_s: f64, scale_d: f64) -> Vec<f64> {
    let mut pts = vec![lower, upper];
    for (centre, scale) in [(0.0, scale_s), (y, scale_d)] {
        pts.push(centre);
        let mut step = scale;
        while step.is_finite() && (centre - step > lower || centre + step < upper) {
            pts.push(centre - step);
            pts.push(centre + step);
            step *= 2.0;
        }
    }
    pts.retain(|p| p.is_finite() && *p >= lower && *p <= upper);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// How a covariance entry was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CovMethod {
    /// Gaussian joint law through the bivariate normal distribution function.
    ClosedFormFbm,
    /// Gaussian medians: `σ_s σ_t asin(ρ)`.
    ClosedFormArcsin,
    /// Stable joint law through the convolution integral.
    StableConvolution,
    /// Same time: `(α∧β − αβ)/(f f)`.
    MarginalCase,
    /// `s·t = 0`.
    ZeroBoundary,
}

impl CovMethod {
    pub fn name(self) -> &'static str {
        match self {
            CovMethod::ClosedFormFbm => "CLOSED_FORM_FBM",
            CovMethod::ClosedFormArcsin => "CLOSED_FORM_ARCSIN",
            CovMethod::StableConvolution => "STABLE_CONVOLUTION",
            CovMethod::MarginalCase => "MARGINAL_CASE",
            CovMethod::ZeroBoundary => "ZERO_BOUNDARY",
        }
    }
}

/// A time–level point `(t, α)`.
pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovEntry {
    pub value: f64,
    pub method: CovMethod,
}

/// `E G̃(s,β) G̃(t,α)` with `sb = (s, β)`, `ta = (t, α)`.
pub fn limit_cov(sb: Point, ta: Point, spec: &ProcessSpec) -> Result<f64> {
    limit_cov_entry(sb, ta, spec).map(|e| e.value)
}

/// As [`limit_cov`], also reporting the evaluation route.
pub fn limit_cov_entry(sb: Point, ta: Point, spec: &ProcessSpec) -> Result<CovEntry> {
    let ((s, beta), (t, alpha)) = (sb, ta);
    for time in [s, t] {
        if !(time >= 0.0 && time.is_finite()) {
            return Err(invalid(format!("time {time} must be finite and nonnegative")));
        }
    }
    check_level(alpha)?;
    check_level(beta)?;
    if s == 0.0 || t == 0.0 {
        return Ok(CovEntry {
            value: 0.0,
            method: CovMethod::ZeroBoundary,
        });
    }
    if s == t {
        let ff = density_at_quantile(s, beta, spec)? * density_at_quantile(t, alpha, spec)?;
        return Ok(CovEntry {
            value: (alpha.min(beta) - alpha * beta) / ff,
            method: CovMethod::MarginalCase,
        });
    }
    if spec.family == Family::IteratedBm {
        return Err(Error::MonteCarloOnly(
            "the iterated Brownian motion joint law has no analytic evaluation; \
             compare against Monte Carlo self-consistency instead"
                .into(),
        ));
    }
    if let Some(cov) = spec.gaussian_covariance(s, t)? {
        let sd1 = spec.unit_sd().expect("gaussian family");
        let (ss, st) = (sd1 * s.powf(spec.hurst()), sd1 * t.powf(spec.hurst()));
        let rho = (cov / (ss * st)).clamp(-1.0, 1.0);
        if alpha == 0.5 && beta == 0.5 {
            return Ok(CovEntry {
                value: ss * st * rho.asin(),
                method: CovMethod::ClosedFormArcsin,
            });
        }
        let (zb, za) = (normal::quantile(beta), normal::quantile(alpha));
        let p = bivariate_normal_cdf(zb, za, rho)?;
        return Ok(CovEntry {
            value: (p - alpha * beta) * ss * st / (normal::pdf(zb) * normal::pdf(za)),
            method: CovMethod::ClosedFormFbm,
        });
    }
    // Stable family.
    let x = marginal_quantile(s, beta, spec)?;
    let y = marginal_quantile(t, alpha, spec)?;
    let p = stable_joint_cdf(s, t, x, y, spec.r, spec.c)?;
    let ff = density_at_quantile(s, beta, spec)? * density_at_quantile(t, alpha, spec)?;
    Ok(CovEntry {
        value: (p - alpha * beta) / ff,
        method: CovMethod::StableConvolution,
    })
}

/// Both evaluations of the fBm median covariance: the arcsin form
/// `(st)^{r/2} asin(ρ)` and the orthant form `2π(st)^{r/2}[Φ₂(0,0;ρ) − ¼]`
/// with `Φ₂` by quadrature.
pub fn median_cov_fbm_routes(s: f64, t: f64, r: f64) -> Result<(f64, f64)> {
    if !(s > 0.0 && t > 0.0) {
        return Err(invalid("median covariance needs s, t > 0"));
    }
    let cov = crate::models::fbm_covariance(s, t, r)?;
    let scale = (s * t).powf(0.5 * r);
    let rho = (cov / scale).clamp(-1.0, 1.0);
    let arcsin = scale * rho.asin();
    let orthant = 2.0 * PI * scale * (bivariate_normal_cdf(0.0, 0.0, rho)? - 0.25);
    Ok((arcsin, orthant))
}

/// fBm median covariance; fails if the two routes disagree by more than 1e−6.
pub fn median_cov_fbm(s: f64, t: f64, r: f64) -> Result<f64> {
    let (a, b) = median_cov_fbm_routes(s, t, r)?;
    if (a - b).abs() > ROUTE_GAP {
        return Err(Error::Consistency(format!(
            "fBm median covariance routes disagree at (s, t, r) = ({s}, {t}, {r}): {a} vs {b}"
        )));
    }
    Ok(a)
}

/// Both evaluations of the stable median covariance: the general route of
/// [`limit_cov`] (numerical quantiles and densities), and the median
/// specialization `(2π)²(st)^{1/r}[P(X_s≤0, X_t≤0) − ¼] / (∫e^{−c|u|^r}du)²`.
pub fn median_cov_stable_routes(s: f64, t: f64, r: f64, c: f64) -> Result<(f64, f64)> {
    let spec = ProcessSpec::stable(r, c)?;
    let general = limit_cov((s, 0.5), (t, 0.5), &spec)?;
    let p = if s == t {
        0.5
    } else {
        stable_joint_cdf(s, t, 0.0, 0.0, r, c)?
    };
    let e = envelope_integral(r, c);
    let special = (2.0 * PI).powi(2) * (s * t).powf(1.0 / r) * (p - 0.25) / (e * e);
    Ok((general, special))
}

/// A table of covariance entries over pairs of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCovariance {
    pub spec: ProcessSpec,
    pub pairs: Vec<(Point, Point)>,
    pub values: Vec<f64>,
    pub methods: Vec<CovMethod>,
}

pub const LIMIT_CSV_HEADER: &str = "s,beta,t,alpha,value,method";

impl LimitCovariance {
    /// Evaluates every pair in parallel; the table keeps the input order.
    pub fn evaluate(spec: &ProcessSpec, pairs: Vec<(Point, Point)>) -> Result<Self> {
        let entries: Vec<CovEntry> = pairs
            .par_iter()
            .map(|&(a, b)| limit_cov_entry(a, b, spec))
            .collect::<Result<_>>()?;
        Ok(LimitCovariance {
            spec: *spec,
            values: entries.iter().map(|e| e.value).collect(),
            methods: entries.iter().map(|e| e.method).collect(),
            pairs,
        })
    }

    /// All ordered pairs of points from `times × alphas`.
    pub fn grid_pairs(times: &[f64], alphas: &[f64]) -> Vec<(Point, Point)> {
        let pts: Vec<Point> = times
            .iter()
            .flat_map(|&t| alphas.iter().map(move |&a| (t, a)))
            .collect();
        pts.iter().flat_map(|&p| pts.iter().map(move |&q| (p, q))).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(LIMIT_CSV_HEADER);
        out.push('\n');
        for (((sb, ta), v), m) in self.pairs.iter().zip(&self.values).zip(&self.methods) {
            let _ = writeln!(out, "{},{},{},{},{},{}", sb.0, sb.1, ta.0, ta.1, v, m.name());
        }
        out
    }
}

/// Covariance matrix of `G̃` at the given points, row-major.
pub fn covariance_matrix(spec: &ProcessSpec, points: &[Point]) -> Result<Vec<f64>> {
    let k = points.len();
    let upper: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = upper
        .par_iter()
        .map(|&(i, j)| limit_cov(points[i], points[j], spec))
        .collect::<Result<_>>()?;
    let mut m = vec![0.0; k * k];
    for (&(i, j), v) in upper.iter().zip(vals) {
        m[i * k + j] = v;
        m[j * k + i] = v;
    }
    Ok(m)
}
