//! Self-similar input process families and their one-dimensional laws.

mod stable;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::normal;
use crate::quad::{integrate, invert_monotone, Tolerance};

pub use stable::{envelope_integral, stable_cdf, stable_density, stable_quantile};

/// Largest supported integration order for integrated Brownian motion.
pub const MAX_INTEGRATION_ORDER: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Fractional Brownian motion with covariance `½[t^r + s^r - |t-s|^r]`.
    Fbm,
    /// Symmetric `r`-stable Lévy process, `E e^{iuX(t)} = exp(-ct|u|^r)`.
    Stable,
    /// Standard Brownian motion.
    Bm,
    /// `m`-times integrated Brownian motion.
    IntegratedBm,
    /// `B(|B'(t)|)` with `B`, `B'` independent Brownian motions.
    IteratedBm,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Fbm => "fbm",
            Family::Stable => "stable",
            Family::Bm => "bm",
            Family::IntegratedBm => "integrated_bm",
            Family::IteratedBm => "iterated_bm",
        }
    }

    pub fn is_gaussian(self) -> bool {
        matches!(self, Family::Fbm | Family::Bm | Family::IntegratedBm)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "fbm" => Ok(Family::Fbm),
            "stable" => Ok(Family::Stable),
            "bm" => Ok(Family::Bm),
            "integrated_bm" | "ibm" => Ok(Family::IntegratedBm),
            "iterated_bm" => Ok(Family::IteratedBm),
            other => Err(invalid(format!(
                "unknown family `{other}` (expected fbm, stable, bm, integrated_bm or iterated_bm)"
            ))),
        }
    }
}

#[derive(Deserialize)]
struct RawSpec {
    family: Family,
    #[serde(default = "default_r")]
    r: f64,
    #[serde(default = "default_c")]
    c: f64,
    #[serde(default)]
    m: u32,
}

fn default_r() -> f64 {
    1.0
}

fn default_c() -> f64 {
    1.0
}

/// A self-similar process family with validated parameters.
///
/// `r` is the fBm/stable index, `c` the stable scale constant and `m` the
/// integration order. The self-similarity index `hurst` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ProcessSpec {
    pub family: Family,
    pub r: f64,
    pub c: f64,
    pub m: u32,
    #[serde(rename = "H")]
    hurst: f64,
}

impl TryFrom<RawSpec> for ProcessSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        ProcessSpec::new(raw.family, raw.r, raw.c, raw.m)
    }
}

impl ProcessSpec {
    /// Build and validate a spec. Parameters a family does not use are
    /// normalized (`r = 1` for Brownian families, `c = 1` outside the stable
    /// family, `m = 0` outside integrated Brownian motion).
    pub fn new(family: Family, r: f64, c: f64, m: u32) -> Result<Self> {
        let (r, c, m) = match family {
            Family::Fbm => {
                check_index(r)?;
                (r, 1.0, 0)
            }
            Family::Stable => {
                stable::check_params(r, c)?;
                (r, c, 0)
            }
            Family::Bm | Family::IteratedBm => (1.0, 1.0, 0),
            Family::IntegratedBm => {
                if m == 0 || m > MAX_INTEGRATION_ORDER {
                    return Err(invalid(format!(
                        "integration order m = {m} must lie in 1..={MAX_INTEGRATION_ORDER}"
                    )));
                }
                (1.0, 1.0, m)
            }
        };
        let hurst = match family {
            Family::Fbm => r / 2.0,
            Family::Stable => 1.0 / r,
            Family::Bm => 0.5,
            Family::IntegratedBm => m as f64 + 0.5,
            Family::IteratedBm => 0.25,
        };
        Ok(ProcessSpec { family, r, c, m, hurst })
    }

    pub fn fbm(r: f64) -> Result<Self> {
        Self::new(Family::Fbm, r, 1.0, 0)
    }

    pub fn stable(r: f64, c: f64) -> Result<Self> {
        Self::new(Family::Stable, r, c, 0)
    }

    pub fn bm() -> Self {
        Self::new(Family::Bm, 1.0, 1.0, 0).expect("valid")
    }

    pub fn integrated_bm(m: u32) -> Result<Self> {
        Self::new(Family::IntegratedBm, 1.0, 1.0, m)
    }

    pub fn iterated_bm() -> Self {
        Self::new(Family::IteratedBm, 1.0, 1.0, 0).expect("valid")
    }

    /// Self-similarity index `H`.
    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Standard deviation of `X(1)` for the Gaussian families.
    pub fn unit_sd(&self) -> Option<f64> {
        match self.family {
            Family::Fbm | Family::Bm => Some(1.0),
            Family::IntegratedBm => {
                let m = self.m as f64;
                let fact: f64 = (1..=self.m).map(|k| k as f64).product();
                Some((1.0 / (2.0 * m + 1.0)).sqrt() / fact)
            }
            _ => None,
        }
    }

    /// `P(X(1) ≤ x)`.
    pub fn unit_cdf(&self, x: f64) -> Result<f64> {
        match self.family {
            Family::Stable => stable_cdf(x, self.r, self.c),
            Family::IteratedBm => iterated::cdf(x),
            _ => Ok(normal::cdf(x / self.unit_sd().expect("gaussian"))),
        }
    }

    /// Density of `X(1)` at `x`.
    pub fn unit_density(&self, x: f64) -> Result<f64> {
        match self.family {
            Family::Stable => stable_density(x, self.r, self.c),
            Family::IteratedBm => iterated::density(x),
            _ => {
                let sd = self.unit_sd().expect("gaussian");
                Ok(normal::pdf(x / sd) / sd)
            }
        }
    }

    /// `τ_α(1)`, the `α`-quantile of `X(1)`.
    pub fn unit_quantile(&self, alpha: f64) -> Result<f64> {
        check_level(alpha)?;
        match self.family {
            Family::Stable => stable_quantile(alpha, self.r, self.c),
            Family::IteratedBm => iterated::quantile(alpha),
            _ => Ok(self.unit_sd().expect("gaussian") * normal::quantile(alpha)),
        }
    }

    /// `E X(s)X(t)` for the Gaussian families, `None` otherwise.
    pub fn gaussian_covariance(&self, s: f64, t: f64) -> Result<Option<f64>> {
        check_time(s)?;
        check_time(t)?;
        Ok(match self.family {
            Family::Fbm => Some(fbm_covariance(s, t, self.r)?),
            Family::Bm => Some(s.min(t)),
            Family::IntegratedBm => Some(integrated_bm_covariance(s, t, self.m)),
            _ => None,
        })
    }

    pub fn marginal(&self, t: f64) -> Result<MarginalLaw> {
        check_time(t)?;
        Ok(MarginalLaw { spec: *self, t })
    }
}

/// Law of `X(t)` for a fixed time, expressed through the scaling identities
/// `F(t,x) = F(1, t^{-H} x)` and `f(t,x) = t^{-H} f(1, t^{-H} x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalLaw {
    pub spec: ProcessSpec,
    pub t: f64,
}

impl MarginalLaw {
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if self.t == 0.0 {
            return Ok(if x >= 0.0 { 1.0 } else { 0.0 });
        }
        self.spec.unit_cdf(x * self.t.powf(-self.spec.hurst))
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        if self.t == 0.0 {
            return Err(invalid("X(0) = 0 is a point mass and has no density"));
        }
        let scale = self.t.powf(-self.spec.hurst);
        Ok(scale * self.spec.unit_density(x * scale)?)
    }

    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        marginal_quantile(self.t, alpha, &self.spec)
    }
}

fn check_index(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 2.0) {
        return Err(invalid(format!("index r = {r} must lie in (0, 2)")));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time {t} must be finite and nonnegative")));
    }
    Ok(())
}

pub(crate) fn check_level(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("level {alpha} must lie in (0, 1)")));
    }
    Ok(())
}

/// Fractional Brownian motion covariance `½[t^r + s^r - |t-s|^r]`.
pub fn fbm_covariance(s: f64, t: f64, r: f64) -> Result<f64> {
    check_index(r)?;
    check_time(s)?;
    check_time(t)?;
    if s == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    Ok(0.5 * (t.powf(r) + s.powf(r) - (t - s).abs().powf(r)))
}

/// `E X(s)X(t) = ∫₀^{s∧t} (s-u)^m (t-u)^m du / (m!)²` for the `m`-times
/// integrated Brownian motion `X(t) = ∫₀^t (t-u)^m/m! dB(u)`.
pub fn integrated_bm_covariance(s: f64, t: f64, m: u32) -> f64 {
    let lo = s.min(t);
    if lo <= 0.0 {
        return 0.0;
    }
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    let mi = m as i32;
    // Polynomial of degree 2m; the 15-point rule is exact here.
    let v = integrate(
        |u| (s - u).powi(mi) * (t - u).powi(mi),
        0.0,
        lo,
        Tolerance::new(0.0, 1e-14),
    )
    .map(|e| e.value)
    .unwrap_or(f64::NAN);
    v / (fact * fact)
}

/// `τ_α(t) = t^H τ_α(1)`; zero at `t = 0`.
pub fn marginal_quantile(t: f64, alpha: f64, spec: &ProcessSpec) -> Result<f64> {
    check_time(t)?;
    check_level(alpha)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(t.powf(spec.hurst) * spec.unit_quantile(alpha)?)
}

/// `f(t, τ_α(t)) = t^{-H} f(1, τ_α(1))`.
pub fn density_at_quantile(t: f64, alpha: f64, spec: &ProcessSpec) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Err(invalid("density at t = 0 is degenerate (point mass at 0)"));
    }
    check_level(alpha)?;
    let q = spec.unit_quantile(alpha)?;
    Ok(t.powf(-spec.hurst) * spec.unit_density(q)?)
}

/// Marginal law of iterated Brownian motion at time one, as a mixture of
/// centered normals over the law of `|B'(1)|`.
///
/// With `|B'(1)| = v²`:
/// `f(1,x) = (2/π) ∫₀^∞ exp(-x²/(2v²) - v⁴/2) dv`,
/// `F(1,x) = ½ + ∫₀^∞ (Φ(x/v) - ½) 2√(2/π) v e^{-v⁴/2} dv`.
mod iterated {
    use super::*;

    /// `v⁴/2 = 46` beyond this point.
    fn upper() -> f64 {
        92f64.powf(0.25)
    }

    fn tol() -> Tolerance {
        Tolerance::new(1e-14, 1e-13)
    }

    pub fn density(x: f64) -> Result<f64> {
        let x2 = x * x;
        let est = integrate(
            |v: f64| {
                if v == 0.0 {
                    if x2 == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (-x2 / (2.0 * v * v) - 0.5 * v.powi(4)).exp()
                }
            },
            0.0,
            upper(),
            tol(),
        )?;
        Ok(2.0 / PI * est.value)
    }

    pub fn cdf(x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.5);
        }
        if x.is_infinite() {
            return Ok(if x > 0.0 { 1.0 } else { 0.0 });
        }
        let a = x.abs();
        let w = 2.0 * (2.0 / PI).sqrt();
        let est = integrate(
            |v: f64| {
                if v == 0.0 {
                    0.0
                } else {
                    (normal::cdf(a / v) - 0.5) * w * v * (-0.5 * v.powi(4)).exp()
                }
            },
            0.0,
            upper(),
            tol(),
        )?;
        let upper_half = est.value.clamp(0.0, 0.5);
        Ok(if x > 0.0 { 0.5 + upper_half } else { 0.5 - upper_half })
    }

    pub fn quantile(alpha: f64) -> Result<f64> {
        if alpha == 0.5 {
            return Ok(0.0);
        }
        let p = alpha.max(1.0 - alpha);
        let x = invert_monotone(cdf, p, 0.0, 1.0, 1e-12)?;
        let d = density(x)?;
        let step = (cdf(x)? - p) / d;
        let x = if step.abs() <= 1e-9 * (1.0 + x) { x - step } else { x };
        Ok(if alpha > 0.5 { x } else { -x })
    }
}
