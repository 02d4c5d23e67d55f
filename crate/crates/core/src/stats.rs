//! Moment estimators with standard errors and Kolmogorov–Smirnov tests.

use serde::Serialize;

use crate::error::{invalid, Result};

/// Sample mean.
pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WithSe {
    pub value: f64,
    pub se: f64,
}

pub fn mean_se(x: &[f64]) -> Result<WithSe> {
    if x.len() < 2 {
        return Err(invalid("need at least two observations"));
    }
    let m = mean(x);
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64;
    Ok(WithSe {
        value: m,
        se: (var / x.len() as f64).sqrt(),
    })
}

/// Unbiased sample covariance; the standard error treats the centered
/// products `(x_i - x̄)(y_i - ȳ)` as i.i.d.
pub fn covariance_se(x: &[f64], y: &[f64]) -> Result<WithSe> {
    if x.len() != y.len() {
        return Err(invalid("covariance needs samples of equal length"));
    }
    let m = x.len();
    if m < 3 {
        return Err(invalid("need at least three observations"));
    }
    let (mx, my) = (mean(x), mean(y));
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let mp = mean(&prods);
    let vp = prods.iter().map(|p| (p - mp) * (p - mp)).sum::<f64>() / (m - 1) as f64;
    Ok(WithSe {
        value: prods.iter().sum::<f64>() / (m - 1) as f64,
        se: (vp / m as f64).sqrt(),
    })
}

pub fn variance_se(x: &[f64]) -> Result<WithSe> {
    covariance_se(x, x)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Dual (theta-function) series converges fast for small λ.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        for k in 0..20 {
            let j = (2 * k + 1) as f64;
            s += y.powf(j * j);
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size used for the asymptotic p-value.
    pub n_eff: f64,
}

/// Asymptotic p-value with the usual finite-sample correction
/// `λ = (√n + 0.12 + 0.11/√n) D`.
fn ks_p(d: f64, n_eff: f64) -> f64 {
    let rn = n_eff.sqrt();
    kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)
}

/// One-sample test of `sample` against a continuous distribution function.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsTest> {
    if sample.is_empty() {
        return Err(invalid("empty sample"));
    }
    let mut x = sample.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsTest {
        statistic: d,
        p_value: ks_p(d, n),
        n_eff: n,
    })
}

/// Two-sample test; `n_eff = nm/(n+m)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("empty sample"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    y.sort_unstable_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok(KsTest {
        statistic: d,
        p_value: ks_p(d, n_eff),
        n_eff,
    })
}
