//! Symmetric stable laws with characteristic function `exp(-c|u|^r)`.
//!
//! Densities and distribution functions are evaluated for the standard case
//! `c = 1` and rescaled: a variable with scale constant `c` is `c^{1/r}`
//! times a standard one.
//!
//! Two evaluation routes are used:
//! * the Fourier inversion integrals
//!   `π f(z) = ∫₀^∞ e^{-u^r} cos(zu) du` and
//!   `F(z) = ½ + π⁻¹ ∫₀^∞ e^{-u^r} sin(zu)/u du`,
//!   truncated where `u^r = 46` and integrated panel by panel between the
//!   zeros of the oscillating factor;
//! * for large `|z|`, the tail expansion in powers of `z^{-r}`, which
//!   converges for `r < 1` and is asymptotic otherwise. It is used only when
//!   its terms have decayed below machine precision without cancellation.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::quad::{integrate, invert_monotone, Tolerance};

/// Exponent at which the integrand envelope `e^{-u^r}` is cut off.
const ENVELOPE_CUTOFF: f64 = 46.0;
/// Smallest `|z|` for which the tail expansion is attempted.
const SERIES_MIN: f64 = 2.5;

pub(crate) fn check_params(r: f64, c: f64) -> Result<()> {
    if !(r > 0.0 && r < 2.0) {
        return Err(invalid(format!("stable index r = {r} must lie in (0, 2)")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("stable scale constant c = {c} must be positive")));
    }
    Ok(())
}

/// Density at `x` of the symmetric stable law with characteristic function
/// `exp(-c|u|^r)`.
pub fn stable_density(x: f64, r: f64, c: f64) -> Result<f64> {
    check_params(r, c)?;
    let scale = c.powf(1.0 / r);
    Ok(std_density(x / scale, r)? / scale)
}

/// Distribution function of the same law.
pub fn stable_cdf(x: f64, r: f64, c: f64) -> Result<f64> {
    check_params(r, c)?;
    let scale = c.powf(1.0 / r);
    std_cdf(x / scale, r)
}

/// `α`-quantile of the same law: bisection on the distribution function to
/// width 1e-12 followed by one Newton step.
pub fn stable_quantile(alpha: f64, r: f64, c: f64) -> Result<f64> {
    check_params(r, c)?;
    Ok(c.powf(1.0 / r) * std_quantile(alpha, r)?)
}

/// `∫_ℝ exp(-c|u|^r) du = 2 Γ(1 + 1/r) c^{-1/r}`.
pub fn envelope_integral(r: f64, c: f64) -> f64 {
    2.0 * ln_gamma(1.0 + 1.0 / r).exp() * c.powf(-1.0 / r)
}

fn cutoff(r: f64) -> f64 {
    ENVELOPE_CUTOFF.powf(1.0 / r)
}

pub(crate) fn std_density(z: f64, r: f64) -> Result<f64> {
    let z = z.abs();
    if !z.is_finite() {
        return Ok(0.0);
    }
    if z >= SERIES_MIN {
        if let Some(v) = tail_series(z, r, SeriesKind::Density) {
            return Ok(v);
        }
    }
    let envelope = move |u: f64| (-u.powf(r)).exp();
    let integral = if z <= 1.0 {
        direct(move |u| envelope(u) * (z * u).cos(), r)?
    } else {
        // Panels end at the zeros (k + ½)π/z of cos(zu).
        panels(move |u| envelope(u) * (z * u).cos(), r, 0.5 * PI / z, PI / z)?
    };
    Ok((integral / PI).max(0.0))
}

pub(crate) fn std_cdf(z: f64, r: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(0.5);
    }
    let a = z.abs();
    let upper = if a.is_infinite() {
        0.5
    } else if let Some(tail) = (a >= SERIES_MIN).then(|| tail_series(a, r, SeriesKind::Tail)).flatten() {
        0.5 - tail
    } else {
        let integrand = move |u: f64| {
            let s = if u == 0.0 { a } else { (a * u).sin() / u };
            (-u.powf(r)).exp() * s
        };
        let integral = if a <= 1.0 {
            direct(integrand, r)?
        } else {
            panels(integrand, r, PI / a, PI / a)?
        };
        integral / PI
    };
    let upper = upper.clamp(0.0, 0.5);
    Ok(if z > 0.0 { 0.5 + upper } else { 0.5 - upper })
}

pub(crate) fn std_quantile(alpha: f64, r: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("level {alpha} must lie in (0, 1)")));
    }
    if alpha == 0.5 {
        return Ok(0.0);
    }
    // Work on the upper half and reflect; the law is symmetric.
    let p = alpha.max(1.0 - alpha);
    let x = invert_monotone(|x| std_cdf(x, r), p, 0.0, 1.0, 1e-12)?;
    let dens = std_density(x, r)?;
    let refined = if dens > 0.0 {
        let step = (std_cdf(x, r)? - p) / dens;
        // Newton only polishes the last digits; reject a step outside the
        // bisection bracket.
        if step.abs() <= 1e-9 * (1.0 + x.abs()) {
            x - step
        } else {
            x
        }
    } else {
        x
    };
    Ok(if alpha > 0.5 { refined } else { -refined })
}

/// `∫₀^{u*}` on chunks of length π, for slowly oscillating integrands.
fn direct<F: Fn(f64) -> f64>(f: F, r: f64) -> Result<f64> {
    let end = cutoff(r);
    let mut breaks = vec![0.0];
    // Resolve the cusp of u^r at the origin separately.
    if end > 1.0 {
        breaks.push(1.0);
    }
    let mut b = PI;
    while b < end {
        breaks.push(b);
        b += PI;
    }
    breaks.push(end);
    let est = crate::quad::integrate_breaks(f, &breaks, Tolerance::new(1e-15, 1e-14))?;
    Ok(est.value)
}

/// Sum of signed panels `[0, first], [first, first + step], ...` up to the
/// envelope cutoff. Consecutive panels are added pairwise before being
/// accumulated, which keeps the alternating sum well conditioned.
fn panels<F: Fn(f64) -> f64>(f: F, r: f64, first: f64, step: f64) -> Result<f64> {
    let end = cutoff(r);
    let tol = Tolerance::new(1e-17, 1e-13);
    let mut lo = 0.0;
    let mut hi = first.min(end);
    let mut total = 0.0;
    let mut pending: Option<f64> = None;
    let mut k = 0usize;
    while lo < end {
        let piece = integrate(&f, lo, hi, tol)?.value;
        match pending.take() {
            Some(prev) => total += prev + piece,
            None => pending = Some(piece),
        }
        k += 1;
        lo = hi;
        hi = (first + k as f64 * step).min(end);
    }
    if let Some(prev) = pending {
        total += prev;
    }
    Ok(total)
}

#[derive(Clone, Copy)]
enum SeriesKind {
    /// `π f(z) = Σ (-1)^{k+1} Γ(kr+1)/k! sin(kπr/2) z^{-kr-1}`
    Density,
    /// `π (1 - F(z)) = Σ (-1)^{k+1} Γ(kr)/k! sin(kπr/2) z^{-kr}`
    Tail,
}

fn tail_series(z: f64, r: f64, kind: SeriesKind) -> Option<f64> {
    let lz = z.ln();
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut prev_mag = f64::INFINITY;
    for k in 1..=400 {
        let kf = k as f64;
        let (lg, power) = match kind {
            SeriesKind::Density => (ln_gamma(kf * r + 1.0), -(kf * r + 1.0) * lz),
            SeriesKind::Tail => (ln_gamma(kf * r), -kf * r * lz),
        };
        let mag = (lg - ln_gamma(kf + 1.0) + power).exp();
        let s = (0.5 * kf * PI * r).sin();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * s * mag;
        sum += term;
        abs_sum += term.abs();
        if mag <= 1e-17 * sum.abs() && k > 1 {
            if abs_sum > 1e5 * sum.abs() {
                return None;
            }
            return Some(sum / PI);
        }
        // An asymptotic series whose terms grow before converging is useless here.
        if mag > prev_mag && k > 3 {
            return None;
        }
        prev_mag = mag;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn cauchy_pdf(x: f64) -> f64 {
        1.0 / (PI * (1.0 + x * x))
    }

    fn cauchy_cdf(x: f64) -> f64 {
        0.5 + x.atan() / PI
    }

    #[test]
    fn cauchy_density_closed_form() {
        for &x in &[0.0, 0.3, 1.0, 2.0, 2.6, 7.0, 20.0, 49.0, 50.0, 1e3, 1e7] {
            let got = std_density(x, 1.0).unwrap();
            assert_relative_eq!(got, cauchy_pdf(x), max_relative = 1e-9);
        }
    }

    #[test]
    fn cauchy_cdf_closed_form() {
        for &x in &[-50.0, -3.0, -1.0, -0.2, 0.0, 0.7, 1.0, 2.4, 2.6, 10.0, 50.0, 1e9] {
            let got = std_cdf(x, 1.0).unwrap();
            assert_abs_diff_eq!(got, cauchy_cdf(x), epsilon = 1e-11);
        }
    }

    #[test]
    fn oscillatory_route_matches_series_for_small_index() {
        // r < 1: the tail series converges, giving an independent value.
        for &r in &[0.5, 0.7, 0.8] {
            for &z in &[3.0, 6.0, 20.0, 50.0] {
                let series = tail_series(z, r, SeriesKind::Density).unwrap();
                let envelope = |u: f64| (-u.powf(r)).exp();
                let osc = panels(|u| envelope(u) * (z * u).cos(), r, 0.5 * PI / z, PI / z).unwrap() / PI;
                assert_relative_eq!(osc, series, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn cdf_routes_agree_for_small_index() {
        for &r in &[0.7, 0.9] {
            for &z in &[3.0, 10.0, 40.0] {
                let series = 0.5 - tail_series(z, r, SeriesKind::Tail).unwrap();
                let integrand = |u: f64| {
                    let s = if u == 0.0 { z } else { (z * u).sin() / u };
                    (-u.powf(r)).exp() * s
                };
                let osc = panels(integrand, r, PI / z, PI / z).unwrap() / PI;
                assert_abs_diff_eq!(osc, series, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn density_matches_power_series_above_one() {
        // For r > 1: π f(x) = Σ_k (-1)^k Γ((2k+1)/r) x^{2k} / (r (2k)!).
        for &r in &[1.3, 1.5, 1.8] {
            for &x in &[0.0f64, 0.5, 1.0, 1.7] {
                let mut s = 0.0;
                for k in 0..60 {
                    let kf = k as f64;
                    let lg = ln_gamma((2.0 * kf + 1.0) / r) - ln_gamma(2.0 * kf + 1.0);
                    let term = lg.exp() * if k == 0 { 1.0 } else { x.powf(2.0 * kf) } / r;
                    s += if k % 2 == 0 { term } else { -term };
                }
                assert_relative_eq!(std_density(x, r).unwrap(), s / PI, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn density_normalizes_and_envelope_integral() {
        for &r in &[0.8, 1.0, 1.5] {
            let f0 = std_density(0.0, r).unwrap();
            assert_relative_eq!(2.0 * PI * f0, envelope_integral(r, 1.0), max_relative = 1e-10);
        }
    }

    #[test]
    fn quantile_cauchy() {
        for &a in &[0.1, 0.25, 0.6, 0.75, 0.99] {
            let q = std_quantile(a, 1.0).unwrap();
            assert_abs_diff_eq!(q, (PI * (a - 0.5)).tan(), epsilon = 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn scale_constant_rescales() {
        let c: f64 = 3.0;
        let r = 1.0;
        // Cauchy with scale c.
        let x = 2.0;
        assert_relative_eq!(
            stable_density(x, r, c).unwrap(),
            c / (PI * (c * c + x * x)),
            max_relative = 1e-9
        );
        assert_abs_diff_eq!(stable_cdf(x, r, c).unwrap(), 0.5 + (x / c).atan() / PI, epsilon = 1e-11);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(stable_density(0.0, 2.0, 1.0).is_err());
        assert!(stable_density(0.0, 0.0, 1.0).is_err());
        assert!(stable_cdf(0.0, 1.0, -1.0).is_err());
        assert!(stable_quantile(1.0, 1.0, 1.0).is_err());
    }
}
