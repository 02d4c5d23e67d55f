//! Standard normal density, distribution and quantile functions.

use libm::erfc;
use statrs::function::erf::erfc_inv;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`cdf`] on `(0, 1)`: the `erfc_inv` estimate polished by two
/// Newton steps against [`cdf`].
pub fn quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..2 {
        let d = pdf(x);
        if !(d > 0.0) {
            break;
        }
        // Work in the smaller tail to keep the residual's relative accuracy.
        let resid = if x < 0.0 { cdf(x) - p } else { (1.0 - p) - cdf(-x) };
        x -= resid / d;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_values() {
        assert_abs_diff_eq!(cdf(0.5), 0.691_462_461_274_013_1, epsilon = 1e-15);
        assert_abs_diff_eq!(cdf(-3.0), 0.001_349_898_031_630_094_6, epsilon = 1e-17);
        assert_abs_diff_eq!(quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-13);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-8, 0.01, 0.25, 0.5, 0.75, 0.999] {
            assert_abs_diff_eq!(cdf(quantile(p)), p, epsilon = 1e-14 + 1e-12 * p);
        }
    }
}
