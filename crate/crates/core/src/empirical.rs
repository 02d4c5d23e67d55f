//! Empirical distribution functions, order statistics, empirical quantiles
//! and the quantile fluctuation field `W_n(t,α) = √n(τ_α^n(t) − τ_α(t))`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::models::{check_level, ProcessSpec};
use crate::simulate::{GridSpec, PathEnsemble};

/// `#{i : x_i ≤ x} / n`.
pub fn ecdf(sample: &[f64], x: f64) -> f64 {
    if sample.is_empty() {
        return f64::NAN;
    }
    sample.iter().filter(|&&v| v <= x).count() as f64 / sample.len() as f64
}

/// Permutation `π` with `sample[π[0]] ≤ sample[π[1]] ≤ …`; tied values keep
/// the order of their original indices.
pub fn order_permutation(sample: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sample.len()).collect();
    // Stable sort: equal keys stay in index order.
    idx.sort_by(|&a, &b| sample[a].total_cmp(&sample[b]));
    idx
}

pub fn order_statistics(sample: &[f64]) -> Vec<f64> {
    order_permutation(sample).into_iter().map(|i| sample[i]).collect()
}

/// `j(α) = min{k ≥ 1 : k/n ≥ α}`, the rank of the left-continuous
/// empirical `α`-quantile.
pub fn quantile_rank(n: usize, alpha: f64) -> usize {
    let nf = n as f64;
    let mut j = ((nf * alpha).ceil() as usize).clamp(1, n);
    while j > 1 && (j - 1) as f64 / nf >= alpha {
        j -= 1;
    }
    while j < n && (j as f64) / nf < alpha {
        j += 1;
    }
    j
}

/// Left-continuous inverse of the empirical distribution function:
/// `inf{x : F_n(x) ≥ α}`, which is the order statistic `x_(j(α))`.
pub fn empirical_quantile(sample: &[f64], alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    if sample.is_empty() {
        return Err(invalid("empty sample"));
    }
    let j = quantile_rank(sample.len(), alpha);
    let mut buf = sample.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(j - 1, f64::total_cmp);
    Ok(*v)
}

/// Largest `α`-quantile: `inf{x : F_n(x) > α}`.
pub fn maximal_quantile(sample: &[f64], alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    if sample.is_empty() {
        return Err(invalid("empty sample"));
    }
    let n = sample.len();
    let nf = n as f64;
    // Largest rank k with #{x ≥ x_(k)}/n ≥ 1 − α, i.e. (n − k + 1)/n ≥ 1 − α.
    let mut k = ((nf * alpha).floor() as usize + 1).clamp(1, n);
    while k < n && (n - k) as f64 / nf >= 1.0 - alpha {
        k += 1;
    }
    while k > 1 && ((n - k + 1) as f64) / nf < 1.0 - alpha {
        k -= 1;
    }
    let mut buf = sample.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*v)
}

/// `q` is an `α`-quantile of the sample: `F_n(q) ≥ α` and
/// `#{x ≥ q}/n ≥ 1 − α`.
pub fn is_quantile(sample: &[f64], alpha: f64, q: f64) -> bool {
    let n = sample.len() as f64;
    let below = sample.iter().filter(|&&v| v <= q).count() as f64 / n;
    let above = sample.iter().filter(|&&v| v >= q).count() as f64 / n;
    below >= alpha && above >= 1.0 - alpha
}

/// Reflection check: `q = −q_{1−α}(−X)`, with the maximal
/// `(1−α)`-quantile of the negated sample, must be an `α`-quantile of the
/// sample.
pub fn reflected_quantile_check(sample: &[f64], alpha: f64) -> Result<bool> {
    check_level(alpha)?;
    let negated: Vec<f64> = sample.iter().map(|v| -v).collect();
    let q = -maximal_quantile(&negated, 1.0 - alpha)?;
    Ok(is_quantile(sample, alpha, q))
}

/// One replication of the fluctuation field on the `(t, α)` grid, stored
/// time-major (`values[k * |alphas| + i]` is `W_n(t_k, α_i)`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileField {
    pub grid: GridSpec,
    pub n: usize,
    pub replication: u64,
    pub values: Vec<f64>,
}

impl QuantileField {
    pub fn get(&self, time_index: usize, alpha_index: usize) -> f64 {
        self.values[time_index * self.grid.alphas.len() + alpha_index]
    }

    /// Rows `replication,t,alpha,w`, without header.
    pub fn write_rows(&self, out: &mut String) {
        let a = self.grid.alphas.len();
        for (k, t) in self.grid.times.iter().enumerate() {
            for (i, alpha) in self.grid.alphas.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", self.replication, t, alpha, self.values[k * a + i]);
            }
        }
    }
}

pub const FIELD_CSV_HEADER: &str = "replication,t,alpha,w";

/// CSV for several replications.
pub fn fields_to_csv(fields: &[QuantileField]) -> String {
    let mut out = String::from(FIELD_CSV_HEADER);
    out.push('\n');
    for f in fields {
        f.write_rows(&mut out);
    }
    out
}

/// Writes `<stem>.csv` and a JSON sidecar with `meta` into `dir`.
pub fn write_fields(dir: &Path, stem: &str, fields: &[QuantileField], meta: serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.csv")), fields_to_csv(fields))?;
    std::fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok(())
}

/// Theoretical quantiles `τ_α(t) = t^H τ_α(1)` on a grid, computed once and
/// reused across replications.
#[derive(Debug, Clone)]
pub struct FieldBuilder {
    spec: ProcessSpec,
    grid: GridSpec,
    /// `τ_α(t_k)`, time-major.
    theory: Vec<f64>,
}

impl FieldBuilder {
    pub fn new(spec: &ProcessSpec, grid: &GridSpec) -> Result<Self> {
        let unit: Vec<f64> = grid
            .alphas
            .iter()
            .map(|&a| spec.unit_quantile(a))
            .collect::<Result<_>>()?;
        let h = spec.hurst();
        let mut theory = Vec::with_capacity(grid.times.len() * unit.len());
        for &t in &grid.times {
            let s = if t == 0.0 { 0.0 } else { t.powf(h) };
            theory.extend(unit.iter().map(|q| s * q));
        }
        Ok(FieldBuilder {
            spec: *spec,
            grid: grid.clone(),
            theory,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn field(&self, ensemble: &PathEnsemble) -> Result<QuantileField> {
        if ensemble.grid != self.grid {
            return Err(invalid("ensemble grid does not match the field grid"));
        }
        if ensemble.spec != self.spec {
            return Err(invalid("ensemble process does not match the field process"));
        }
        let n = ensemble.n_paths();
        let a = self.grid.alphas.len();
        let ranks: Vec<usize> = self.grid.alphas.iter().map(|&al| quantile_rank(n, al)).collect();
        let root_n = (n as f64).sqrt();
        let mut values = vec![0.0; self.grid.times.len() * a];
        for k in 0..self.grid.times.len() {
            // W_n(0, ·) is exactly zero.
            if self.grid.times[k] == 0.0 {
                continue;
            }
            let mut col = ensemble.column(k);
            col.sort_unstable_by(f64::total_cmp);
            for i in 0..a {
                values[k * a + i] = root_n * (col[ranks[i] - 1] - self.theory[k * a + i]);
            }
        }
        Ok(QuantileField {
            grid: self.grid.clone(),
            n,
            replication: ensemble.replication,
            values,
        })
    }
}

/// `W_n(t,α)` for every grid point of one ensemble.
pub fn quantile_field(ensemble: &PathEnsemble, grid: &GridSpec, spec: &ProcessSpec) -> Result<QuantileField> {
    FieldBuilder::new(spec, grid)?.field(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::aux_stream;
    use crate::simulate::simulate_fbm;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn ecdf_examples() {
        assert_eq!(ecdf(&[1.0, 2.0, 3.0], 2.0), 2.0 / 3.0);
        assert_eq!(ecdf(&[1.0, 2.0, 3.0], 0.5), 0.0);
        assert_eq!(ecdf(&[1.0, 2.0, 3.0], 3.0), 1.0);
        assert_eq!(ecdf(&[1.0, 2.0, 3.0], 7.0), 1.0);
    }

    #[test]
    fn empirical_quantile_examples() {
        let s = [3.0, 1.0, 2.0];
        assert_eq!(empirical_quantile(&s, 0.5).unwrap(), 2.0);
        assert_eq!(empirical_quantile(&s, 1.0 / 3.0).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&s, 0.34).unwrap(), 2.0);
        assert!(empirical_quantile(&s, 0.0).is_err());
        assert!(empirical_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn order_statistics_examples() {
        assert_eq!(order_statistics(&[3.0, 1.0, 2.0]), vec![1.0, 2.0, 3.0]);
        // Ties resolved by original index: the 2 at index 0 precedes the 2 at index 1.
        assert_eq!(order_permutation(&[2.0, 2.0, 1.0]), vec![2, 0, 1]);
    }

    /// `x_(k) = min over index sets J with |J| ≥ k of max_{i∈J} x_i`.
    fn min_max_oracle(x: &[f64], k: usize) -> f64 {
        let n = x.len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) {
            if (mask.count_ones() as usize) < k {
                continue;
            }
            let m = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| x[i])
                .fold(f64::NEG_INFINITY, f64::max);
            best = best.min(m);
        }
        best
    }

    #[test]
    fn order_statistics_match_min_max_identity_exhaustively() {
        let mut rng = aux_stream(5, 0);
        for n in 1..=6 {
            for _ in 0..200 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
                let sorted = order_statistics(&x);
                for k in 1..=n {
                    assert_eq!(sorted[k - 1], min_max_oracle(&x, k));
                }
            }
        }
    }

    #[test]
    fn reflected_quantile_examples() {
        assert!(reflected_quantile_check(&[-2.0, -1.0, 0.0, 1.0, 2.0], 0.5).unwrap());
        assert!(reflected_quantile_check(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap());
        assert_eq!(maximal_quantile(&[-1.0, -2.0, -3.0, -4.0], 0.75).unwrap(), -1.0);
        assert_eq!(maximal_quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.0);
    }

    #[test]
    fn reflected_quantile_sweep() {
        let mut rng = aux_stream(9, 1);
        for s in 0..200 {
            let n = 1 + s % 37;
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3..4) as f64).collect();
            for k in 1..=9 {
                assert!(reflected_quantile_check(&x, k as f64 / 10.0).unwrap());
            }
        }
    }

    #[test]
    fn field_zero_row_and_single_sample() {
        let grid = GridSpec::uniform(1.0, 5, 0.25, 0.75, 3).unwrap();
        let spec = ProcessSpec::fbm(1.0).unwrap();
        let e = simulate_fbm(&grid, 1.0, 1, 4).unwrap();
        let w = quantile_field(&e, &grid, &spec).unwrap();
        for i in 0..3 {
            assert_eq!(w.get(0, i), 0.0);
        }
        // n = 1 at the median: W_1(t, ½) = X_1(t).
        for k in 0..5 {
            assert_eq!(w.get(k, 1), e.value(0, k));
        }
        let other = GridSpec::uniform(1.0, 6, 0.25, 0.75, 3).unwrap();
        assert!(quantile_field(&e, &other, &spec).is_err());
    }

    proptest! {
        #[test]
        fn contraction(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..64)) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ox = order_statistics(&x);
            let oy = order_statistics(&y);
            let lhs = ox.iter().zip(&oy).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let rhs = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(lhs <= rhs);
        }

        #[test]
        fn inverse_consistency(x in prop::collection::vec(-100i32..100, 1..40), k in 0usize..40) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let n = x.len();
            let k = k % n + 1;
            let sorted = order_statistics(&x);
            let gap = sorted.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(1.0, f64::min);
            for alpha in [(k as f64 - 1.0 / 3.0) / n as f64, (k as f64 + 1.0 / 3.0) / n as f64] {
                if !(alpha > 0.0 && alpha < 1.0) { continue; }
                let q = empirical_quantile(&x, alpha).unwrap();
                prop_assert!(ecdf(&x, q) >= alpha);
                prop_assert!(ecdf(&x, q - 0.5 * gap) < alpha);
            }
        }

        #[test]
        fn quantile_monotone_left_continuous(x in prop::collection::vec(-50.0f64..50.0, 1..30)) {
            let n = x.len();
            let mut prev = f64::NEG_INFINITY;
            for step in 1..200 {
                let alpha = step as f64 / 200.0;
                let q = empirical_quantile(&x, alpha).unwrap();
                prop_assert!(q >= prev);
                prev = q;
            }
            // Constant on (k/n, (k+1)/n].
            for k in 0..n.saturating_sub(1) {
                let lo = (k as f64 + 1e-9) / n as f64 + 1e-12;
                let hi = (k + 1) as f64 / n as f64;
                if lo <= 0.0 || hi >= 1.0 { continue; }
                prop_assert_eq!(empirical_quantile(&x, lo).unwrap(), empirical_quantile(&x, hi).unwrap());
            }
        }
    }
}
