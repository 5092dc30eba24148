//! Ghirlanda-Guerra residuals for any measure that can average functions of
//! replica overlaps.
//!
//! For `n >= 2`, `p >= 1` and a test function `f` of the overlaps of the
//! first `n` replicas,
//! `Delta = |E<f R_{1,n+1}^p> - E<f> E<R_{1,2}^p>/n - sum_{l=2}^n E<f R_{1,l}^p>/n|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlap::{OverlapMatrix, TestFunction};
use crate::stream::StreamRng;

/// A random measure (one disorder, one cascade) seen through its replicas.
pub trait ReplicaMeasure {
    /// `<h(R_{1,2})>`.
    fn pair_average(&self, h: &dyn Fn(f64) -> f64) -> f64;
    /// `<f(R_{1,2}) g(R_{1,3})>`.
    fn chain_average(&self, f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64) -> f64;
    /// `count` independent overlap matrices of `n` replicas each.
    fn sample_overlaps(&self, n: usize, count: usize, rng: &mut StreamRng) -> Vec<OverlapMatrix>;
}

/// Per-measure values `(a, b, c, e)`: `<f R_{1,n+1}^p>`, `<f>`, `<R_{1,2}^p>`
/// and `sum_{l=2}^n <f R_{1,l}^p>`.
pub type GgTerms = [f64; 4];

pub fn check_gg_args(f: &TestFunction, n: usize, p: u32) -> Result<()> {
    if !(2..=6).contains(&n) {
        return Err(Error::OutOfRange { value: n as f64, lo: 2.0, hi: 6.0 });
    }
    if !(1..=4).contains(&p) {
        return Err(Error::OutOfRange { value: p as f64, lo: 1.0, hi: 4.0 });
    }
    if f.max_replica() > n || f.factors.iter().any(|x| x.a == 0 || x.b == 0) {
        return Err(Error::InvalidParameter(format!("test function must use replicas 1..={n}")));
    }
    Ok(())
}

/// Exact when `f` reads a single overlap; otherwise `<f ...>` terms are
/// averaged over `samples` draws of `n + 1` replicas (`<R^p>` stays exact).
pub fn gg_terms(
    mu: &dyn ReplicaMeasure,
    f: &TestFunction,
    n: usize,
    p: u32,
    samples: usize,
    rng: &mut StreamRng,
) -> Result<GgTerms> {
    check_gg_args(f, n, p)?;
    let pw = move |x: f64| x.powi(p as i32);
    let c = mu.pair_average(&pw);
    if f.factors.is_empty() {
        return Ok([f.coef * c, f.coef, c, f.coef * c * (n - 1) as f64]);
    }
    if let Some((i, j)) = f.single_pair() {
        let fx = |x: f64| f.pair_fn(x);
        let b = mu.pair_average(&fx);
        let fr = |x: f64| f.pair_fn(x) * pw(x);
        // <f(R_ij) R_{1,l}^p>
        let with = |l: usize| -> f64 {
            let shared = [i, j].iter().filter(|&&k| k == 1 || k == l).count();
            match shared {
                2 => mu.pair_average(&fr),
                1 => mu.chain_average(&fx, &pw),
                _ => b * c,
            }
        };
        let a = with(n + 1);
        let e: f64 = (2..=n).map(with).sum();
        return Ok([a, b, c, e]);
    }
    let mut acc = [0.0; 4];
    for m in mu.sample_overlaps(n + 1, samples.max(1), rng) {
        let fv = f.eval_matrix(&m);
        acc[0] += fv * pw(m.get(0, n));
        acc[1] += fv;
        acc[3] += (1..n).map(|l| fv * pw(m.get(0, l))).sum::<f64>();
    }
    let k = samples.max(1) as f64;
    Ok([acc[0] / k, acc[1] / k, c, acc[3] / k])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GgEstimate {
    pub delta: f64,
    /// Delta-method standard error of the signed residual.
    pub se: f64,
    /// Means of `(a, b, c, e)` over measures.
    pub terms: [f64; 4],
    pub measures: usize,
}

impl GgEstimate {
    pub fn within(&self, k: f64) -> bool {
        // floor for residuals that vanish up to rounding
        self.delta <= k * self.se + 1e-12
    }
}

/// Combines per-measure terms into `Delta` with its standard error.
pub fn gg_estimate(rows: &[GgTerms], n: usize) -> GgEstimate {
    let m = rows.len();
    let nf = n as f64;
    let mut mean = [0.0; 4];
    for r in rows {
        for k in 0..4 {
            mean[k] += r[k];
        }
    }
    mean.iter_mut().for_each(|x| *x /= m.max(1) as f64);
    let signed = mean[0] - mean[1] * mean[2] / nf - mean[3] / nf;
    let grad = [1.0, -mean[2] / nf, -mean[1] / nf, -1.0 / nf];
    let se = if m > 1 {
        // variance of the linearized per-measure contribution
        let lin: Vec<f64> = rows
            .iter()
            .map(|r| (0..4).map(|k| grad[k] * (r[k] - mean[k])).sum::<f64>())
            .collect();
        let ss: f64 = lin.iter().map(|x| x * x).sum();
        (ss / (m - 1) as f64 / m as f64).sqrt()
    } else {
        0.0
    };
    GgEstimate { delta: signed.abs(), se, terms: mean, measures: m }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rows_give_exact_delta() {
        let rows = vec![[0.5, 1.0, 0.5, 0.5]; 10];
        let e = gg_estimate(&rows, 2);
        assert!(e.delta.abs() < 1e-15 && e.se == 0.0);
    }

    #[test]
    fn argument_checks() {
        let f = TestFunction::parse("R13^2").unwrap();
        assert!(check_gg_args(&f, 2, 2).is_err());
        assert!(check_gg_args(&f, 3, 2).is_ok());
        assert!(check_gg_args(&f, 7, 2).is_err());
        assert!(check_gg_args(&f, 3, 5).is_err());
    }
}
