//! Replica-symmetric analysis, the dA-T condition and ground-state brackets.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use super::minimize::{minimize_chain, MinimizeOptions};
use crate::error::{Error, Result};
use crate::gaussian::{gauss_hermite, QuadratureRule};
use crate::model::ModelSpec;
use crate::stats::log_cosh;
use crate::stream::RandomStream;

const RS_ORDER: usize = 160;

fn rule() -> QuadratureRule {
    gauss_hermite(RS_ORDER).expect("valid order")
}

fn require_sk(model: &ModelSpec) -> Result<()> {
    model.validate()?;
    if !model.is_pure_sk() || model.mixture[1] != 1.0 {
        return Err(Error::InvalidParameter("requires the SK mixture (0, 1)".into()));
    }
    Ok(())
}

/// Value of the functional at the Dirac order parameter at `q`:
/// `log 2 + E log ch(z sqrt(xi'(q)) + h) + (xi'(1) - xi'(q))/2 - (1/2) int_q^1 xi''(t) t dt`,
/// which for SK is `log 2 + E log ch(beta z sqrt(2q) + h) + beta^2 (1-q)^2 / 2`.
pub fn rs_value(model: &ModelSpec, q: f64) -> f64 {
    let quad = rule();
    let s = model.xi_prime(q).max(0.0).sqrt();
    let e = quad.expect(|z| log_cosh(s * z + model.h));
    let top = model.xi_prime(1.0) - model.xi_prime(q);
    let corr = model.xi_prime(1.0) - model.xi_prime(q) * q - (model.xi(1.0) - model.xi(q));
    LN_2 + e + 0.5 * top - 0.5 * corr
}

/// Minimum of [`rs_value`] over `q in [0,1]`: a scan followed by
/// golden-section refinement around the best scan point.
pub fn rs_minimum(model: &ModelSpec) -> (f64, f64) {
    let n = 200;
    let (mut best_q, mut best_v) = (0.0, rs_value(model, 0.0));
    for i in 1..=n {
        let q = i as f64 / n as f64;
        let v = rs_value(model, q);
        if v < best_v {
            best_q = q;
            best_v = v;
        }
    }
    let (mut a, mut b) = ((best_q - 1.0 / n as f64).max(0.0), (best_q + 1.0 / n as f64).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (rs_value(model, c), rs_value(model, d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = rs_value(model, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = rs_value(model, d);
        }
    }
    let q = 0.5 * (a + b);
    let v = rs_value(model, q);
    if v < best_v {
        (q, v)
    } else {
        (best_q, best_v)
    }
}

fn th2_mean(quad: &QuadratureRule, beta: f64, h: f64, q: f64) -> f64 {
    let s = beta * (2.0 * q).sqrt();
    quad.expect(|z| (s * z + h).tanh().powi(2))
}

/// Largest solution of `q = E th^2(beta z sqrt(2q) + h)`.
pub fn rs_fixed_point(model: &ModelSpec) -> Result<f64> {
    require_sk(model)?;
    if model.h < 0.0 {
        return Err(Error::InvalidParameter("h must be nonnegative".into()));
    }
    let quad = rule();
    let g = |q: f64| th2_mean(&quad, model.beta, model.h, q) - q;
    // scan from the top for the first point where g > 0; g(1) < 0 always
    let mut grid: Vec<f64> = (1..=400).map(|i| i as f64 / 400.0).collect();
    grid.extend((3..=14).map(|k| 10f64.powi(-k)));
    grid.sort_by(|a, b| b.total_cmp(a));
    let mut upper = 1.0;
    for &q in &grid {
        if g(q) > 0.0 {
            let (mut lo, mut hi) = (q, upper);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        upper = q;
    }
    if model.h == 0.0 {
        Ok(0.0)
    } else {
        // h > 0 makes g(0) > 0, so a root lies below the smallest scan point
        let (mut lo, mut hi) = (0.0, upper);
        while hi - lo > 1e-16 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatReport {
    pub q: f64,
    pub lhs: f64,
    pub in_rs_region: bool,
}

/// `beta^2 E ch^{-4}(beta z sqrt(2q) + h)` at the RS fixed point.
pub fn dat_condition(model: &ModelSpec) -> Result<DatReport> {
    let q = rs_fixed_point(model)?;
    let quad = rule();
    let s = model.beta * (2.0 * q).sqrt();
    let lhs = model.beta * model.beta * quad.expect(|z| (s * z + model.h).cosh().powi(-4));
    Ok(DatReport { q, lhs, in_rs_region: lhs <= 0.5 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub r: usize,
    pub value_r: f64,
    pub value_next: f64,
    /// `(value_r - value_{r+1}) / (beta sqrt 2)`: movement of both ends when
    /// one more step is allowed.
    pub gap: f64,
}

/// Bracket for `lim (1/N) E max_s sum_{i<j} g_ij s_i s_j / sqrt(N)`:
/// `((F - log 2) / beta, F / beta) / sqrt 2` with `F` the `r`-step minimum.
pub fn ground_state_bracket(
    model: &ModelSpec,
    r: usize,
    stream: &RandomStream,
    opts: &MinimizeOptions,
) -> Result<Bracket> {
    if model.beta <= 0.0 {
        return Err(Error::InvalidParameter("beta must be positive".into()));
    }
    let chain = minimize_chain(model, r + 1, stream, opts)?;
    let f = chain[r - 1].value;
    let f_next = chain[r].value;
    let scale = model.beta * SQRT_2;
    Ok(Bracket {
        lo: (f - LN_2) / scale,
        hi: f / scale,
        r,
        value_r: f,
        value_next: f_next,
        gap: (f - f_next) / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rs_value_at_zero_is_annealed() {
        let m = ModelSpec::sk(0.5);
        assert!((rs_value(&m, 0.0) - (LN_2 + 0.125)).abs() < 1e-14);
    }

    #[test]
    fn high_temperature_fixed_point_is_zero() {
        assert_eq!(rs_fixed_point(&ModelSpec::sk(0.5)).unwrap(), 0.0);
        assert_eq!(rs_fixed_point(&ModelSpec::sk(0.5f64.sqrt())).unwrap(), 0.0);
        let d = dat_condition(&ModelSpec::sk(0.5)).unwrap();
        assert!((d.lhs - 0.25).abs() < 1e-14 && d.in_rs_region);
    }

    #[test]
    fn field_gives_positive_root() {
        let q = rs_fixed_point(&ModelSpec::sk(0.3).with_field(0.5)).unwrap();
        assert!(q > 0.0);
        let quad = rule();
        assert!((th2_mean(&quad, 0.3, 0.5, q) - q).abs() < 1e-12);
    }
}
