//! Monte Carlo evaluation of
//! `log 2 + E log sum_a v_a ch(beta z(a)) - E log sum_a v_a exp(beta y(a))`
//! over cascades and fields, with `E z z' = 2 q` and `E y y' = q^2`.

use std::f64::consts::{LN_2, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cascade::{Cascade, CascadeParams, TRUNCATION_TOL};
use super::field::tree_gaussian;
use crate::error::{Error, Result};
use crate::gaussian::gauss_hermite;
use crate::model::ModelSpec;
use crate::parisi::{solve_recursion, ParisiGrid};
use crate::stats::{log_cosh, log_sum_exp, Estimate};
use crate::stream::RandomStream;

pub const MAX_BETA: f64 = 1.5;
pub const MAX_DEPTH: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuerraOptions {
    pub cascades: usize,
    /// Independent field draws per cascade.
    pub fields: usize,
    /// Subtract `sum_a v_a log ch(beta z(a))` and `beta sum_a v_a y(a)`, whose
    /// expectations are known, from the two logarithms.
    pub control_variates: bool,
}

impl Default for GuerraOptions {
    fn default() -> Self {
        Self { cascades: 4000, fields: 1, control_variates: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuerraEstimate {
    pub estimate: f64,
    pub se: f64,
    /// Mean truncation diagnostic over the cascades.
    pub diagnostic: f64,
    pub cascades: usize,
}

// E log ch(s xi) by the trapezoid rule; log ch is entire near the real line,
// so the rule converges geometrically.
fn expect_log_cosh(s: f64) -> f64 {
    let n = 4001;
    let l = 12.0;
    let h = 2.0 * l / (n - 1) as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let x = -l + i as f64 * h;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * log_cosh(s * x) * (-0.5 * x * x).exp();
    }
    acc * h / (2.0 * std::f64::consts::PI).sqrt()
}

/// The same quantity from the backward recursion: `log 2 + P(zeta) -
/// beta^2 int zeta(t) t dt` for the order parameter of `params`.
pub fn guerra_analytic(params: &CascadeParams, beta: f64) -> Result<f64> {
    let model = ModelSpec::sk(beta);
    Ok(solve_recursion(&params.fop()?, &model, &ParisiGrid::default_for(&model))?.total)
}

fn check(params: &CascadeParams, beta: f64) -> Result<()> {
    params.validate()?;
    if !(0.0..=MAX_BETA).contains(&beta) {
        return Err(Error::OutOfRange { value: beta, lo: 0.0, hi: MAX_BETA });
    }
    if params.depth() > MAX_DEPTH {
        return Err(Error::OutOfRange { value: params.depth() as f64, lo: 1.0, hi: MAX_DEPTH as f64 });
    }
    if *params.qs.last().unwrap() != 1.0 {
        return Err(Error::InvalidParameter("the last atom must be q_r = 1".into()));
    }
    Ok(())
}

pub fn guerra_rhs_mc(params: &CascadeParams, beta: f64, cascades: usize, stream: &RandomStream) -> Result<GuerraEstimate> {
    guerra_rhs_mc_with(params, beta, &GuerraOptions { cascades, ..GuerraOptions::default() }, stream)
}

/// Cascade `j` comes from `stream.child(j).fork("cascade")`, its `z` and `y`
/// fields from the `"z"` and `"y"` forks. Fails with `TruncationUnstable` when
/// the mean diagnostic exceeds the gate.
pub fn guerra_rhs_mc_with(
    params: &CascadeParams,
    beta: f64,
    opts: &GuerraOptions,
    stream: &RandomStream,
) -> Result<GuerraEstimate> {
    check(params, beta)?;
    if opts.cascades == 0 || opts.fields == 0 {
        return Err(Error::InvalidParameter("need at least one cascade and one field".into()));
    }
    let gh = gauss_hermite(40)?;
    let r = params.depth();
    let cz = expect_log_cosh(beta * SQRT_2);
    let rows: Vec<(f64, f64)> = (0..opts.cascades)
        .into_par_iter()
        .map(|j| {
            let ds = stream.child(j as u64);
            let tree = Cascade::build(params, &ds.fork("cascade"))?;
            let leaves = &tree.mass[r];
            let mut acc = 0.0;
            for f in 0..opts.fields {
                let z = tree_gaussian(&tree, 1, &ds.fork("z").child(f as u64));
                let y = tree_gaussian(&tree, 2, &ds.fork("y").child(f as u64));
                let sz = SQRT_2 * z.top_var.sqrt();
                let ty = y.top_var;
                // log-weights of leaves and dust pieces, leaf values first
                let mut lz = Vec::with_capacity(leaves.len() + tree.dust.len());
                let mut ly = Vec::with_capacity(lz.capacity());
                let (mut cv_z, mut cv_y) = (0.0, 0.0);
                for (i, &v) in leaves.iter().enumerate() {
                    let a = beta * SQRT_2 * z.leaves[i];
                    let b = beta * y.leaves[i];
                    lz.push(v.ln() + log_cosh(a));
                    ly.push(v.ln() + b);
                    cv_z += v * log_cosh(a);
                    cv_y += v * b;
                }
                for (p, &m) in tree.dust.iter().enumerate() {
                    let a = beta * SQRT_2 * z.parents[p];
                    let b = beta * y.parents[p];
                    // E ch(a + s eta) = ch(a) e^{s^2/2}, E e^{b + t eta} = e^{b + t^2/2}
                    lz.push(m.ln() + log_cosh(a) + 0.5 * (beta * sz).powi(2));
                    ly.push(m.ln() + b + 0.5 * beta * beta * ty);
                    if opts.control_variates {
                        cv_z += m * gh.expect(|x| log_cosh(a + beta * sz * x));
                    }
                    cv_y += m * b;
                }
                let mut val = LN_2 + log_sum_exp(&lz) - log_sum_exp(&ly);
                if opts.control_variates {
                    val += cz - cv_z + cv_y;
                }
                acc += val;
            }
            Ok((acc / opts.fields as f64, tree.diagnostic))
        })
        .collect::<Result<_>>()?;
    let e = Estimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let diagnostic = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    if diagnostic > TRUNCATION_TOL {
        return Err(Error::TruncationUnstable(diagnostic));
    }
    Ok(GuerraEstimate { estimate: e.mean, se: e.se, diagnostic, cascades: opts.cascades })
}
