//! Minimization of the functional over `r`-step order parameters.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nm::{self, NmOptions};
use super::recursion::{solve_with_rule, ParisiGrid};
use crate::error::{Error, Result};
use crate::fop::{validate_fop, FunctionalOrderParameter};
use crate::gaussian::gauss_hermite;
use crate::model::ModelSpec;
use crate::stream::RandomStream;

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub restarts: usize,
    pub nm: NmOptions,
    /// `None` uses [`ParisiGrid::default_for`].
    pub grid: Option<ParisiGrid>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { restarts: 8, nm: NmOptions::default(), grid: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinResult {
    pub r: usize,
    pub fop: FunctionalOrderParameter,
    pub value: f64,
    pub evals: usize,
}

pub const MAX_STEPS: usize = 6;

/// Best `r`-step order parameter: `r` free atoms below the fixed atom `q = 1`
/// and `r` free CDF values below the fixed final value 1.
pub fn minimize(model: &ModelSpec, r: usize, stream: &RandomStream) -> Result<MinResult> {
    minimize_with(model, r, stream, &MinimizeOptions::default())
}

pub fn minimize_with(
    model: &ModelSpec,
    r: usize,
    stream: &RandomStream,
    opts: &MinimizeOptions,
) -> Result<MinResult> {
    Ok(minimize_chain(model, r, stream, opts)?.pop().expect("nonempty chain"))
}

/// Minimizes for `r = 1..=r_max`, each step warm-started from the previous
/// optimum embedded in the larger family, so values are nonincreasing in `r`.
pub fn minimize_chain(
    model: &ModelSpec,
    r_max: usize,
    stream: &RandomStream,
    opts: &MinimizeOptions,
) -> Result<Vec<MinResult>> {
    if !(1..=MAX_STEPS).contains(&r_max) {
        return Err(Error::OutOfRange { value: r_max as f64, lo: 1.0, hi: MAX_STEPS as f64 });
    }
    model.validate()?;
    if model.h != 0.0 {
        return Err(Error::InvalidParameter("the recursion is implemented for h = 0".into()));
    }
    let grid = opts.grid.clone().unwrap_or_else(|| ParisiGrid::default_for(model));
    grid.validate()?;
    let quad = gauss_hermite(grid.order)?;
    let mut out: Vec<MinResult> = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let warm = match out.last() {
            Some(prev) => encode(&prev.fop, r),
            None => encode(&FunctionalOrderParameter::delta(0.5)?, r),
        };
        let level_stream = stream.child(r as u64);
        let runs: Vec<Result<MinResult>> = (0..opts.restarts.max(1))
            .into_par_iter()
            .map(|i| {
                let start = if i == 0 {
                    warm.clone()
                } else {
                    let mut rng = level_stream.child(i as u64).rng();
                    (0..2 * r).map(|_| rng.random_range(0.0..FRAC_PI_2)).collect()
                };
                let mut bad = false;
                let mut evals = 0;
                let mut objective = |theta: &[f64]| {
                    evals += 1;
                    let fop = decode(theta);
                    if validate_fop(&fop).is_err() {
                        bad = true;
                        return f64::INFINITY;
                    }
                    let v = solve_with_rule(&fop, model, &grid, &quad).total;
                    if !v.is_finite() {
                        bad = true;
                        return f64::INFINITY;
                    }
                    v
                };
                let res = nm::minimize(&mut objective, &start, &opts.nm);
                if bad {
                    return Err(Error::OptimizerDiverged(format!("restart {i} at r = {r}")));
                }
                Ok(MinResult { r, fop: decode(&res.x), value: res.f, evals })
            })
            .collect();
        let mut best: Option<MinResult> = None;
        let mut evals = 0;
        for run in runs {
            let run = run?;
            evals += run.evals;
            if best.as_ref().is_none_or(|b| run.value < b.value) {
                best = Some(run);
            }
        }
        let mut best = best.expect("at least one restart");
        best.evals = evals;
        if let Some(prev) = out.last() {
            // the warm start is feasible, so this only guards rounding
            if best.value > prev.value {
                best.value = prev.value;
                best.fop = prev.fop.clone();
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// `theta = (u_0..u_{r-1}, v_0..v_{r-1})` with atoms `sin^2 u` and CDF values
/// `sin^2 v`, each sorted. Both maps reach 0 and 1 at finite arguments, so
/// degenerate optima (all mass at 0, say) are attainable. Coinciding atoms are
/// merged, keeping the larger CDF value.
pub fn decode(theta: &[f64]) -> FunctionalOrderParameter {
    let r = theta.len() / 2;
    let mut qs: Vec<f64> = theta[..r].iter().map(|u| u.sin().powi(2)).collect();
    let mut cs: Vec<f64> = theta[r..].iter().map(|v| v.sin().powi(2)).collect();
    qs.sort_by(f64::total_cmp);
    cs.sort_by(f64::total_cmp);
    qs.push(1.0);
    cs.push(1.0);
    let mut out_q: Vec<f64> = Vec::with_capacity(r + 1);
    let mut out_c: Vec<f64> = Vec::with_capacity(r + 1);
    for (q, c) in qs.into_iter().zip(cs) {
        let q = q.clamp(0.0, 1.0);
        match out_q.last() {
            Some(&last) if q - last <= 1e-12 => {
                *out_q.last_mut().unwrap() = q.max(last);
                *out_c.last_mut().unwrap() = c;
            }
            _ => {
                out_q.push(q);
                out_c.push(c);
            }
        }
    }
    *out_q.last_mut().unwrap() = 1.0;
    *out_c.last_mut().unwrap() = 1.0;
    FunctionalOrderParameter { qs: out_q, cdf: out_c }
}

/// Inverse of [`decode`] for an order parameter with at most `r` atoms below
/// 1, padding with atoms at 1.
pub fn encode(fop: &FunctionalOrderParameter, r: usize) -> Vec<f64> {
    let fop = fop.with_top_atom();
    let k = fop.qs.len() - 1;
    let mut u: Vec<f64> = fop.qs[..k].iter().map(|q| q.sqrt().asin()).collect();
    let mut v: Vec<f64> = fop.cdf[..k].iter().map(|c| c.sqrt().asin()).collect();
    u.truncate(r);
    v.truncate(r);
    while u.len() < r {
        u.push(FRAC_PI_2);
        v.push(FRAC_PI_2);
    }
    u.extend(v);
    u
}
