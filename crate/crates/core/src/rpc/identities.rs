//! Ghirlanda-Guerra residuals and the invariance property on cascades.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cascade::{Cascade, CascadeParams, TRUNCATION_TOL};
use crate::error::{Error, Result};
use crate::gg::{check_gg_args, gg_estimate, gg_terms, GgEstimate};
use crate::overlap::{ScalarFn, TestFunction};
use crate::stats::Estimate;
use crate::stream::RandomStream;

fn ensemble<T: Send>(
    params: &CascadeParams,
    m: usize,
    stream: &RandomStream,
    f: impl Fn(&Cascade, &RandomStream) -> Result<T> + Sync + Send,
) -> Result<(Vec<T>, f64)> {
    params.validate()?;
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one cascade".into()));
    }
    let out: Vec<(T, f64)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let ds = stream.child(j as u64);
            let tree = Cascade::build(params, &ds.fork("cascade"))?;
            Ok((f(&tree, &ds)?, tree.diagnostic))
        })
        .collect::<Result<_>>()?;
    let diagnostic = out.iter().map(|o| o.1).sum::<f64>() / m as f64;
    if diagnostic > TRUNCATION_TOL {
        return Err(Error::TruncationUnstable(diagnostic));
    }
    Ok((out.into_iter().map(|o| o.0).collect(), diagnostic))
}

/// `Delta(f, n, p)` with Gibbs averages exact over each truncated cascade
/// (sampled with `samples` replica draws when `f` reads several overlaps).
pub fn gg_residual_rpc(
    params: &CascadeParams,
    f: &TestFunction,
    n: usize,
    p: u32,
    m: usize,
    samples: usize,
    stream: &RandomStream,
) -> Result<GgEstimate> {
    check_gg_args(f, n, p)?;
    let (rows, _) = ensemble(params, m, stream, |tree, ds| {
        gg_terms(tree, f, n, p, samples, &mut ds.fork("replicas").rng())
    })?;
    Ok(gg_estimate(&rows, n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapLawEstimate {
    /// `P(R_{1,2} = q_p)`, one entry per atom.
    pub law: Vec<Estimate>,
    /// `zeta_p - zeta_{p-1}`.
    pub expected: Vec<f64>,
    /// Sampled triples violating `R_23 >= min(R_12, R_13)`.
    pub ultrametric_violations: usize,
    pub min_overlap: f64,
    pub diagnostic: f64,
}

impl OverlapLawEstimate {
    /// Largest `|P - expected| / se` over atoms (0/0 counts as 0).
    pub fn max_z(&self) -> f64 {
        self.law
            .iter()
            .zip(&self.expected)
            .map(|(e, x)| {
                let d = (e.mean - x).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d / e.se
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Empirical one-overlap law from `triples` sampled replica triples per
/// cascade, with ultrametricity and positivity checked on every triple.
pub fn overlap_law_rpc(params: &CascadeParams, m: usize, triples: usize, stream: &RandomStream) -> Result<OverlapLawEstimate> {
    if triples == 0 {
        return Err(Error::InvalidParameter("need triples > 0".into()));
    }
    let atoms = params.qs.len();
    let (rows, diagnostic) = ensemble(params, m, stream, |tree, ds| {
        let mut rng = ds.fork("replicas").rng();
        let mut counts = vec![0.0; atoms];
        let mut bad = 0usize;
        let mut lo = f64::INFINITY;
        for _ in 0..triples {
            let reps = tree.sample_leaves(3, &mut rng);
            counts[tree.level(&reps[0], &reps[1])] += 1.0;
            let r = tree.overlaps(&reps);
            bad += r.ultrametric_violations();
            lo = lo.min(r.entries().iter().copied().fold(f64::INFINITY, f64::min));
        }
        counts.iter_mut().for_each(|c| *c /= triples as f64);
        Ok((counts, bad, lo))
    })?;
    let law = (0..atoms)
        .map(|p| Estimate::from_samples(&rows.iter().map(|r| r.0[p]).collect::<Vec<_>>()))
        .collect();
    Ok(OverlapLawEstimate {
        law,
        expected: params.overlap_law(),
        ultrametric_violations: rows.iter().map(|r| r.1).sum(),
        min_overlap: rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min),
        diagnostic,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceEstimate {
    /// `E <Phi>`.
    pub lhs: Estimate,
    /// `E < Phi exp(t sum_l F_l) / <exp(t F)>_^n >`.
    pub rhs: Estimate,
    /// Paired difference `lhs - rhs`.
    pub difference: Estimate,
    pub diagnostic: f64,
}

impl InvarianceEstimate {
    pub fn within(&self, k: f64) -> bool {
        self.difference.mean.abs() <= k * self.difference.se + 1e-12
    }
}

/// Both sides of the invariance identity for `n = fs.len()` replicas: each
/// cascade contributes the average over `tuples` sampled replica tuples,
/// with the inner average in `sigma` computed exactly over the tree.
/// `E <f_l(R_{1,2})>` is taken from the prescribed overlap law.
pub fn invariance_residual(
    params: &CascadeParams,
    phi: &TestFunction,
    fs: &[ScalarFn],
    t: f64,
    m: usize,
    tuples: usize,
    stream: &RandomStream,
) -> Result<InvarianceEstimate> {
    let n = fs.len();
    if !(1..=3).contains(&n) {
        return Err(Error::OutOfRange { value: n as f64, lo: 1.0, hi: 3.0 });
    }
    if phi.max_replica() > n {
        return Err(Error::InvalidParameter(format!("Phi must read replicas 1..={n}")));
    }
    if tuples == 0 || !t.is_finite() {
        return Err(Error::InvalidParameter("need tuples > 0 and finite t".into()));
    }
    let law = params.overlap_law();
    let means: Vec<f64> = fs.iter().map(|f| law.iter().zip(&params.qs).map(|(w, &q)| w * f.eval(q)).sum()).collect();
    let fns: Vec<Box<dyn Fn(f64) -> f64 + Sync>> =
        fs.iter().map(|f| Box::new(move |x: f64| f.eval(x)) as Box<dyn Fn(f64) -> f64 + Sync>).collect();
    let (rows, diagnostic) = ensemble(params, m, stream, |tree, ds| {
        let refs: Vec<&dyn Fn(f64) -> f64> = fns.iter().map(|b| b.as_ref() as &dyn Fn(f64) -> f64).collect();
        let mut rng = ds.fork("replicas").rng();
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..tuples {
            let reps = tree.sample_leaves(n, &mut rng);
            let r = tree.overlaps(&reps);
            let ph = phi.eval_matrix(&r);
            let expo: f64 = (0..n)
                .map(|l| (0..n).filter(|&k| k != l).map(|k| fs[k].eval(r.get(l, k))).sum::<f64>() + means[l])
                .sum();
            let d = tree.tilted_average(&reps, &refs, t);
            a += ph;
            b += ph * (t * expo).exp() / d.powi(n as i32);
        }
        Ok((a / tuples as f64, b / tuples as f64))
    })?;
    let lhs = Estimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let rhs = Estimate::from_samples(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let difference = Estimate::from_samples(&rows.iter().map(|r| r.0 - r.1).collect::<Vec<_>>());
    Ok(InvarianceEstimate { lhs, rhs, difference, diagnostic })
}
