//! Disorder-averaged observables. Disorder `j` is always drawn from
//! `stream.child(j)`, so runs with the same stream see the same systems, and
//! by nesting the size-`k` system is the restriction of any larger one.

use std::f64::consts::SQRT_2;

use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::disorder::{Disorder, PertSpec, MAX_ENUM};
use super::enumerate::{enumerate, summarize, GibbsTable};
use super::mcmc::{run_chains, McmcOptions};
use crate::error::{Error, Result};
use crate::gg::{gg_estimate, gg_terms, GgEstimate};
use crate::model::ModelSpec;
use crate::overlap::{OverlapMatrix, TestFunction};
use crate::stats::Estimate;
use crate::stream::RandomStream;

fn disorders<T: Send>(m: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one disorder".into()));
    }
    (0..m).into_par_iter().map(f).collect()
}

fn check_enum(n: usize) -> Result<()> {
    if n > MAX_ENUM {
        return Err(Error::TooLarge { size: n, limit: MAX_ENUM });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one spin".into()));
    }
    Ok(())
}

/// `(1/N) log Z_N` averaged over `m` disorders.
pub fn free_energy(model: &ModelSpec, n: usize, m: usize, stream: &RandomStream) -> Result<Estimate> {
    free_energy_with(model, n, m, None, stream)
}

pub fn free_energy_with(
    model: &ModelSpec,
    n: usize,
    m: usize,
    pert: Option<&PertSpec>,
    stream: &RandomStream,
) -> Result<Estimate> {
    check_enum(n)?;
    let xs = disorders(m, |j| {
        let d = Disorder::draw_with(model, n, pert, &stream.child(j as u64))?;
        Ok(summarize(&d, model.beta)?.log_z / n as f64)
    })?;
    Ok(Estimate::from_samples(&xs))
}

/// `max_sigma H_N(sigma) / (N sqrt 2)` averaged over disorders; with the
/// diagonal kept this is the `i < j` ground-state density plus a mean-zero
/// diagonal term.
pub fn ground_state_density(model: &ModelSpec, n: usize, m: usize, stream: &RandomStream) -> Result<Estimate> {
    check_enum(n)?;
    let xs = disorders(m, |j| {
        let d = Disorder::draw(model, n, &stream.child(j as u64))?;
        Ok(summarize(&d, model.beta)?.max_h / (n as f64 * SQRT_2))
    })?;
    Ok(Estimate::from_samples(&xs))
}

/// How replicas are produced for each disorder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sampler {
    Exact,
    /// `chains` independent chains; pairs `(2c, 2c+1)` give overlap samples.
    Mcmc { opts: McmcOptions, chains: usize },
}

/// Overlap matrix of `n` replicas: i.i.d. draws from the Gibbs table, or the
/// last states of `n` independent chains.
pub fn sample_replicas(
    disorder: &Disorder,
    beta: f64,
    n: usize,
    sampler: &Sampler,
    stream: &RandomStream,
) -> Result<OverlapMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    match sampler {
        Sampler::Exact => {
            let table = enumerate(disorder, beta)?;
            let states = table.sample_states(&table.alias(), n, &mut stream.rng());
            Ok(table.overlaps_of(&states))
        }
        Sampler::Mcmc { opts, .. } => Ok(run_chains(disorder, beta, n, opts, stream)?.replicas()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapHistogram {
    /// Bin edges on `[-1, 1]`.
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
    pub se: Vec<f64>,
    /// `max_b |p(b) - p(mirror b)|` and the standard error at that bin.
    pub symmetry_defect: f64,
    pub symmetry_se: f64,
    pub symmetric: bool,
    pub disorders: usize,
}

impl OverlapHistogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lo,hi,mass,se\n");
        for b in 0..self.mass.len() {
            s.push_str(&format!("{},{},{},{}\n", self.edges[b], self.edges[b + 1], self.mass[b], self.se[b]));
        }
        s
    }
}

/// Spreads mass at overlap `R = 1 - 2d/n` over `bins` equal bins on
/// `[-1, 1]`, mirror symmetric: `R` and `-R` always land in mirrored bins, and
/// `R = 0` on a bin edge is split evenly. Integer arithmetic keeps edge cases
/// exact.
fn bin_mass(d: usize, n: usize, bins: usize, out: &mut [f64], w: f64) {
    // bin of (n - a) / n * bins for a > n/2, i.e. of a negative overlap
    let low = |a: usize| ((n - a) * bins / n).min(bins - 1);
    if 2 * d > n {
        out[low(d)] += w;
    } else if 2 * d < n {
        out[bins - 1 - low(n - d)] += w;
    } else if bins % 2 == 1 {
        out[bins / 2] += w;
    } else {
        out[bins / 2 - 1] += 0.5 * w;
        out[bins / 2] += 0.5 * w;
    }
}

/// Disorder-averaged law of `R_{1,2}`; `bins = None` uses the `N + 1`
/// attainable values as bins.
pub fn overlap_histogram(
    model: &ModelSpec,
    n: usize,
    m: usize,
    bins: Option<usize>,
    sampler: &Sampler,
    stream: &RandomStream,
) -> Result<OverlapHistogram> {
    check_enum(n)?;
    let bins = bins.unwrap_or(n + 1);
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be positive".into()));
    }
    let laws = disorders(m, |j| {
        let ds = stream.child(j as u64);
        let d = Disorder::draw(model, n, &ds)?;
        let law = match sampler {
            Sampler::Exact => enumerate(&d, model.beta)?.overlap_law(),
            Sampler::Mcmc { opts, chains } => {
                run_chains(&d, model.beta, (*chains).max(2), opts, &ds.fork("mcmc"))?.overlap_law()
            }
        };
        let mut out = vec![0.0; bins];
        for (dist, p) in law.iter().enumerate() {
            bin_mass(dist, n, bins, &mut out, *p);
        }
        Ok(out)
    })?;
    let mut mass = vec![0.0; bins];
    let mut se = vec![0.0; bins];
    let (mut defect, mut defect_se, mut symmetric) = (0.0, 0.0, true);
    for b in 0..bins {
        let col: Vec<f64> = laws.iter().map(|l| l[b]).collect();
        let e = Estimate::from_samples(&col);
        mass[b] = e.mean;
        se[b] = e.se;
        let diff: Vec<f64> = laws.iter().map(|l| l[b] - l[bins - 1 - b]).collect();
        let d = Estimate::from_samples(&diff);
        if d.mean.abs() > 3.0 * d.se + 1e-12 {
            symmetric = false;
        }
        if d.mean.abs() > defect {
            defect = d.mean.abs();
            defect_se = d.se;
        }
    }
    let edges = (0..=bins).map(|b| -1.0 + 2.0 * b as f64 / bins as f64).collect();
    Ok(OverlapHistogram { edges, mass, se, symmetry_defect: defect, symmetry_se: defect_se, symmetric, disorders: m })
}

/// Rate of `R_{2,3} < min(R_{1,2}, R_{1,3}) - eps` over sampled replica
/// triples; `abs` compares `|R|` instead of `R`.
pub fn ultrametric_violation(
    model: &ModelSpec,
    n: usize,
    eps: f64,
    m: usize,
    triples: usize,
    abs: bool,
    stream: &RandomStream,
) -> Result<Estimate> {
    check_enum(n)?;
    if triples == 0 {
        return Err(Error::InvalidParameter("need at least one triple".into()));
    }
    let rates = disorders(m, |j| {
        let ds = stream.child(j as u64);
        let table = enumerate(&Disorder::draw(model, n, &ds)?, model.beta)?;
        let alias = table.alias();
        let mut rng = ds.fork("triples").rng();
        let ov = |a: u32, b: u32| {
            let r = 1.0 - 2.0 * (a ^ b).count_ones() as f64 / n as f64;
            if abs {
                r.abs()
            } else {
                r
            }
        };
        let mut hits = 0usize;
        for _ in 0..triples {
            let (s1, s2, s3) = (alias.sample(&mut rng) as u32, alias.sample(&mut rng) as u32, alias.sample(&mut rng) as u32);
            if ov(s2, s3) < ov(s1, s2).min(ov(s1, s3)) - eps {
                hits += 1;
            }
        }
        Ok(hits as f64 / triples as f64)
    })?;
    Ok(Estimate::from_samples(&rates))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavitySeries {
    /// `E log Z_k`, `k = 0..=n_max` (`Z_0 = 1`).
    pub log_z: Vec<Estimate>,
    /// `A_k = E log Z_{k+1} - E log Z_k`, `k = 0..n_max`, from paired disorders.
    pub increments: Vec<Estimate>,
}

impl CavitySeries {
    /// `(1/N) sum_{k<N} A_k`.
    pub fn cesaro(&self, n: usize) -> f64 {
        self.increments[..n].iter().map(|a| a.mean).sum::<f64>() / n as f64
    }
}

pub fn cavity_series(model: &ModelSpec, n_max: usize, m: usize, stream: &RandomStream) -> Result<CavitySeries> {
    check_enum(n_max)?;
    let rows = disorders(m, |j| {
        let ds = stream.child(j as u64);
        let mut row = vec![0.0; n_max + 1];
        for (k, v) in row.iter_mut().enumerate().skip(1) {
            *v = summarize(&Disorder::draw(model, k, &ds)?, model.beta)?.log_z;
        }
        Ok(row)
    })?;
    let log_z = (0..=n_max)
        .map(|k| Estimate::from_samples(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .collect();
    let increments = (0..n_max)
        .map(|k| Estimate::from_samples(&rows.iter().map(|r| r[k + 1] - r[k]).collect::<Vec<_>>()))
        .collect();
    Ok(CavitySeries { log_z, increments })
}

/// `A_N` alone; needs `N + 1 <= 22`.
pub fn cavity_increment(model: &ModelSpec, n: usize, m: usize, stream: &RandomStream) -> Result<Estimate> {
    check_enum(n + 1)?;
    let xs = disorders(m, |j| {
        let ds = stream.child(j as u64);
        let upper = summarize(&Disorder::draw(model, n + 1, &ds)?, model.beta)?.log_z;
        let lower = if n == 0 { 0.0 } else { summarize(&Disorder::draw(model, n, &ds)?, model.beta)?.log_z };
        Ok(upper - lower)
    })?;
    Ok(Estimate::from_samples(&xs))
}

/// Finite-`N` Ghirlanda-Guerra residual with exact Gibbs averages per
/// disorder (sampled only for test functions of several overlaps).
#[allow(clippy::too_many_arguments)]
pub fn gg_residual(
    model: &ModelSpec,
    n_spins: usize,
    f: &TestFunction,
    n: usize,
    p: u32,
    m: usize,
    pert: Option<&PertSpec>,
    samples: usize,
    stream: &RandomStream,
) -> Result<GgEstimate> {
    check_enum(n_spins)?;
    crate::gg::check_gg_args(f, n, p)?;
    let rows = disorders(m, |j| {
        let ds = stream.child(j as u64);
        let table: GibbsTable = enumerate(&Disorder::draw_with(model, n_spins, pert, &ds)?, model.beta)?;
        gg_terms(&table, f, n, p, samples, &mut ds.fork("replicas").rng())
    })?;
    Ok(gg_estimate(&rows, n))
}
