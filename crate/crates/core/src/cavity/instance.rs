//! Random-link instances and exact small-N solvers for minimum matching and
//! the travelling salesman tour.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integral::{asymptotic_constant, IntegralEquationSpec, Kind};
use crate::error::{Error, Result};
use crate::stats::Estimate;
use crate::stream::RandomStream;

pub const MAX_MATCHING_N: usize = 18;
pub const MAX_TSP_N: usize = 14;

/// Symmetric edge lengths of the complete graph on `n` vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInstance {
    pub n: usize,
    len: Vec<f64>,
}

impl RandomInstance {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut len = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                len[i * n + j] = v;
                len[j * n + i] = v;
            }
        }
        Self { n, len }
    }

    /// I.i.d. lengths with density `~ x^{d-1}` at 0 and unit normalization:
    /// `Exp(1)` for `d = 1`, otherwise `d^{1/d} U^{1/d}`.
    pub fn random(n: usize, d: f64, stream: &RandomStream) -> Result<Self> {
        if !(d >= 1.0) || !d.is_finite() {
            return Err(Error::OutOfRange { value: d, lo: 1.0, hi: f64::INFINITY });
        }
        let mut rng = stream.rng();
        Ok(Self::from_fn(n, |_, _| {
            if d == 1.0 {
                rng.sample::<f64, _>(Exp1)
            } else {
                // 1 - U lies in (0, 1], so lengths stay positive
                let u: f64 = 1.0 - rng.random::<f64>();
                d.powf(1.0 / d) * u.powf(1.0 / d)
            }
        }))
    }

    #[inline]
    pub fn len(&self, i: usize, j: usize) -> f64 {
        self.len[i * self.n + j]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n: self.n, len: self.len.iter().map(|v| v * c).collect() }
    }
}

/// Minimum-weight perfect matching by dynamic programming over vertex
/// subsets, always pairing the lowest unmatched vertex.
pub fn min_matching_exact(inst: &RandomInstance) -> Result<f64> {
    let n = inst.n;
    if n > MAX_MATCHING_N {
        return Err(Error::TooLarge { size: n, limit: MAX_MATCHING_N });
    }
    if n % 2 == 1 {
        return Err(Error::OddN(n));
    }
    let full = (1usize << n) - 1;
    let mut best = vec![f64::INFINITY; 1 << n];
    best[0] = 0.0;
    // best[m]: cheapest perfect matching of the vertex set m
    for m in 1..=full {
        if m.count_ones() % 2 == 1 {
            continue;
        }
        let i = m.trailing_zeros() as usize;
        let rest = m & !(1 << i);
        let mut b = f64::INFINITY;
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            let v = best[rest & !(1 << j)] + inst.len(i, j);
            if v < b {
                b = v;
            }
        }
        best[m] = b;
    }
    Ok(best[full])
}

/// Shortest Hamiltonian cycle by the Held-Karp dynamic program.
pub fn tsp_exact(inst: &RandomInstance) -> Result<f64> {
    let n = inst.n;
    if n > MAX_TSP_N {
        return Err(Error::TooLarge { size: n, limit: MAX_TSP_N });
    }
    match n {
        0 | 1 => return Ok(0.0),
        2 => return Ok(2.0 * inst.len(0, 1)),
        _ => {}
    }
    // paths from vertex 0 through the subset m of {1..n-1}, ending at j
    let k = n - 1;
    let size = 1usize << k;
    let mut dp = vec![f64::INFINITY; size * k];
    for j in 0..k {
        dp[(1 << j) * k + j] = inst.len(0, j + 1);
    }
    for m in 1..size {
        for j in 0..k {
            if m >> j & 1 == 0 {
                continue;
            }
            let cur = dp[m * k + j];
            if !cur.is_finite() {
                continue;
            }
            let mut free = !m & (size - 1);
            while free != 0 {
                let t = free.trailing_zeros() as usize;
                free &= free - 1;
                let slot = &mut dp[(m | 1 << t) * k + t];
                let v = cur + inst.len(j + 1, t + 1);
                if v < *slot {
                    *slot = v;
                }
            }
        }
    }
    let last = size - 1;
    Ok((0..k).map(|j| dp[last * k + j] + inst.len(j + 1, 0)).fold(f64::INFINITY, f64::min))
}

/// Greedy matching: repeatedly take the shortest edge between free vertices.
pub fn greedy_matching(inst: &RandomInstance) -> Result<f64> {
    let n = inst.n;
    if n % 2 == 1 {
        return Err(Error::OddN(n));
    }
    let mut edges: Vec<(f64, usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| (inst.len(i, j), i, j)).collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used = vec![false; n];
    let mut total = 0.0;
    for (l, i, j) in edges {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            total += l;
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRow {
    pub n: usize,
    /// `E M_N / N^{1 - 1/d}` (matching) or `E L_N / N^{1 - 1/d}` (TSP).
    pub value: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLimit {
    pub kind: Kind,
    pub d: f64,
    pub rows: Vec<EmpiricalRow>,
    /// The limit from the integral equation.
    pub constant: f64,
    /// `|mean(N_max) - c| < |mean(N_min) - c| + 3 combined SE`.
    pub trend_ok: bool,
}

/// Monte Carlo means of the rescaled optimum over `m` instances per size;
/// instance `j` at size `N` uses `stream.child(N).child(j)`.
pub fn empirical_limit(kind: Kind, d: f64, ns: &[usize], m: usize, stream: &RandomStream) -> Result<EmpiricalLimit> {
    if ns.is_empty() || m < 2 {
        return Err(Error::InvalidParameter("need at least one size and two instances".into()));
    }
    let constant = asymptotic_constant(&IntegralEquationSpec::new(kind, d))?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let scale = (n as f64).powf(1.0 - 1.0 / d);
        let vals: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|j| {
                let inst = RandomInstance::random(n, d, &stream.child(n as u64).child(j as u64))?;
                let v = match kind {
                    Kind::Matching => min_matching_exact(&inst)?,
                    Kind::Tsp => tsp_exact(&inst)?,
                };
                Ok(v / scale)
            })
            .collect::<Result<_>>()?;
        rows.push(EmpiricalRow { n, value: Estimate::from_samples(&vals) });
    }
    let lo = rows.iter().min_by_key(|r| r.n).expect("nonempty");
    let hi = rows.iter().max_by_key(|r| r.n).expect("nonempty");
    let se = (lo.value.se.powi(2) + hi.value.se.powi(2)).sqrt();
    let trend_ok = (hi.value.mean - constant).abs() < (lo.value.mean - constant).abs() + 3.0 * se;
    Ok(EmpiricalLimit { kind, d, rows, constant, trend_ok })
}
