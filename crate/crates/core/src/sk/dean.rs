//! Dean's problem: split `N` people into two groups so that few people share
//! a group with someone they dislike. Person `i` dislikes `j` when `G_ij < 0`
//! for symmetric standard normal couplings `G_ij`, `i < j`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::disorder::Disorder;
use super::enumerate::summarize;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::overlap::spins_from_bits;
use crate::stats::Estimate;
use crate::stream::RandomStream;

/// Couplings `G_ij`, `i < j`, visited one row at a time.
pub trait PairCouplings: Sync {
    fn n(&self) -> usize;
    /// Calls `visit(j, G_ij)` for every `j > i`.
    fn upper_row(&self, i: usize, visit: &mut dyn FnMut(usize, f64));
}

/// `G_ij = (g_ij + g_ji) / sqrt 2` from the 2-spin array of a disorder.
pub struct DenseCouplings {
    n: usize,
    g: Vec<f64>,
}

impl DenseCouplings {
    pub fn from_disorder(d: &Disorder) -> Result<Self> {
        let g = d
            .pair_couplings()
            .ok_or_else(|| Error::InvalidParameter("disorder has no 2-spin couplings".into()))?;
        let n = d.n;
        let mut sym = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                sym[i * n + j] = (g[i * n + j] + g[j * n + i]) / std::f64::consts::SQRT_2;
            }
        }
        Ok(Self { n, g: sym })
    }
}

impl PairCouplings for DenseCouplings {
    fn n(&self) -> usize {
        self.n
    }

    fn upper_row(&self, i: usize, visit: &mut dyn FnMut(usize, f64)) {
        for j in i + 1..self.n {
            visit(j, self.g[i * self.n + j]);
        }
    }
}

/// Couplings regenerated on demand, row `i` from `stream.child(i)`; for sizes
/// where the `N^2` array does not fit.
pub struct StreamedCouplings {
    pub n: usize,
    pub stream: RandomStream,
}

impl PairCouplings for StreamedCouplings {
    fn n(&self) -> usize {
        self.n
    }

    fn upper_row(&self, i: usize, visit: &mut dyn FnMut(usize, f64)) {
        let mut rng = self.stream.child(i as u64).rng();
        for j in i + 1..self.n {
            visit(j, rng.sample(StandardNormal));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeanStats {
    /// Average over people of the number of disliked people in their group.
    pub within_dislikes: f64,
    /// `sum_{i<j} G_ij sigma_i sigma_j`.
    pub comfort: f64,
}

pub fn dean_statistics(g: &dyn PairCouplings, sigma: &[i8]) -> Result<DeanStats> {
    let n = g.n();
    if sigma.len() != n {
        return Err(Error::LengthMismatch(sigma.len(), n));
    }
    let rows: Vec<(u64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut count = 0u64;
            let mut comfort = 0.0;
            g.upper_row(i, &mut |j, x| {
                let same = sigma[i] == sigma[j];
                if same && x < 0.0 {
                    count += 1;
                }
                comfort += if same { x } else { -x };
            });
            (count, comfort)
        })
        .collect();
    let pairs: u64 = rows.iter().map(|r| r.0).sum();
    let comfort = rows.iter().map(|r| r.1).sum();
    // each disliked pair counts once for each of its two members
    Ok(DeanStats { within_dislikes: 2.0 * pairs as f64 / n as f64, comfort })
}

/// A uniformly random partition.
pub fn random_partition(n: usize, stream: &RandomStream) -> Vec<i8> {
    let mut rng = stream.rng();
    (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeanComparison {
    pub n: usize,
    pub ground: Estimate,
    pub random: Estimate,
    /// Paired differences `ground - random`.
    pub difference: Estimate,
    pub t: f64,
    /// One-sided p-value of the paired t-test against `difference >= 0`.
    pub p_value: f64,
}

/// Within-group dislikes of the comfort-maximizing split versus a random
/// split of the same people, over `m` disorders.
pub fn dean_comparison(n: usize, m: usize, stream: &RandomStream) -> Result<DeanComparison> {
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two disorders".into()));
    }
    let model = ModelSpec::sk(1.0);
    let rows: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let ds = stream.child(j as u64);
            let d = Disorder::draw(&model, n, &ds)?;
            let g = DenseCouplings::from_disorder(&d)?;
            // the diagonal does not depend on sigma, so max H maximizes comfort
            let best = spins_from_bits(summarize(&d, 0.0)?.argmax as u64, n);
            let rand = random_partition(n, &ds.fork("partition"));
            Ok((dean_statistics(&g, &best)?.within_dislikes, dean_statistics(&g, &rand)?.within_dislikes))
        })
        .collect::<Result<_>>()?;
    let ground = Estimate::from_samples(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let random = Estimate::from_samples(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let difference = Estimate::from_samples(&rows.iter().map(|r| r.0 - r.1).collect::<Vec<_>>());
    let dist = StudentsT::new(0.0, 1.0, (m - 1) as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let (t, p_value) = if difference.se > 0.0 {
        let t = difference.mean / difference.se;
        (t, dist.cdf(t))
    } else if difference.mean < 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (f64::INFINITY, 1.0)
    };
    Ok(DeanComparison { n, ground, random, difference, t, p_value })
}
