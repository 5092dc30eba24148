//! Exhaustive enumeration of the Gibbs measure by Gray-code traversal.

use rand::distr::Distribution;
use rand_distr::weighted::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use super::disorder::{Disorder, Terms, MAX_ENUM};
use super::walsh::fwht;
use crate::error::{Error, Result};
use crate::overlap::OverlapMatrix;
use crate::stream::StreamRng;

/// Recompute the energy from scratch this often to stop drift.
const RESYNC: u32 = 1 << 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSummary {
    pub n: usize,
    pub beta: f64,
    pub log_z: f64,
    /// `max_sigma H_N(sigma)` of the unperturbed Hamiltonian.
    pub max_h: f64,
    pub argmax: u32,
}

struct Walker<'a> {
    terms: &'a Terms,
    adj: Vec<Vec<u32>>,
    chi: Vec<f64>,
    state: u32,
    h: f64,
    g: f64,
    mag: f64,
}

impl<'a> Walker<'a> {
    fn new(terms: &'a Terms) -> Self {
        let (h, g) = terms.eval(0);
        Self {
            terms,
            adj: terms.adjacency(),
            chi: vec![1.0; terms.masks.len()],
            state: 0,
            h,
            g,
            mag: terms.n as f64,
        }
    }

    #[inline]
    fn flip(&mut self, k: usize) {
        let mut dh = 0.0;
        let mut dg = 0.0;
        for &t in &self.adj[k] {
            let t = t as usize;
            let c = self.chi[t];
            dh += self.terms.main[t] * c;
            dg += self.terms.pert[t] * c;
            self.chi[t] = -c;
        }
        self.h -= 2.0 * dh;
        self.g -= 2.0 * dg;
        self.mag += if self.state >> k & 1 == 0 { -2.0 } else { 2.0 };
        self.state ^= 1 << k;
    }

    fn resync(&mut self) {
        let (h, g) = self.terms.eval(self.state);
        self.h = h;
        self.g = g;
    }
}

/// Visits all `2^n` states in Gray-code order, passing `(state, H, s g + h M)`.
pub(crate) fn walk(terms: &Terms, mut visit: impl FnMut(u32, f64, f64)) {
    let mut w = Walker::new(terms);
    visit(0, w.h, w.g + terms.h * w.mag);
    for i in 1u32..(1u32 << terms.n) {
        w.flip(i.trailing_zeros() as usize);
        if i % RESYNC == 0 {
            w.resync();
        }
        visit(w.state, w.h, w.g + terms.h * w.mag);
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_ENUM {
        return Err(Error::TooLarge { size: n, limit: MAX_ENUM });
    }
    Ok(())
}

/// `log Z`, `max H` and its argmax without storing the table.
pub fn summarize(disorder: &Disorder, beta: f64) -> Result<GibbsSummary> {
    check_size(disorder.n)?;
    let terms = disorder.terms()?;
    // running log-sum-exp, rescaled when the maximum moves
    let mut top = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut max_h = f64::NEG_INFINITY;
    let mut argmax = 0;
    walk(&terms, |state, h, rest| {
        let e = beta * h + rest;
        if e > top {
            sum = sum * (top - e).exp() + 1.0;
            top = e;
        } else {
            sum += (e - top).exp();
        }
        if h > max_h || (h == max_h && state < argmax) {
            max_h = h;
            argmax = state;
        }
    });
    Ok(GibbsSummary { n: disorder.n, beta, log_z: top + sum.ln(), max_h, argmax })
}

/// The full Gibbs table: `probs[state]`, bit `i` of `state` set meaning
/// `sigma_i = -1`.
#[derive(Clone, Debug)]
pub struct GibbsTable {
    pub summary: GibbsSummary,
    pub probs: Vec<f64>,
}

pub fn enumerate(disorder: &Disorder, beta: f64) -> Result<GibbsTable> {
    check_size(disorder.n)?;
    let terms = disorder.terms()?;
    let size = 1usize << disorder.n;
    let mut expo = vec![0.0; size];
    let mut max_h = f64::NEG_INFINITY;
    let mut argmax = 0;
    walk(&terms, |state, h, rest| {
        expo[state as usize] = beta * h + rest;
        if h > max_h || (h == max_h && state < argmax) {
            max_h = h;
            argmax = state;
        }
    });
    let top = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = expo.iter().map(|e| (e - top).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let summary = GibbsSummary { n: disorder.n, beta, log_z: top + total.ln(), max_h, argmax };
    Ok(GibbsTable { summary, probs })
}

impl GibbsTable {
    pub fn n(&self) -> usize {
        self.summary.n
    }

    /// `<f(sigma)>`.
    pub fn expect(&self, f: impl Fn(u32) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(s, p)| p * f(s as u32)).sum()
    }

    /// Law of `R_{1,2}` for two replicas: entry `d` is the probability that
    /// they differ in `d` spins, i.e. `R = 1 - 2d/N`.
    pub fn overlap_law(&self) -> Vec<f64> {
        let n = self.n();
        let mut a = self.probs.clone();
        fwht(&mut a);
        a.iter_mut().for_each(|x| *x *= *x);
        fwht(&mut a);
        let scale = 1.0 / a.len() as f64;
        let mut law = vec![0.0; n + 1];
        for (x, v) in a.iter().enumerate() {
            law[x.count_ones() as usize] += v * scale;
        }
        law
    }

    /// Overlap values `1 - 2d/N`, `d = 0..=N`.
    pub fn overlap_values(&self) -> Vec<f64> {
        let n = self.n();
        (0..=n).map(|d| 1.0 - 2.0 * d as f64 / n as f64).collect()
    }

    /// `A(sigma) = sum_tau G(tau) k(R(sigma, tau))`.
    pub fn smooth(&self, k: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let n = self.n();
        let mut g = self.probs.clone();
        let mut kern: Vec<f64> = (0..g.len())
            .map(|x| k(1.0 - 2.0 * (x as u32).count_ones() as f64 / n as f64))
            .collect();
        fwht(&mut g);
        fwht(&mut kern);
        g.iter_mut().zip(&kern).for_each(|(a, b)| *a *= b);
        fwht(&mut g);
        let scale = 1.0 / g.len() as f64;
        g.iter_mut().for_each(|x| *x *= scale);
        g
    }

    pub fn alias(&self) -> WeightedAliasIndex<f64> {
        WeightedAliasIndex::new(self.probs.clone()).expect("probabilities are valid weights")
    }

    /// `n` independent replicas.
    pub fn sample_states(&self, alias: &WeightedAliasIndex<f64>, n: usize, rng: &mut StreamRng) -> Vec<u32> {
        (0..n).map(|_| alias.sample(rng) as u32).collect()
    }

    pub fn overlaps_of(&self, states: &[u32]) -> OverlapMatrix {
        let n = self.n();
        OverlapMatrix::from_fn(states.len(), |a, b| {
            1.0 - 2.0 * (states[a] ^ states[b]).count_ones() as f64 / n as f64
        })
    }
}

impl crate::gg::ReplicaMeasure for GibbsTable {
    fn pair_average(&self, h: &dyn Fn(f64) -> f64) -> f64 {
        let vals = self.overlap_values();
        self.overlap_law().iter().zip(&vals).map(|(p, r)| p * h(*r)).sum()
    }

    fn chain_average(&self, f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64) -> f64 {
        let a = self.smooth(f);
        let b = self.smooth(g);
        self.probs.iter().zip(a.iter().zip(&b)).map(|(p, (x, y))| p * x * y).sum()
    }

    fn sample_overlaps(&self, n: usize, count: usize, rng: &mut StreamRng) -> Vec<OverlapMatrix> {
        let alias = self.alias();
        (0..count).map(|_| self.overlaps_of(&self.sample_states(&alias, n, rng))).collect()
    }
}
