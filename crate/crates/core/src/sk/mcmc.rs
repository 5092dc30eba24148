//! Single-spin Metropolis with optional replica exchange.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::disorder::{Disorder, Terms};
use crate::error::{Error, Result};
use crate::overlap::OverlapMatrix;
use crate::stream::{RandomStream, StreamRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcOptions {
    /// Sweeps discarded before recording.
    pub burn_in: usize,
    /// Recorded sweeps per chain.
    pub sweeps: usize,
    /// Record every `thin`-th sweep.
    pub thin: usize,
    /// Extra inverse temperatures for replica exchange (empty: plain Metropolis).
    #[serde(default)]
    pub ladder: Vec<f64>,
    /// Split-chain potential scale reduction above which the run fails.
    pub rhat_max: f64,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self { burn_in: 1000, sweeps: 10_000, thin: 1, ladder: vec![], rhat_max: 1.1 }
    }
}

/// Recorded states and energies `H_N` of each chain at the target temperature.
#[derive(Clone, Debug)]
pub struct McmcRun {
    pub n: usize,
    pub states: Vec<Vec<u32>>,
    pub energies: Vec<Vec<f64>>,
    pub rhat: f64,
    pub acceptance: f64,
}

struct Replica {
    state: u32,
    chi: Vec<f64>,
    h: f64,
    rest: f64,
}

impl Replica {
    fn new(terms: &Terms, state: u32) -> Self {
        let chi: Vec<f64> = terms.masks.iter().map(|&m| Terms::chi(m, state)).collect();
        let (h, g) = terms.eval(state);
        Self { state, chi, h, rest: g + terms.h * terms.magnetization(state) }
    }

    // one systematic sweep; returns accepted flips
    fn sweep(&mut self, terms: &Terms, adj: &[Vec<u32>], beta: f64, rng: &mut StreamRng) -> usize {
        let mut acc = 0;
        for k in 0..terms.n {
            let mut dh = 0.0;
            let mut dg = 0.0;
            for &t in &adj[k] {
                let t = t as usize;
                dh += terms.main[t] * self.chi[t];
                dg += terms.pert[t] * self.chi[t];
            }
            let spin = if self.state >> k & 1 == 0 { 1.0 } else { -1.0 };
            let d_h = -2.0 * dh;
            let d_rest = -2.0 * dg - 2.0 * terms.h * spin;
            let d_e = beta * d_h + d_rest;
            if d_e >= 0.0 || rng.random::<f64>() < d_e.exp() {
                for &t in &adj[k] {
                    let t = t as usize;
                    self.chi[t] = -self.chi[t];
                }
                self.state ^= 1 << k;
                self.h += d_h;
                self.rest += d_rest;
                acc += 1;
            }
        }
        acc
    }
}

fn run_chain(terms: &Terms, adj: &[Vec<u32>], beta: f64, opts: &McmcOptions, stream: &RandomStream) -> (Vec<u32>, Vec<f64>, f64) {
    let mut rng = stream.rng();
    let mask = if terms.n == 32 { u32::MAX } else { (1u32 << terms.n) - 1 };
    let mut betas = vec![beta];
    betas.extend(opts.ladder.iter().copied());
    let mut reps: Vec<Replica> = betas.iter().map(|_| Replica::new(terms, rng.random::<u32>() & mask)).collect();
    let thin = opts.thin.max(1);
    let total = opts.burn_in + opts.sweeps;
    let mut states = Vec::with_capacity(opts.sweeps / thin);
    let mut energies = Vec::with_capacity(opts.sweeps / thin);
    let mut accepted = 0usize;
    for sweep in 0..total {
        for (r, &b) in reps.iter_mut().zip(&betas) {
            let a = r.sweep(terms, adj, b, &mut rng);
            if b == beta {
                accepted += a;
            }
        }
        // neighbour swaps along the ladder, alternating even and odd pairs
        if reps.len() > 1 {
            let start = sweep % 2;
            let mut i = start;
            while i + 1 < reps.len() {
                let log_a = (betas[i] - betas[i + 1]) * (reps[i + 1].h - reps[i].h);
                if log_a >= 0.0 || rng.random::<f64>() < log_a.exp() {
                    reps.swap(i, i + 1);
                }
                i += 2;
            }
        }
        if sweep >= opts.burn_in && (sweep - opts.burn_in) % thin == 0 {
            states.push(reps[0].state);
            energies.push(reps[0].h);
        }
    }
    let rate = accepted as f64 / (total * terms.n).max(1) as f64;
    (states, energies, rate)
}

/// Split-chain potential scale reduction factor of the traces.
pub fn split_rhat(traces: &[Vec<f64>]) -> f64 {
    let mut halves: Vec<&[f64]> = vec![];
    for t in traces {
        let h = t.len() / 2;
        if h < 2 {
            return f64::INFINITY;
        }
        halves.push(&t[..h]);
        halves.push(&t[t.len() - h..]);
    }
    let len = halves.iter().map(|h| h.len()).min().unwrap_or(0);
    let m = halves.len() as f64;
    let nl = len as f64;
    let means: Vec<f64> = halves.iter().map(|h| h[..len].iter().sum::<f64>() / nl).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = nl / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h[..len].iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nl - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var = (nl - 1.0) / nl * w + b / nl;
    (var / w).sqrt()
}

/// Runs `chains` independent chains (chain `c` on `stream.child(c)`).
pub fn run_chains(
    disorder: &Disorder,
    beta: f64,
    chains: usize,
    opts: &McmcOptions,
    stream: &RandomStream,
) -> Result<McmcRun> {
    if chains == 0 || opts.sweeps < 4 {
        return Err(Error::InvalidParameter("need at least one chain and four sweeps".into()));
    }
    let terms = disorder.terms()?;
    let adj = terms.adjacency();
    let out: Vec<(Vec<u32>, Vec<f64>, f64)> = (0..chains)
        .into_par_iter()
        .map(|c| run_chain(&terms, &adj, beta, opts, &stream.child(c as u64)))
        .collect();
    let acceptance = out.iter().map(|o| o.2).sum::<f64>() / chains as f64;
    let (states, energies): (Vec<_>, Vec<_>) = out.into_iter().map(|(s, e, _)| (s, e)).unzip();
    let rhat = split_rhat(&energies);
    if !(rhat <= opts.rhat_max) {
        return Err(Error::NotConverged(format!("split R-hat {rhat:.4} > {}", opts.rhat_max)));
    }
    Ok(McmcRun { n: disorder.n, states, energies, rhat, acceptance })
}

impl McmcRun {
    /// Overlap matrix of the final states, one replica per chain.
    pub fn replicas(&self) -> OverlapMatrix {
        let last: Vec<u32> = self.states.iter().map(|s| *s.last().expect("recorded states")).collect();
        let n = self.n;
        OverlapMatrix::from_fn(last.len(), |a, b| 1.0 - 2.0 * (last[a] ^ last[b]).count_ones() as f64 / n as f64)
    }

    /// Empirical law of the Hamming distance between chains `2c` and `2c+1`
    /// at equal recording times, pooled over pairs; entry `d` as in
    /// [`super::GibbsTable::overlap_law`].
    pub fn overlap_law(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.n + 1];
        let mut total = 0.0;
        for pair in self.states.chunks_exact(2) {
            for (a, b) in pair[0].iter().zip(&pair[1]) {
                counts[(a ^ b).count_ones() as usize] += 1.0;
                total += 1.0;
            }
        }
        counts.iter_mut().for_each(|c| *c /= total);
        counts
    }
}
