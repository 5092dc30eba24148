//! Coupling draws and the Hamiltonian.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::stream::RandomStream;

/// Largest system handled by exhaustive enumeration.
pub const MAX_ENUM: usize = 22;

/// Perturbation `s_N = N^gamma` times `sum_{p <= p_max} 2^{-p} x_p g_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PertSpec {
    pub gamma: f64,
    pub p_max: usize,
    /// Fixed `x_p`; `None` draws each `x_p` uniformly on `[1, 2]` per disorder.
    #[serde(default)]
    pub xs: Option<Vec<f64>>,
}

impl Default for PertSpec {
    fn default() -> Self {
        Self { gamma: 0.49, p_max: 4, xs: None }
    }
}

impl PertSpec {
    pub fn scale(&self, n: usize) -> f64 {
        (n as f64).powf(self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.p_max) {
            return Err(Error::OutOfRange { value: self.p_max as f64, lo: 1.0, hi: 4.0 });
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma = {}", self.gamma)));
        }
        if let Some(xs) = &self.xs {
            if xs.len() != self.p_max {
                return Err(Error::LengthMismatch(xs.len(), self.p_max));
            }
            if let Some(&x) = xs.iter().find(|x| !(0.0..=3.0).contains(*x)) {
                return Err(Error::OutOfRange { value: x, lo: 0.0, hi: 3.0 });
            }
        }
        Ok(())
    }

    /// Covariance mass dropped by stopping at `p_max` with the largest
    /// admissible `x_p = 3`: `sum_{p > p_max} 9 * 4^{-p}`.
    pub fn truncation_bound(&self) -> f64 {
        3.0 * 4f64.powi(-(self.p_max as i32))
    }
}

/// Dense array `g[i_1 ... i_p]` (row-major, `n^p` entries) with a weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub p: usize,
    pub weight: f64,
    pub g: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub s: f64,
    pub xs: Vec<f64>,
    pub tensors: Vec<Tensor>,
}

/// One disorder realization. Entries with largest index `m` of each array
/// come from their own stream, so the system on the first `n` spins is the
/// same whichever size was drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disorder {
    pub n: usize,
    pub h: f64,
    pub tensors: Vec<Tensor>,
    pub pert: Option<Perturbation>,
}

fn draw_tensor(n: usize, p: usize, stream: &RandomStream) -> Vec<f64> {
    let mut g = vec![0.0; n.pow(p as u32)];
    let mut idx = vec![0usize; p];
    for m in 0..n {
        let mut rng = stream.child(m as u64).rng();
        let side = m + 1;
        // lexicographic walk over [0, m]^p keeping the tuples that contain m
        for t in 0..side.pow(p as u32) {
            let mut rest = t;
            for k in (0..p).rev() {
                idx[k] = rest % side;
                rest /= side;
            }
            if idx.contains(&m) {
                let flat = idx.iter().fold(0, |acc, &i| acc * n + i);
                g[flat] = rng.sample(StandardNormal);
            }
        }
    }
    g
}

impl Disorder {
    pub fn draw(model: &ModelSpec, n: usize, stream: &RandomStream) -> Result<Self> {
        Self::draw_with(model, n, None, stream)
    }

    pub fn draw_with(model: &ModelSpec, n: usize, pert: Option<&PertSpec>, stream: &RandomStream) -> Result<Self> {
        model.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one spin".into()));
        }
        if model.mixture.len() > 4 {
            return Err(Error::InvalidParameter("mixtures above p = 4 are not simulated".into()));
        }
        let main = stream.fork("couplings");
        let tensors = model
            .terms()
            .map(|(p, c)| Tensor {
                p,
                weight: c * (n as f64).powf(-(p as f64 - 1.0) / 2.0),
                g: draw_tensor(n, p, &main.child(p as u64)),
            })
            .collect();
        let pert = match pert {
            None => None,
            Some(spec) => {
                spec.validate()?;
                let ps = stream.fork("perturbation");
                let xs = match &spec.xs {
                    Some(xs) => xs.clone(),
                    None => {
                        let mut rng = ps.fork("x").rng();
                        (0..spec.p_max).map(|_| rng.random_range(1.0..2.0)).collect()
                    }
                };
                let tensors = (1..=spec.p_max)
                    .map(|p| Tensor {
                        p,
                        weight: 2f64.powi(-(p as i32)) * xs[p - 1] * (n as f64).powf(-(p as f64) / 2.0),
                        g: draw_tensor(n, p, &ps.child(p as u64)),
                    })
                    .collect();
                Some(Perturbation { s: spec.scale(n), xs, tensors })
            }
        };
        Ok(Self { n, h: model.h, tensors, pert })
    }

    /// `H_N(sigma)`, the unperturbed Hamiltonian, by direct summation.
    pub fn main_hamiltonian(&self, sigma: &[i8]) -> Result<f64> {
        self.check(sigma)?;
        Ok(self.tensors.iter().map(|t| t.weight * tensor_sum(t, sigma)).sum())
    }

    /// `g(sigma) = sum_p 2^{-p} x_p g_p(sigma)`, zero without perturbation.
    pub fn perturbation(&self, sigma: &[i8]) -> Result<f64> {
        self.check(sigma)?;
        Ok(match &self.pert {
            None => 0.0,
            Some(pt) => pt.tensors.iter().map(|t| t.weight * tensor_sum(t, sigma)).sum(),
        })
    }

    /// `H_N(sigma) + s g(sigma)`.
    pub fn hamiltonian(&self, sigma: &[i8]) -> Result<f64> {
        let s = self.pert.as_ref().map_or(0.0, |p| p.s);
        Ok(self.main_hamiltonian(sigma)? + s * self.perturbation(sigma)?)
    }

    /// Exponent of the Gibbs weight: `beta H_N + s g + h sum_i sigma_i`.
    pub fn exponent(&self, beta: f64, sigma: &[i8]) -> Result<f64> {
        let s = self.pert.as_ref().map_or(0.0, |p| p.s);
        let m: f64 = sigma.iter().map(|&x| x as f64).sum();
        Ok(beta * self.main_hamiltonian(sigma)? + s * self.perturbation(sigma)? + self.h * m)
    }

    /// The 2-spin array `g_ij` (row-major), if present.
    pub fn pair_couplings(&self) -> Option<&[f64]> {
        self.tensors.iter().find(|t| t.p == 2).map(|t| t.g.as_slice())
    }

    fn check(&self, sigma: &[i8]) -> Result<()> {
        if sigma.len() != self.n {
            return Err(Error::LengthMismatch(sigma.len(), self.n));
        }
        if sigma.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("spins must be +1 or -1".into()));
        }
        Ok(())
    }

    /// Multilinear form over spin subsets; see [`Terms`]. Needs `n <= 32`.
    pub fn terms(&self) -> Result<Terms> {
        if self.n > 32 {
            return Err(Error::TooLarge { size: self.n, limit: 32 });
        }
        let mut acc: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
        let n = self.n;
        let mut add = |t: &Tensor, scale: f64, main: bool| {
            for (flat, &g) in t.g.iter().enumerate() {
                let mut rest = flat;
                let mut mask = 0u32;
                for _ in 0..t.p {
                    mask ^= 1 << (rest % n);
                    rest /= n;
                }
                let e = acc.entry(mask).or_insert((0.0, 0.0));
                if main {
                    e.0 += scale * g;
                } else {
                    e.1 += scale * g;
                }
            }
        };
        for t in &self.tensors {
            add(t, t.weight, true);
        }
        if let Some(pt) = &self.pert {
            for t in &pt.tensors {
                add(t, pt.s * t.weight, false);
            }
        }
        let mut terms = Terms { n, masks: vec![], main: vec![], pert: vec![], h: self.h };
        for (mask, (a, b)) in acc {
            terms.masks.push(mask);
            terms.main.push(a);
            terms.pert.push(b);
        }
        Ok(terms)
    }
}

fn tensor_sum(t: &Tensor, sigma: &[i8]) -> f64 {
    let n = sigma.len();
    let mut total = 0.0;
    for (flat, &g) in t.g.iter().enumerate() {
        let mut rest = flat;
        let mut prod = 1i32;
        for _ in 0..t.p {
            prod *= sigma[rest % n] as i32;
            rest /= n;
        }
        total += g * prod as f64;
    }
    total
}

/// `H(sigma) = sum_k main[k] chi_k(sigma)` and `s g(sigma) = sum_k pert[k] chi_k(sigma)`
/// with `chi_k = prod_{i in masks[k]} sigma_i`. Bit `i` set in a state means
/// `sigma_i = -1`.
#[derive(Clone, Debug)]
pub struct Terms {
    pub n: usize,
    pub masks: Vec<u32>,
    pub main: Vec<f64>,
    pub pert: Vec<f64>,
    pub h: f64,
}

impl Terms {
    #[inline]
    pub fn chi(mask: u32, state: u32) -> f64 {
        if (mask & state).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `(H, s g)` at a state.
    pub fn eval(&self, state: u32) -> (f64, f64) {
        let mut h = 0.0;
        let mut g = 0.0;
        for k in 0..self.masks.len() {
            let c = Self::chi(self.masks[k], state);
            h += self.main[k] * c;
            g += self.pert[k] * c;
        }
        (h, g)
    }

    pub fn magnetization(&self, state: u32) -> f64 {
        self.n as f64 - 2.0 * state.count_ones() as f64
    }

    /// For each spin, the indices of the terms that contain it.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![vec![]; self.n];
        for (k, &m) in self.masks.iter().enumerate() {
            for (i, a) in adj.iter_mut().enumerate() {
                if m >> i & 1 == 1 {
                    a.push(k as u32);
                }
            }
        }
        adj
    }
}
