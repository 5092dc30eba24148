//! Gauss-Hermite quadrature, Gaussian fields on finite index sets, and the
//! Gaussian integration-by-parts and concentration identities as residuals.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{binomial_se, Estimate};
use crate::stream::RandomStream;

/// Nodes and weights for `E f(z)`, `z ~ N(0,1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }

    pub fn max_node(&self) -> f64 {
        self.nodes.iter().copied().fold(0.0, f64::max)
    }
}

/// Gauss-Hermite rule for the standard normal law, exact for polynomials of
/// degree `<= 2n - 1`.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    if !(2..=256).contains(&n) {
        return Err(Error::OrderOutOfRange(n));
    }
    // Jacobi matrix of the probabilists' Hermite recurrence
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    // Newton polish on the orthonormal polynomial, then weights from the
    // Christoffel function, which is better conditioned than eigenvectors.
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (pn, pn1, _) = orthonormal_hermite(n, *x);
            let d = (n as f64).sqrt() * pn1;
            if d != 0.0 {
                *x -= pn / d;
            }
        }
        let (_, _, sumsq) = orthonormal_hermite(n, *x);
        weights.push(1.0 / sumsq);
    }
    // enforce exact symmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule { nodes, weights })
}

// Returns (p_n(x), p_{n-1}(x), sum_{k<n} p_k(x)^2) for the orthonormal
// probabilists' Hermite polynomials.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sumsq = 0.0;
    for k in 0..n {
        sumsq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sumsq)
}

/// Covariance clamp: eigenvalues in `[-EIG_CLAMP, 0)` are treated as zero.
pub const EIG_CLAMP: f64 = 1e-10;

/// A centred Gaussian vector on `{0..n}` with a given covariance matrix.
#[derive(Clone, Debug)]
pub struct GaussianFieldSpec {
    cov: DMatrix<f64>,
}

impl GaussianFieldSpec {
    pub fn from_fn(n: usize, c: impl Fn(usize, usize) -> f64) -> Self {
        Self { cov: DMatrix::from_fn(n, n, |i, j| c(i, j)) }
    }

    pub fn from_matrix(cov: DMatrix<f64>) -> Self {
        Self { cov }
    }

    pub fn size(&self) -> usize {
        self.cov.nrows()
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov[(i, j)]
    }

    /// Largest variance, the `a` of the concentration inequality.
    pub fn max_variance(&self) -> f64 {
        (0..self.size()).map(|i| self.cov[(i, i)]).fold(0.0, f64::max)
    }

    /// Square-root factor `L` with `L L^T = C`.
    pub fn factor(&self) -> Result<GaussianField> {
        let n = self.size();
        if n > 4096 {
            return Err(Error::TooLarge { size: n, limit: 4096 });
        }
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = eig.eigenvalues.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if min < -EIG_CLAMP * scale {
            return Err(Error::NotPsd(min));
        }
        let mut l = eig.eigenvectors.clone();
        for (j, &v) in eig.eigenvalues.iter().enumerate() {
            let s = v.max(0.0).sqrt();
            l.column_mut(j).scale_mut(s);
        }
        Ok(GaussianField { l })
    }
}

/// A factored field ready for sampling.
#[derive(Clone, Debug)]
pub struct GaussianField {
    l: DMatrix<f64>,
}

impl GaussianField {
    pub fn size(&self) -> usize {
        self.l.nrows()
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.l.ncols();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.l * z).iter().copied().collect()
    }
}

/// One draw of the field; the output is indexed like the spec's index set.
pub fn sample_field(spec: &GaussianFieldSpec, stream: &RandomStream) -> Result<Vec<f64>> {
    let field = spec.factor()?;
    Ok(field.sample_with(&mut stream.rng()))
}

/// Jointly Gaussian `(x(s), y(s))` on a common index set.
#[derive(Clone, Debug)]
pub struct JointFieldSpec {
    n: usize,
    joint: GaussianFieldSpec,
}

impl JointFieldSpec {
    /// `cxx`, `cxy = E x(s1) y(s2)` and `cyy` as functions of index pairs.
    pub fn from_fns(
        n: usize,
        cxx: impl Fn(usize, usize) -> f64,
        cxy: impl Fn(usize, usize) -> f64,
        cyy: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let joint = GaussianFieldSpec::from_fn(2 * n, |i, j| match (i < n, j < n) {
            (true, true) => cxx(i, j),
            (true, false) => cxy(i, j - n),
            (false, true) => cxy(j, i - n),
            (false, false) => cyy(i - n, j - n),
        });
        Self { n, joint }
    }

    /// The case `x = y` with covariance `c`.
    pub fn same(n: usize, c: impl Fn(usize, usize) -> f64 + Copy) -> Self {
        Self::from_fns(n, c, c, c)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn cxy(&self, i: usize, j: usize) -> f64 {
        self.joint.cov(i, self.n + j)
    }
}

/// Left side, right side and their Monte Carlo residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub se: f64,
}

impl Residual {
    pub fn from_pairs(lhs: &[f64], rhs: &[f64]) -> Self {
        let diff: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
        let d = Estimate::from_samples(&diff);
        Self {
            lhs: Estimate::from_samples(lhs).mean,
            rhs: Estimate::from_samples(rhs).mean,
            residual: d.mean.abs(),
            se: d.se,
        }
    }

    pub fn within(&self, k: f64) -> bool {
        self.residual <= k * self.se + 1e-14
    }
}

fn check_measure(g: &[f64], n: usize) -> Result<()> {
    if g.len() != n {
        return Err(Error::LengthMismatch(g.len(), n));
    }
    if g.iter().any(|&w| !(w >= 0.0 && w.is_finite())) || g.iter().sum::<f64>() <= 0.0 {
        return Err(Error::EmptyMeasure);
    }
    Ok(())
}

// Tilted weights G'(s) = G(s) e^{y(s)} / Z.
fn tilt(g: &[f64], y: &[f64]) -> Vec<f64> {
    let m = y
        .iter()
        .zip(g)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = y.iter().zip(g).map(|(&v, &w)| w * (v - m).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}

fn draw_xy(field: &GaussianField, n: usize, stream: &RandomStream, i: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = field.sample_with(&mut stream.child(i as u64).rng());
    let y = v.split_off(n);
    (v, y)
}

/// `E<x(s)>` against `E<C(s1,s1) - C(s1,s2)>` under the tilt `G' ~ e^y G`.
pub fn gip_residual(
    spec: &JointFieldSpec,
    g: &[f64],
    stream: &RandomStream,
    samples: usize,
) -> Result<Residual> {
    let n = spec.size();
    check_measure(g, n)?;
    let field = spec.joint.factor()?;
    let pairs: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let (x, y) = draw_xy(&field, n, stream, i);
            let gp = tilt(g, &y);
            let lhs: f64 = gp.iter().zip(&x).map(|(w, v)| w * v).sum();
            let mut rhs = 0.0;
            for s1 in 0..n {
                if gp[s1] == 0.0 {
                    continue;
                }
                let cross: f64 = (0..n).map(|s2| spec.cxy(s1, s2) * gp[s2]).sum();
                rhs += gp[s1] * (spec.cxy(s1, s1) - cross);
            }
            (lhs, rhs)
        })
        .collect();
    let (l, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(Residual::from_pairs(&l, &r))
}

/// `E<Phi x(s1)>` against
/// `E<Phi (sum_{l<=n} C(s1,s_l) - n C(s1,s_{n+1}))>` for a bounded `Phi` of
/// `n` replicas. Inner averages are exact sums over all `n`-tuples.
pub fn gip_multi_residual(
    spec: &JointFieldSpec,
    g: &[f64],
    phi: &(dyn Fn(&[usize]) -> f64 + Sync),
    replicas: usize,
    stream: &RandomStream,
    samples: usize,
) -> Result<Residual> {
    let n = spec.size();
    check_measure(g, n)?;
    if replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let tuples = n.checked_pow(replicas as u32).filter(|&t| t <= 1 << 20).ok_or(
        Error::TooLarge { size: n, limit: 1 << 20 },
    )?;
    let field = spec.joint.factor()?;
    let pairs: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let (x, y) = draw_xy(&field, n, stream, i);
            let gp = tilt(g, &y);
            let cg: Vec<f64> = (0..n)
                .map(|s1| (0..n).map(|s2| spec.cxy(s1, s2) * gp[s2]).sum())
                .collect();
            let mut idx = vec![0usize; replicas];
            let (mut lhs, mut rhs) = (0.0, 0.0);
            for t in 0..tuples {
                let mut rest = t;
                let mut w = 1.0;
                for slot in idx.iter_mut() {
                    *slot = rest % n;
                    rest /= n;
                    w *= gp[*slot];
                }
                if w == 0.0 {
                    continue;
                }
                let f = phi(&idx);
                let s1 = idx[0];
                let sum_c: f64 = idx.iter().map(|&s| spec.cxy(s1, s)).sum();
                lhs += w * f * x[s1];
                rhs += w * f * (sum_c - replicas as f64 * cg[s1]);
            }
            (lhs, rhs)
        })
        .collect();
    let (l, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(Residual::from_pairs(&l, &r))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub empirical: f64,
    pub bound: f64,
    pub se: f64,
    pub variance_bound: f64,
}

impl ConcentrationReport {
    pub fn holds(&self, k: f64) -> bool {
        self.empirical <= self.bound + k * self.se
    }
}

/// Tail frequency of `|X - E X| >= x` for `X = log sum e^{g(s)} G(s)`, with
/// the bound `2 exp(-x^2 / 4a)`.
pub fn concentration_check(
    spec: &GaussianFieldSpec,
    g: &[f64],
    x: f64,
    samples: usize,
    stream: &RandomStream,
) -> Result<ConcentrationReport> {
    let n = spec.size();
    check_measure(g, n)?;
    let field = spec.factor()?;
    let xs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let v = field.sample_with(&mut stream.child(i as u64).rng());
            let terms: Vec<f64> = v
                .iter()
                .zip(g)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&f, &w)| f + w.ln())
                .collect();
            crate::stats::log_sum_exp(&terms)
        })
        .collect();
    let mean = Estimate::from_samples(&xs).mean;
    Ok(tail_report(&xs, mean, x, spec.max_variance()))
}

/// Shared tail-frequency computation for samples of `X`.
pub fn tail_report(xs: &[f64], mean: f64, x: f64, a: f64) -> ConcentrationReport {
    let hits = xs.iter().filter(|&&v| (v - mean).abs() >= x).count();
    let p = hits as f64 / xs.len().max(1) as f64;
    let bound = if a > 0.0 { 2.0 * (-x * x / (4.0 * a)).exp() } else if x > 0.0 { 0.0 } else { 2.0 };
    ConcentrationReport { empirical: p, bound, se: binomial_se(p, xs.len()), variance_bound: a }
}
