//! Backward recursion for step order parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fop::{validate_fop, FunctionalOrderParameter};
use crate::gaussian::{gauss_hermite, QuadratureRule};
use crate::model::ModelSpec;
use crate::stats::log_cosh;

/// Half-grid `x = 0, dx, 2dx, ...` (the solutions are even), with slope-one
/// linear tails beyond `x_max`.
///
/// A stage whose standard deviation spans at least three lattice steps is
/// smoothed by the trapezoid rule on a sub-lattice of step up to `conv_step`;
/// the integrand is analytic in a strip of half-width pi/2, so the error is
/// of order `exp(-pi^2 / step)`. Narrower stages use Gauss-Hermite of the
/// given order on cubic Hermite interpolants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParisiGrid {
    pub x_max: f64,
    pub spacing: f64,
    pub order: usize,
    /// Largest step of the lattice trapezoid used for Gaussian smoothing.
    pub conv_step: f64,
}

impl ParisiGrid {
    pub fn default_for(model: &ModelSpec) -> Self {
        // xi already carries beta^2
        let scale = model.xi_second(1.0).max(0.0).sqrt();
        Self { x_max: 12.0 * scale.max(1.0), spacing: 0.01, order: 40, conv_step: 0.32 }
    }

    pub fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn refined(&self) -> Self {
        Self { x_max: 2.0 * self.x_max, spacing: 0.5 * self.spacing, ..self.clone() }
    }

    /// Coarse trapezoid step as a power-of-two multiple of the spacing.
    pub(crate) fn conv_multiple(&self) -> usize {
        let mut m = 1usize;
        while (2 * m) as f64 * self.spacing <= self.conv_step * (1.0 + 1e-12) {
            m *= 2;
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.conv_step > 0.0 && self.conv_step <= 0.5) {
            return Err(Error::InvalidParameter(format!("conv_step = {} not in (0, 0.5]", self.conv_step)));
        }
        if !(self.x_max >= 8.0) {
            return Err(Error::InvalidParameter(format!("x_max = {} < 8", self.x_max)));
        }
        if !(self.spacing > 0.0 && self.spacing <= 0.05) {
            return Err(Error::InvalidParameter(format!("spacing = {} not in (0, 0.05]", self.spacing)));
        }
        if !(2..=256).contains(&self.order) {
            return Err(Error::OrderOutOfRange(self.order));
        }
        Ok(())
    }
}

/// One level `X_p`, either exact (`log ch`) or tabulated on the half-grid.
#[derive(Clone, Debug)]
pub enum Level {
    LogCosh,
    Grid { h: f64, vals: Vec<f64>, ders: Vec<f64> },
}

impl Level {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Level::LogCosh => log_cosh(x),
            Level::Grid { h, vals, ders } => {
                let a = x.abs();
                let last = vals.len() - 1;
                let x_last = last as f64 * h;
                if a >= x_last {
                    return vals[last] + (a - x_last);
                }
                let s = a / h;
                let j = (s as usize).min(last - 1);
                let t = s - j as f64;
                let t2 = t * t;
                let t3 = t2 * t;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                h00 * vals[j] + h10 * h * ders[j] + h01 * vals[j + 1] + h11 * h * ders[j + 1]
            }
        }
    }

    /// Tabulated nodes `(x, X(x))`, empty for the exact level.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match self {
            Level::LogCosh => vec![],
            Level::Grid { h, vals, .. } => {
                vals.iter().enumerate().map(|(i, &v)| (i as f64 * h, v)).collect()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParisiSolution {
    /// The order parameter actually used, with `q = 1` as last atom.
    pub fop: FunctionalOrderParameter,
    /// `levels[p]` is `X_p`; the last entry is `log ch`.
    pub levels: Vec<Level>,
    pub value: f64,
    pub correction: f64,
    pub total: f64,
}

/// Grid check result: the value at the working grid and at the refined grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub x_max: f64,
    pub spacing: f64,
    pub order: usize,
    pub refined_change: Option<f64>,
}

/// Tolerance for the refinement check.
pub const REFINE_TOL: f64 = 1e-7;

/// Solves the recursion and assembles `log 2 + P - correction`.
pub fn solve_recursion(
    fop: &FunctionalOrderParameter,
    model: &ModelSpec,
    grid: &ParisiGrid,
) -> Result<ParisiSolution> {
    validate_fop(fop).map_err(|e| Error::InvalidFop(e.to_string()))?;
    model.validate()?;
    grid.validate()?;
    if model.h != 0.0 {
        return Err(Error::InvalidParameter("the recursion is implemented for h = 0".into()));
    }
    let quad = gauss_hermite(grid.order)?;
    Ok(solve_with_rule(fop, model, grid, &quad))
}

/// As [`solve_recursion`], then re-solves on a grid with half the spacing and
/// twice the range; fails with `GridTooCoarse` if the value moved by more
/// than [`REFINE_TOL`].
pub fn solve_checked(
    fop: &FunctionalOrderParameter,
    model: &ModelSpec,
    grid: &ParisiGrid,
) -> Result<(ParisiSolution, GridReport)> {
    let sol = solve_recursion(fop, model, grid)?;
    let fine = solve_recursion(fop, model, &grid.refined())?;
    let change = (fine.value - sol.value).abs();
    if change > REFINE_TOL {
        return Err(Error::GridTooCoarse(change));
    }
    let report = GridReport {
        x_max: grid.x_max,
        spacing: grid.spacing,
        order: grid.order,
        refined_change: Some(change),
    };
    Ok((sol, report))
}

pub(crate) fn solve_with_rule(
    fop: &FunctionalOrderParameter,
    model: &ModelSpec,
    grid: &ParisiGrid,
    quad: &QuadratureRule,
) -> ParisiSolution {
    let fop = fop.with_top_atom();
    let (qs, cdf) = (&fop.qs, &fop.cdf);
    let r = qs.len() - 1;
    let h = grid.spacing;
    let big = grid.conv_multiple();

    // stage k = 0 is the root expectation over variance xi'(q_0); stage
    // k = p + 1 produces X_p from X_{p+1} over variance xi'(q_{p+1}) - xi'(q_p)
    let mut sigma = Vec::with_capacity(r + 1);
    let mut zeta = Vec::with_capacity(r + 1);
    sigma.push(model.xi_prime(qs[0]).max(0.0).sqrt());
    zeta.push(0.0);
    for p in 0..r {
        sigma.push((model.xi_prime(qs[p + 1]) - model.xi_prime(qs[p])).max(0.0).sqrt());
        zeta.push(cdf[p]);
    }
    let kernels: Vec<Kernel> =
        (0..=r).map(|k| Kernel::new(sigma[k], zeta[k], h, big, quad)).collect();

    // lattice multiple and radius on which each X_p is needed (the root
    // stage needs only x = 0)
    let mut lattice = vec![1usize; r + 1];
    let mut radius = vec![0.0; r + 1];
    let mut need = 0usize;
    let mut rad = 0.0;
    for p in 0..=r {
        let k = &kernels[p];
        need = match k {
            Kernel::Lattice { m, .. } => gcd(need, *m),
            Kernel::Quadrature { .. } => 1,
            Kernel::Identity => need,
        };
        if need == 0 {
            need = big;
        }
        rad += k.reach();
        lattice[p] = need;
        radius[p] = rad;
    }

    let mut levels: Vec<Level> = vec![Level::LogCosh; r + 1];
    for p in (0..r).rev() {
        let spacing = lattice[p] as f64 * h;
        let n_nodes = (radius[p].min(grid.x_max) / spacing).ceil() as usize + 4;
        levels[p] = kernels[p + 1].apply(&levels[p + 1], lattice[p + 1], lattice[p], h, n_nodes);
    }
    let value = match kernels[0].apply(&levels[0], lattice[0], 1, h, 1) {
        Level::Grid { vals, .. } => vals[0],
        Level::LogCosh => unreachable!(),
    };

    let mut correction = 0.0;
    for p in 0..r {
        let (a, b) = (qs[p], qs[p + 1]);
        let inc = model.xi_prime(b) * b - model.xi_prime(a) * a - (model.xi(b) - model.xi(a));
        correction += 0.5 * cdf[p] * inc;
    }
    let total = std::f64::consts::LN_2 + value - correction;
    ParisiSolution { fop, levels, value, correction, total }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// Gaussian smoothing used by one stage.
enum Kernel {
    Identity,
    // trapezoid in y on the lattice: offsets j*m*h, weights normalized
    Lattice { m: usize, zeta: f64, weights: Vec<f64>, lws: Vec<f64>, half: usize, reach: f64 },
    // Gauss-Hermite on interpolated values, for variances too narrow for the lattice
    Quadrature { zeta: f64, nodes: Vec<f64>, weights: Vec<f64>, lws: Vec<f64> },
}

/// Gaussian cut-off, in standard deviations, beyond the tilt shift.
const Z_CUT: f64 = 9.0;

impl Kernel {
    fn new(sigma: f64, zeta: f64, h: f64, big: usize, quad: &QuadratureRule) -> Self {
        if sigma == 0.0 {
            return Kernel::Identity;
        }
        // largest power-of-two fraction of the coarse step with sigma/step >= 3
        let mut m = big;
        while m > 1 && (m as f64) * h * 3.0 > sigma {
            m /= 2;
        }
        if (m as f64) * h * 3.0 > sigma {
            return Kernel::Quadrature {
                zeta,
                nodes: quad.nodes.iter().map(|z| z * sigma).collect(),
                weights: quad.weights.clone(),
                lws: quad.weights.iter().map(|w| w.ln()).collect(),
            };
        }
        let c = m as f64 * h;
        // the tilt e^{zeta X} shifts the mass by about zeta*sigma standard deviations
        let half = (((Z_CUT + zeta * sigma) * sigma) / c).ceil() as usize;
        let mut weights: Vec<f64> = (0..=2 * half)
            .map(|j| {
                let y = (j as f64 - half as f64) * c / sigma;
                (-0.5 * y * y).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let lws = weights.iter().map(|w| w.ln()).collect();
        Kernel::Lattice { m, zeta, weights, lws, half, reach: half as f64 * c }
    }

    fn reach(&self) -> f64 {
        match self {
            Kernel::Identity => 0.0,
            Kernel::Lattice { reach, .. } => *reach,
            Kernel::Quadrature { nodes, .. } => nodes.iter().copied().fold(0.0, f64::max),
        }
    }

    // Tabulates the smoothed function at x_i = i * out_mult * h.
    fn apply(&self, next: &Level, next_mult: usize, out_mult: usize, h: f64, n_nodes: usize) -> Level {
        let mut vals = vec![0.0; n_nodes];
        match self {
            Kernel::Identity => {
                for (i, v) in vals.iter_mut().enumerate() {
                    *v = next.eval(i as f64 * out_mult as f64 * h);
                }
            }
            Kernel::Quadrature { zeta, nodes, weights, lws } => {
                let mut buf = vec![0.0; nodes.len()];
                for (i, v) in vals.iter_mut().enumerate() {
                    let x = i as f64 * out_mult as f64 * h;
                    for (b, &dz) in buf.iter_mut().zip(nodes) {
                        *b = next.eval(x + dz);
                    }
                    *v = combine(&buf, weights, lws, *zeta);
                }
            }
            Kernel::Lattice { m, zeta, weights, lws, half, .. } => {
                let lookup = LatticeView::new(next, next_mult, h);
                let step = (*m / next_mult) as i64;
                let stride = (out_mult / next_mult) as i64;
                let mut buf = vec![0.0; weights.len()];
                for (i, v) in vals.iter_mut().enumerate() {
                    let base = i as i64 * stride - *half as i64 * step;
                    for (j, b) in buf.iter_mut().enumerate() {
                        *b = lookup.at(base + j as i64 * step);
                    }
                    *v = combine(&buf, weights, lws, *zeta);
                }
            }
        }
        let spacing = out_mult as f64 * h;
        let ders = derivatives(&vals, spacing);
        Level::Grid { h: spacing, vals, ders }
    }
}

// Values of a level at lattice points k * mult * h.
struct LatticeView<'a> {
    level: &'a Level,
    spacing: f64,
}

impl<'a> LatticeView<'a> {
    fn new(level: &'a Level, mult: usize, h: f64) -> Self {
        Self { level, spacing: mult as f64 * h }
    }

    #[inline]
    fn at(&self, k: i64) -> f64 {
        let k = k.unsigned_abs() as usize;
        match self.level {
            Level::LogCosh => log_cosh(k as f64 * self.spacing),
            Level::Grid { vals, .. } => {
                let last = vals.len() - 1;
                if k <= last {
                    vals[k]
                } else {
                    vals[last] + (k - last) as f64 * self.spacing
                }
            }
        }
    }
}

// (1/zeta) log sum_k w_k exp(zeta X_k), with the zeta -> 0 limit sum_k w_k X_k.
// `lws` holds ln w_k.
#[inline]
fn combine(xs: &[f64], ws: &[f64], lws: &[f64], zeta: f64) -> f64 {
    if zeta == 0.0 {
        return xs.iter().zip(ws).map(|(x, w)| w * x).sum();
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if zeta * (hi - lo) < 1.0 {
        // sum_k w_k expm1(zeta (X_k - hi)) lies in (1/e - 1, 0]
        let s: f64 = xs.iter().zip(ws).map(|(x, w)| w * (zeta * (x - hi)).exp_m1()).sum();
        return hi + s.ln_1p() / zeta;
    }
    let top = xs.iter().zip(lws).map(|(x, l)| zeta * x + l).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = xs.iter().zip(lws).map(|(x, l)| (zeta * x + l - top).exp()).sum();
    (top + s.ln()) / zeta
}

// Fourth-order central differences, using evenness at the left end and
// lower-order one-sided formulas at the right end.
fn derivatives(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let at = |i: isize| v[i.unsigned_abs()];
    let mut d = vec![0.0; n];
    for i in 0..n as isize {
        let iu = i as usize;
        d[iu] = if iu + 2 < n {
            (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h)
        } else if iu + 1 < n {
            (at(i + 1) - at(i - 1)) / (2.0 * h)
        } else {
            (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h)
        };
    }
    d[0] = 0.0;
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_limits() {
        let xs = [0.3, -0.2, 1.5];
        let ws = [0.2, 0.5, 0.3];
        let lws: Vec<f64> = ws.iter().map(|w: &f64| w.ln()).collect();
        let plain: f64 = xs.iter().zip(&ws).map(|(x, w)| x * w).sum();
        assert!((combine(&xs, &ws, &lws, 0.0) - plain).abs() < 1e-15);
        assert!((combine(&xs, &ws, &lws, 1e-12) - plain).abs() < 1e-10);
        for zeta in [0.3, 1.0] {
            let direct = xs.iter().zip(&ws).map(|(x, w)| w * (zeta * x).exp()).sum::<f64>().ln() / zeta;
            assert!((combine(&xs, &ws, &lws, zeta) - direct).abs() < 1e-14);
        }
        // strong tilt toward a node of tiny weight
        let xs = [0.0, 800.0];
        let ws = [1.0, 1e-300];
        let lws: Vec<f64> = ws.iter().map(|w: &f64| w.ln()).collect();
        let v = combine(&xs, &ws, &lws, 1.0);
        assert!((v - (800.0 + 1e-300f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let h = 0.1;
        let vals: Vec<f64> = (0..50).map(|i| (i as f64 * h).powi(2) + 1.0).collect();
        let ders = derivatives(&vals, h);
        let lvl = Level::Grid { h, vals, ders };
        for &x in &[0.0, 0.05, 1.234, -2.71] {
            assert!((lvl.eval(x) - (x * x + 1.0)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn default_grid_scales_with_beta() {
        assert_eq!(ParisiGrid::default_for(&ModelSpec::sk(0.5)).x_max, 12.0);
        let g = ParisiGrid::default_for(&ModelSpec::sk(10.0));
        assert!((g.x_max - 120.0 * 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(ParisiGrid::default_for(&ModelSpec::sk(0.0)).x_max, 12.0);
    }
}
