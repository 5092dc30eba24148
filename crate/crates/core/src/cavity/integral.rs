//! The matching and TSP cavity integral equations for the limiting
//! distribution `G` of the random-link models, and their length constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Matching,
    Tsp,
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matching" => Ok(Kind::Matching),
            "tsp" => Ok(Kind::Tsp),
            _ => Err(Error::InvalidParameter(format!("unknown kind {s:?} (matching|tsp)"))),
        }
    }
}

pub const MAX_ITER: usize = 10_000;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const TAIL_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralEquationSpec {
    pub kind: Kind,
    /// Pseudo-dimension `d >= 1`.
    pub d: f64,
    /// The grid is `[-x_max, x_max]`.
    pub x_max: f64,
    pub spacing: f64,
    pub damping: f64,
}

impl IntegralEquationSpec {
    /// `[-12, 12]` at spacing 0.005 for matching. The TSP solution decays only
    /// like `e^{-x}` on the right, so its grid is `[-24, 24]`.
    pub fn new(kind: Kind, d: f64) -> Self {
        let x_max = match kind {
            Kind::Matching => 12.0,
            Kind::Tsp => 24.0,
        };
        Self { kind, d, x_max, spacing: 0.005, damping: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d >= 1.0) || !self.d.is_finite() {
            return Err(Error::OutOfRange { value: self.d, lo: 1.0, hi: f64::INFINITY });
        }
        if !(self.spacing > 0.0 && self.spacing <= 0.01) {
            return Err(Error::OutOfRange { value: self.spacing, lo: 0.0, hi: 0.01 });
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::OutOfRange { value: self.damping, lo: 0.0, hi: 1.0 });
        }
        if !(self.x_max > 0.0) || !self.x_max.is_finite() {
            return Err(Error::InvalidParameter(format!("x_max must be positive, got {}", self.x_max)));
        }
        let steps = self.x_max / self.spacing;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::InvalidParameter("x_max must be a multiple of the spacing".into()));
        }
        Ok(())
    }

    /// Grid points `x_i = -x_max + i h`; symmetric, so `-x_i = x_{n-1-i}`.
    pub fn grid(&self) -> Vec<f64> {
        let half = (self.x_max / self.spacing).round() as usize;
        (0..=2 * half).map(|i| (i as f64 - half as f64) * self.spacing).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    /// Sup-norm change under one more application of the operator.
    pub residual: f64,
    pub iterations: usize,
    /// Mass of the integrand beyond the grid, closed analytically.
    pub tail_mass: f64,
}

impl GridFunction {
    pub fn at(&self, x: f64) -> f64 {
        let h = self.x[1] - self.x[0];
        let t = ((x - self.x[0]) / h).clamp(0.0, (self.x.len() - 1) as f64);
        let i = (t.floor() as usize).min(self.x.len() - 2);
        let f = t - i as f64;
        self.g[i] * (1.0 - f) + self.g[i + 1] * f
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,G\n");
        for (x, g) in self.x.iter().zip(&self.g) {
            s.push_str(&format!("{x},{g}\n"));
        }
        s
    }
}

// The integrand weight w(y): 2 e^{-G} for matching, (1 + G) e^{-G} for TSP.
fn weight(kind: Kind, g: f64) -> f64 {
    match kind {
        Kind::Matching => 2.0 * (-g).exp(),
        Kind::Tsp => (1.0 + g) * (-g).exp(),
    }
}

// Exponential decay rate of w fitted on the last unit of the grid.
fn tail_rate(w: &[f64], h: f64) -> f64 {
    let n = w.len();
    let back = ((1.0 / h).round() as usize).min(n - 1);
    let (a, b) = (w[n - 1 - back], w[n - 1]);
    if b <= 0.0 || a <= b {
        return f64::INFINITY;
    }
    (a / b).ln() / (back as f64 * h)
}

// d/dy by second-order differences.
fn derivative(w: &[f64], h: f64) -> Vec<f64> {
    let n = w.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * h)
            } else {
                (w[i + 1] - w[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// One application of the integral operator: returns `T(G)` on the grid and
/// the tail mass `int_{x_max}^inf w`.
pub fn apply_operator(spec: &IntegralEquationSpec, x: &[f64], g: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len();
    let h = spec.spacing;
    let w: Vec<f64> = g.iter().map(|&v| weight(spec.kind, v)).collect();
    let c = tail_rate(&w, h);
    let w_end = w[n - 1];
    let tail = if c.is_finite() { w_end / c } else { 0.0 };
    let mut out = vec![0.0; n];
    if spec.d == 1.0 {
        // cumulative trapezoid from the right with the Euler-Maclaurin
        // endpoint correction, which makes it fourth order
        let dw = derivative(&w, h);
        let mut acc = 0.0;
        let mut right = vec![0.0; n];
        for j in (0..n - 1).rev() {
            acc += 0.5 * h * (w[j] + w[j + 1]);
            right[j] = acc - h * h / 12.0 * (dw[n - 1] - dw[j]);
        }
        for i in 0..n {
            out[i] = right[n - 1 - i] + tail;
        }
    } else {
        let e = spec.d - 1.0;
        // tail: w(y) ~ w_end e^{-c (y - x_max)}, kernel (x + y)^e integrated
        // on a fixed substitution grid
        let tail_nodes: Vec<(f64, f64)> = if c.is_finite() && w_end > 0.0 {
            let span = 40.0 / c;
            let m = 400;
            let ds = span / m as f64;
            (0..=m)
                .map(|k| {
                    let s = k as f64 * ds;
                    let tw = if k == 0 || k == m { 0.5 } else { 1.0 };
                    (s, tw * ds * w_end * (-c * s).exp())
                })
                .collect()
        } else {
            vec![]
        };
        // x_i + x_j = (i + j - (n - 1)) h, so the kernel is one vector
        let kernel: Vec<f64> = (0..n).map(|m| (m as f64 * h).powf(e)).collect();
        for i in 0..n {
            let lo = n - 1 - i;
            let mut s = 0.0;
            for j in lo..n {
                s += kernel[j - lo] * w[j];
            }
            // trapezoid end weights; the kernel vanishes at j = lo
            s -= 0.5 * (kernel[i] * w[n - 1] + kernel[0] * w[lo]);
            s *= h;
            let a = x[i] + x[n - 1];
            s += tail_nodes.iter().map(|&(t, wt)| (a + t).powf(e) * wt).sum::<f64>();
            out[i] = s;
        }
    }
    (out, tail)
}

// Deliberately not the d = 1 matching solution, so that case still iterates.
fn initial_guess(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| softplus(v)).collect()
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Damped fixed-point iteration `G <- (1 - lambda) G + lambda T(G)` until the
/// sup-norm residual `|T(G) - G|` drops below `1e-8`.
pub fn solve_g(spec: &IntegralEquationSpec) -> Result<GridFunction> {
    spec.validate()?;
    let x = spec.grid();
    let mut g = initial_guess(&x);
    let lam = spec.damping;
    for it in 0..MAX_ITER {
        let (t, tail) = apply_operator(spec, &x, &g);
        let residual = t.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::NotConverged("integral operator produced a non-finite value".into()));
        }
        if residual < RESIDUAL_TOL {
            check_tail(&t, tail)?;
            return Ok(GridFunction { x, g: t, residual, iterations: it + 1, tail_mass: tail });
        }
        for (gi, ti) in g.iter_mut().zip(&t) {
            *gi = (1.0 - lam) * *gi + lam * ti;
        }
    }
    Err(Error::NotConverged(format!("no fixed point within {MAX_ITER} iterations")))
}

// Right: the closed tail of the integrand. Left: G itself must have decayed.
fn check_tail(g: &[f64], tail: f64) -> Result<()> {
    let worst = tail.max(g[0]);
    if worst > TAIL_TOL {
        return Err(Error::GridTooNarrow(worst));
    }
    Ok(())
}

/// The length constant: `d int G e^{-G}` for matching and
/// `(d/2) int G (1 + G) e^{-G}` for TSP.
pub fn asymptotic_constant(spec: &IntegralEquationSpec) -> Result<f64> {
    let g = solve_g(spec)?;
    Ok(constant_of(spec.kind, spec.d, &g.x, &g.g))
}

/// The length-constant integral of a given `G` on a uniform grid. The
/// integrand vanishes at both ends, so the plain trapezoid rule is
/// spectrally accurate.
pub fn constant_of(kind: Kind, d: f64, x: &[f64], g: &[f64]) -> f64 {
    let h = x[1] - x[0];
    let f = |v: f64| match kind {
        Kind::Matching => v * (-v).exp(),
        Kind::Tsp => v * (1.0 + v) * (-v).exp(),
    };
    let n = g.len();
    let s: f64 = g.iter().enumerate().map(|(i, &v)| if i == 0 || i == n - 1 { 0.5 * f(v) } else { f(v) }).sum();
    let scale = match kind {
        Kind::Matching => d,
        Kind::Tsp => d / 2.0,
    };
    scale * s * h
}
