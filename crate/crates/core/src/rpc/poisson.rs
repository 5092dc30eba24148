//! Poisson processes on `(0, inf)` with mean measure `zeta x^{-1-zeta} dx`,
//! so that `mu([a, inf)) = a^{-zeta}`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonSpec {
    pub zeta: f64,
    /// Number of largest points retained.
    pub k: usize,
}

impl PoissonSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::OutOfRange { value: self.zeta, lo: 0.0, hi: 1.0 });
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("need at least one point".into()));
        }
        Ok(())
    }

    /// `mu([a, b))`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let tail = |x: f64| if x.is_infinite() { 0.0 } else { x.powf(-self.zeta) };
        tail(a) - tail(b)
    }
}

/// Points in `[a, b)` drawn cell by cell over the partition `[1, inf)`,
/// `[1/m, 1/(m-1))`: a Poisson count per cell, then that many points from
/// the measure restricted to the cell.
pub fn sample_poisson_threestep(spec: &PoissonSpec, a: f64, b: f64, stream: &RandomStream) -> Result<Vec<f64>> {
    if !(spec.zeta > 0.0 && spec.zeta < 1.0) {
        return Err(Error::OutOfRange { value: spec.zeta, lo: 0.0, hi: 1.0 });
    }
    if a <= 0.0 {
        return Err(Error::InfiniteMass(a));
    }
    if !(b > a) {
        return Err(Error::InvalidParameter(format!("empty window [{a}, {b})")));
    }
    let mut rng = stream.rng();
    let mut points = vec![];
    let mut m = 1usize;
    loop {
        let (lo, hi) = if m == 1 { (1.0, f64::INFINITY) } else { (1.0 / m as f64, 1.0 / (m - 1) as f64) };
        if hi <= a {
            break;
        }
        let (c, d) = (lo.max(a), hi.min(b));
        if c < d {
            let mu = spec.mass(c, d);
            let count = Poisson::new(mu).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(&mut rng) as usize;
            let top = c.powf(-spec.zeta);
            for _ in 0..count {
                let u: f64 = rng.random();
                points.push((top - u * mu).powf(-1.0 / spec.zeta));
            }
        }
        m += 1;
    }
    points.sort_by(|x, y| y.total_cmp(x));
    Ok(points)
}

/// `u_j = Gamma_j^{-1/zeta}` for the next `k` arrival times `Gamma_j` of a
/// unit-rate process that has reached `start`; returns the points and the
/// last arrival.
pub(crate) fn arrivals<R: Rng>(zeta: f64, k: usize, start: f64, rng: &mut R) -> (Vec<f64>, f64) {
    let mut gamma = start;
    let pts = (0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            gamma += e;
            gamma.powf(-1.0 / zeta)
        })
        .collect();
    (pts, gamma)
}

/// Decreasing `u_1 > ... > u_K`.
pub fn sample_poisson_ordered(spec: &PoissonSpec, stream: &RandomStream) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(arrivals(spec.zeta, spec.k, 0.0, &mut stream.rng()).0)
}

/// `E[sum_{j > k} u_j | Gamma_k] = Gamma_k^{1 - 1/zeta} / (1/zeta - 1)`.
pub(crate) fn tail_mass(zeta: f64, gamma_k: f64) -> f64 {
    let a = 1.0 / zeta;
    gamma_k.powf(1.0 - a) / (a - 1.0)
}
