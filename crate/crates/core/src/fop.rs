//! Step functional order parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A step CDF on `[0,1]`: `zeta(t) = cdf[p]` for `qs[p] <= t < qs[p+1]`,
/// zero below `qs[0]` and one at and above the last atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalOrderParameter {
    pub qs: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl FunctionalOrderParameter {
    /// Builds and validates.
    pub fn new(qs: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        let fop = Self { qs, cdf };
        validate_fop(&fop)?;
        Ok(fop)
    }

    /// The Dirac mass at `q`, written with the fewest atoms that keep `1` as
    /// the last atom.
    pub fn delta(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange { value: q, lo: 0.0, hi: 1.0 });
        }
        if q == 0.0 {
            Self::new(vec![0.0, 1.0], vec![1.0, 1.0])
        } else if q == 1.0 {
            Self::new(vec![0.0, 1.0], vec![0.0, 1.0])
        } else {
            Self::new(vec![0.0, q, 1.0], vec![0.0, 1.0, 1.0])
        }
    }

    pub fn steps(&self) -> usize {
        self.qs.len() - 1
    }

    /// Evaluates the CDF at `t`.
    pub fn zeta(&self, t: f64) -> f64 {
        if t >= *self.qs.last().unwrap() {
            return 1.0;
        }
        match self.qs.iter().rposition(|&q| q <= t) {
            Some(p) => self.cdf[p],
            None => 0.0,
        }
    }

    /// Same CDF with `q = 1` as the last atom, appending a unit level if needed.
    pub fn with_top_atom(&self) -> Self {
        let mut out = self.clone();
        if *out.qs.last().unwrap() < 1.0 {
            out.qs.push(1.0);
            out.cdf.push(1.0);
        }
        out
    }

    /// Point masses `zeta({q_p}) = cdf[p] - cdf[p-1]`.
    pub fn masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cdf
            .iter()
            .map(|&c| {
                let m = c - prev;
                prev = c;
                m
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("fop serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let fop: Self =
            serde_json::from_str(s).map_err(|e| Error::InvalidFop(e.to_string()))?;
        validate_fop(&fop)?;
        Ok(fop)
    }
}

pub fn validate_fop(fop: &FunctionalOrderParameter) -> Result<()> {
    let (qs, cdf) = (&fop.qs, &fop.cdf);
    if qs.is_empty() || qs.len() != cdf.len() {
        return Err(Error::ShapeMismatch(qs.len(), cdf.len()));
    }
    for (i, &q) in qs.iter().enumerate() {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::NonMonotoneAtoms(format!("q[{i}] = {q} outside [0,1]")));
        }
        if i > 0 && q <= qs[i - 1] {
            return Err(Error::NonMonotoneAtoms(format!(
                "q[{i}] = {q} does not exceed q[{}] = {}",
                i - 1,
                qs[i - 1]
            )));
        }
    }
    for (i, &c) in cdf.iter().enumerate() {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::NonMonotoneCdf(format!("cdf[{i}] = {c} outside [0,1]")));
        }
        if i > 0 && c < cdf[i - 1] {
            return Err(Error::NonMonotoneCdf(format!(
                "cdf[{i}] = {c} below cdf[{}] = {}",
                i - 1,
                cdf[i - 1]
            )));
        }
    }
    let last = *cdf.last().unwrap();
    if last != 1.0 {
        return Err(Error::CdfNotTerminatingAtOne(last));
    }
    Ok(())
}

/// `int_0^1 |zeta_1(t) - zeta_2(t)| dt`, exact for step functions.
pub fn fop_l1_distance(f1: &FunctionalOrderParameter, f2: &FunctionalOrderParameter) -> f64 {
    let mut cuts: Vec<f64> = f1.qs.iter().chain(f2.qs.iter()).copied().collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| (f1.zeta(w[0]) - f2.zeta(w[0])).abs() * (w[1] - w[0]))
        .sum()
}

/// Maps `q` to the largest grid atom not exceeding it.
pub fn discretize_overlap(q: f64, grid: &[f64]) -> Result<f64> {
    let (lo, hi) = match (grid.first(), grid.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidParameter("empty grid".into())),
    };
    if !(lo..=hi).contains(&q) {
        return Err(Error::OutOfRange { value: q, lo, hi });
    }
    let p = grid.iter().rposition(|&g| g <= q).unwrap_or(0);
    Ok(grid[p])
}
