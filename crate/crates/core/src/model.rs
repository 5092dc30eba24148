//! Model specification and the covariance function `xi`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `mixture[k]` is the coefficient of the `(k+1)`-spin term, so the plain SK
/// model is `mixture = [0, 1]` and `xi(x) = beta^2 * sum_p mixture[p-1]^2 x^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub beta: f64,
    #[serde(default)]
    pub h: f64,
    pub mixture: Vec<f64>,
}

impl ModelSpec {
    pub fn sk(beta: f64) -> Self {
        Self { beta, h: 0.0, mixture: vec![0.0, 1.0] }
    }

    pub fn with_field(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {}", self.beta)));
        }
        if !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!("h = {}", self.h)));
        }
        if self.mixture.is_empty() || self.mixture.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("mixture must be finite and nonempty".into()));
        }
        Ok(())
    }

    /// True when only the 2-spin coefficient is nonzero.
    pub fn is_pure_sk(&self) -> bool {
        self.mixture
            .iter()
            .enumerate()
            .all(|(k, &c)| if k == 1 { c != 0.0 } else { c == 0.0 })
    }

    /// Active `(p, coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mixture
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(k, &c)| (k + 1, c))
    }

    pub fn xi(&self, x: f64) -> f64 {
        let b2 = self.beta * self.beta;
        self.terms().map(|(p, c)| b2 * c * c * x.powi(p as i32)).sum()
    }

    pub fn xi_prime(&self, x: f64) -> f64 {
        let b2 = self.beta * self.beta;
        self.terms()
            .map(|(p, c)| b2 * c * c * p as f64 * x.powi(p as i32 - 1))
            .sum()
    }

    pub fn xi_second(&self, x: f64) -> f64 {
        let b2 = self.beta * self.beta;
        self.terms()
            .filter(|(p, _)| *p >= 2)
            .map(|(p, c)| b2 * c * c * (p * (p - 1)) as f64 * x.powi(p as i32 - 2))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sk_xi() {
        let m = ModelSpec::sk(0.7);
        assert!((m.xi(0.5) - 0.49 * 0.25).abs() < 1e-15);
        assert!((m.xi_prime(0.5) - 0.49).abs() < 1e-15);
        assert!((m.xi_second(0.3) - 0.98).abs() < 1e-15);
        assert!(m.is_pure_sk());
    }

    #[test]
    fn mixed_derivatives_match_finite_differences() {
        let m = ModelSpec { beta: 1.3, h: 0.0, mixture: vec![0.2, 1.0, 0.5, 0.1] };
        let e = 1e-5;
        for &x in &[0.1, 0.5, 0.9] {
            let d1 = (m.xi(x + e) - m.xi(x - e)) / (2.0 * e);
            let d2 = (m.xi_prime(x + e) - m.xi_prime(x - e)) / (2.0 * e);
            assert!((d1 - m.xi_prime(x)).abs() < 1e-8);
            assert!((d2 - m.xi_second(x)).abs() < 1e-8);
        }
        assert!(!m.is_pure_sk());
    }
}
