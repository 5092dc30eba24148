//! Overlaps, overlap matrices and the test-function library used by the
//! Ghirlanda-Guerra and invariance diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(1/N) sum_i s1_i s2_i` for two spin vectors.
pub fn overlap(sigma1: &[i8], sigma2: &[i8]) -> Result<f64> {
    if sigma1.len() != sigma2.len() {
        return Err(Error::LengthMismatch(sigma1.len(), sigma2.len()));
    }
    if sigma1.is_empty() {
        return Err(Error::InvalidParameter("empty spin configuration".into()));
    }
    let mut dot = 0i64;
    for (&a, &b) in sigma1.iter().zip(sigma2) {
        if a.abs() != 1 || b.abs() != 1 {
            return Err(Error::InvalidParameter("spins must be +1 or -1".into()));
        }
        dot += (a * b) as i64;
    }
    Ok(dot as f64 / sigma1.len() as f64)
}

/// Overlap of two configurations stored as bitmasks (bit set means spin -1).
#[inline]
pub fn overlap_bits(a: u64, b: u64, n: usize) -> f64 {
    1.0 - 2.0 * (a ^ b).count_ones() as f64 / n as f64
}

/// Spin vector of a bitmask configuration.
pub fn spins_from_bits(bits: u64, n: usize) -> Vec<i8> {
    (0..n).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect()
}

/// Symmetric matrix of replica overlaps with constant diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl OverlapMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    /// Validating constructor for row-major entries.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::LengthMismatch(entries.len(), n * n));
        }
        let m = Self { n, entries };
        m.check()?;
        Ok(m)
    }

    pub fn from_spins(configs: &[Vec<i8>]) -> Result<Self> {
        let n = configs.len();
        let mut err = None;
        let m = Self::from_fn(n, |i, j| match overlap(&configs[i], &configs[j]) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(m),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Symmetry, constant diagonal and entries in `[-1,1]`.
    pub fn check(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::OutOfRange { value: v, lo: -1.0, hi: 1.0 });
                }
                if v != self.get(j, i) {
                    return Err(Error::InvalidParameter(format!("asymmetric at ({i},{j})")));
                }
            }
            if self.get(i, i) != self.get(0, 0) {
                return Err(Error::InvalidParameter("diagonal is not constant".into()));
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.entries);
        SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.n == 0 || self.min_eigenvalue() >= -tol
    }

    /// Exact ultrametricity: every triple satisfies
    /// `R_jk >= min(R_ij, R_ik)`. Returns the number of violating ordered triples.
    pub fn ultrametric_violations(&self) -> usize {
        let n = self.n;
        let mut bad = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i != j && i != k && j != k
                        && self.get(j, k) < self.get(i, j).min(self.get(i, k))
                    {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }

    /// CSV with a header row of replica indices.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record((0..self.n).map(|i| i.to_string())).expect("in-memory write");
        for i in 0..self.n {
            w.write_record((0..self.n).map(|j| format!("{}", self.get(i, j))))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(s: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(s.as_bytes());
        let n = r.headers().map_err(|e| Error::InvalidParameter(e.to_string()))?.len();
        let mut entries = Vec::with_capacity(n * n);
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for field in rec.iter() {
                entries.push(
                    field.trim().parse::<f64>().map_err(|e| Error::InvalidParameter(e.to_string()))?,
                );
            }
        }
        Self::new(n, entries)
    }
}

/// Comparison used by indicator test functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Eq,
    Ge,
    Gt,
    Le,
    Lt,
}

/// Tolerance for `I(R = q)`; overlaps on a tree or a finite lattice are exact
/// up to rounding.
pub const EQ_TOL: f64 = 1e-9;

/// A function of one overlap value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OverlapFn {
    Power(u32),
    Abs,
    Indicator(Cmp, f64),
}

impl OverlapFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            OverlapFn::Power(k) => x.powi(k as i32),
            OverlapFn::Abs => x.abs(),
            OverlapFn::Indicator(c, q) => {
                let hit = match c {
                    Cmp::Eq => (x - q).abs() <= EQ_TOL,
                    Cmp::Ge => x >= q - EQ_TOL,
                    Cmp::Gt => x > q + EQ_TOL,
                    Cmp::Le => x <= q + EQ_TOL,
                    Cmp::Lt => x < q - EQ_TOL,
                };
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sup_abs(&self) -> f64 {
        1.0
    }
}

/// One factor `g(R_ab)` of a product test function; replica indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub a: usize,
    pub b: usize,
    pub g: OverlapFn,
}

/// `coef * prod_k g_k(R_{a_k b_k})`: constants, monomials, indicators and
/// their products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub coef: f64,
    pub factors: Vec<Factor>,
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        Self { coef: c, factors: vec![] }
    }

    pub fn pair(a: usize, b: usize, g: OverlapFn) -> Self {
        Self { coef: 1.0, factors: vec![Factor { a, b, g }] }
    }

    pub fn times(mut self, other: TestFunction) -> Self {
        self.coef *= other.coef;
        self.factors.extend(other.factors);
        self
    }

    /// Highest replica index used, 0 for constants.
    pub fn max_replica(&self) -> usize {
        self.factors.iter().map(|f| f.a.max(f.b)).max().unwrap_or(0)
    }

    pub fn eval(&self, r: impl Fn(usize, usize) -> f64) -> f64 {
        self.factors.iter().fold(self.coef, |acc, f| acc * f.g.eval(r(f.a, f.b)))
    }

    pub fn eval_matrix(&self, m: &OverlapMatrix) -> f64 {
        self.eval(|a, b| m.get(a - 1, b - 1))
    }

    /// If every factor reads the same pair, returns that (unordered) pair.
    pub fn single_pair(&self) -> Option<(usize, usize)> {
        let first = self.factors.first()?;
        let key = (first.a.min(first.b), first.a.max(first.b));
        self.factors
            .iter()
            .all(|f| (f.a.min(f.b), f.a.max(f.b)) == key && f.a != f.b)
            .then_some(key)
    }

    /// Scalar form of a single-pair function.
    pub fn pair_fn(&self, x: f64) -> f64 {
        self.factors.iter().fold(self.coef, |acc, f| acc * f.g.eval(x))
    }

    /// Parses `1`, `0.5`, `R12`, `R12^2`, `|R12|`, `I(R12=0.4)`, `I(R12>=0.4)`
    /// and `*`-products of these.
    pub fn parse(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownTestFunction(s.to_string());
        let mut out = TestFunction::constant(1.0);
        for tok in s.split('*').map(str::trim) {
            if tok.is_empty() {
                return Err(unknown());
            }
            if let Ok(c) = tok.parse::<f64>() {
                out.coef *= c;
                continue;
            }
            let (pair, g) = parse_factor(tok).ok_or_else(unknown)?;
            let (a, b) = pair.ok_or_else(unknown)?;
            out.factors.push(Factor { a, b, g });
        }
        Ok(out)
    }
}

/// A function of a single real argument `x`, as used for the `f_l` of the
/// invariance property: `coef * g(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarFn {
    pub coef: f64,
    pub g: Option<OverlapFn>,
}

impl ScalarFn {
    pub fn zero() -> Self {
        Self { coef: 0.0, g: None }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.g {
            Some(g) => self.coef * g.eval(x),
            None => self.coef,
        }
    }

    /// Parses `0`, `0.5*I(x>=0.4)`, `x^2` and similar.
    pub fn parse(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownTestFunction(s.to_string());
        let mut out = ScalarFn { coef: 1.0, g: None };
        for tok in s.split('*').map(str::trim) {
            if let Ok(c) = tok.parse::<f64>() {
                out.coef *= c;
                continue;
            }
            match parse_factor(tok) {
                Some((None, g)) if out.g.is_none() => out.g = Some(g),
                _ => return Err(unknown()),
            }
        }
        Ok(out)
    }
}

// Returns the pair (None for the scalar variable `x`) and the function.
fn parse_factor(tok: &str) -> Option<(Option<(usize, usize)>, OverlapFn)> {
    if let Some(inner) = tok.strip_prefix("I(").and_then(|t| t.strip_suffix(')')) {
        for (op, cmp) in [(">=", Cmp::Ge), ("<=", Cmp::Le), ("=", Cmp::Eq), (">", Cmp::Gt), ("<", Cmp::Lt)] {
            if let Some((lhs, rhs)) = inner.split_once(op) {
                let var = parse_var(lhs.trim())?;
                let q = rhs.trim().parse::<f64>().ok()?;
                return Some((var, OverlapFn::Indicator(cmp, q)));
            }
        }
        return None;
    }
    if let Some(inner) = tok.strip_prefix('|').and_then(|t| t.strip_suffix('|')) {
        return Some((parse_var(inner)?, OverlapFn::Abs));
    }
    let (base, k) = match tok.split_once('^') {
        Some((b, k)) => (b, k.parse::<u32>().ok()?),
        None => (tok, 1),
    };
    Some((parse_var(base)?, OverlapFn::Power(k)))
}

fn parse_var(s: &str) -> Option<Option<(usize, usize)>> {
    if s == "x" {
        return Some(None);
    }
    let digits = s.strip_prefix('R')?;
    let digits = digits.trim_start_matches('_').trim_matches(|c| c == '{' || c == '}');
    let (a, b) = if let Some((a, b)) = digits.split_once(',') {
        (a.parse().ok()?, b.parse().ok()?)
    } else if digits.len() == 2 {
        let mut it = digits.chars();
        (it.next()?.to_digit(10)? as usize, it.next()?.to_digit(10)? as usize)
    } else {
        return None;
    };
    (a >= 1 && b >= 1).then_some(Some((a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_examples() {
        let a = [1i8, 1, 1, 1];
        let b = [1i8, 1, -1, -1];
        assert_eq!(overlap(&a, &a).unwrap(), 1.0);
        assert_eq!(overlap(&a, &[-1, -1, -1, -1]).unwrap(), -1.0);
        assert_eq!(overlap(&a, &b).unwrap(), 0.0);
        assert!(matches!(overlap(&a, &[1, 1]), Err(Error::LengthMismatch(4, 2))));
    }

    #[test]
    fn bit_overlap_matches_spin_overlap() {
        for (a, b) in [(0b1011u64, 0b0110u64), (0, 0b1111), (0b1, 0b1)] {
            let s = overlap(&spins_from_bits(a, 4), &spins_from_bits(b, 4)).unwrap();
            assert_eq!(s, overlap_bits(a, b, 4));
        }
    }

    #[test]
    fn csv_round_trip() {
        let m = OverlapMatrix::from_fn(3, |i, j| if i == j { 1.0 } else { 0.25 * (i + j) as f64 });
        let s = m.to_csv();
        assert!(s.starts_with("0,1,2\n"));
        assert_eq!(OverlapMatrix::from_csv(&s).unwrap(), m);
        assert!(m.is_psd(1e-12));
    }

    #[test]
    fn parse_library() {
        let f = TestFunction::parse("R12^2").unwrap();
        assert_eq!(f.single_pair(), Some((1, 2)));
        assert_eq!(f.eval(|_, _| 0.5), 0.25);
        let g = TestFunction::parse("I(R12=0.4)").unwrap();
        assert_eq!(g.pair_fn(0.4), 1.0);
        assert_eq!(g.pair_fn(0.0), 0.0);
        let c = TestFunction::parse("1").unwrap();
        assert_eq!(c.max_replica(), 0);
        assert_eq!(c.single_pair(), None);
        let p = TestFunction::parse("2*R12*R_{1,3}^2").unwrap();
        assert_eq!(p.max_replica(), 3);
        assert_eq!(p.single_pair(), None);
        assert!(matches!(TestFunction::parse("foo"), Err(Error::UnknownTestFunction(_))));
        let s = ScalarFn::parse("0.5*I(x>=0.4)").unwrap();
        assert_eq!(s.eval(0.4), 0.5);
        assert_eq!(s.eval(0.0), 0.0);
        assert_eq!(ScalarFn::parse("0").unwrap().eval(0.3), 0.0);
    }
}
