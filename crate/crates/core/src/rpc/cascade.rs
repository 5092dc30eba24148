//! Truncated cascades: a dense `K`-ary tree of depth `r`, node `i` at depth
//! `d` having children `i K .. i K + K - 1` at depth `d + 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::poisson::{arrivals, tail_mass};
use crate::error::{Error, Result};
use crate::fop::FunctionalOrderParameter;
use crate::gg::ReplicaMeasure;
use crate::overlap::OverlapMatrix;
use crate::stream::{RandomStream, StreamRng};

pub const MAX_K: usize = 512;
pub const MAX_LEAVES: usize = 1 << 24;
/// Largest tolerated relative change of the retained mass when `K` doubles.
pub const TRUNCATION_TOL: f64 = 1e-3;
/// Nodes per level used for the doubling probe.
const PROBES: usize = 256;

/// `0 < zeta_0 < ... < zeta_{r-1} < 1` and `q_0 < ... < q_r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub zetas: Vec<f64>,
    pub qs: Vec<f64>,
    pub k: usize,
}

impl CascadeParams {
    pub fn new(zetas: Vec<f64>, qs: Vec<f64>, k: usize) -> Result<Self> {
        let p = Self { zetas, qs, k };
        p.validate()?;
        Ok(p)
    }

    pub fn depth(&self) -> usize {
        self.zetas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.zetas.len();
        if r == 0 {
            return Err(Error::InvalidParameter("need at least one level".into()));
        }
        if self.qs.len() != r + 1 {
            return Err(Error::LengthMismatch(self.qs.len(), r + 1));
        }
        if self.zetas.iter().any(|&z| !(z > 0.0 && z < 1.0)) || self.zetas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!("zetas must increase strictly in (0,1): {:?}", self.zetas)));
        }
        if self.qs.iter().any(|&q| !(0.0..=1.0).contains(&q)) || self.qs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NonMonotoneAtoms(format!("{:?}", self.qs)));
        }
        if self.k == 0 || self.k > MAX_K {
            return Err(Error::OutOfRange { value: self.k as f64, lo: 1.0, hi: MAX_K as f64 });
        }
        let leaves = (self.k as f64).powi(r as i32);
        if leaves > MAX_LEAVES as f64 {
            return Err(Error::TooLarge { size: leaves as usize, limit: MAX_LEAVES });
        }
        Ok(())
    }

    /// The prescribed law of `R_{1,2}`: mass `zeta_p - zeta_{p-1}` at `q_p`.
    pub fn overlap_law(&self) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out: Vec<f64> = self
            .zetas
            .iter()
            .map(|&z| {
                let m = z - prev;
                prev = z;
                m
            })
            .collect();
        out.push(1.0 - prev);
        out
    }

    /// The step order parameter with atoms `qs` and `zeta = zeta_p` on
    /// `[q_p, q_{p+1})`.
    pub fn fop(&self) -> Result<FunctionalOrderParameter> {
        let mut cdf = self.zetas.clone();
        cdf.push(1.0);
        FunctionalOrderParameter::new(self.qs.clone(), cdf)
    }
}

/// A sampled replica: a depth-`r` leaf, or (`child = None`) a point in the
/// unresolved tail below a depth-`r-1` node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub parent: usize,
    pub child: Option<usize>,
}

/// One cascade. Children beyond the first `K` of a depth-`r-1` node are kept
/// as a single `dust` mass set to the conditional mean of the discarded
/// points; two replicas in the same dust are distinct leaves.
#[derive(Clone, Debug)]
pub struct Cascade {
    pub params: CascadeParams,
    /// `mass[d][i]`: weight of the subtree under node `i` at depth `d`
    /// (`mass[0] = [1]`); `mass[r]` are the leaf weights `v_alpha`.
    pub mass: Vec<Vec<f64>>,
    pub dust: Vec<f64>,
    /// Relative change of the retained mass when `K` doubles, worst level.
    pub diagnostic: f64,
    // prefix sums of `mass[d]` within sibling groups, d >= 1
    cum: Vec<Vec<f64>>,
}

/// Builds a cascade and applies the truncation gate.
pub fn build_cascade(params: &CascadeParams, stream: &RandomStream) -> Result<Cascade> {
    let c = Cascade::build(params, stream)?;
    if c.diagnostic > TRUNCATION_TOL {
        return Err(Error::TruncationUnstable(c.diagnostic));
    }
    Ok(c)
}

impl Cascade {
    /// Builds without the truncation gate; `diagnostic` is still filled in.
    /// Node `i` at depth `d` draws its children from `stream.child(d).child(i)`.
    pub fn build(params: &CascadeParams, stream: &RandomStream) -> Result<Self> {
        params.validate()?;
        let r = params.depth();
        let k = params.k;
        // log w by depth
        let mut lw: Vec<Vec<f64>> = vec![vec![0.0]];
        let mut log_tail = vec![];
        let mut diagnostic: f64 = 0.0;
        for d in 0..r {
            let zeta = params.zetas[d];
            let parents = lw[d].len();
            let mut next = vec![0.0; parents * k];
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..parents {
                let mut rng = stream.child(d as u64).child(i as u64).rng();
                let (u, gamma) = arrivals(zeta, k, 0.0, &mut rng);
                for (j, x) in u.iter().enumerate() {
                    next[i * k + j] = lw[d][i] + x.ln();
                }
                let leaf_parent = d + 1 == r;
                if leaf_parent {
                    log_tail.push(lw[d][i] + tail_mass(zeta, gamma).ln());
                }
                if i < PROBES {
                    // continue the same arrival sequence to 2K points
                    let s_k: f64 = u.iter().sum();
                    let (more, gamma2) = arrivals(zeta, k, gamma, &mut rng);
                    let extra: f64 = more.iter().sum();
                    let (a, b) = if leaf_parent {
                        (s_k + tail_mass(zeta, gamma), s_k + extra + tail_mass(zeta, gamma2))
                    } else {
                        (s_k, s_k + extra)
                    };
                    num += b - a;
                    den += b;
                }
            }
            diagnostic = diagnostic.max((num / den).abs());
            lw.push(next);
        }
        let top = lw[r].iter().chain(&log_tail).copied().fold(f64::NEG_INFINITY, f64::max);
        let mut leaves: Vec<f64> = lw[r].iter().map(|x| (x - top).exp()).collect();
        let mut dust: Vec<f64> = log_tail.iter().map(|x| (x - top).exp()).collect();
        let total: f64 = leaves.iter().sum::<f64>() + dust.iter().sum::<f64>();
        leaves.iter_mut().for_each(|x| *x /= total);
        dust.iter_mut().for_each(|x| *x /= total);
        let mut mass = vec![vec![]; r + 1];
        mass[r] = leaves;
        for d in (0..r).rev() {
            mass[d] = mass[d + 1].chunks(k).map(|c| c.iter().sum()).collect();
            if d + 1 == r {
                mass[d].iter_mut().zip(&dust).for_each(|(m, x)| *m += x);
            }
        }
        let cum = (0..=r)
            .map(|d| {
                if d == 0 {
                    return vec![];
                }
                let mut out = Vec::with_capacity(mass[d].len());
                for c in mass[d].chunks(k) {
                    let mut s = 0.0;
                    for x in c {
                        s += x;
                        out.push(s);
                    }
                }
                out
            })
            .collect();
        Ok(Self { params: params.clone(), mass, dust, diagnostic, cum })
    }

    pub fn depth(&self) -> usize {
        self.params.depth()
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    /// Total weight of the named leaves plus dust; 1 up to rounding.
    pub fn total(&self) -> f64 {
        self.mass[self.depth()].iter().sum::<f64>() + self.dust.iter().sum::<f64>()
    }

    /// Index of the depth-`d` ancestor, `None` for a dust replica at `d = r`.
    pub fn ancestor(&self, leaf: &Leaf, d: usize) -> Option<usize> {
        let r = self.depth();
        if d == r {
            leaf.child.map(|c| leaf.parent * self.k() + c)
        } else {
            Some(leaf.parent / self.k().pow((r - 1 - d) as u32))
        }
    }

    /// Depth of the last common vertex of two distinct replicas.
    pub fn level(&self, a: &Leaf, b: &Leaf) -> usize {
        let r = self.depth();
        if a.parent == b.parent {
            return if a.child.is_some() && a.child == b.child { r } else { r - 1 };
        }
        let (mut pa, mut pb, mut d) = (a.parent, b.parent, r - 1);
        while pa != pb {
            pa /= self.k();
            pb /= self.k();
            d -= 1;
        }
        d
    }

    pub fn sample_leaf(&self, rng: &mut StreamRng) -> Leaf {
        let r = self.depth();
        let k = self.k();
        let mut node = 0usize;
        for d in 0..r {
            let x = rng.random::<f64>() * self.mass[d][node];
            let group = &self.cum[d + 1][node * k..node * k + k];
            let j = group.partition_point(|&c| c <= x);
            if j == k {
                if d + 1 == r {
                    return Leaf { parent: node, child: None };
                }
                // rounding at an internal node: take the last child
                node = node * k + k - 1;
            } else if d + 1 == r {
                return Leaf { parent: node, child: Some(j) };
            } else {
                node = node * k + j;
            }
        }
        unreachable!("descent ends at depth r")
    }

    pub fn sample_leaves(&self, n: usize, rng: &mut StreamRng) -> Vec<Leaf> {
        (0..n).map(|_| self.sample_leaf(rng)).collect()
    }

    pub fn overlaps(&self, leaves: &[Leaf]) -> OverlapMatrix {
        let qs = &self.params.qs;
        let r = self.depth();
        OverlapMatrix::from_fn(leaves.len(), |a, b| {
            if a == b {
                qs[r]
            } else {
                qs[self.level(&leaves[a], &leaves[b])]
            }
        })
    }

    /// `P(R_{1,2} = q_k)` under this cascade's Gibbs weights.
    pub fn level_law(&self) -> Vec<f64> {
        let r = self.depth();
        let sq: Vec<f64> = self.mass.iter().map(|m| m.iter().map(|x| x * x).sum()).collect();
        (0..=r).map(|d| if d < r { sq[d] - sq[d + 1] } else { sq[r] }).collect()
    }

    /// Calls `visit(weight, V)` for every named leaf and dust element, `V[d]`
    /// being the weight of its depth-`d` ancestor (`V[r] = 0` for dust).
    fn for_each_element(&self, mut visit: impl FnMut(f64, &[f64])) {
        let r = self.depth();
        let k = self.k();
        let mut v = vec![0.0; r + 1];
        for p in 0..self.mass[r - 1].len() {
            for d in 0..r {
                v[d] = self.mass[d][p / k.pow((r - 1 - d) as u32)];
            }
            for j in 0..k {
                v[r] = self.mass[r][p * k + j];
                visit(v[r], &v);
            }
            v[r] = 0.0;
            visit(self.dust[p], &v);
        }
    }

    /// `sum_d f(q_d) P(R(sigma, sigma') = q_d | sigma)` for an element with
    /// ancestor weights `v`.
    fn conditional(&self, f: &dyn Fn(f64) -> f64, v: &[f64]) -> f64 {
        let r = self.depth();
        let qs = &self.params.qs;
        (0..r).map(|d| f(qs[d]) * (v[d] - v[d + 1])).sum::<f64>() + f(qs[r]) * v[r]
    }

    /// `<exp(t sum_l f_l(R(sigma, sigma^l)))>` over `sigma` for fixed replicas.
    pub fn tilted_average(&self, reps: &[Leaf], fs: &[&dyn Fn(f64) -> f64], t: f64) -> f64 {
        let active: Vec<usize> = (0..reps.len()).collect();
        self.tilted(0, 0, &active, 0.0, reps, fs, t)
    }

    #[allow(clippy::too_many_arguments)]
    fn tilted(&self, d: usize, node: usize, active: &[usize], base: f64, reps: &[Leaf], fs: &[&dyn Fn(f64) -> f64], t: f64) -> f64 {
        let q = self.params.qs[d];
        let here: f64 = active.iter().map(|&a| fs[a](q)).sum();
        if d == self.depth() {
            return self.mass[d][node] * (t * (base + here)).exp();
        }
        let mut groups: Vec<(usize, Vec<usize>)> = vec![];
        for &a in active {
            if let Some(c) = self.ancestor(&reps[a], d + 1) {
                match groups.iter_mut().find(|g| g.0 == c) {
                    Some(g) => g.1.push(a),
                    None => groups.push((c, vec![a])),
                }
            }
        }
        let rest = (self.mass[d][node] - groups.iter().map(|g| self.mass[d + 1][g.0]).sum::<f64>()).max(0.0);
        let mut total = rest * (t * (base + here)).exp();
        for (c, members) in &groups {
            let left: f64 = active.iter().filter(|a| !members.contains(a)).map(|&a| fs[a](q)).sum();
            total += self.tilted(d + 1, *c, members, base + left, reps, fs, t);
        }
        total
    }
}

impl ReplicaMeasure for Cascade {
    fn pair_average(&self, h: &dyn Fn(f64) -> f64) -> f64 {
        self.level_law().iter().zip(&self.params.qs).map(|(p, &q)| p * h(q)).sum()
    }

    fn chain_average(&self, f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64) -> f64 {
        let mut s = 0.0;
        self.for_each_element(|m, v| {
            if m > 0.0 {
                s += m * self.conditional(f, v) * self.conditional(g, v);
            }
        });
        s
    }

    fn sample_overlaps(&self, n: usize, count: usize, rng: &mut StreamRng) -> Vec<OverlapMatrix> {
        (0..count).map(|_| self.overlaps(&self.sample_leaves(n, rng))).collect()
    }
}

/// Overlap matrix of `n` leaves drawn from the cascade's weights.
pub fn sample_leaves(tree: &Cascade, n: usize, stream: &RandomStream) -> OverlapMatrix {
    tree.overlaps(&tree.sample_leaves(n, &mut stream.rng()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Cascade {
        let p = CascadeParams::new(vec![0.3, 0.7], vec![0.0, 0.4, 1.0], 8).unwrap();
        Cascade::build(&p, &RandomStream::new(1)).unwrap()
    }

    #[test]
    fn masses_are_consistent() {
        let c = small();
        assert!((c.total() - 1.0).abs() < 1e-12);
        assert!((c.mass[0][0] - 1.0).abs() < 1e-12);
        for d in 1..=2 {
            assert!(c.mass[d].iter().all(|&m| m > 0.0));
        }
        assert!((c.level_law().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn levels_follow_paths() {
        let c = small();
        let a = Leaf { parent: 3, child: Some(2) };
        assert_eq!(c.level(&a, &a), 2);
        assert_eq!(c.level(&a, &Leaf { parent: 3, child: None }), 1);
        assert_eq!(c.level(&a, &Leaf { parent: 4, child: Some(2) }), 0);
        assert_eq!(c.ancestor(&a, 2), Some(26));
        assert_eq!(c.ancestor(&a, 1), Some(3));
        assert_eq!(c.ancestor(&a, 0), Some(0));
    }

    #[test]
    fn untilted_average_is_one() {
        let c = small();
        let mut rng = RandomStream::new(2).rng();
        let reps = c.sample_leaves(3, &mut rng);
        let f = |x: f64| x * x;
        let fs: Vec<&dyn Fn(f64) -> f64> = vec![&f, &f, &f];
        assert!((c.tilted_average(&reps, &fs, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilted_average_matches_element_sum() {
        let c = small();
        let mut rng = RandomStream::new(3).rng();
        for _ in 0..20 {
            let reps = c.sample_leaves(2, &mut rng);
            let f1 = |x: f64| 0.5 * x;
            let f2 = |x: f64| if x >= 0.4 { 1.0 } else { -0.3 };
            let fs: Vec<&dyn Fn(f64) -> f64> = vec![&f1, &f2];
            // direct sum over named leaves and dust
            let k = c.k();
            let mut direct = 0.0;
            let qs = &c.params.qs;
            for p in 0..c.dust.len() {
                let mut elems: Vec<(Leaf, f64)> =
                    (0..k).map(|j| (Leaf { parent: p, child: Some(j) }, c.mass[2][p * k + j])).collect();
                elems.push((Leaf { parent: p, child: None }, c.dust[p]));
                for (e, m) in elems {
                    let lv = |rep: &Leaf| if e == *rep && e.child.is_some() { 2 } else { c.level(&e, rep) };
                    direct += m * (0.7 * (f1(qs[lv(&reps[0])]) + f2(qs[lv(&reps[1])]))).exp();
                }
            }
            assert!((c.tilted_average(&reps, &fs, 0.7) - direct).abs() < 1e-12);
        }
    }
}
