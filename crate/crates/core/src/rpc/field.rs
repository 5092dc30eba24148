//! Gaussian fields indexed by the leaves of a cascade, with covariance
//! `E g(a) g(b) = q_{a ^ b}^p`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cascade::Cascade;
use crate::stream::RandomStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeField {
    /// Values at the depth-`r` leaves.
    pub leaves: Vec<f64>,
    /// Partial sums down to the depth-`r-1` nodes; a dust leaf below node `i`
    /// has value `parents[i] + sqrt(top_var) * eta` with fresh `eta`.
    pub parents: Vec<f64>,
    pub top_var: f64,
}

/// `g_p(a) = eta_root q_0^{p/2} + sum_{b on the path to a} eta_b (q_{|b|}^p - q_{|b|-1}^p)^{1/2}`,
/// with the depth-`d` variables drawn in order from `stream.child(d)`.
pub fn tree_gaussian(tree: &Cascade, p: u32, stream: &RandomStream) -> TreeField {
    let r = tree.depth();
    let k = tree.k();
    let qp: Vec<f64> = tree.params.qs.iter().map(|q| q.powi(p as i32)).collect();
    let mut level = vec![stream.child(0).rng().sample::<f64, _>(StandardNormal) * qp[0].sqrt()];
    let mut parents = vec![];
    for d in 1..=r {
        let sd = (qp[d] - qp[d - 1]).sqrt();
        let mut rng = stream.child(d as u64).rng();
        let next: Vec<f64> = (0..level.len() * k)
            .map(|i| level[i / k] + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if d == r {
            parents = std::mem::replace(&mut level, next);
        } else {
            level = next;
        }
    }
    TreeField { leaves: level, parents, top_var: qp[r] - qp[r - 1] }
}
