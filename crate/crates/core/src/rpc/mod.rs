//! Ruelle probability cascades: Poisson weights on a truncated tree, leaf
//! sampling, tree-indexed Gaussian fields, and Monte Carlo evaluation of the
//! cascade side of Guerra's bound and of the Ghirlanda-Guerra and invariance
//! identities.

pub mod cascade;
pub mod field;
pub mod guerra;
pub mod identities;
pub mod poisson;

pub use cascade::{build_cascade, sample_leaves, Cascade, CascadeParams, Leaf, TRUNCATION_TOL};
pub use field::{tree_gaussian, TreeField};
pub use guerra::{guerra_analytic, guerra_rhs_mc, guerra_rhs_mc_with, GuerraEstimate, GuerraOptions};
pub use identities::{gg_residual_rpc, invariance_residual, overlap_law_rpc, InvarianceEstimate, OverlapLawEstimate};
pub use poisson::{sample_poisson_ordered, sample_poisson_threestep, PoissonSpec};
