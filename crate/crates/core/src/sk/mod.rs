//! Finite-`N` SK and mixed p-spin systems: coupling draws, exhaustive
//! enumeration up to `N = 22`, Metropolis sampling, and disorder-averaged
//! observables.

pub mod dean;
pub mod disorder;
pub mod enumerate;
pub mod mcmc;
pub mod observables;
mod walsh;

pub use dean::{dean_comparison, dean_statistics, DeanComparison, DeanStats, DenseCouplings, PairCouplings, StreamedCouplings};
pub use disorder::{Disorder, PertSpec, Terms, MAX_ENUM};
pub use enumerate::{enumerate, summarize, GibbsSummary, GibbsTable};
pub use mcmc::{run_chains, split_rhat, McmcOptions, McmcRun};
pub use observables::{
    cavity_increment, cavity_series, free_energy, free_energy_with, gg_residual, ground_state_density,
    overlap_histogram, sample_replicas, ultrametric_violation, CavitySeries, OverlapHistogram, Sampler,
};
