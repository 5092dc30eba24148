//! Numerics for mean-field spin glasses: the Parisi functional for step order
//! parameters, exact and Monte Carlo simulation of finite SK systems, Ruelle
//! probability cascades, and the matching/TSP cavity equations.

pub mod cavity;
pub mod error;
pub mod fop;
pub mod gg;
pub mod gaussian;
pub mod model;
pub mod overlap;
pub mod parisi;
pub mod rpc;
pub mod sk;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
pub use fop::{discretize_overlap, fop_l1_distance, validate_fop, FunctionalOrderParameter};
pub use model::ModelSpec;
pub use overlap::{overlap, OverlapMatrix, TestFunction};
pub use stream::RandomStream;
