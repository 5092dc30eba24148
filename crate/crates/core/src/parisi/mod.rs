//! The Parisi functional for step order parameters: backward recursion,
//! minimization over `r`-step families, replica-symmetric analysis and
//! ground-state brackets.

pub mod minimize;
pub mod nm;
pub mod recursion;
pub mod rs;

pub use minimize::{minimize, minimize_chain, minimize_with, MinResult, MinimizeOptions};
pub use recursion::{solve_checked, solve_recursion, GridReport, Level, ParisiGrid, ParisiSolution, REFINE_TOL};
pub use rs::{dat_condition, ground_state_bracket, rs_fixed_point, rs_minimum, rs_value, Bracket, DatReport};
