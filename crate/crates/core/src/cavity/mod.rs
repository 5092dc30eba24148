//! Random-link matching and travelling salesman problems: the cavity integral
//! equations with their limiting constants, and exact finite-N solvers.

pub mod instance;
pub mod integral;

pub use instance::{empirical_limit, greedy_matching, min_matching_exact, tsp_exact, EmpiricalLimit, EmpiricalRow, RandomInstance};
pub use integral::{apply_operator, asymptotic_constant, constant_of, solve_g, GridFunction, IntegralEquationSpec, Kind};
