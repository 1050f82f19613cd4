//! Linear programming and the two exact oracles built on it: the trace
//! distance to the local polytope and the ν-sweep non-bilocality quantifier.

mod nbl;
mod nl;
mod problem;
mod simplex;

pub use nbl::{
    marginal_qfunctions, nbl_distance, nbl_distance_ij, nbl_feasibility, nu_bounds, BilocalInput,
    NBLResult, NblOracle, SweepMode, DEFAULT_GRID, ZERO_OBJECTIVE,
};
pub use nl::{nl_distance, NLResult, NlOracle};
pub use problem::{Basis, Constraint, LPSolution, LinearProgram, LpStatus, Sense};
pub use simplex::{solve, solve_warm};
