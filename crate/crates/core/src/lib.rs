//! Optimal control to a terminal set with nonnegative, possibly infinite,
//! stage costs: value iteration, policy iteration, optimistic policy
//! iteration and minimax variants, plus fixed-point certification and
//! assumption checks.

pub mod assumptions;
pub mod error;
pub mod ext;
pub mod finite;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod minimax;
pub mod model;
pub mod pi;
pub mod random;
pub mod solver;
pub mod vi;

pub use error::{Error, Result};
pub use ext::{ext_add, ExtCost};
pub use model::{membership_in_j, Policy, Problem, ProblemBuilder, ValidationReport, ValueFunction};
pub use solver::{Init, SolveOutcome, SolveRequest, Solver, SolverRegistry};
