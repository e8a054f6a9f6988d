use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cost must be a nonnegative number or inf, got {0}")]
    InvalidCost(f64),

    #[error("problem failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("value function has {got} entries but the problem has {expected} states")]
    DomainMismatch { expected: usize, got: usize },

    #[error("policy is inadmissible at state {state}: control index {control} but only {available} controls")]
    InadmissiblePolicy {
        state: String,
        control: usize,
        available: usize,
    },

    #[error("operation needs single-successor deterministic dynamics: {0}")]
    NotDeterministic(String),

    #[error("operation needs a disturbance set")]
    MissingDisturbances,

    #[error("oracle precondition violated: {0}")]
    OraclePrecondition(String),

    #[error("policy enumeration needs {needed} policies, budget is {budget}")]
    EnumerationBudget { needed: f64, budget: u64 },

    #[error("monotonicity breach at iteration {iteration}, state {state}: {detail}")]
    MonotonicityBreach {
        iteration: usize,
        state: String,
        detail: String,
    },

    #[error("seed violates J0 >= T J0 or is not zero on the terminal set (state {state})")]
    OpiSeed { state: String },

    #[error("no convergence after {iterations} iterations (last change {last_change})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("grid does not contain the origin as a node: {0}")]
    GridTooCoarse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("fixture check failed: {0}")]
    FixtureCheck(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
