//! Bifurcation-diagram tracer for the 1-D Neumann problem
//! `-u'' = lambda b(x) u^{q-1} + a(x) u^{p-1}` with indefinite weights
//! and concave-convex exponents `1 < q < 2 < p`.
//!
//! The toolkit discretizes the interval with a uniform finite-difference
//! grid, solves the indefinite-weight eigenproblem at the trivial line,
//! traces solution branches of the regularized problem by pseudo-arclength
//! continuation, drives the regularization parameter to zero over a family
//! of traces, and classifies the limiting component (loop / mushroom).

// negated comparisons like `!(x > 0.0)` are deliberate NaN-rejecting guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::too_many_arguments)]

pub mod cli;
pub mod config;
pub mod continuation;
pub mod family;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod spectra;
pub mod system;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("no positive principal eigenvalue: {0}")]
    NoPositivePrincipalEigenvalue(String),

    #[error("cap not found: {0}")]
    CapNotFound(String),

    #[error("constant limit undefined: weight integral of a is not positive")]
    ConstantLimitUndefined,

    #[error("Jacobian singular at origin: unregularized concave term is not differentiable at 0")]
    JacobianSingularAtOrigin,

    #[error("identity undefined at zero parameter")]
    IdentityUndefinedAtZeroParameter,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("singular linear system")]
    SingularSystem,

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
