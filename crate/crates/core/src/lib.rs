//! Numerical toolkit for the rainbow-ladder quark gap equation at infinite
//! renormalization scale.
//!
//! The crate is organized around a discretized pair of channel operators
//! (scalar and vector) built from a gluon interaction kernel, a radial
//! quadrature grid and an angular rule on the 3-sphere:
//!
//! * [`grid`] / [`angular`] — quadrature rules and the S³ angular integrals,
//! * [`gluon`] — the interaction models and their UV asymptotics,
//! * [`quark`] — sampled dressing functions, tails and weight functions,
//! * [`operators`] — the discretized channel operators, their linearization
//!   and the sign-split of the vector channel,
//! * [`spectral`] — Perron-root computation and critical-coupling location,
//! * [`bounds`] — row-integral existence/non-existence bounds,
//! * [`solver`] — damped fixed-point solution of the coupled system,
//! * [`certificates`] — bracket certificates for the coupled equations,
//! * [`asymptotics`] — UV tail relations and the composite-norm experiments,
//! * [`report`] — serializable result records shared with the CLI.

pub mod angular;
pub mod asymptotics;
pub mod bounds;
pub mod certificates;
pub mod gluon;
pub mod grid;
pub mod operators;
pub mod optimize;
pub mod quark;
pub mod report;
pub mod solver;
pub mod spectral;

pub use angular::AngularRule;
pub use gluon::GluonKernel;
pub use grid::RadialGrid;
pub use operators::{Assembly, ZProfile};
pub use quark::{QuarkState, TailSpec, WeightFunction};

/// Errors shared across the numerical layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("kernel domain error: {0}")]
    KernelDomain(String),
    #[error("angular integrand not integrable: {0}")]
    AngularDomain(String),
    #[error("sign split violated: {0}")]
    SplitViolated(String),
    #[error("power iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("tail fit failed: {0}")]
    TailFit(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
