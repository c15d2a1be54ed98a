//! Numerics for hyperbolic half-space geometry: shrinking/penetration
//! constants, geodesics and horoballs in H^2/H^3, penetration maps with a
//! randomized inequality registry, iterative geodesic construction engines,
//! continued-fraction approximation spectra, and the Heisenberg/quaternionic
//! boundary models.

pub mod constants;
pub mod dioph;
pub mod engine;
pub mod heis;
pub mod models;
pub mod penetration;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate geodesic: endpoints coincide")]
    DegenerateGeodesic,
    #[error("projection undefined: point is an endpoint of the geodesic")]
    ProjectionUndefined,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown lemma id: {0}")]
    UnknownLemma(String),
    #[error("obstacle family invalid: {0}")]
    Family(String),
    #[error("construction step failed: {0}")]
    Step(String),
    #[error("prescription infeasible: {0}")]
    Infeasible(String),
    #[error("sampling cap exceeded while enforcing hypotheses for {0}")]
    SamplingCap(String),
}

pub type Result<T> = std::result::Result<T, Error>;
