//! Complex-time integration paths, analytic continuation along them, and
//! adaptive quadrature of analytic integrands.
//!
//! The loop [`build_gamma`] threads between the singular times of the Kepler
//! time law. Integrands that depend on the true anomaly are many-valued in
//! complex time, so they are evaluated through a [`PathTracker`] that carries
//! the anomaly along the path with a predictor-corrector scheme.

mod continuation;
mod path;
mod quadrature;

pub use continuation::{
    accept_corrected, continue_phi, rk4, Continuation, PathTracker, PhiContinuation, MAX_STEP, MIN_STEP,
};
pub use path::{build_gamma, circle, gamma_segments, polyline, ContourPath, Segment, Side};
pub use quadrature::{
    integrate, integrate_vector, winding_number, QuadratureResult, VectorQuadrature, DEFAULT_TOL, NODE_BUDGET,
    PANEL_NODES,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContourError {
    #[error("infeasible path: {0}")]
    Geometry(String),
    #[error("continuation failed on segment {segment} at u = {u}: step rejected below the minimum size")]
    ContinuationFailure { segment: usize, u: f64 },
    #[error("quadrature error {error:e} above tolerance {tol:e} after {nodes} nodes")]
    ToleranceNotReached { error: f64, tol: f64, nodes: usize },
}
