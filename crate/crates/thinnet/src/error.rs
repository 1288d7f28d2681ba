use thiserror::Error;

/// Errors produced by solvers and model construction.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration or model data.
    #[error("config error: {0}")]
    Config(String),

    /// A location or geometric request fell outside the computational domain.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The longitudinal velocity changed sign along a characteristic.
    #[error("velocity changed sign along characteristic through (x={x:.6}, t={t:.6})")]
    SignChange { x: f64, t: f64 },

    /// Fixed-point iteration did not reach the tolerance.
    #[error("iteration failed to converge: residual {residual:.3e} after {iterations} iterations")]
    IterationFailure { residual: f64, iterations: usize },

    /// Explicit scheme stability bound violated.
    #[error("CFL violation: max|v| dt/dx = {cfl:.3} exceeds {limit}")]
    CflViolation { cfl: f64, limit: f64 },

    /// A quantity that must stay positive did not.
    #[error("positivity violated: value {value:.3e} at t={t:.6}")]
    Positivity { value: f64, t: f64 },

    /// A vertex closure divides by the near-vertex speed of an outlet edge.
    #[error("degenerate vertex {vertex}: outlet speed vanishes at t={t:.6}")]
    DegenerateVertex { vertex: usize, t: f64 },

    /// Compatibility (solvability) defect too large for a singular solve.
    #[error("no solution: compatibility defect {defect:.3e} exceeds {tolerance:.3e}")]
    Incompatible { defect: f64, tolerance: f64 },

    /// Mismatched inputs between pipeline stages.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Linear or nonlinear algebra broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
