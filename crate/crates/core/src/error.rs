//! Error type shared by every module of the crate.

use alloc::string::String;

pub type Result<T> = core::result::Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A scalar parameter is outside its admissible range.
    Parameter { name: &'static str, message: String },
    /// The kernel order lies outside the supercritical range required here.
    UnsupportedRegime { s: f64, context: &'static str },
    /// Only dimension 1 is discretized; dimension 2 kernels are data-only.
    UnsupportedDimension { dim: usize, context: &'static str },
    /// Field length does not match the grid.
    Shape { expected: usize, got: usize },
    /// Obstacle support reaches the computational boundary.
    Geometry { message: String },
    /// An operation requires a periodic far-field closure.
    Mode { required: &'static str },
    /// Per-node Newton iteration failed to converge.
    NewtonDiverged { node: usize, residual: f64 },
    /// Explicit scheme used with a time step above the stability limit.
    Unstable { dt: f64, limit: f64 },
    /// PSOR sweep limit exceeded.
    SweepLimit { sweeps: usize, residual: f64 },
    /// The requested time exceeds the trajectory horizon.
    Horizon { t: f64, horizon: f64 },
    /// Heat-kernel tail too heavy for the domain.
    Domain { required_radius: f64 },
    /// A least-squares fit is ill conditioned (e.g. empty window).
    IllConditionedFit { message: String },
    /// Report assembly found a missing or duplicated claim.
    ClaimRegistry { claim: &'static str },
}

impl core::fmt::Display for CoreError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CoreError::Parameter { name, message } => {
                write!(f, "invalid parameter `{name}`: {message}")
            }
            CoreError::UnsupportedRegime { s, context } => {
                write!(
                    f,
                    "order s = {s} outside the supercritical range for {context}"
                )
            }
            CoreError::UnsupportedDimension { dim, context } => {
                write!(f, "dimension {dim} is not supported by {context}")
            }
            CoreError::Shape { expected, got } => {
                write!(f, "field length {got} does not match grid size {expected}")
            }
            CoreError::Geometry { message } => write!(f, "geometry error: {message}"),
            CoreError::Mode { required } => {
                write!(f, "operation requires the {required} far-field mode")
            }
            CoreError::NewtonDiverged { node, residual } => {
                write!(
                    f,
                    "Newton iteration diverged at node {node} (residual {residual:e})"
                )
            }
            CoreError::Unstable { dt, limit } => {
                write!(
                    f,
                    "explicit step dt = {dt:e} above stability limit {limit:e}"
                )
            }
            CoreError::SweepLimit { sweeps, residual } => {
                write!(
                    f,
                    "PSOR did not converge in {sweeps} sweeps (residual {residual:e})"
                )
            }
            CoreError::Horizon { t, horizon } => {
                write!(f, "time {t} beyond trajectory horizon {horizon}")
            }
            CoreError::Domain { required_radius } => {
                write!(
                    f,
                    "domain too small for kernel tail; need half-width >= {required_radius}"
                )
            }
            CoreError::IllConditionedFit { message } => {
                write!(f, "ill-conditioned fit: {message}")
            }
            CoreError::ClaimRegistry { claim } => {
                write!(f, "claim registry mismatch for `{claim}`")
            }
        }
    }
}

impl core::error::Error for CoreError {}
