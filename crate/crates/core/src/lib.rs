//! Solvers and verification tooling for the parabolic nonlocal obstacle problem
//!
//!   min{ ∂ₜu + Lu, u − φ } = 0,   u(·,0) = φ,
//!
//! where L is an integro-differential operator of order 2s in the supercritical
//! regime s ∈ (0, ½).  The crate provides:
//!
//! * a monotone finite-difference discretization of L for kernels sandwiched
//!   between multiples of |y|^(−n−2s) ([`operator`], [`kernel`]),
//! * a penalized time stepper for ∂ₜu + Lu = e^(−(u−φ)/ε) ([`penalized`]),
//! * an independent projected-SOR complementarity solver ([`lcp`]),
//! * the fundamental solution of ∂ₜ + L with tail and barrier checks ([`heat`]),
//! * free-boundary extraction, classification and expansion fits ([`fb`]),
//! * pointwise regularity diagnostics over trajectories ([`diag`]).
//!
//! The crate is `no_std` (with `alloc`); all floating-point transcendentals go
//! through `libm`.  Everything is deterministic: no randomness, no threads.

#![no_std]

extern crate alloc;

pub mod diag;
pub mod error;
pub mod fb;
pub mod fit;
pub mod grid;
pub mod heat;
pub mod kernel;
pub mod lcp;
pub mod linalg;
pub mod math;
pub mod obstacle;
pub mod operator;
pub mod penalized;

pub use error::{CoreError, Result};
pub use fb::{ExpansionFit, FreeBoundaryCurve, PointLabel};
pub use grid::{FieldSnapshot, GridSpec, Trajectory};
pub use heat::HeatKernelSample;
pub use kernel::{KernelKind, KernelSpec};
pub use lcp::LcpStep;
pub use obstacle::{ObstacleFamily, ObstacleSpec};
pub use operator::{DiscreteOperator, FarField};
pub use penalized::{PenalizedConfig, Scheme};
