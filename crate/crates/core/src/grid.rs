//! Uniform grids, field snapshots and trajectories.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::math;

/// A uniform grid on [−R_dom, R_dom] with a time horizon.
///
/// Only dimension 1 is discretized; the parabolic scaling helpers carry the
/// order s so that a cylinder of radius r spans r^{2s} in time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub r_dom: f64,
    pub n_points: usize,
    pub t_horizon: f64,
    pub dt: f64,
}

impl GridSpec {
    pub fn new(dim: usize, r_dom: f64, n_points: usize, t_horizon: f64, dt: f64) -> Result<Self> {
        if dim != 1 {
            return Err(CoreError::UnsupportedDimension {
                dim,
                context: "grid construction",
            });
        }
        if !(r_dom > 0.0) {
            return Err(CoreError::Parameter {
                name: "r_dom",
                message: alloc::format!("must be positive, got {r_dom}"),
            });
        }
        if n_points < 64 {
            return Err(CoreError::Parameter {
                name: "n_points",
                message: alloc::format!("must be at least 64, got {n_points}"),
            });
        }
        if !(dt > 0.0) || !(t_horizon > dt) {
            return Err(CoreError::Parameter {
                name: "dt",
                message: alloc::format!("need 0 < dt < T, got dt = {dt}, T = {t_horizon}"),
            });
        }
        Ok(GridSpec {
            dim,
            r_dom,
            n_points,
            t_horizon,
            dt,
        })
    }

    /// Grid spacing h = 2·R_dom/(n_points − 1).
    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.r_dom / (self.n_points - 1) as f64
    }

    /// Node coordinate x_i = −R_dom + i·h.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.r_dom + i as f64 * self.h()
    }

    /// All node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = (x + self.r_dom) / self.h();
        let i = libm::round(raw) as isize;
        i.clamp(0, self.n_points as isize - 1) as usize
    }

    /// Parabolic cylinder convention: radius r spans (B_r, r^{2s}) in (x, t).
    pub fn cylinder(&self, r: f64, s: f64) -> (f64, f64) {
        (r, math::powf(r, 2.0 * s))
    }

    /// Sample a function on the grid nodes.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n_points).map(|i| f(self.x(i))).collect()
    }

    pub fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n_points {
            Err(CoreError::Shape {
                expected: self.n_points,
                got: field.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Grid values of u at one time, with optional derived caches.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub t: f64,
    pub u: Vec<f64>,
    /// v = u − φ, filled by the solvers.
    pub v: Option<Vec<f64>>,
    /// Lu, filled on demand.
    pub lu: Option<Vec<f64>>,
    /// Backward difference (u(t) − u(t−dt))/dt, filled by the solvers.
    pub ut: Option<Vec<f64>>,
}

impl FieldSnapshot {
    pub fn new(t: f64, u: Vec<f64>) -> Self {
        FieldSnapshot {
            t,
            u,
            v: None,
            lu: None,
            ut: None,
        }
    }
}

/// Per-step scalars logged by the time steppers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// max over nodes of β_ε(u − φ); zero for projected runs.
    pub max_beta: f64,
    /// min over nodes of u − φ.
    pub min_detachment: f64,
    /// min over nodes of the forward difference u(t) − u(t−dt).
    pub min_forward_diff: f64,
}

/// An ordered sequence of snapshots with the grid metadata that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub snapshots: Vec<FieldSnapshot>,
    pub steps: Vec<StepRecord>,
    /// False when a solver aborted and the trajectory is partial.
    pub valid: bool,
}

impl Trajectory {
    pub fn new(grid: GridSpec) -> Self {
        Trajectory {
            grid,
            snapshots: Vec::new(),
            steps: Vec::new(),
            valid: true,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Snapshot index with time closest to `t`.
    pub fn nearest_time_index(&self, t: f64) -> Option<usize> {
        if self.snapshots.is_empty() {
            return None;
        }
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (k, snap) in self.snapshots.iter().enumerate() {
            let d = math::abs(snap.t - t);
            if d < dist {
                dist = d;
                best = k;
            }
        }
        Some(best)
    }

    /// Indices of snapshots with t in [t1, t2].
    pub fn window(&self, t1: f64, t2: f64) -> Vec<usize> {
        self.snapshots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.t >= t1 - 1e-12 && s.t <= t2 + 1e-12)
            .map(|(k, _)| k)
            .collect()
    }

    /// Sup-norm distance to another trajectory over matching snapshot times
    /// within [t1, t2]; errors if the time sets do not match.
    pub fn sup_gap(&self, other: &Trajectory, t1: f64, t2: f64) -> Result<f64> {
        let mine = self.window(t1, t2);
        let theirs = other.window(t1, t2);
        if mine.len() != theirs.len() {
            return Err(CoreError::Shape {
                expected: mine.len(),
                got: theirs.len(),
            });
        }
        let mut gap = 0.0f64;
        for (&a, &b) in mine.iter().zip(&theirs) {
            let sa = &self.snapshots[a];
            let sb = &other.snapshots[b];
            if math::abs(sa.t - sb.t) > 1e-9 {
                return Err(CoreError::Horizon {
                    t: sb.t,
                    horizon: sa.t,
                });
            }
            for (&x, &y) in sa.u.iter().zip(&sb.u) {
                gap = gap.max(math::abs(x - y));
            }
        }
        Ok(gap)
    }
}
