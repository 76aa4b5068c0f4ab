//! Monotone finite-difference discretization of
//! Lu(x) = ∫ (u(x) − u(x+y)) K(y) dy on a uniform grid (dimension 1).
//!
//! Offsets up to the truncation radius carry nonnegative quadrature weights;
//! the region |y| ≤ h is folded into the ±h offsets through the symmetric
//! second-difference pairing (K is even, so the first-order term cancels),
//! and the tail |y| > R_trunc contributes its exact integral against u(x)
//! minus a far-field term fixed by the closure mode.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::fit;
use crate::grid::GridSpec;
use crate::kernel::{KernelKind, KernelSpec};
use crate::math;

/// Closure of the problem outside the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarField {
    /// u ≡ 0 outside the grid (default for obstacle runs: φ is compactly
    /// supported and the solution decays like t|x|^(−dim−2s)).
    ZeroExtension,
    /// u frozen at the boundary values outside the grid.
    ConstantExtension,
    /// Periodic wrap with period 2·R_dom; far tail sees the field mean.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub s: f64,
    pub h: f64,
    pub n_points: usize,
    pub r_trunc: f64,
    pub far_field: FarField,
    /// weights[j−1] multiplies u(x) − u(x ± j·h), j = 1..=m.
    pub weights: Vec<f64>,
    /// ∫_{|y| > R_trunc} K(y) dy.
    pub tail_coefficient: f64,
}

impl DiscreteOperator {
    /// Row diagonal of L: Σ_j 2 w_j + tail.
    pub fn row_diagonal(&self) -> f64 {
        2.0 * self.weights.iter().sum::<f64>() + self.tail_coefficient
    }

    /// Number of one-sided offsets.
    pub fn stencil_len(&self) -> usize {
        self.weights.len()
    }
}

/// Exact integral of the calibrated power law c·y^(−1−2s) over [a, b].
fn power_cell(c: f64, s: f64, a: f64, b: f64) -> f64 {
    let e = -2.0 * s;
    c * (math::powf(a, e) - math::powf(b, e)) / (2.0 * s)
}

/// Build the quadrature weights for a kernel on a grid.
///
/// Fractional kernels use exact per-cell integrals of the power law; custom
/// kernels use midpoint quadrature per cell.
pub fn build_discrete_operator(
    kernel: &KernelSpec,
    grid: &GridSpec,
    r_trunc: f64,
    far_field: FarField,
) -> Result<DiscreteOperator> {
    if kernel.dim != 1 {
        return Err(CoreError::UnsupportedDimension {
            dim: kernel.dim,
            context: "discrete operator",
        });
    }
    if kernel.s > 0.5 {
        return Err(CoreError::UnsupportedRegime {
            s: kernel.s,
            context: "discrete operator",
        });
    }
    let h = grid.h();
    let ratio = r_trunc / h;
    let m = libm::round(ratio) as usize;
    if m < 2 || math::abs(ratio - m as f64) > 1e-9 * ratio.max(1.0) {
        return Err(CoreError::Parameter {
            name: "r_trunc",
            message: format!("truncation radius {r_trunc} must be a multiple (>= 2) of h = {h}"),
        });
    }

    let s = kernel.s;
    let mut weights = vec![0.0f64; m];

    match kernel.kind {
        KernelKind::Fractional => {
            let c = kernel.calibration;
            // (0, h]: second moment folded onto the ±h pair.
            let second_moment = c * math::powf(h, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
            weights[0] += second_moment / (h * h);
            // (h, 3h/2]: partial first cell.
            if m >= 2 {
                weights[0] += power_cell(c, s, h, 1.5 * h);
            }
            // full cells ((j−1/2)h, (j+1/2)h], j = 2..m−1.
            for (j, w) in weights.iter_mut().enumerate().take(m - 1).skip(1) {
                let jj = (j + 1) as f64;
                *w += power_cell(c, s, (jj - 0.5) * h, (jj + 0.5) * h);
            }
            // ((m−1/2)h, mh]: partial last cell.
            weights[m - 1] += power_cell(c, s, (m as f64 - 0.5) * h, m as f64 * h);
        }
        KernelKind::Custom { .. } => {
            let eval = |y: f64| kernel.evaluate(y);
            // second moment of (0, h] by Simpson; integrand is bounded.
            let second_moment = fit::simpson(|y| y * y * eval(y.max(1e-300)), 1e-12, h, 256);
            weights[0] += second_moment / (h * h);
            if m >= 2 {
                weights[0] += eval(1.25 * h) * 0.5 * h;
            }
            for (j, w) in weights.iter_mut().enumerate().take(m - 1).skip(1) {
                let jj = (j + 1) as f64;
                *w += eval(jj * h) * h;
            }
            weights[m - 1] += eval((m as f64 - 0.25) * h) * 0.5 * h;
        }
    }

    let r = m as f64 * h;
    let tail_coefficient = match kernel.kind {
        KernelKind::Fractional => {
            // 2·∫_R^∞ c y^(−1−2s) dy
            kernel.calibration * math::powf(r, -2.0 * s) / s
        }
        KernelKind::Custom { .. } => {
            let far = 64.0 * r;
            let body = fit::simpson(|y| kernel.evaluate(y), r, far, 65_536);
            // power-law continuation fitted at the far edge
            let remainder = kernel.evaluate(far) * far / (2.0 * s);
            2.0 * (body + remainder)
        }
    };

    debug_assert!(weights.iter().all(|&w| w >= 0.0));
    Ok(DiscreteOperator {
        s,
        h,
        n_points: grid.n_points,
        r_trunc: r,
        far_field,
        weights,
        tail_coefficient,
    })
}

/// Lu at a single node.
pub fn apply_operator_at(op: &DiscreteOperator, field: &[f64], i: usize) -> f64 {
    let n = op.n_points;
    let ui = field[i];
    let mut acc = 0.0;
    match op.far_field {
        FarField::ZeroExtension => {
            for (j, &w) in op.weights.iter().enumerate() {
                let d = j + 1;
                let right = if i + d < n { field[i + d] } else { 0.0 };
                let left = if i >= d { field[i - d] } else { 0.0 };
                acc += w * (2.0 * ui - right - left);
            }
            acc += op.tail_coefficient * ui;
        }
        FarField::ConstantExtension => {
            for (j, &w) in op.weights.iter().enumerate() {
                let d = j + 1;
                let right = if i + d < n {
                    field[i + d]
                } else {
                    field[n - 1]
                };
                let left = if i >= d { field[i - d] } else { field[0] };
                acc += w * (2.0 * ui - right - left);
            }
            acc += op.tail_coefficient * ui - 0.5 * op.tail_coefficient * (field[0] + field[n - 1]);
        }
        FarField::Periodic => {
            // n−1 unique nodes; node n−1 coincides with node 0.
            let period = n - 1;
            let ii = i % period;
            for (j, &w) in op.weights.iter().enumerate() {
                let d = (j + 1) % period;
                let right = field[(ii + d) % period];
                let left = field[(ii + period - d) % period];
                acc += w * (2.0 * ui - right - left);
            }
            let mean = field[..period].iter().sum::<f64>() / period as f64;
            acc += op.tail_coefficient * (ui - mean);
        }
    }
    acc
}

/// Lu on the whole grid; pure and deterministic.
pub fn apply_operator(op: &DiscreteOperator, field: &[f64]) -> Result<Vec<f64>> {
    if field.len() != op.n_points {
        return Err(CoreError::Shape {
            expected: op.n_points,
            got: field.len(),
        });
    }
    let mut out: Vec<f64> = (0..op.n_points)
        .map(|i| apply_operator_at(op, field, i))
        .collect();
    if op.far_field == FarField::Periodic {
        out[op.n_points - 1] = out[0];
    }
    Ok(out)
}

/// Discrete symbol: (L cos(k·))(0) / cos(0) under the periodic closure.
///
/// k must be an integer multiple of the fundamental frequency π/R_dom.
pub fn symbol_check(op: &DiscreteOperator, grid: &GridSpec, k: f64) -> Result<f64> {
    if op.far_field != FarField::Periodic {
        return Err(CoreError::Mode {
            required: "periodic",
        });
    }
    let fundamental = core::f64::consts::PI / grid.r_dom;
    let mult = k / fundamental;
    if math::abs(mult - libm::round(mult)) > 1e-9 * mult.max(1.0) {
        return Err(CoreError::Parameter {
            name: "k",
            message: format!("frequency {k} is not a multiple of the fundamental {fundamental}"),
        });
    }
    let field = grid.sample(|x| math::cos(k * x));
    let i0 = grid.nearest_index(0.0);
    debug_assert!(math::abs(grid.x(i0)) < 1e-12);
    Ok(apply_operator_at(op, &field, i0))
}

/// Dense matrix A = I + dt·L row-major, consistent with `apply_operator`.
pub fn assemble_implicit_euler(op: &DiscreteOperator, dt: f64) -> Vec<f64> {
    let n = op.n_points;
    let mut a = vec![0.0f64; n * n];
    let diag = 1.0 + dt * op.row_diagonal();
    for i in 0..n {
        a[i * n + i] += diag;
        match op.far_field {
            FarField::ZeroExtension => {
                for (j, &w) in op.weights.iter().enumerate() {
                    let d = j + 1;
                    if i + d < n {
                        a[i * n + i + d] -= dt * w;
                    }
                    if i >= d {
                        a[i * n + i - d] -= dt * w;
                    }
                }
            }
            FarField::ConstantExtension => {
                for (j, &w) in op.weights.iter().enumerate() {
                    let d = j + 1;
                    let right = if i + d < n { i + d } else { n - 1 };
                    let left = if i >= d { i - d } else { 0 };
                    a[i * n + right] -= dt * w;
                    a[i * n + left] -= dt * w;
                }
                a[i * n] -= dt * 0.5 * op.tail_coefficient;
                a[i * n + n - 1] -= dt * 0.5 * op.tail_coefficient;
            }
            FarField::Periodic => {
                let period = n - 1;
                let ii = i % period;
                for (j, &w) in op.weights.iter().enumerate() {
                    let d = (j + 1) % period;
                    a[i * n + (ii + d) % period] -= dt * w;
                    a[i * n + (ii + period - d) % period] -= dt * w;
                }
                let share = dt * op.tail_coefficient / period as f64;
                for col in 0..period {
                    a[i * n + col] -= share;
                }
            }
        }
    }
    a
}
