//! Compactly supported C^{2,1} obstacles with closed-form derivatives.
//!
//! The cubic bump A·(1 − (x/r)²)³ has a vanishing second derivative at the
//! support edge and a jump in the third derivative there, so it is exactly
//! C^{2,1} and not C³ — the minimal regularity the estimates assume.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::fit;
use crate::grid::{FieldSnapshot, GridSpec};
use crate::math;
use crate::operator::{self, DiscreteOperator};

/// A single bump: amplitude, support radius, center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub amplitude: f64,
    pub radius: f64,
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObstacleFamily {
    CubicBump(Bump),
    SumOfBumps(Vec<Bump>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSpec {
    pub family: ObstacleFamily,
}

fn bump_value(b: &Bump, x: f64) -> f64 {
    let z = (x - b.center) / b.radius;
    if math::abs(z) >= 1.0 {
        0.0
    } else {
        let q = 1.0 - z * z;
        b.amplitude * q * q * q
    }
}

fn bump_d1(b: &Bump, x: f64) -> f64 {
    let z = (x - b.center) / b.radius;
    if math::abs(z) >= 1.0 {
        0.0
    } else {
        let q = 1.0 - z * z;
        -6.0 * b.amplitude * z * q * q / b.radius
    }
}

fn bump_d2(b: &Bump, x: f64) -> f64 {
    let z = (x - b.center) / b.radius;
    if math::abs(z) >= 1.0 {
        0.0
    } else {
        let q = 1.0 - z * z;
        -6.0 * b.amplitude * q * (1.0 - 5.0 * z * z) / (b.radius * b.radius)
    }
}

impl ObstacleSpec {
    fn bumps(&self) -> &[Bump] {
        match &self.family {
            ObstacleFamily::CubicBump(b) => core::slice::from_ref(b),
            ObstacleFamily::SumOfBumps(v) => v,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.bumps().iter().map(|b| bump_value(b, x)).sum()
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.bumps().iter().map(|b| bump_d1(b, x)).sum()
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.bumps().iter().map(|b| bump_d2(b, x)).sum()
    }

    /// φ sampled on the grid.
    pub fn sample(&self, grid: &GridSpec) -> Vec<f64> {
        grid.sample(|x| self.value(x))
    }

    /// Lφ on the grid via the discrete operator.
    pub fn l_phi(&self, grid: &GridSpec, op: &DiscreteOperator) -> Result<Vec<f64>> {
        operator::apply_operator(op, &self.sample(grid))
    }

    /// sup|φ| over the supports (dense sampling).
    pub fn sup_value(&self) -> f64 {
        self.dense_extremum(|x| math::abs(self.value(x)))
    }

    /// Lipschitz constant sup|φ′| (dense sampling).
    pub fn lipschitz(&self) -> f64 {
        self.dense_extremum(|x| math::abs(self.d1(x)))
    }

    fn dense_extremum<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let (lo, hi) = self.support();
        let n = 40_000;
        let mut best = 0.0f64;
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            best = best.max(f(x));
        }
        best
    }

    /// Union-of-supports interval.
    pub fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for b in self.bumps() {
            lo = lo.min(b.center - b.radius);
            hi = hi.max(b.center + b.radius);
        }
        (lo, hi)
    }
}

/// Construct and validate an obstacle on a grid.
pub fn make_obstacle(family: ObstacleFamily, grid: &GridSpec) -> Result<ObstacleSpec> {
    let spec = ObstacleSpec { family };
    for b in spec.bumps() {
        if !(b.amplitude > 0.0) || !(b.radius > 0.0) {
            return Err(CoreError::Parameter {
                name: "bump",
                message: format!(
                    "need A > 0 and r > 0, got A = {}, r = {}",
                    b.amplitude, b.radius
                ),
            });
        }
    }
    let (lo, hi) = spec.support();
    if lo <= -grid.r_dom || hi >= grid.r_dom {
        return Err(CoreError::Geometry {
            message: format!(
                "obstacle support [{lo}, {hi}] touches the domain boundary +-{}",
                grid.r_dom
            ),
        });
    }
    Ok(spec)
}

/// Initial state u(·,0) = φ + √ε (ε = 0 gives the projected-solver start u = φ).
pub fn initial_state(
    obstacle: &ObstacleSpec,
    grid: &GridSpec,
    epsilon: f64,
) -> Result<FieldSnapshot> {
    if epsilon < 0.0 {
        return Err(CoreError::Parameter {
            name: "epsilon",
            message: format!("must be nonnegative, got {epsilon}"),
        });
    }
    let shift = math::sqrt(epsilon);
    let u: Vec<f64> = grid.sample(|x| obstacle.value(x) + shift);
    let mut snap = FieldSnapshot::new(0.0, u);
    snap.v = Some(alloc::vec![shift; grid.n_points]);
    Ok(snap)
}

/// Weighted norm ‖f‖ = ∫ |f(x)| / (1 + |x|^(dim+2s)) dx over the grid
/// (trapezoid; fields are truncated so the tail contributes nothing).
pub fn weighted_l1s_norm(field: &[f64], grid: &GridSpec, s: f64) -> Result<f64> {
    grid.check_len(field)?;
    let p = grid.dim as f64 + 2.0 * s;
    let weighted: Vec<f64> = field
        .iter()
        .enumerate()
        .map(|(i, &f)| math::abs(f) / (1.0 + math::powf(math::abs(grid.x(i)), p)))
        .collect();
    Ok(fit::trapezoid(&weighted, grid.h()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(1, 8.0, 1025, 1.0, 1.0 / 1024.0).unwrap()
    }

    fn unit_bump(grid: &GridSpec) -> ObstacleSpec {
        make_obstacle(
            ObstacleFamily::CubicBump(Bump {
                amplitude: 1.0,
                radius: 1.0,
                center: 0.0,
            }),
            grid,
        )
        .unwrap()
    }

    #[test]
    fn values_and_support() {
        let g = grid();
        let phi = unit_bump(&g);
        assert_eq!(phi.value(0.0), 1.0);
        assert_eq!(phi.value(1.0), 0.0);
        assert_eq!(phi.value(-1.0), 0.0);
        assert_eq!(phi.value(3.0), 0.0);
        assert_eq!(phi.support(), (-1.0, 1.0));
    }

    #[test]
    fn second_derivative_is_lipschitz_across_the_edge() {
        // finite-difference second derivatives from inside and outside the
        // support agree to O(h) at the edge: φ″(1∓) → 0.
        let g = grid();
        let phi = unit_bump(&g);
        let h = 1e-4;
        let inside =
            (phi.value(1.0 - 2.0 * h) - 2.0 * phi.value(1.0 - h) + phi.value(1.0)) / (h * h);
        let outside =
            (phi.value(1.0) - 2.0 * phi.value(1.0 + h) + phi.value(1.0 + 2.0 * h)) / (h * h);
        assert!(
            math::abs(inside - outside) < 50.0 * h,
            "jump {}",
            inside - outside
        );
        assert!(math::abs(phi.d2(1.0 - 1e-12)) < 1e-9);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let g = grid();
        let phi = unit_bump(&g);
        let h = 1e-5;
        for &x in &[-0.73, -0.2, 0.11, 0.5, 0.9] {
            let fd1 = (phi.value(x + h) - phi.value(x - h)) / (2.0 * h);
            let fd2 = (phi.value(x + h) - 2.0 * phi.value(x) + phi.value(x - h)) / (h * h);
            assert!(math::abs(fd1 - phi.d1(x)) < 1e-8);
            assert!(math::abs(fd2 - phi.d2(x)) < 1e-4);
        }
    }

    #[test]
    fn lipschitz_constant_from_dense_sampling() {
        // max of |φ′| = 6|z|(1−z²)² sits at z = 1/√5 with value 96/(25√5).
        let g = grid();
        let phi = unit_bump(&g);
        let oracle = phi.lipschitz();
        let closed_form = 96.0 / (25.0 * math::sqrt(5.0));
        assert!((oracle - closed_form).abs() < 1e-7, "oracle {oracle}");
        assert!((oracle - 1.717_3).abs() < 1e-4);
        let at = 1.0 / math::sqrt(5.0);
        assert!((math::abs(phi.d1(at)) - closed_form).abs() < 1e-12);
    }

    #[test]
    fn rejects_support_touching_boundary() {
        let g = GridSpec::new(1, 2.0, 65, 1.0, 0.01).unwrap();
        let r = make_obstacle(
            ObstacleFamily::CubicBump(Bump {
                amplitude: 1.0,
                radius: 2.0,
                center: 0.0,
            }),
            &g,
        );
        assert!(matches!(r, Err(CoreError::Geometry { .. })));
    }

    #[test]
    fn initial_state_is_a_constant_shift() {
        let g = grid();
        let phi = unit_bump(&g);
        let eps = 0.01;
        let snap = initial_state(&phi, &g, eps).unwrap();
        assert_eq!(snap.t, 0.0);
        let mid = g.nearest_index(0.0);
        assert!((snap.u[mid] - (1.0 + 0.1)).abs() < 1e-15);
        for (i, &u) in snap.u.iter().enumerate() {
            assert!((u - phi.value(g.x(i)) - 0.1).abs() < 1e-15);
        }
        let zero = initial_state(&phi, &g, 0.0).unwrap();
        for (i, &u) in zero.u.iter().enumerate() {
            assert_eq!(u, phi.value(g.x(i)));
        }
    }

    #[test]
    fn weighted_norm_of_zero_and_monotonicity() {
        let g = grid();
        let zero = alloc::vec![0.0; g.n_points];
        assert_eq!(weighted_l1s_norm(&zero, &g, 0.25).unwrap(), 0.0);

        let f = g.sample(|x| math::cos(x));
        let gbig = g.sample(|x| math::cos(x).abs() + 0.3);
        let nf = weighted_l1s_norm(&f, &g, 0.25).unwrap();
        let ng = weighted_l1s_norm(&gbig, &g, 0.25).unwrap();
        assert!(nf <= ng);
    }

    #[test]
    fn weighted_norm_of_indicator_matches_quadrature_oracle() {
        // ∫_{−1}^{1} dx/(1 + |x|^{3/2}), frozen from the Simpson oracle below.
        let oracle = 2.0 * fit::simpson(|x| 1.0 / (1.0 + math::powf(x, 1.5)), 0.0, 1.0, 1 << 16);
        const FROZEN: f64 = 1.494_202_911_566;
        assert!((oracle - FROZEN).abs() < 1e-9, "oracle = {oracle:.12}");

        // indicator on a fine grid; trapezoid converges O(h) at the jump.
        let g = GridSpec::new(1, 8.0, 16_385, 1.0, 0.01).unwrap();
        let ind = g.sample(|x| if math::abs(x) <= 1.0 { 1.0 } else { 0.0 });
        let norm = weighted_l1s_norm(&ind, &g, 0.25).unwrap();
        assert!((norm - FROZEN).abs() < 2.0 * g.h(), "norm = {norm}");
    }

    #[test]
    fn weighted_norm_is_homogeneous_and_subadditive() {
        let g = grid();
        let f = g.sample(|x| math::sin(x));
        let h_field = g.sample(|x| math::cos(2.0 * x));
        let sum: Vec<f64> = f.iter().zip(&h_field).map(|(&a, &b)| a + b).collect();
        let scaled: Vec<f64> = f.iter().map(|&a| -2.5 * a).collect();
        let nf = weighted_l1s_norm(&f, &g, 0.25).unwrap();
        let nh = weighted_l1s_norm(&h_field, &g, 0.25).unwrap();
        let nsum = weighted_l1s_norm(&sum, &g, 0.25).unwrap();
        let nscaled = weighted_l1s_norm(&scaled, &g, 0.25).unwrap();
        assert!(nsum <= nf + nh + 1e-12);
        assert!((nscaled - 2.5 * nf).abs() < 1e-12);
    }
}
