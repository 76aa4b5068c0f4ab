//! Projected successive over-relaxation for the implicit-Euler
//! complementarity form of the obstacle problem:
//!
//!   min{ (u^{k+1} − u^k)/dt + L_h u^{k+1}, u^{k+1} − φ } = 0
//!
//! per step, i.e. the LCP  A u ≥ b, u ≥ φ, (u − φ)·(Au − b) = 0 with
//! A = I + dt·L_h. The monotone weights make A an M-matrix, for which PSOR
//! converges for ω ∈ (0, 2).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::grid::{FieldSnapshot, GridSpec, StepRecord, Trajectory};
use crate::math;
use crate::obstacle::ObstacleSpec;
use crate::operator::{self, DiscreteOperator};

/// Dense row-major system matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub a: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(CoreError::Shape {
                expected: n * n,
                got: a.len(),
            });
        }
        Ok(DenseMatrix { n, a })
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.a[i * self.n + i]
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let row = &self.a[i * self.n..(i + 1) * self.n];
        row.iter().zip(x).map(|(&a, &b)| a * b).sum()
    }

    /// Positive diagonal, nonpositive off-diagonal (within `tol`).
    pub fn check_m_structure(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            if !(self.diag(i) > 0.0) {
                return Err(CoreError::Parameter {
                    name: "matrix",
                    message: format!("nonpositive diagonal at row {i}"),
                });
            }
            for j in 0..self.n {
                if i != j && self.a[i * self.n + j] > tol {
                    return Err(CoreError::Parameter {
                        name: "matrix",
                        message: format!("positive off-diagonal at ({i},{j})"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// One linear complementarity step.
#[derive(Debug, Clone, PartialEq)]
pub struct LcpStep<'a> {
    pub matrix: &'a DenseMatrix,
    pub rhs: Vec<f64>,
    pub obstacle: Vec<f64>,
    pub omega: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

/// PSOR defaults: ω = 1.5, tol = 1e−10 (relative to scale), 10⁴ sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorParams {
    pub omega: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for PsorParams {
    fn default() -> Self {
        PsorParams {
            omega: 1.5,
            tol: 1e-10,
            max_sweeps: 10_000,
        }
    }
}

/// Complementarity residuals of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcpResiduals {
    /// min over nodes of u − φ (feasibility; ≥ 0 by projection).
    pub min_feasibility: f64,
    /// min over nodes of Au − b (must be ≥ −tol·scale).
    pub min_residual: f64,
    /// max over nodes of min{Au − b, u − φ} in absolute value.
    pub complementarity: f64,
}

pub fn lcp_residuals(
    matrix: &DenseMatrix,
    rhs: &[f64],
    obstacle: &[f64],
    u: &[f64],
) -> LcpResiduals {
    let mut min_feas = f64::INFINITY;
    let mut min_res = f64::INFINITY;
    let mut comp = 0.0f64;
    for i in 0..matrix.n {
        let r = matrix.row_dot(i, u) - rhs[i];
        let f = u[i] - obstacle[i];
        min_feas = min_feas.min(f);
        min_res = min_res.min(r);
        comp = comp.max(math::abs(r.min(f)));
    }
    LcpResiduals {
        min_feasibility: min_feas,
        min_residual: min_res,
        complementarity: comp,
    }
}

/// Projected SOR sweep loop. `warm_start` seeds the iteration (defaults to
/// max(b, φ)). Returns u with u ≥ φ exactly.
pub fn psor_solve(step: &LcpStep<'_>, warm_start: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = step.matrix.n;
    if step.rhs.len() != n || step.obstacle.len() != n {
        return Err(CoreError::Shape {
            expected: n,
            got: step.rhs.len().min(step.obstacle.len()),
        });
    }
    if !(step.omega > 0.0 && step.omega < 2.0) {
        return Err(CoreError::Parameter {
            name: "omega",
            message: format!("relaxation factor must lie in (0,2), got {}", step.omega),
        });
    }
    let scale = math::sup_abs(&step.rhs).max(1.0);
    let tol = step.tol * scale;

    let mut u: Vec<f64> = match warm_start {
        Some(w) => {
            if w.len() != n {
                return Err(CoreError::Shape {
                    expected: n,
                    got: w.len(),
                });
            }
            w.iter()
                .zip(&step.obstacle)
                .map(|(&a, &p)| a.max(p))
                .collect()
        }
        None => step
            .rhs
            .iter()
            .zip(&step.obstacle)
            .map(|(&b, &p)| b.max(p))
            .collect(),
    };

    for _sweep in 0..step.max_sweeps {
        let mut delta = 0.0f64;
        for i in 0..n {
            let d = step.matrix.diag(i);
            let r = step.rhs[i] - step.matrix.row_dot(i, &u);
            let cand = u[i] + step.omega * r / d;
            let next = cand.max(step.obstacle[i]);
            delta = delta.max(math::abs(next - u[i]));
            u[i] = next;
        }
        if delta <= tol {
            return Ok(u);
        }
    }
    let res = lcp_residuals(step.matrix, &step.rhs, &step.obstacle, &u);
    Err(CoreError::SweepLimit {
        sweeps: step.max_sweeps,
        residual: res.complementarity,
    })
}

/// Implicit-Euler obstacle solve over raw obstacle samples, starting from
/// u(·,0) = φ.
pub fn solve_obstacle_fields(
    grid: &GridSpec,
    op: &DiscreteOperator,
    phi: &[f64],
    dt: f64,
    n_outputs: usize,
    params: &PsorParams,
) -> Result<Trajectory> {
    if op.s >= 0.5 {
        return Err(CoreError::UnsupportedRegime {
            s: op.s,
            context: "obstacle run",
        });
    }
    grid.check_len(phi)?;
    let steps = libm::round(grid.t_horizon / dt) as usize;
    if steps == 0 || math::abs(steps as f64 * dt - grid.t_horizon) > 1e-9 {
        return Err(CoreError::Parameter {
            name: "dt",
            message: format!(
                "horizon {} is not a multiple of dt = {}",
                grid.t_horizon, dt
            ),
        });
    }
    let stride = (steps / n_outputs.max(1)).max(1);

    let matrix = DenseMatrix::new(grid.n_points, operator::assemble_implicit_euler(op, dt))?;
    matrix.check_m_structure(1e-12)?;

    let mut traj = Trajectory::new(grid.clone());
    let mut snap0 = FieldSnapshot::new(0.0, phi.to_vec());
    snap0.v = Some(alloc::vec![0.0; grid.n_points]);
    traj.snapshots.push(snap0);

    let mut u = phi.to_vec();
    for k in 1..=steps {
        let step = LcpStep {
            matrix: &matrix,
            rhs: u.clone(),
            obstacle: phi.to_vec(),
            omega: params.omega,
            tol: params.tol,
            max_sweeps: params.max_sweeps,
        };
        let next = match psor_solve(&step, Some(&u)) {
            Ok(next) => next,
            Err(e) => {
                traj.valid = false;
                return if traj.snapshots.len() > 1 {
                    Ok(traj)
                } else {
                    Err(e)
                };
            }
        };
        let res = lcp_residuals(&matrix, &step.rhs, phi, &next);
        let mut min_fwd = f64::INFINITY;
        for i in 0..grid.n_points {
            min_fwd = min_fwd.min(next[i] - u[i]);
        }
        let t = k as f64 * dt;
        traj.steps.push(StepRecord {
            t,
            max_beta: 0.0,
            min_detachment: res.min_feasibility,
            min_forward_diff: min_fwd,
        });
        if k % stride == 0 || k == steps {
            let mut snap = FieldSnapshot::new(t, next.clone());
            snap.v = Some(next.iter().zip(phi).map(|(&a, &p)| a - p).collect());
            snap.ut = Some(next.iter().zip(&u).map(|(&a, &b)| (a - b) / dt).collect());
            traj.snapshots.push(snap);
        }
        u = next;
    }
    Ok(traj)
}

/// Implicit-Euler obstacle solve for an `ObstacleSpec`.
pub fn solve_obstacle(
    grid: &GridSpec,
    op: &DiscreteOperator,
    obstacle: &ObstacleSpec,
    dt: f64,
    n_outputs: usize,
    params: &PsorParams,
) -> Result<Trajectory> {
    solve_obstacle_fields(grid, op, &obstacle.sample(grid), dt, n_outputs, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonVerdict {
    pub pass: bool,
    pub max_violation: f64,
    pub tolerance: f64,
}

/// Comparison of solutions for nested obstacles φ ≤ ψ on a shared grid and
/// kernel: pass iff max over nodes/times of (u − v) ≤ 1e−8·scale.
pub fn comparison_test(
    grid: &GridSpec,
    op: &DiscreteOperator,
    phi: &[f64],
    psi: &[f64],
    dt: f64,
    n_outputs: usize,
    params: &PsorParams,
) -> Result<ComparisonVerdict> {
    grid.check_len(phi)?;
    grid.check_len(psi)?;
    for (i, (&a, &b)) in phi.iter().zip(psi).enumerate() {
        if a > b {
            return Err(CoreError::Parameter {
                name: "obstacles",
                message: format!("phi > psi at node {i}: {a} > {b}"),
            });
        }
    }
    let tu = solve_obstacle_fields(grid, op, phi, dt, n_outputs, params)?;
    let tv = solve_obstacle_fields(grid, op, psi, dt, n_outputs, params)?;
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in tu.snapshots.iter().zip(&tv.snapshots) {
        for (&x, &y) in a.u.iter().zip(&b.u) {
            worst = worst.max(x - y);
        }
    }
    let scale = math::sup_abs(psi).max(1.0);
    let tolerance = 1e-8 * scale;
    Ok(ComparisonVerdict {
        pass: worst <= tolerance,
        max_violation: worst.max(0.0),
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::obstacle::{make_obstacle, Bump, ObstacleFamily};
    use crate::operator::{build_discrete_operator, FarField};

    fn identity_matrix(n: usize) -> DenseMatrix {
        let mut a = alloc::vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        DenseMatrix::new(n, a).unwrap()
    }

    #[test]
    fn inactive_constraint_reduces_to_linear_solve() {
        // φ = −1e9 never binds: PSOR must match the unconstrained solution.
        let n = 6;
        let mut a = alloc::vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 2.5;
            if i > 0 {
                a[i * n + i - 1] = -1.0;
            }
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
            }
        }
        let matrix = DenseMatrix::new(n, a.clone()).unwrap();
        matrix.check_m_structure(0.0).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * i as f64).collect();
        let step = LcpStep {
            matrix: &matrix,
            rhs: rhs.clone(),
            obstacle: alloc::vec![-1e9; n],
            omega: 1.5,
            tol: 1e-13,
            max_sweeps: 10_000,
        };
        let u = psor_solve(&step, None).unwrap();
        let exact = crate::linalg::solve_dense(&a, n, &rhs).unwrap();
        for i in 0..n {
            assert!(
                math::abs(u[i] - exact[i]) < 1e-7,
                "gap {:e}",
                u[i] - exact[i]
            );
        }
    }

    #[test]
    fn projection_dominates_when_rhs_below_obstacle() {
        let matrix = identity_matrix(5);
        let step = LcpStep {
            matrix: &matrix,
            rhs: alloc::vec![-2.0; 5],
            obstacle: alloc::vec![0.5; 5],
            omega: 1.2,
            tol: 1e-14,
            max_sweeps: 1000,
        };
        let u = psor_solve(&step, None).unwrap();
        for &x in &u {
            assert_eq!(x, 0.5);
        }
    }

    // Brute-force oracle: enumerate all 2^n active sets, solve the equality
    // system with a local Gaussian elimination, and keep the complementary
    // feasible one.
    fn active_set_oracle(matrix: &DenseMatrix, rhs: &[f64], phi: &[f64]) -> Option<Vec<f64>> {
        let n = matrix.n;
        fn gauss(mut a: Vec<f64>, n: usize, mut b: Vec<f64>) -> Option<Vec<f64>> {
            for col in 0..n {
                let mut piv = col;
                for r in col + 1..n {
                    if math::abs(a[r * n + col]) > math::abs(a[piv * n + col]) {
                        piv = r;
                    }
                }
                if a[piv * n + col] == 0.0 {
                    return None;
                }
                if piv != col {
                    for j in 0..n {
                        a.swap(col * n + j, piv * n + j);
                    }
                    b.swap(col, piv);
                }
                for r in col + 1..n {
                    let f = a[r * n + col] / a[col * n + col];
                    for j in col..n {
                        a[r * n + j] -= f * a[col * n + j];
                    }
                    b[r] -= f * b[col];
                }
            }
            let mut x = alloc::vec![0.0; n];
            for i in (0..n).rev() {
                let mut acc = b[i];
                for j in i + 1..n {
                    acc -= a[i * n + j] * x[j];
                }
                x[i] = acc / a[i * n + i];
            }
            Some(x)
        }
        for mask in 0u32..(1 << n) {
            let mut a = alloc::vec![0.0; n * n];
            let mut b = alloc::vec![0.0; n];
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    // active: u_i = phi_i
                    a[i * n + i] = 1.0;
                    b[i] = phi[i];
                } else {
                    for j in 0..n {
                        a[i * n + j] = matrix.a[i * n + j];
                    }
                    b[i] = rhs[i];
                }
            }
            let Some(u) = gauss(a, n, b) else { continue };
            let mut ok = true;
            for i in 0..n {
                let r = matrix.row_dot(i, &u) - rhs[i];
                if u[i] < phi[i] - 1e-9 || r < -1e-9 {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Some(u);
            }
        }
        None
    }

    #[test]
    fn matches_exhaustive_active_set_enumeration() {
        // deterministic pseudo-random 8×8 M-matrix instances
        let n = 8;
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut rnd = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 33) as f64) / (u32::MAX as f64 / 2.0) - 1.0
        };
        for _case in 0..5 {
            let mut a = alloc::vec![0.0; n * n];
            for i in 0..n {
                let mut off = 0.0;
                for j in 0..n {
                    if i != j {
                        let w = -math::abs(0.4 * rnd());
                        a[i * n + j] = w;
                        off += -w;
                    }
                }
                a[i * n + i] = off + 1.0 + math::abs(rnd());
            }
            let matrix = DenseMatrix::new(n, a).unwrap();
            matrix.check_m_structure(0.0).unwrap();
            let rhs: Vec<f64> = (0..n).map(|_| rnd()).collect();
            let phi: Vec<f64> = (0..n).map(|_| 0.8 * rnd()).collect();
            let step = LcpStep {
                matrix: &matrix,
                rhs: rhs.clone(),
                obstacle: phi.clone(),
                omega: 1.5,
                tol: 1e-13,
                max_sweeps: 20_000,
            };
            let u = psor_solve(&step, None).unwrap();
            let oracle = active_set_oracle(&matrix, &rhs, &phi).expect("oracle found no solution");
            for i in 0..n {
                assert!(
                    math::abs(u[i] - oracle[i]) < 1e-7,
                    "node {i}: psor {} vs oracle {}",
                    u[i],
                    oracle[i]
                );
            }
        }
    }

    fn setup(n: usize) -> (GridSpec, DiscreteOperator, ObstacleSpec) {
        let grid = GridSpec::new(1, 8.0, n, 1.0, 1.0 / 256.0).unwrap();
        let kernel = KernelSpec::fractional(0.25, 1).unwrap();
        let op = build_discrete_operator(&kernel, &grid, 16.0, FarField::ZeroExtension).unwrap();
        let obstacle = make_obstacle(
            ObstacleFamily::CubicBump(Bump {
                amplitude: 1.0,
                radius: 1.0,
                center: 0.0,
            }),
            &grid,
        )
        .unwrap();
        (grid, op, obstacle)
    }

    #[test]
    fn trajectory_starts_on_the_obstacle_and_stays_feasible() {
        let (grid, op, obstacle) = setup(257);
        let traj = solve_obstacle(
            &grid,
            &op,
            &obstacle,
            1.0 / 256.0,
            16,
            &PsorParams::default(),
        )
        .unwrap();
        assert!(traj.valid);
        let phi = obstacle.sample(&grid);
        for (i, &u) in traj.snapshots[0].u.iter().enumerate() {
            assert_eq!(u, phi[i]);
        }
        for rec in &traj.steps {
            assert!(
                rec.min_detachment >= 0.0,
                "feasibility broken: {}",
                rec.min_detachment
            );
            assert!(
                rec.min_forward_diff >= -1e-10,
                "monotonicity broken: {}",
                rec.min_forward_diff
            );
        }
    }

    #[test]
    fn per_step_complementarity_is_tight() {
        let (grid, op, obstacle) = setup(129);
        let dt = 1.0 / 256.0;
        let phi = obstacle.sample(&grid);
        let matrix =
            DenseMatrix::new(grid.n_points, operator::assemble_implicit_euler(&op, dt)).unwrap();
        let mut u = phi.clone();
        for _ in 0..16 {
            let step = LcpStep {
                matrix: &matrix,
                rhs: u.clone(),
                obstacle: phi.clone(),
                omega: 1.5,
                tol: 1e-12,
                max_sweeps: 10_000,
            };
            let next = psor_solve(&step, Some(&u)).unwrap();
            let res = lcp_residuals(&matrix, &u, &phi, &next);
            assert!(res.min_feasibility >= 0.0);
            assert!(res.min_residual >= -1e-10);
            assert!(res.complementarity <= 1e-8);
            u = next;
        }
    }

    #[test]
    fn comparison_identical_obstacles_is_exact() {
        let (grid, op, obstacle) = setup(129);
        let phi = obstacle.sample(&grid);
        let v = comparison_test(
            &grid,
            &op,
            &phi,
            &phi,
            1.0 / 256.0,
            8,
            &PsorParams::default(),
        )
        .unwrap();
        assert!(v.pass);
        assert_eq!(v.max_violation, 0.0);
    }

    #[test]
    fn comparison_with_shifted_obstacle() {
        let (grid, op, obstacle) = setup(129);
        let phi = obstacle.sample(&grid);
        let psi: Vec<f64> = phi.iter().map(|&p| p + 0.1).collect();
        let v = comparison_test(
            &grid,
            &op,
            &phi,
            &psi,
            1.0 / 256.0,
            8,
            &PsorParams::default(),
        )
        .unwrap();
        assert!(v.pass, "violation {}", v.max_violation);
    }

    #[test]
    fn comparison_with_wider_bump() {
        let (grid, op, obstacle) = setup(129);
        let phi = obstacle.sample(&grid);
        let wider = make_obstacle(
            ObstacleFamily::CubicBump(Bump {
                amplitude: 1.15,
                radius: 1.4,
                center: 0.0,
            }),
            &grid,
        )
        .unwrap();
        let psi = wider.sample(&grid);
        for (a, b) in phi.iter().zip(&psi) {
            assert!(a <= b, "bump nesting broken");
        }
        let v = comparison_test(
            &grid,
            &op,
            &phi,
            &psi,
            1.0 / 256.0,
            8,
            &PsorParams::default(),
        )
        .unwrap();
        assert!(v.pass, "violation {}", v.max_violation);
    }

    #[test]
    fn rejects_unordered_obstacles() {
        let (grid, op, obstacle) = setup(129);
        let phi = obstacle.sample(&grid);
        let psi: Vec<f64> = phi.iter().map(|&p| p - 0.1).collect();
        assert!(comparison_test(
            &grid,
            &op,
            &phi,
            &psi,
            1.0 / 256.0,
            8,
            &PsorParams::default()
        )
        .is_err());
    }
}
