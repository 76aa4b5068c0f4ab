//! Time stepper for the penalized problem
//!
//!   ∂ₜu + Lu = β_ε(u − φ),   β_ε(z) = e^(−z/ε),   u(·,0) = φ + √ε.
//!
//! The default scheme is backward Euler with L handled by a cached dense
//! factorization of (I + dt·L_h) and the stiff β term by per-node scalar
//! Newton solves, iterated to the coupled fixed point
//!
//!   (I + dt·L_h) u^{k+1} = u^k + dt·β_ε(u* − φ),
//!
//! where u* solves w = u^k − dt·(L_h u)ᵢ + dt·β_ε(w − φᵢ) node by node. The
//! off-diagonal coupling is O(dt·h^(−2s)), so a handful of sweeps reach
//! machine accuracy. The scheme is monotone: comparison of obstacles and
//! initial data carries over to the discrete trajectories.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::grid::{FieldSnapshot, GridSpec, StepRecord, Trajectory};
use crate::linalg::LuFactors;
use crate::math;
use crate::obstacle::{self, ObstacleSpec};
use crate::operator::{self, DiscreteOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Implicit in L (cached linear solve), per-node Newton on β.
    Imex,
    /// Forward Euler; guarded by the stored stability limit.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    /// Tolerance for the linear/fixed-point solves, relative to the field scale.
    pub linear_tol: f64,
    /// Cap on scalar Newton iterations per node and on outer sweeps.
    pub max_newton: usize,
}

impl PenalizedConfig {
    pub fn new(epsilon: f64, dt: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(CoreError::Parameter {
                name: "epsilon",
                message: format!("penalization scale must be positive, got {epsilon}"),
            });
        }
        if !(dt > 0.0) {
            return Err(CoreError::Parameter {
                name: "dt",
                message: format!("time step must be positive, got {dt}"),
            });
        }
        Ok(PenalizedConfig {
            epsilon,
            dt,
            scheme: Scheme::Imex,
            linear_tol: 1e-12,
            max_newton: 60,
        })
    }
}

/// β_ε(z) = e^(−z/ε), clamped to zero below 1e−300 to avoid underflow traps.
pub fn beta(z: f64, epsilon: f64) -> f64 {
    let a = z / epsilon;
    if a > 690.0 {
        0.0
    } else {
        math::exp(-a)
    }
}

/// Empirical stability limit for the explicit scheme: the diffusion CFL
/// 2/λ_max(L_h) and the stiffness bound ε/max{1, ‖Lφ‖_∞}.
pub fn stability_limit(epsilon: f64, op: &DiscreteOperator, l_phi_sup: f64) -> f64 {
    let diffusion = 2.0 / op.row_diagonal();
    let stiffness = epsilon / l_phi_sup.max(1.0);
    0.9 * diffusion.min(stiffness)
}

/// Solve w + ln w = l for w > 0 (i.e. w = W(e^l)) by guarded Newton.
fn lambert_w_of_exp(l: f64, max_iter: usize) -> Option<(f64, usize)> {
    if l < -36.0 {
        // W(x) = x(1 − x + O(x²)) for tiny x = e^l.
        let x = math::exp(l);
        return Some((x * (1.0 - x), 0));
    }
    let mut w = if l > 1.0 {
        (l - math::ln(l)).max(1e-12)
    } else {
        // x = e^l <= e here; W(x) ≈ x/(1+x) is inside the convergence basin.
        let x = math::exp(l);
        x / (1.0 + x)
    };
    for it in 0..max_iter {
        // Newton on g(w) = w + ln w − l; g' = 1 + 1/w.
        let g = w + math::ln(w) - l;
        let step = g * w / (w + 1.0);
        let mut next = w - step;
        if next <= 0.0 {
            next = 0.5 * w;
        }
        if math::abs(next - w) <= 1e-15 * (1.0 + math::abs(next)) {
            return Some((next, it + 1));
        }
        w = next;
    }
    None
}

/// Per-node backward-Euler solve of w = rhs + dt·β_ε(w − φ).
///
/// In z = (w − φ)/ε coordinates the equation is z − τ·e^(−z) = ρ with
/// τ = dt/ε, whose root is z = ρ + W(τ·e^(−ρ)); the Lambert value is found
/// by scalar Newton in log space so deep-contact nodes cannot overflow.
/// Returns (w, β_ε(w − φ)).
fn node_stiff_solve(
    rhs: f64,
    phi: f64,
    epsilon: f64,
    dt: f64,
    max_newton: usize,
) -> Option<(f64, f64)> {
    let rho = (rhs - phi) / epsilon;
    let l = math::ln(dt / epsilon) - rho;
    let (w, _) = lambert_w_of_exp(l, max_newton)?;
    let z = rho + w;
    // β at the root: e^(−z) = (z − ρ)·ε/dt, exact from the equation.
    let beta_val = w * epsilon / dt;
    Some((phi + epsilon * z, beta_val))
}

/// Linear backend for (I + dt·L_h)x = b.
pub enum ImplicitSolver {
    Dense(LuFactors),
    /// Jacobi fixed point using operator applications; for large grids.
    Jacobi {
        diag: f64,
        tol: f64,
    },
}

/// Grids up to this size get a direct dense factorization.
pub const DENSE_SOLVE_LIMIT: usize = 2049;

impl ImplicitSolver {
    pub fn build(op: &DiscreteOperator, dt: f64, linear_tol: f64) -> Result<Self> {
        if op.n_points <= DENSE_SOLVE_LIMIT {
            let a = operator::assemble_implicit_euler(op, dt);
            Ok(ImplicitSolver::Dense(LuFactors::factor(&a, op.n_points)?))
        } else {
            Ok(ImplicitSolver::Jacobi {
                diag: 1.0 + dt * op.row_diagonal(),
                tol: linear_tol,
            })
        }
    }

    pub fn solve(&self, op: &DiscreteOperator, dt: f64, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            ImplicitSolver::Dense(lu) => lu.solve(b),
            ImplicitSolver::Jacobi { diag, tol } => {
                let scale = math::sup_abs(b).max(1.0);
                let mut x = b.to_vec();
                for _ in 0..500 {
                    let lx = operator::apply_operator(op, &x)?;
                    let mut delta = 0.0f64;
                    for i in 0..x.len() {
                        let resid = b[i] - (x[i] + dt * lx[i]);
                        let upd = resid / diag;
                        x[i] += upd;
                        delta = delta.max(math::abs(upd));
                    }
                    if delta <= tol * scale {
                        return Ok(x);
                    }
                }
                Err(CoreError::SweepLimit {
                    sweeps: 500,
                    residual: f64::NAN,
                })
            }
        }
    }
}

/// One time step of the penalized problem. `phi` and `l_phi_sup` are the
/// obstacle samples and ‖Lφ‖_∞ (the latter drives the explicit stability
/// guard).
pub fn step_penalized_fields(
    state: &FieldSnapshot,
    cfg: &PenalizedConfig,
    op: &DiscreteOperator,
    phi: &[f64],
    l_phi_sup: f64,
    solver: &ImplicitSolver,
) -> Result<FieldSnapshot> {
    let n = op.n_points;
    if state.u.len() != n || phi.len() != n {
        return Err(CoreError::Shape {
            expected: n,
            got: state.u.len().min(phi.len()),
        });
    }
    let dt = cfg.dt;
    let eps = cfg.epsilon;
    let uk = &state.u;

    let u_next = match cfg.scheme {
        Scheme::Explicit => {
            let limit = stability_limit(eps, op, l_phi_sup);
            if dt > limit {
                return Err(CoreError::Unstable { dt, limit });
            }
            let lu = operator::apply_operator(op, uk)?;
            (0..n)
                .map(|i| uk[i] + dt * (beta(uk[i] - phi[i], eps) - lu[i]))
                .collect::<Vec<f64>>()
        }
        Scheme::Imex => {
            let scale = math::sup_abs(uk).max(1.0);
            let tol = cfg.linear_tol.max(1e-15) * scale;
            let mut u = uk.clone();
            let mut rhs = vec![0.0f64; n];
            let mut converged = false;
            for _ in 0..cfg.max_newton {
                let lu = operator::apply_operator(op, &u)?;
                for i in 0..n {
                    let r = uk[i] - dt * lu[i];
                    let (_, beta_star) = node_stiff_solve(r, phi[i], eps, dt, cfg.max_newton)
                        .ok_or(CoreError::NewtonDiverged {
                            node: i,
                            residual: f64::NAN,
                        })?;
                    rhs[i] = uk[i] + dt * beta_star;
                }
                let u_new = solver.solve(op, dt, &rhs)?;
                let mut delta = 0.0f64;
                for i in 0..n {
                    delta = delta.max(math::abs(u_new[i] - u[i]));
                }
                u = u_new;
                if delta <= tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(CoreError::NewtonDiverged {
                    node: 0,
                    residual: f64::NAN,
                });
            }
            u
        }
    };

    let mut snap = FieldSnapshot::new(state.t + dt, u_next);
    let v: Vec<f64> = snap.u.iter().zip(phi).map(|(&u, &p)| u - p).collect();
    let ut: Vec<f64> = snap.u.iter().zip(uk).map(|(&a, &b)| (a - b) / dt).collect();
    snap.v = Some(v);
    snap.ut = Some(ut);
    Ok(snap)
}

/// Convenience wrapper taking an `ObstacleSpec`.
pub fn step_penalized(
    state: &FieldSnapshot,
    cfg: &PenalizedConfig,
    op: &DiscreteOperator,
    obstacle: &ObstacleSpec,
    grid: &GridSpec,
) -> Result<FieldSnapshot> {
    if state.t + cfg.dt > grid.t_horizon + 1e-12 {
        return Err(CoreError::Horizon {
            t: state.t + cfg.dt,
            horizon: grid.t_horizon,
        });
    }
    let phi = obstacle.sample(grid);
    let l_phi = obstacle.l_phi(grid, op)?;
    let solver = ImplicitSolver::build(op, cfg.dt, cfg.linear_tol)?;
    step_penalized_fields(state, cfg, op, &phi, math::sup_abs(&l_phi), &solver)
}

/// March the penalized problem to the horizon, keeping `n_outputs` evenly
/// spaced snapshots (plus t = 0) and per-step scalars.
pub fn solve_penalized(
    grid: &GridSpec,
    op: &DiscreteOperator,
    obstacle: &ObstacleSpec,
    cfg: &PenalizedConfig,
    n_outputs: usize,
) -> Result<Trajectory> {
    if op.s >= 0.5 {
        return Err(CoreError::UnsupportedRegime {
            s: op.s,
            context: "obstacle run",
        });
    }
    let steps = libm::round(grid.t_horizon / cfg.dt) as usize;
    if steps == 0 || math::abs(steps as f64 * cfg.dt - grid.t_horizon) > 1e-9 {
        return Err(CoreError::Parameter {
            name: "dt",
            message: format!(
                "horizon {} is not a multiple of dt = {}",
                grid.t_horizon, cfg.dt
            ),
        });
    }
    let stride = (steps / n_outputs.max(1)).max(1);

    let phi = obstacle.sample(grid);
    let l_phi = obstacle.l_phi(grid, op)?;
    let l_phi_sup = math::sup_abs(&l_phi);
    let solver = ImplicitSolver::build(op, cfg.dt, cfg.linear_tol)?;

    let mut traj = Trajectory::new(grid.clone());
    let mut state = obstacle::initial_state(obstacle, grid, cfg.epsilon)?;
    traj.snapshots.push(state.clone());

    for k in 1..=steps {
        let next = match step_penalized_fields(&state, cfg, op, &phi, l_phi_sup, &solver) {
            Ok(s) => s,
            Err(e) => {
                traj.valid = false;
                return if traj.snapshots.len() > 1 {
                    Ok(traj)
                } else {
                    Err(e)
                };
            }
        };
        let mut max_beta = 0.0f64;
        let mut min_det = f64::INFINITY;
        let mut min_fwd = f64::INFINITY;
        for i in 0..grid.n_points {
            let det = next.u[i] - phi[i];
            max_beta = max_beta.max(beta(det, cfg.epsilon));
            min_det = min_det.min(det);
            min_fwd = min_fwd.min(next.u[i] - state.u[i]);
        }
        traj.steps.push(StepRecord {
            t: next.t,
            max_beta,
            min_detachment: min_det,
            min_forward_diff: min_fwd,
        });
        if k % stride == 0 || k == steps {
            traj.snapshots.push(next.clone());
        }
        state = next;
    }
    Ok(traj)
}

/// One row of the ε-refinement table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonRow {
    pub epsilon: f64,
    /// ‖u^{ε_i} − u^{ε_{i+1}}‖_∞ over the window; NaN for the last row.
    pub gap_to_next: f64,
    /// ‖u^{ε_i} − u_PSOR‖_∞ over the window.
    pub gap_to_reference: f64,
    /// gap_to_reference / √ε.
    pub fitted_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonStudy {
    pub rows: Vec<EpsilonRow>,
    pub t1: f64,
    pub t2: f64,
    /// Fitted order q of gap ≈ C·(√ε)^q against the PSOR reference.
    pub order_in_sqrt_eps: f64,
    pub gaps_monotone: bool,
    pub reference_gaps_monotone: bool,
}

/// Penalized trajectories for a decreasing ε sequence, cross-checked against
/// the projected (PSOR) reference at the same grid and dt.
pub fn epsilon_study(
    grid: &GridSpec,
    op: &DiscreteOperator,
    obstacle: &ObstacleSpec,
    epsilons: &[f64],
    dt: f64,
    n_outputs: usize,
    t1: f64,
    t2: f64,
) -> Result<EpsilonStudy> {
    if epsilons.len() < 3 {
        return Err(CoreError::Parameter {
            name: "epsilons",
            message: format!("need at least 3 values, got {}", epsilons.len()),
        });
    }
    for w in epsilons.windows(2) {
        if !(w[1] < w[0]) {
            return Err(CoreError::Parameter {
                name: "epsilons",
                message: format!("sequence must be strictly decreasing, got {w:?}"),
            });
        }
    }

    let mut trajs = Vec::new();
    for &eps in epsilons {
        let cfg = PenalizedConfig::new(eps, dt)?;
        trajs.push(solve_penalized(grid, op, obstacle, &cfg, n_outputs)?);
    }
    let reference = crate::lcp::solve_obstacle(
        grid,
        op,
        obstacle,
        dt,
        n_outputs,
        &crate::lcp::PsorParams::default(),
    )?;

    let mut rows = Vec::new();
    for (i, traj) in trajs.iter().enumerate() {
        let gap_to_next = if i + 1 < trajs.len() {
            traj.sup_gap(&trajs[i + 1], t1, t2)?
        } else {
            f64::NAN
        };
        let gap_to_reference = traj.sup_gap(&reference, t1, t2)?;
        let sqrt_eps = math::sqrt(epsilons[i]);
        rows.push(EpsilonRow {
            epsilon: epsilons[i],
            gap_to_next,
            gap_to_reference,
            fitted_c: gap_to_reference / sqrt_eps,
        });
    }

    let gaps_monotone = rows[..rows.len() - 1]
        .windows(2)
        .all(|w| w[1].gap_to_next < w[0].gap_to_next);
    let reference_gaps_monotone = rows
        .windows(2)
        .all(|w| w[1].gap_to_reference < w[0].gap_to_reference);

    let xs: Vec<f64> = epsilons.iter().map(|&e| math::sqrt(e)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gap_to_reference).collect();
    let order = crate::fit::loglog_fit(&xs, &ys)
        .map(|(p, _, _)| p)
        .unwrap_or(f64::NAN);

    Ok(EpsilonStudy {
        rows,
        t1,
        t2,
        order_in_sqrt_eps: order,
        gaps_monotone,
        reference_gaps_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::obstacle::{make_obstacle, Bump, ObstacleFamily};
    use crate::operator::{build_discrete_operator, FarField};

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
    fn beta_values() {
        assert_eq!(beta(0.0, 0.1), 1.0);
        let eps = 0.04;
        let b = beta(math::sqrt(eps), eps);
        assert!((b - math::exp(-1.0 / math::sqrt(eps))).abs() < 1e-18);
        assert!(beta(1.0, 0.1) < beta(0.0, 0.1));
        assert_eq!(beta(1e6, 0.1), 0.0);
    }

    #[test]
    fn lambert_solves_w_plus_ln_w() {
        for &l in &[-30.0, -5.0, -1.0, 0.0, 0.5, 3.0, 20.0, 200.0] {
            let (w, _) = lambert_w_of_exp(l, 50).unwrap();
            assert!((w + math::ln(w) - l).abs() < 1e-10, "l = {l}, w = {w}");
        }
    }

    #[test]
    fn flat_obstacle_step_follows_the_scalar_ode() {
        // u' = e^(−u/ε) has the closed form u(t) = ε·ln(e^(u0/ε) + t/ε).
        // With a spatially constant state and zero obstacle, one imex step
        // must land on it to Newton accuracy.
        let grid = GridSpec::new(1, 8.0, 129, 1.0, 1.0 / 256.0).unwrap();
        let kernel = KernelSpec::fractional(0.25, 1).unwrap();
        let op =
            build_discrete_operator(&kernel, &grid, 16.0, FarField::ConstantExtension).unwrap();
        let eps = 0.01;
        let dt = 1.0 / 256.0;
        let cfg = PenalizedConfig::new(eps, dt).unwrap();
        let u0 = math::sqrt(eps);
        let state = FieldSnapshot::new(0.0, alloc::vec![u0; grid.n_points]);
        let phi = alloc::vec![0.0; grid.n_points];
        let solver = ImplicitSolver::build(&op, dt, cfg.linear_tol).unwrap();
        let next = step_penalized_fields(&state, &cfg, &op, &phi, 0.0, &solver).unwrap();
        let exact = eps * math::ln(math::exp(u0 / eps) + dt / eps);
        for &u in &next.u {
            assert!((u - exact).abs() < 1e-9, "u = {u}, exact = {exact}");
        }
    }

    #[test]
    fn flat_obstacle_trajectory_follows_the_ode() {
        let grid = GridSpec::new(1, 8.0, 129, 0.25, 1.0 / 256.0).unwrap();
        let kernel = KernelSpec::fractional(0.25, 1).unwrap();
        let op =
            build_discrete_operator(&kernel, &grid, 16.0, FarField::ConstantExtension).unwrap();
        let eps = 0.01;
        let cfg = PenalizedConfig::new(eps, 1.0 / 256.0).unwrap();
        let phi = alloc::vec![0.0; grid.n_points];
        let solver = ImplicitSolver::build(&op, cfg.dt, cfg.linear_tol).unwrap();
        let mut state = FieldSnapshot::new(0.0, alloc::vec![math::sqrt(eps); grid.n_points]);
        let mut spread = 0.0f64;
        for _ in 0..64 {
            state = step_penalized_fields(&state, &cfg, &op, &phi, 0.0, &solver).unwrap();
            let lo = math::inf(&state.u);
            let hi = math::sup(&state.u);
            spread = spread.max(hi - lo);
        }
        let exact = eps * math::ln(math::exp(math::sqrt(eps) / eps) + 0.25 / eps);
        assert!(
            spread < 1e-10,
            "trajectory did not stay spatially constant: {spread:e}"
        );
        assert!(
            (state.u[0] - exact).abs() < 1e-7,
            "u = {}, exact = {exact}",
            state.u[0]
        );
    }

    #[test]
    fn step_doubling_is_second_order() {
        let (grid, op, obstacle) = setup(257);
        let eps = 0.02;
        let phi = obstacle.sample(&grid);
        let l_phi_sup = math::sup_abs(&obstacle.l_phi(&grid, &op).unwrap());
        let start = obstacle::initial_state(&obstacle, &grid, eps).unwrap();

        let mut errs = Vec::new();
        for &dt in &[1.0 / 64.0, 1.0 / 128.0] {
            let cfg_full = PenalizedConfig::new(eps, dt).unwrap();
            let cfg_half = PenalizedConfig::new(eps, dt / 2.0).unwrap();
            let solver_full = ImplicitSolver::build(&op, dt, 1e-13).unwrap();
            let solver_half = ImplicitSolver::build(&op, dt / 2.0, 1e-13).unwrap();
            let full = step_penalized_fields(&start, &cfg_full, &op, &phi, l_phi_sup, &solver_full)
                .unwrap();
            let half1 =
                step_penalized_fields(&start, &cfg_half, &op, &phi, l_phi_sup, &solver_half)
                    .unwrap();
            let half2 =
                step_penalized_fields(&half1, &cfg_half, &op, &phi, l_phi_sup, &solver_half)
                    .unwrap();
            let mut gap = 0.0f64;
            for i in 0..grid.n_points {
                gap = gap.max(math::abs(full.u[i] - half2.u[i]));
            }
            errs.push(gap);
        }
        // halving dt should cut the step-doubling defect by ~4; accept >= 3.
        assert!(errs[1] <= errs[0] / 3.0, "defects {errs:?}");
    }

    #[test]
    fn explicit_scheme_rejects_large_steps() {
        let (grid, op, obstacle) = setup(129);
        let eps = 1e-4;
        let mut cfg = PenalizedConfig::new(eps, 0.01).unwrap();
        cfg.scheme = Scheme::Explicit;
        let state = obstacle::initial_state(&obstacle, &grid, eps).unwrap();
        let err = step_penalized(&state, &cfg, &op, &obstacle, &grid);
        assert!(matches!(err, Err(CoreError::Unstable { .. })));
    }

    #[test]
    fn explicit_and_imex_agree_on_gentle_steps() {
        let (grid, op, obstacle) = setup(129);
        let eps = 0.25;
        let dt = 1e-3;
        let phi = obstacle.sample(&grid);
        let l_phi_sup = math::sup_abs(&obstacle.l_phi(&grid, &op).unwrap());
        let start = obstacle::initial_state(&obstacle, &grid, eps).unwrap();
        let mut cfg_e = PenalizedConfig::new(eps, dt).unwrap();
        cfg_e.scheme = Scheme::Explicit;
        let cfg_i = PenalizedConfig::new(eps, dt).unwrap();
        let solver = ImplicitSolver::build(&op, dt, 1e-13).unwrap();
        let explicit =
            step_penalized_fields(&start, &cfg_e, &op, &phi, l_phi_sup, &solver).unwrap();
        let imex = step_penalized_fields(&start, &cfg_i, &op, &phi, l_phi_sup, &solver).unwrap();
        let mut gap = 0.0f64;
        for i in 0..grid.n_points {
            gap = gap.max(math::abs(explicit.u[i] - imex.u[i]));
        }
        assert!(gap < 5.0 * dt * dt, "explicit/imex gap {gap:e}");
    }

    #[test]
    fn lower_bound_of_detachment_holds() {
        // u^ε − φ ≥ −ε·ln⁺‖Lφ‖_∞ along the trajectory.
        let (grid, op, obstacle) = setup(257);
        let eps = 0.01;
        let cfg = PenalizedConfig::new(eps, 1.0 / 256.0).unwrap();
        let traj = solve_penalized(&grid, &op, &obstacle, &cfg, 16).unwrap();
        assert!(traj.valid);
        let l_phi_sup = math::sup_abs(&obstacle.l_phi(&grid, &op).unwrap());
        let floor = -eps * math::ln_plus(l_phi_sup) - 1e-9;
        for rec in &traj.steps {
            assert!(
                rec.min_detachment >= floor,
                "floor {floor}, got {}",
                rec.min_detachment
            );
        }
    }

    #[test]
    fn upper_bound_of_detachment_holds() {
        // u^ε(·,t) − φ ≤ √ε + 2t·max{1, ‖Lφ‖_∞}.
        let (grid, op, obstacle) = setup(257);
        let eps = 0.01;
        let cfg = PenalizedConfig::new(eps, 1.0 / 256.0).unwrap();
        let traj = solve_penalized(&grid, &op, &obstacle, &cfg, 16).unwrap();
        let phi = obstacle.sample(&grid);
        let l_phi_sup = math::sup_abs(&obstacle.l_phi(&grid, &op).unwrap());
        for snap in &traj.snapshots {
            let cap = math::sqrt(eps) + 2.0 * snap.t * l_phi_sup.max(1.0) + 1e-9;
            for i in 0..grid.n_points {
                assert!(snap.u[i] - phi[i] <= cap);
            }
        }
    }

    #[test]
    fn beta_stays_below_the_a_priori_bound() {
        // β_ε(u^ε − φ) ≤ max{1, ‖Lφ‖_∞} plus quadrature slack.
        let (grid, op, obstacle) = setup(257);
        let eps = 0.01;
        let cfg = PenalizedConfig::new(eps, 1.0 / 256.0).unwrap();
        let traj = solve_penalized(&grid, &op, &obstacle, &cfg, 16).unwrap();
        let l_phi_sup = math::sup_abs(&obstacle.l_phi(&grid, &op).unwrap());
        let bound = l_phi_sup.max(1.0) * (1.0 + 1e-6) + 1e-9;
        for rec in &traj.steps {
            assert!(
                rec.max_beta <= bound,
                "beta {} vs bound {bound}",
                rec.max_beta
            );
        }
    }

    #[test]
    fn per_step_decrease_is_within_the_beta_tolerance() {
        // u need not be nondecreasing while the √ε head start decays, but a
        // single step can only lose 10·dt·‖β‖.
        let (grid, op, obstacle) = setup(257);
        let eps = 0.01;
        let cfg = PenalizedConfig::new(eps, 1.0 / 256.0).unwrap();
        let traj = solve_penalized(&grid, &op, &obstacle, &cfg, 16).unwrap();
        let l_phi_sup = math::sup_abs(&obstacle.l_phi(&grid, &op).unwrap());
        let tol = 10.0 * cfg.dt * l_phi_sup.max(1.0);
        for rec in &traj.steps {
            assert!(
                rec.min_forward_diff >= -tol,
                "drop {} below -{tol}",
                rec.min_forward_diff
            );
        }
    }

    #[test]
    fn discrete_comparison_of_nested_obstacles() {
        // φ ≤ ψ with identical ε, dt and kernel forces u ≤ v within 1e−8.
        let (grid, op, _) = setup(257);
        let phi = make_obstacle(
            ObstacleFamily::CubicBump(Bump {
                amplitude: 1.0,
                radius: 1.0,
                center: 0.0,
            }),
            &grid,
        )
        .unwrap();
        let psi = make_obstacle(
            ObstacleFamily::CubicBump(Bump {
                amplitude: 1.2,
                radius: 1.3,
                center: 0.0,
            }),
            &grid,
        )
        .unwrap();
        let cfg = PenalizedConfig::new(0.01, 1.0 / 256.0).unwrap();
        let tu = solve_penalized(&grid, &op, &phi, &cfg, 16).unwrap();
        let tv = solve_penalized(&grid, &op, &psi, &cfg, 16).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in tu.snapshots.iter().zip(&tv.snapshots) {
            for (&x, &y) in a.u.iter().zip(&b.u) {
                worst = worst.max(x - y);
            }
        }
        assert!(worst <= 1e-8, "comparison violation {worst:e}");
    }

    #[test]
    fn initial_time_derivative_matches_penalized_identity() {
        // u_t(., 0+) = -L phi + e^(-1/sqrt(eps)) for the penalized start.
        // The initial state phi + sqrt(eps) is constant far out, so the
        // closure must preserve constants: constant extension.
        let grid = GridSpec::new(1, 8.0, 257, 1.0, 1.0 / 256.0).unwrap();
        let kernel = KernelSpec::fractional(0.25, 1).unwrap();
        let op =
            build_discrete_operator(&kernel, &grid, 16.0, FarField::ConstantExtension).unwrap();
        let obstacle = make_obstacle(
            ObstacleFamily::CubicBump(Bump {
                amplitude: 1.0,
                radius: 1.0,
                center: 0.0,
            }),
            &grid,
        )
        .unwrap();
        let eps = 0.04;
        let dt = 1.0 / 2048.0;
        let cfg = PenalizedConfig::new(eps, dt).unwrap();
        let phi = obstacle.sample(&grid);
        let l_phi = obstacle.l_phi(&grid, &op).unwrap();
        let start = obstacle::initial_state(&obstacle, &grid, eps).unwrap();
        let solver = ImplicitSolver::build(&op, dt, 1e-13).unwrap();
        let next =
            step_penalized_fields(&start, &cfg, &op, &phi, math::sup_abs(&l_phi), &solver).unwrap();
        let shift = math::exp(-1.0 / math::sqrt(eps));
        let mut worst = 0.0f64;
        for i in 0..grid.n_points {
            let ut = (next.u[i] - start.u[i]) / dt;
            worst = worst.max(math::abs(ut - (-l_phi[i] + shift)));
        }
        // one backward-Euler step approximates the initial slope to O(dt)
        let tol = 20.0 * dt * math::sup_abs(&l_phi).max(1.0);
        assert!(worst <= tol, "initial u_t deviates by {worst} (tol {tol})");
    }

    #[test]
    fn dt_refinement_changes_gap_less_than_epsilon_does() {
        // with eps fixed, halving dt moves the PSOR gap far less than the
        // next epsilon step does
        let (grid, op, obstacle) = setup(129);
        let eps = 0.04;
        let t1 = 0.2;
        let t2 = 0.8;
        let reference = |dt: f64| {
            crate::lcp::solve_obstacle(
                &grid,
                &op,
                &obstacle,
                dt,
                16,
                &crate::lcp::PsorParams::default(),
            )
            .unwrap()
        };
        let penal = |e: f64, dt: f64| {
            let cfg = PenalizedConfig::new(e, dt).unwrap();
            solve_penalized(&grid, &op, &obstacle, &cfg, 16).unwrap()
        };
        let dt = 1.0 / 256.0;
        let gap_coarse = penal(eps, dt).sup_gap(&reference(dt), t1, t2).unwrap();
        let gap_fine = penal(eps, dt / 2.0)
            .sup_gap(&reference(dt / 2.0), t1, t2)
            .unwrap();
        let gap_next_eps = penal(eps / 4.0, dt)
            .sup_gap(&reference(dt), t1, t2)
            .unwrap();
        let dt_change = math::abs(gap_fine - gap_coarse);
        let eps_change = math::abs(gap_next_eps - gap_coarse);
        assert!(
            dt_change < 0.25 * eps_change,
            "dt effect {dt_change:e} should be dominated by eps effect {eps_change:e}"
        );
    }

    #[test]
    fn epsilon_study_rejects_bad_sequences() {
        let (grid, op, obstacle) = setup(129);
        assert!(epsilon_study(
            &grid,
            &op,
            &obstacle,
            &[0.1, 0.2, 0.05],
            1.0 / 256.0,
            8,
            0.2,
            0.8
        )
        .is_err());
        assert!(epsilon_study(
            &grid,
            &op,
            &obstacle,
            &[0.1, 0.05],
            1.0 / 256.0,
            8,
            0.2,
            0.8
        )
        .is_err());
    }
}
