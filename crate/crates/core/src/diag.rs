//! Pointwise regularity diagnostics over trajectories: the identity
//! u_t = (Lu)⁻, Lipschitz and sup bounds, semiconvexity, |∇v| ≤ C·v_t,
//! Hopf/anti-Hopf rates at the free boundary, and the C^{1,1} second
//! derivative bounds with their third-difference optimality witness.
//!
//! Sign convention, used everywhere: (Lu)⁻ means max(−Lu, 0), so that
//! u_t = −Lu where Lu < 0 and u_t = 0 where Lu ≥ 0.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::fb::{FreeBoundaryCurve, PointLabel};
use crate::fit;
use crate::grid::Trajectory;
use crate::math;
use crate::operator::{self, DiscreteOperator};

/// Fixed claim registry; `assemble_report` demands each id exactly once.
pub const CLAIM_REGISTRY: [&str; 10] = [
    "ut-identity",
    "lipschitz",
    "semiconvexity",
    "gradient-vs-ut",
    "hopf",
    "antihopf",
    "nondegeneracy",
    "c11-bounds",
    "c11-optimality",
    "monotonicity",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Undetermined,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Undetermined => "undetermined",
        }
    }
}

/// One claim entry of the report.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimOutcome {
    pub id: &'static str,
    /// Statement anchor, e.g. the inequality being tested.
    pub anchor: &'static str,
    pub constants: Vec<(String, f64)>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub h: f64,
    pub dt: f64,
    pub dt_snap: f64,
    pub s: f64,
    pub epsilon: Option<f64>,
    pub kernel: String,
    pub obstacle: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub run: RunMeta,
    pub claims: Vec<ClaimOutcome>,
    pub overall_pass: bool,
}

/// Merge claim outcomes into a report; every registry id exactly once.
pub fn assemble_report(run: RunMeta, claims: Vec<ClaimOutcome>) -> Result<DiagnosticsReport> {
    for id in CLAIM_REGISTRY {
        let count = claims.iter().filter(|c| c.id == id).count();
        if count != 1 {
            return Err(CoreError::ClaimRegistry { claim: id });
        }
    }
    if claims.len() != CLAIM_REGISTRY.len() {
        return Err(CoreError::ClaimRegistry {
            claim: "unknown-extra",
        });
    }
    let overall_pass = claims.iter().all(|c| c.verdict != Verdict::Fail);
    Ok(DiagnosticsReport {
        run,
        claims,
        overall_pass,
    })
}

/// Central differences of a trajectory on the interior nodes/times.
///
/// Built from evenly spaced snapshots; the stencil spacing is (h, Δ) with Δ
/// the snapshot spacing. Central differences reproduce quadratics exactly.
pub struct DerivativeFields {
    pub times: Vec<f64>,
    pub h: f64,
    pub dt_snap: f64,
    pub n: usize,
    /// ut[k][i] defined for snapshot indices 1..K−1.
    pub ut: Vec<Vec<f64>>,
    pub ux: Vec<Vec<f64>>,
    pub uxx: Vec<Vec<f64>>,
    pub utt: Vec<Vec<f64>>,
    pub uxt: Vec<Vec<f64>>,
}

pub fn derivative_fields(traj: &Trajectory) -> Result<DerivativeFields> {
    let k_t = traj.snapshots.len();
    if k_t < 3 {
        return Err(CoreError::Parameter {
            name: "trajectory",
            message: format!("need >= 3 snapshots for central differences, got {k_t}"),
        });
    }
    let dt_snap = traj.snapshots[1].t - traj.snapshots[0].t;
    for w in traj.snapshots.windows(2) {
        if math::abs(w[1].t - w[0].t - dt_snap) > 1e-9 {
            return Err(CoreError::Parameter {
                name: "trajectory",
                message: String::from("snapshots are not evenly spaced"),
            });
        }
    }
    let n = traj.grid.n_points;
    let h = traj.grid.h();
    let mut ut = Vec::new();
    let mut ux = Vec::new();
    let mut uxx = Vec::new();
    let mut utt = Vec::new();
    let mut uxt = Vec::new();
    let mut times = Vec::new();
    for k in 1..k_t - 1 {
        let (um, u0, up) = (
            &traj.snapshots[k - 1].u,
            &traj.snapshots[k].u,
            &traj.snapshots[k + 1].u,
        );
        times.push(traj.snapshots[k].t);
        let mut row_t = alloc::vec![0.0; n];
        let mut row_x = alloc::vec![0.0; n];
        let mut row_xx = alloc::vec![0.0; n];
        let mut row_tt = alloc::vec![0.0; n];
        let mut row_xt = alloc::vec![0.0; n];
        for i in 0..n {
            row_t[i] = (up[i] - um[i]) / (2.0 * dt_snap);
            row_tt[i] = (up[i] - 2.0 * u0[i] + um[i]) / (dt_snap * dt_snap);
            if i > 0 && i + 1 < n {
                row_x[i] = (u0[i + 1] - u0[i - 1]) / (2.0 * h);
                row_xx[i] = (u0[i + 1] - 2.0 * u0[i] + u0[i - 1]) / (h * h);
                row_xt[i] = (up[i + 1] - up[i - 1] - um[i + 1] + um[i - 1]) / (4.0 * h * dt_snap);
            }
        }
        ut.push(row_t);
        ux.push(row_x);
        uxx.push(row_xx);
        utt.push(row_tt);
        uxt.push(row_xt);
    }
    Ok(DerivativeFields {
        times,
        h,
        dt_snap,
        n,
        ut,
        ux,
        uxx,
        utt,
        uxt,
    })
}

fn interior_window(fields: &DerivativeFields, t1: f64, t2: f64) -> Vec<usize> {
    fields
        .times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= t1 - 1e-12 && t <= t2 + 1e-12)
        .map(|(k, _)| k)
        .collect()
}

/// Scheme-error floor for u_t: run the linear equation (no obstacle) from
/// the same initial datum and measure sup|u_t + Lu| of its snapshots.
pub fn linear_noise_floor(
    traj_like: &Trajectory,
    op: &DiscreteOperator,
    initial: &[f64],
) -> Result<f64> {
    let grid = &traj_like.grid;
    let dt = grid.dt;
    let solver = crate::penalized::ImplicitSolver::build(op, dt, 1e-12)?;
    let steps = libm::round(grid.t_horizon / dt) as usize;
    let stride = (steps / (traj_like.snapshots.len().max(2) - 1)).max(1);
    let mut u = initial.to_vec();
    let mut snaps = alloc::vec![(0.0f64, u.clone())];
    for k in 1..=steps {
        u = solver.solve(op, dt, &u)?;
        if k % stride == 0 {
            snaps.push((k as f64 * dt, u.clone()));
        }
    }
    let mut worst = 0.0f64;
    for w in snaps.windows(3) {
        let dt_snap = w[1].0 - w[0].0;
        let lu = operator::apply_operator(op, &w[1].1)?;
        for i in 0..grid.n_points {
            let ut = (w[2].1[i] - w[0].1[i]) / (2.0 * dt_snap);
            worst = worst.max(math::abs(ut + lu[i]));
        }
    }
    Ok(worst)
}

/// Residual of u_t = (Lu)⁻ plus the sign of Lu inside the contact set.
#[derive(Debug, Clone, PartialEq)]
pub struct UtIdentityCheck {
    pub residual: f64,
    /// residual / (h + Δ): the constant whose refinement stability is judged.
    pub rate_constant: f64,
    /// min of Lu over the interior of the contact set.
    pub contact_lu_min: f64,
    /// sup of |u_t + Lu| over well-detached nodes.
    pub detached_residual: f64,
}

pub fn check_ut_identity(
    traj: &Trajectory,
    op: &DiscreteOperator,
    tol_fb: f64,
) -> Result<UtIdentityCheck> {
    let fields = derivative_fields(traj)?;
    let mut residual = 0.0f64;
    let mut contact_lu_min = f64::INFINITY;
    let mut detached_residual = 0.0f64;
    for (k, &_t) in fields.times.iter().enumerate() {
        let snap = &traj.snapshots[k + 1];
        let v = snap.v.as_ref().ok_or(CoreError::IllConditionedFit {
            message: String::from("missing v cache"),
        })?;
        let lu = operator::apply_operator(op, &snap.u)?;
        for i in 1..fields.n - 1 {
            let r = math::abs(fields.ut[k][i] - math::pos(-lu[i]));
            residual = residual.max(r);
            let in_contact = v[i] <= tol_fb;
            let neighbors_contact = v[i - 1] <= tol_fb && v[i + 1] <= tol_fb;
            if in_contact && neighbors_contact {
                contact_lu_min = contact_lu_min.min(lu[i]);
            }
            if v[i] > 100.0 * tol_fb {
                detached_residual = detached_residual.max(math::abs(fields.ut[k][i] + lu[i]));
            }
        }
    }
    let rate = residual / (fields.h + fields.dt_snap);
    Ok(UtIdentityCheck {
        residual,
        rate_constant: rate,
        contact_lu_min,
        detached_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzCheck {
    pub max_grad: f64,
    pub max_ut: f64,
    pub max_u: f64,
    pub grad_bound: f64,
    pub sup_bound: f64,
    pub pass: bool,
}

/// ‖∇u‖ ≤ ‖φ‖_C(0,1) (+0.05 discretization allowance), ‖u‖ ≤ ‖φ‖_∞,
/// ‖u_t‖ finite.
pub fn check_lipschitz(traj: &Trajectory, lip_phi: f64, sup_phi: f64) -> Result<LipschitzCheck> {
    let fields = derivative_fields(traj)?;
    let mut max_grad = 0.0f64;
    let mut max_ut = 0.0f64;
    for k in 0..fields.times.len() {
        for i in 1..fields.n - 1 {
            max_grad = max_grad.max(math::abs(fields.ux[k][i]));
            max_ut = max_ut.max(math::abs(fields.ut[k][i]));
        }
    }
    let mut max_u = 0.0f64;
    for snap in &traj.snapshots {
        max_u = max_u.max(math::sup_abs(&snap.u));
    }
    let grad_bound = lip_phi + 0.05;
    let sup_bound = sup_phi + 1e-8 * sup_phi.max(1.0);
    let pass = max_grad <= grad_bound && max_u <= sup_bound && max_ut.is_finite();
    Ok(LipschitzCheck {
        max_grad,
        max_ut,
        max_u,
        grad_bound,
        sup_bound,
        pass,
    })
}

/// Space-time direction fan for the semiconvexity probe, in (node, snapshot)
/// steps.
pub const DIRECTION_FAN: [(isize, isize); 8] = [
    (1, 0),
    (0, 1),
    (1, 1),
    (1, -1),
    (2, 1),
    (1, 2),
    (2, -1),
    (1, -2),
];

/// Ĉ = −min over nodes, times in [t1,t2] and the direction fan of ∂_ee u.
pub fn check_semiconvexity(traj: &Trajectory, t1: f64, t2: f64) -> Result<f64> {
    let k_t = traj.snapshots.len();
    if k_t < 5 {
        return Err(CoreError::Parameter {
            name: "trajectory",
            message: format!("need >= 5 snapshots, got {k_t}"),
        });
    }
    let dt_snap = traj.snapshots[1].t - traj.snapshots[0].t;
    let h = traj.grid.h();
    let n = traj.grid.n_points;
    let mut worst = f64::INFINITY;
    for k in 2..k_t - 2 {
        let t = traj.snapshots[k].t;
        if t < t1 || t > t2 {
            continue;
        }
        for i in 2..n - 2 {
            for &(di, dk) in DIRECTION_FAN.iter() {
                let len2 = (di as f64 * h) * (di as f64 * h)
                    + (dk as f64 * dt_snap) * (dk as f64 * dt_snap);
                let up = traj.snapshots[(k as isize + dk) as usize].u[(i as isize + di) as usize];
                let um = traj.snapshots[(k as isize - dk) as usize].u[(i as isize - di) as usize];
                let u0 = traj.snapshots[k].u[i];
                worst = worst.min((up - 2.0 * u0 + um) / len2);
            }
        }
    }
    Ok((-worst).max(0.0))
}

/// C = max of |∇v| / v_t over nodes with v_t above the noise floor.
pub fn check_gradient_vs_ut(traj: &Trajectory, t1: f64, t2: f64, noise_floor: f64) -> Result<f64> {
    let fields = derivative_fields(traj)?;
    let window = interior_window(&fields, t1, t2);
    let mut worst = 0.0f64;
    for &k in &window {
        let snap = &traj.snapshots[k + 1];
        let v = snap.v.as_ref().ok_or(CoreError::IllConditionedFit {
            message: String::from("missing v cache"),
        })?;
        for i in 1..fields.n - 1 {
            let vt = fields.ut[k][i];
            if vt > noise_floor {
                let vx = (v[i + 1] - v[i - 1]) / (2.0 * fields.h);
                worst = worst.max(math::abs(vx) / vt);
            }
        }
    }
    Ok(worst)
}

/// Per-point rate fits above the free boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRates {
    pub node: usize,
    pub x0: f64,
    pub t0: f64,
    /// exponent of v_t ~ t^p.
    pub p: f64,
    /// exponent of v ~ r^q.
    pub q: f64,
    /// min and max of v_t / t over the early window (Hopf/anti-Hopf band).
    pub band: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfReport {
    pub points: Vec<PointRates>,
    pub c0_lower: f64,
    pub m_upper: f64,
    pub p_window: (f64, f64),
    pub q_window: (f64, f64),
    pub all_rates_pass: bool,
}

/// Fit v_t(x₀, t₀+τ) ~ τ^p and v(x₀, t₀+τ) ~ τ^q at the given curve nodes.
/// τ ranges over snapshots above Γ, capped at `tau_max` for the band.
pub fn check_hopf_antihopf(
    traj: &Trajectory,
    curve: &FreeBoundaryCurve,
    nodes: &[usize],
    tau_max: f64,
) -> Result<HopfReport> {
    let fields = derivative_fields(traj)?;
    // stretch the window when the snapshot cadence cannot give 8 samples
    let tau_max = tau_max.max(9.0 * fields.dt_snap);
    let mut points = Vec::new();
    let mut c0_lower = f64::INFINITY;
    let mut m_upper = 0.0f64;
    for &node in nodes {
        let sample = curve.sample_at(node).ok_or(CoreError::Parameter {
            name: "nodes",
            message: format!("node {node} not on the curve"),
        })?;
        let t0 = sample.gamma_root;
        let mut taus = Vec::new();
        let mut vts = Vec::new();
        let mut vs = Vec::new();
        for (k, &t) in fields.times.iter().enumerate() {
            let tau = t - t0;
            if tau < 0.75 * fields.dt_snap || tau > tau_max {
                continue;
            }
            let v = traj.snapshots[k + 1]
                .v
                .as_ref()
                .ok_or(CoreError::IllConditionedFit {
                    message: String::from("missing v cache"),
                })?;
            taus.push(tau);
            vts.push(fields.ut[k][node].max(0.0));
            vs.push(v[node].max(0.0));
        }
        if taus.len() < 8 {
            // not enough headroom above this point; skip it
            continue;
        }
        let (p, _, _) = fit::loglog_fit(&taus, &vts).ok_or(CoreError::IllConditionedFit {
            message: String::from("degenerate v_t rate fit"),
        })?;
        let (q, _, _) = fit::loglog_fit(&taus, &vs).ok_or(CoreError::IllConditionedFit {
            message: String::from("degenerate v rate fit"),
        })?;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (idx, &tau) in taus.iter().enumerate() {
            if vts[idx] > 0.0 {
                let r = vts[idx] / tau;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        c0_lower = c0_lower.min(lo);
        m_upper = m_upper.max(hi);
        points.push(PointRates {
            node,
            x0: sample.x,
            t0,
            p,
            q,
            band: (lo, hi),
        });
    }
    if points.is_empty() {
        return Err(CoreError::IllConditionedFit {
            message: String::from("no free-boundary point has 8 snapshots above it"),
        });
    }
    let p_window = (0.8, 1.2);
    let q_window = (1.8, 2.2);
    let all_rates_pass = points.iter().all(|pt| {
        pt.p >= p_window.0 && pt.p <= p_window.1 && pt.q >= q_window.0 && pt.q <= q_window.1
    }) && c0_lower > 0.0;
    Ok(HopfReport {
        points,
        c0_lower,
        m_upper,
        p_window,
        q_window,
        all_rates_pass,
    })
}

/// Sup norms whose refinement stability realizes the C^{1,1} bound, plus the
/// third-difference witness that the bound is optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct C11Norms {
    pub sup_uxx: f64,
    pub sup_uxt: f64,
    pub sup_utt: f64,
    /// sup of third differences (per unit cube of the stencil spacing) over
    /// nodes within 4h of the free boundary.
    pub third_diff_near_fb: f64,
}

/// Second-difference sup norms at stencil spacing `stride`·(h, Δ).
///
/// Matched-physics refinement pairs measure the same physical stencil
/// (stride 1 on the coarse run, 2 on the fine run): the estimated bound
/// must then be stable under refinement. The third-difference witness is
/// always taken at the mesh scale, where the loss of C^{2,1} shows up as
/// growth.
pub fn c11_norms(
    traj: &Trajectory,
    curve: &FreeBoundaryCurve,
    t1: f64,
    t2: f64,
    stride: usize,
) -> Result<C11Norms> {
    let fields = derivative_fields(traj)?;
    let window = interior_window(&fields, t1, t2);
    let m = stride.max(1);
    let k_t = traj.snapshots.len();
    let h = fields.h * m as f64;
    let dts = fields.dt_snap * m as f64;
    let mut sup_uxx = 0.0f64;
    let mut sup_uxt = 0.0f64;
    let mut sup_utt = 0.0f64;
    for &k in &window {
        // window indices are offset by one snapshot (central stencils)
        let kk = k + 1;
        if kk < m || kk + m >= k_t {
            continue;
        }
        let up = &traj.snapshots[kk + m].u;
        let u0 = &traj.snapshots[kk].u;
        let um = &traj.snapshots[kk - m].u;
        for i in m..fields.n - m {
            let uxx = (u0[i + m] - 2.0 * u0[i] + u0[i - m]) / (h * h);
            let utt = (up[i] - 2.0 * u0[i] + um[i]) / (dts * dts);
            let uxt = (up[i + m] - up[i - m] - um[i + m] + um[i - m]) / (4.0 * h * dts);
            sup_uxx = sup_uxx.max(math::abs(uxx));
            sup_uxt = sup_uxt.max(math::abs(uxt));
            sup_utt = sup_utt.max(math::abs(utt));
        }
    }

    // third differences in x and t near the curve
    let h = fields.h;
    let dts = fields.dt_snap;
    let k_t = traj.snapshots.len();
    let mut third = 0.0f64;
    for s in &curve.samples {
        if s.gamma < t1 || s.gamma > t2 {
            continue;
        }
        let i = s.index;
        let k0 = ((s.gamma - traj.snapshots[0].t) / dts) as usize;
        for k in k0.saturating_sub(4)..(k0 + 5).min(k_t) {
            if k < 2 || k + 2 >= k_t {
                continue;
            }
            if i < 2 || i + 2 >= fields.n {
                continue;
            }
            let u = |kk: usize, ii: usize| traj.snapshots[kk].u[ii];
            let dx3 = (u(k, i + 2) - 3.0 * u(k, i + 1) + 3.0 * u(k, i) - u(k, i - 1)) / (h * h * h);
            let dt3 =
                (u(k + 2, i) - 3.0 * u(k + 1, i) + 3.0 * u(k, i) - u(k - 1, i)) / (dts * dts * dts);
            third = third.max(math::abs(dx3)).max(math::abs(dt3));
        }
    }
    Ok(C11Norms {
        sup_uxx,
        sup_uxt,
        sup_utt,
        third_diff_near_fb: third,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct C11Check {
    pub coarse: C11Norms,
    pub fine: C11Norms,
    /// fine/coarse ratios of the three second-derivative sup norms.
    pub ratios: (f64, f64, f64),
    pub bounds_stable: bool,
    /// third differences near Γ must grow under refinement.
    pub third_ratio: f64,
    pub optimality_witnessed: bool,
}

/// Compare matched-physics runs at (h, Δ) and (h/2, Δ/2).
pub fn check_c11(coarse: C11Norms, fine: C11Norms) -> C11Check {
    let r1 = fine.sup_uxx / coarse.sup_uxx;
    let r2 = fine.sup_uxt / coarse.sup_uxt;
    let r3 = fine.sup_utt / coarse.sup_utt;
    let bounds_stable = r1 <= 1.3 && r2 <= 1.3 && r3 <= 1.3;
    let third_ratio = fine.third_diff_near_fb / coarse.third_diff_near_fb;
    C11Check {
        coarse,
        fine,
        ratios: (r1, r2, r3),
        bounds_stable,
        third_ratio,
        optimality_witnessed: third_ratio >= 1.2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityCheck {
    pub min_ut_detached: f64,
    pub min_ut_all: f64,
    pub max_abs_ut_contact: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// u_t > 0 in the detached set, u_t = 0 in contact, up to scheme error.
pub fn check_monotonicity_positivity(
    traj: &Trajectory,
    tol_fb: f64,
    scale: f64,
) -> Result<MonotonicityCheck> {
    let fields = derivative_fields(traj)?;
    let mut min_det = f64::INFINITY;
    let mut min_all = f64::INFINITY;
    let mut max_contact = 0.0f64;
    for k in 0..fields.times.len() {
        let v = traj.snapshots[k + 1]
            .v
            .as_ref()
            .ok_or(CoreError::IllConditionedFit {
                message: String::from("missing v cache"),
            })?;
        for i in 1..fields.n - 1 {
            let ut = fields.ut[k][i];
            min_all = min_all.min(ut);
            if v[i] > tol_fb {
                min_det = min_det.min(ut);
            } else {
                max_contact = max_contact.max(math::abs(ut));
            }
        }
    }
    let tolerance = 10.0 * (fields.h + fields.dt_snap) * scale;
    let pass = min_det >= -tolerance && min_all >= -tolerance;
    Ok(MonotonicityCheck {
        min_ut_detached: min_det,
        min_ut_all: min_all,
        max_abs_ut_contact: max_contact,
        tolerance,
        pass,
    })
}

/// Count curve samples usable as rate-fit points: Γ inside [t1, t2] with
/// ≥ 8 snapshots above, spread across the curve, apex included when present.
pub fn select_rate_nodes(
    curve: &FreeBoundaryCurve,
    t1: f64,
    t2: f64,
    horizon: f64,
    want: usize,
) -> Vec<usize> {
    let eligible: Vec<&crate::fb::FbSample> = curve
        .samples
        .iter()
        .filter(|s| s.gamma >= t1 && s.gamma <= t2 && s.gamma + 8.0 * curve.dt_snap <= horizon)
        .collect();
    if eligible.is_empty() {
        return Vec::new();
    }
    let mut nodes = Vec::new();
    // apex of the curve: the singular sample if labeled, else max-Γ sample
    if let Some(apex) = eligible.iter().find(|s| s.label == PointLabel::Singular) {
        nodes.push(apex.index);
    }
    let stride = (eligible.len() / want.max(1)).max(1);
    for s in eligible.iter().step_by(stride) {
        if !nodes.contains(&s.index) {
            nodes.push(s.index);
        }
        if nodes.len() >= want {
            break;
        }
    }
    nodes
}
