//! Free-boundary extraction and regularity diagnostics.
//!
//! The free boundary of min{∂ₜu + Lu, u − φ} = 0 is the graph of a function
//! t = Γ(x) of the detachment times. Discretely, Γ(x) is the first sampled
//! time at which v = u − φ exceeds a threshold tol_fb tied to the solver
//! tolerances, interpolated linearly between the bracketing snapshots.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::fit;
use crate::grid::Trajectory;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLabel {
    Regular,
    Singular,
    Undetermined,
}

impl PointLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointLabel::Regular => "regular",
            PointLabel::Singular => "singular",
            PointLabel::Undetermined => "undetermined",
        }
    }
}

/// One curve sample: detachment time and slope at a grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbSample {
    pub index: usize,
    pub x: f64,
    /// Time of the tol_fb crossing.
    pub gamma: f64,
    /// Estimated root of v → 0 (the detachment time proper); rate fits
    /// measure from here. Equals the crossing minus √(tol/ĉ0).
    pub gamma_root: f64,
    /// Central finite-difference slope; NaN where a neighbor is undefined.
    pub grad_gamma: f64,
    pub label: PointLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundaryCurve {
    pub tol_fb: f64,
    pub samples: Vec<FbSample>,
    /// Grid spacing of the parent trajectory.
    pub h: f64,
    /// Snapshot spacing of the parent trajectory.
    pub dt_snap: f64,
}

impl FreeBoundaryCurve {
    pub fn sample_at(&self, index: usize) -> Option<&FbSample> {
        self.samples.iter().find(|s| s.index == index)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Up-set bookkeeping from the extraction pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpSetStats {
    /// Grid-time pairs where v dipped back below tol_fb after detaching.
    pub violations: usize,
    pub checked: usize,
    /// Pass iff violations ≤ 0.1% of checked samples.
    pub graph_property: bool,
}

fn snapshot_v(traj: &Trajectory, k: usize) -> Result<&Vec<f64>> {
    traj.snapshots[k]
        .v
        .as_ref()
        .ok_or(CoreError::IllConditionedFit {
            message: alloc::string::String::from("trajectory snapshots carry no v = u − φ cache"),
        })
}

/// Extract Γ from a trajectory. Γ is defined on nodes that spend at least
/// one snapshot in contact and detach before the horizon.
pub fn extract_gamma(traj: &Trajectory, tol_fb: f64) -> Result<(FreeBoundaryCurve, UpSetStats)> {
    if traj.snapshots.len() < 3 {
        return Err(CoreError::Parameter {
            name: "trajectory",
            message: format!("need >= 3 snapshots, got {}", traj.snapshots.len()),
        });
    }
    if !(tol_fb > 0.0) {
        return Err(CoreError::Parameter {
            name: "tol_fb",
            message: format!("threshold must be positive, got {tol_fb}"),
        });
    }
    let n = traj.grid.n_points;
    let n_t = traj.snapshots.len();
    let h = traj.grid.h();
    let dt_snap = traj.snapshots[1].t - traj.snapshots[0].t;

    let mut gamma = alloc::vec![f64::NAN; n];
    let mut gamma_root = alloc::vec![f64::NAN; n];
    let mut violations = 0usize;
    let mut checked = 0usize;

    for i in 0..n {
        let mut was_contact = false;
        let mut detached_at: Option<usize> = None;
        for k in 0..n_t {
            let v = snapshot_v(traj, k)?[i];
            checked += 1;
            match detached_at {
                None => {
                    if v <= tol_fb {
                        was_contact = true;
                    } else if was_contact {
                        detached_at = Some(k);
                    }
                }
                Some(_) => {
                    if v <= tol_fb {
                        violations += 1;
                    }
                }
            }
        }
        if let Some(k) = detached_at {
            let t_prev = traj.snapshots[k - 1].t;
            let t_k = traj.snapshots[k].t;
            let v0 = snapshot_v(traj, k - 1)?[i];
            let v1 = snapshot_v(traj, k)?[i];
            // linear-in-v crossing as the fallback
            let frac = if v1 > v0 {
                ((tol_fb - v0) / (v1 - v0)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut crossing = t_prev + frac * (t_k - t_prev);
            let mut root = crossing;
            // quadratic detachment makes √v linear in t: two samples above
            // the crossing pin the root and curvature, removing the O(dt)
            // bias of linear interpolation near v = 0.
            if k + 1 < n_t {
                let v2 = snapshot_v(traj, k + 1)?[i];
                let s1 = math::sqrt(v1.max(0.0));
                let s2 = math::sqrt(v2.max(0.0));
                if s2 > s1 && s1 > 0.0 {
                    let slope = (s2 - s1) / dt_snap;
                    let r = t_k - s1 / slope;
                    if r >= t_prev - dt_snap && r <= t_k {
                        root = r.max(t_prev - dt_snap);
                        crossing = (root + math::sqrt(tol_fb) / slope).clamp(t_prev, t_k);
                    }
                }
            }
            gamma[i] = crossing;
            gamma_root[i] = root;
        }
    }

    let mut samples = Vec::new();
    for i in 0..n {
        if gamma[i].is_nan() {
            continue;
        }
        let left = if i > 0 { gamma[i - 1] } else { f64::NAN };
        let right = if i + 1 < n { gamma[i + 1] } else { f64::NAN };
        let grad = if left.is_nan() || right.is_nan() {
            f64::NAN
        } else {
            (right - left) / (2.0 * h)
        };
        samples.push(FbSample {
            index: i,
            x: traj.grid.x(i),
            gamma: gamma[i],
            gamma_root: gamma_root[i],
            grad_gamma: grad,
            label: PointLabel::Undetermined,
        });
    }

    let graph_property = (violations as f64) <= 0.001 * checked as f64;
    Ok((
        FreeBoundaryCurve {
            tol_fb,
            samples,
            h,
            dt_snap,
        },
        UpSetStats {
            violations,
            checked,
            graph_property,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipHolderFit {
    pub lipschitz: f64,
    /// (α, confidence half-width); None when the pair scales span < 1 decade.
    pub alpha: Option<(f64, f64)>,
    pub decades: f64,
}

/// Lipschitz constant of Γ and a Hölder exponent for ∇Γ from a log-log
/// regression of the per-scale maxima of |∇Γ(x) − ∇Γ(y)| over |x − y|,
/// restricted to the time band Γ ∈ [t1, t2] (the constants of the
/// underlying estimates live on such bands).
pub fn lipschitz_and_holder_fit(
    curve: &FreeBoundaryCurve,
    t1: f64,
    t2: f64,
) -> Result<LipHolderFit> {
    if curve.samples.len() < 32 {
        return Err(CoreError::Parameter {
            name: "curve",
            message: format!("need >= 32 samples, got {}", curve.samples.len()),
        });
    }
    let in_band = |s: &FbSample| s.gamma >= t1 && s.gamma <= t2;
    let mut lip = 0.0f64;
    for w in curve.samples.windows(2) {
        if w[1].index == w[0].index + 1 && (in_band(&w[0]) || in_band(&w[1])) {
            lip = lip.max(math::abs(w[1].gamma - w[0].gamma) / curve.h);
        }
    }

    // gradient samples on the contiguous interior of the band
    let grads: Vec<(f64, f64)> = curve
        .samples
        .iter()
        .filter(|s| !s.grad_gamma.is_nan() && in_band(s))
        .map(|s| (s.x, s.grad_gamma))
        .collect();

    let mut scales = Vec::new();
    let mut seminorms = Vec::new();
    // the FD gradient is only faithful above a few h; start there
    let mut sep = 4usize;
    loop {
        let d = sep as f64 * curve.h;
        let mut worst = 0.0f64;
        let mut found = false;
        for i in 0..grads.len() {
            for j in i + 1..grads.len() {
                let dx = math::abs(grads[j].0 - grads[i].0);
                if math::abs(dx - d) < 0.25 * curve.h {
                    worst = worst.max(math::abs(grads[j].1 - grads[i].1));
                    found = true;
                }
            }
        }
        if !found {
            break;
        }
        scales.push(d);
        seminorms.push(worst);
        sep *= 2;
        if sep > grads.len() {
            break;
        }
    }
    let decades = fit::decades(&scales);
    let alpha = if decades >= 1.0 {
        fit::loglog_fit(&scales, &seminorms).map(|(a, hw, _)| (a, hw))
    } else {
        None
    };
    Ok(LipHolderFit {
        lipschitz: lip,
        alpha,
        decades,
    })
}

/// Classification threshold: 3× the robust noise level of the ∇Γ sequence,
/// estimated from its second differences (exact curves get a zero floor).
pub fn default_tol_grad(curve: &FreeBoundaryCurve) -> f64 {
    let grads: Vec<f64> = curve
        .samples
        .iter()
        .filter(|s| !s.grad_gamma.is_nan())
        .map(|s| s.grad_gamma)
        .collect();
    if grads.len() < 5 {
        return 1e-9;
    }
    let dd: Vec<f64> = grads.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let noise = fit::mad_sigma(&dd) / math::sqrt(6.0);
    // relative floor: slopes far below the curve's slope scale are zeros
    let scale = grads.iter().fold(0.0f64, |m, &g| m.max(math::abs(g)));
    (3.0 * noise).max(1e-4 * scale).max(1e-9)
}

/// Label curve samples: regular iff |∇Γ| > tol_grad, singular iff ≤ tol_grad
/// with a well-conditioned slope (interior sample), else undetermined.
///
/// Labels are only assigned inside the interior time band [t_lo, t_hi]; the
/// sheet of nodes that detaches at t = 0⁺ is flat by construction and the
/// expansion classifying points does not apply there.
pub fn classify_points(
    curve: &FreeBoundaryCurve,
    tol_grad: Option<f64>,
    t_band: Option<(f64, f64)>,
) -> (FreeBoundaryCurve, f64) {
    let tol = tol_grad.unwrap_or_else(|| default_tol_grad(curve));
    let (t_lo, t_hi) = t_band.unwrap_or((4.0 * curve.dt_snap, f64::INFINITY));
    let mut out = curve.clone();
    let last = out.samples.len().saturating_sub(1);
    for (pos, s) in out.samples.iter_mut().enumerate() {
        s.label =
            if s.grad_gamma.is_nan() || pos == 0 || pos == last || s.gamma < t_lo || s.gamma > t_hi
            {
                PointLabel::Undetermined
            } else if math::abs(s.grad_gamma) > tol {
                PointLabel::Regular
            } else {
                PointLabel::Singular
            };
    }
    (out, tol)
}

/// Discrete openness of the regular set: no regular sample whose defined
/// neighbors are all singular.
pub fn regular_set_open(curve: &FreeBoundaryCurve) -> bool {
    let n = curve.samples.len();
    for pos in 0..n {
        if curve.samples[pos].label != PointLabel::Regular {
            continue;
        }
        let mut has_defined_neighbor = false;
        let mut isolated = true;
        for nb in [pos.wrapping_sub(1), pos + 1] {
            if nb < n && curve.samples[nb].index.abs_diff(curve.samples[pos].index) == 1 {
                match curve.samples[nb].label {
                    PointLabel::Singular => has_defined_neighbor = true,
                    PointLabel::Regular | PointLabel::Undetermined => {
                        has_defined_neighbor = true;
                        isolated = false;
                    }
                }
            }
        }
        if has_defined_neighbor && isolated {
            return false;
        }
    }
    true
}

/// Quadratic expansion fit v ≈ c0·(t − a·x)₊² around a free-boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionFit {
    pub x0: f64,
    pub t0: f64,
    pub c0: f64,
    pub a: f64,
    pub window: f64,
    /// (exponent, confidence half-width) of the windowed max residual decay;
    /// None when residuals sit at rounding level.
    pub residual_exponent: Option<(f64, f64)>,
    /// Relative residual of the finest-window fit.
    pub goodness: f64,
}

fn fit_window(
    traj: &Trajectory,
    x0: f64,
    t0: f64,
    r: f64,
    a_candidates: &[f64],
) -> Result<(f64, f64, f64, f64)> {
    let grid = &traj.grid;
    let mut xs = Vec::new();
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let dt = snap.t - t0;
        if math::abs(dt) > r {
            continue;
        }
        let v = snapshot_v(traj, k)?;
        for i in 0..grid.n_points {
            let dx = grid.x(i) - x0;
            if math::abs(dx) <= r {
                xs.push(dx);
                ts.push(dt);
                vs.push(v[i]);
            }
        }
    }
    if vs.len() < 16 {
        return Err(CoreError::IllConditionedFit {
            message: format!("window radius {r} holds only {} samples", vs.len()),
        });
    }
    let vmax = math::sup_abs(&vs);
    if vmax == 0.0 {
        return Err(CoreError::IllConditionedFit {
            message: alloc::string::String::from("window contains no detached samples"),
        });
    }

    let eval = |a: f64| -> (f64, f64) {
        let mut qq = 0.0f64;
        let mut vq = 0.0f64;
        for idx in 0..vs.len() {
            let q = math::pos(ts[idx] - a * xs[idx]);
            let q2 = q * q;
            qq += q2 * q2;
            vq += vs[idx] * q2;
        }
        if qq == 0.0 {
            return (f64::NAN, f64::INFINITY);
        }
        let c0 = vq / qq;
        let mut ssr = 0.0;
        for idx in 0..vs.len() {
            let q = math::pos(ts[idx] - a * xs[idx]);
            let resid = vs[idx] - c0 * q * q;
            ssr += resid * resid;
        }
        (c0, ssr)
    };

    let mut best = (f64::NAN, f64::INFINITY, 0.0f64);
    for &a in a_candidates {
        let (c0, ssr) = eval(a);
        if ssr < best.1 {
            best = (c0, ssr, a);
        }
    }
    // two local refinements around the winner
    let mut center = best.2;
    let mut span = if a_candidates.len() > 1 {
        math::abs(a_candidates[1] - a_candidates[0]) * 2.0
    } else {
        0.5
    };
    for _ in 0..2 {
        for step in 0..21 {
            let a = center - span + span * step as f64 / 10.0;
            let (c0, ssr) = eval(a);
            if ssr < best.1 {
                best = (c0, ssr, a);
            }
        }
        center = best.2;
        span *= 0.1;
    }
    if !best.0.is_finite() {
        return Err(CoreError::IllConditionedFit {
            message: alloc::string::String::from("no admissible slope candidate"),
        });
    }

    // windowed max residual of the winning pair
    let (c0, _, a) = best;
    let mut max_resid = 0.0f64;
    for idx in 0..vs.len() {
        let q = math::pos(ts[idx] - a * xs[idx]);
        max_resid = max_resid.max(math::abs(vs[idx] - c0 * q * q));
    }
    Ok((c0, a, max_resid, vmax))
}

/// Largest dyadic level count so the finest window still spans 8h × 8dt.
pub fn max_expansion_levels(window: f64, h: f64, dt_snap: f64) -> usize {
    let floor = (4.0 * h).max(4.0 * dt_snap);
    let mut levels = 0usize;
    let mut r = window;
    while r >= floor && levels < 4 {
        levels += 1;
        r *= 0.5;
    }
    levels.max(1)
}

/// Fit the expansion at a curve sample over `levels` dyadic windows
/// (radius r, r/2, ..., refit per window). The reported pair comes from the
/// finest window; the residual exponent from the decay of the windowed max
/// residual across levels.
pub fn expansion_fit(
    traj: &Trajectory,
    curve: &FreeBoundaryCurve,
    node: usize,
    window: f64,
    levels: usize,
) -> Result<ExpansionFit> {
    let sample = curve.sample_at(node).ok_or(CoreError::Parameter {
        name: "node",
        message: format!("node {node} is not on the extracted curve"),
    })?;
    let grid = &traj.grid;
    let finest = window / math::powf(2.0, (levels.max(1) - 1) as f64);
    if finest < 4.0 * grid.h() || finest < 4.0 * curve.dt_snap {
        return Err(CoreError::Parameter {
            name: "window",
            message: format!(
                "finest window {finest} below 8h x 8dt (h = {}, dt = {})",
                grid.h(),
                curve.dt_snap
            ),
        });
    }
    let x0 = sample.x;
    let t0 = sample.gamma_root;
    let g0 = if sample.grad_gamma.is_nan() {
        0.0
    } else {
        sample.grad_gamma
    };
    let spread = (4.0 * math::abs(g0)).max(1.0);
    let a_candidates: Vec<f64> = (0..41)
        .map(|i| g0 - spread + spread * i as f64 / 20.0)
        .collect();

    let mut radii = Vec::new();
    let mut resids = Vec::new();
    let mut final_fit = None;
    for level in 0..levels.max(1) {
        let r = window / math::powf(2.0, level as f64);
        let (c0, a, max_resid, vmax) = fit_window(traj, x0, t0, r, &a_candidates)?;
        radii.push(r);
        resids.push(max_resid);
        final_fit = Some((c0, a, max_resid / vmax.max(1e-300)));
    }
    let (c0, a, goodness) = final_fit.unwrap();

    // drop rounding-level residuals from the regression
    let floor = 1e3 * f64::EPSILON * math::sup_abs(&resids).max(1e-300);
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (r, res) in radii.iter().zip(&resids) {
        if *res > floor {
            lx.push(*r);
            ly.push(*res);
        }
    }
    let residual_exponent = if lx.len() >= 3 {
        fit::loglog_fit(&lx, &ly).map(|(p, hw, _)| (p, hw))
    } else {
        None
    };

    Ok(ExpansionFit {
        x0,
        t0,
        c0,
        a,
        window,
        residual_exponent,
        goodness,
    })
}

/// Pick nodes suited to expansion fits: samples of moderate slope sitting
/// on low-curvature stretches of the curve with headroom above Γ. Near
/// singular points the admissible windows shrink with the curve's bend, so
/// the slope structure of the expansion is fitted at regular points; the
/// time-direction structure at singular points is the rate fit's job.
pub fn select_expansion_nodes(curve: &FreeBoundaryCurve, horizon: f64, want: usize) -> Vec<usize> {
    let mut nodes = Vec::new();
    let n = curve.samples.len();
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for pos in 1..n.saturating_sub(1) {
        let s = &curve.samples[pos];
        let left = &curve.samples[pos - 1];
        let right = &curve.samples[pos + 1];
        if left.index + 1 != s.index || s.index + 1 != right.index {
            continue;
        }
        if s.grad_gamma.is_nan() || left.grad_gamma.is_nan() || right.grad_gamma.is_nan() {
            continue;
        }
        let g = math::abs(s.grad_gamma);
        if !(0.5..=8.0).contains(&g) {
            continue;
        }
        if s.gamma < 0.1 || s.gamma + 8.0 * curve.dt_snap > horizon {
            continue;
        }
        // curvature proxy: relative change of the slope across neighbors
        let bend = math::abs(right.grad_gamma - left.grad_gamma) / (2.0 * g);
        if bend <= 0.15 {
            candidates.push((bend, s.index));
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    for (_, idx) in candidates {
        if nodes.len() >= want {
            break;
        }
        // keep the picks spread out
        if nodes.iter().all(|&c: &usize| c.abs_diff(idx) > 2) {
            nodes.push(idx);
        }
    }
    nodes
}

/// Per-time-slice fraction of grid cells holding a singular curve sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMeasure {
    pub per_slice: Vec<(f64, f64)>,
    /// Median fraction over all sampled slices.
    pub median_fraction: f64,
    /// Mean fraction over slices that contain at least one curve sample.
    pub mean_nonempty: f64,
}

pub fn singular_slice_measure(curve: &FreeBoundaryCurve, traj: &Trajectory) -> SliceMeasure {
    let cells = (traj.grid.n_points - 1) as f64;
    let mut per_slice = Vec::new();
    let mut nonempty_sum = 0.0;
    let mut nonempty_count = 0usize;
    for w in traj.snapshots.windows(2) {
        let (lo, hi) = (w[0].t, w[1].t);
        let mut total = 0usize;
        let mut singular = 0usize;
        for s in &curve.samples {
            if s.gamma >= lo && s.gamma < hi {
                total += 1;
                if s.label == PointLabel::Singular {
                    singular += 1;
                }
            }
        }
        let frac = singular as f64 / cells;
        per_slice.push((lo, frac));
        if total > 0 {
            nonempty_sum += frac;
            nonempty_count += 1;
        }
    }
    let fracs: Vec<f64> = per_slice.iter().map(|&(_, f)| f).collect();
    SliceMeasure {
        median_fraction: fit::median(&fracs),
        mean_nonempty: if nonempty_count > 0 {
            nonempty_sum / nonempty_count as f64
        } else {
            0.0
        },
        per_slice,
    }
}

/// Refinement rule for the singular-slice proxy: halving h must at least
/// halve the aggregate fraction, within one fine-grid cell of noise.
pub fn slice_refinement_pass(coarse: &SliceMeasure, fine: &SliceMeasure, n_fine: usize) -> bool {
    let noise = 1.0 / (n_fine as f64 - 1.0);
    fine.median_fraction <= 0.5 * coarse.median_fraction + noise
        && fine.mean_nonempty <= 0.5 * coarse.mean_nonempty + noise
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FieldSnapshot, GridSpec};

    /// Build a synthetic trajectory with v prescribed by a closure.
    fn synthetic_traj<F: Fn(f64, f64) -> f64>(
        r_dom: f64,
        n: usize,
        t_max: f64,
        n_t: usize,
        v: F,
    ) -> Trajectory {
        let grid = GridSpec::new(1, r_dom, n, t_max, t_max / 256.0).unwrap();
        let mut traj = Trajectory::new(grid.clone());
        for k in 0..=n_t {
            let t = t_max * k as f64 / n_t as f64;
            let field: Vec<f64> = (0..n).map(|i| v(grid.x(i), t)).collect();
            let mut snap = FieldSnapshot::new(t, field.clone());
            snap.v = Some(field);
            traj.snapshots.push(snap);
        }
        traj
    }

    #[test]
    fn recovers_cone_graph() {
        // v(x,t) = (t − |x|)₊² detaches at Γ(x) = |x|.
        let traj = synthetic_traj(2.0, 257, 2.0, 256, |x, t| {
            let q = math::pos(t - math::abs(x));
            q * q
        });
        let tol = 1e-6;
        let (curve, stats) = extract_gamma(&traj, tol).unwrap();
        assert_eq!(stats.violations, 0);
        assert!(stats.graph_property);
        let shift = math::sqrt(tol);
        for s in &curve.samples {
            if math::abs(s.x) < 1.5 {
                assert!(
                    math::abs(s.gamma - (math::abs(s.x) + shift)) < 2.0 * shift + 0.01,
                    "gamma({}) = {}",
                    s.x,
                    s.gamma
                );
            }
        }
        let fit = lipschitz_and_holder_fit(&curve, 0.0, 2.0).unwrap();
        assert!(
            (fit.lipschitz - 1.0).abs() < 0.05,
            "Lip = {}",
            fit.lipschitz
        );
    }

    #[test]
    fn threshold_shift_obeys_the_quadratic_rate() {
        // Γ moves by ≈ √(tol/c0) when tol changes; quadrupling tol at c0 = 1
        // must shift Γ by no more than twice that prediction.
        let traj = synthetic_traj(2.0, 257, 2.0, 512, |x, t| {
            let q = math::pos(t - math::abs(x));
            q * q
        });
        let tol = 1e-4;
        let (c1, _) = extract_gamma(&traj, tol).unwrap();
        let (c4, _) = extract_gamma(&traj, 4.0 * tol).unwrap();
        let predicted = math::sqrt(4.0 * tol / 1.0) - math::sqrt(tol / 1.0);
        for a in &c1.samples {
            if math::abs(a.x) >= 1.0 {
                continue;
            }
            let Some(b) = c4.sample_at(a.index) else {
                continue;
            };
            let shift = b.gamma - a.gamma;
            assert!(shift >= -1e-9, "negative shift {shift}");
            assert!(
                shift <= 2.0 * predicted + 1e-9,
                "shift {shift} vs predicted {predicted}"
            );
        }
    }

    #[test]
    fn up_set_violations_are_counted() {
        // a v that re-contacts: v = sin²(πt)·bump
        let traj = synthetic_traj(2.0, 65, 2.0, 64, |x, t| {
            let b = math::pos(1.0 - x * x);
            let s = math::sin(core::f64::consts::PI * t);
            s * s * b
        });
        let (_, stats) = extract_gamma(&traj, 1e-3).unwrap();
        assert!(stats.violations > 0);
        assert!(!stats.graph_property);
    }

    #[test]
    fn holder_fit_on_constructed_half_rough_curve() {
        // Γ(x) = x·|x|^(1/2) has ∇Γ ∈ C^(0,1/2); the fitted α ≈ 0.5.
        let traj = synthetic_traj(2.0, 513, 4.0, 512, |x, t| {
            let gamma = x * math::sqrt(math::abs(x)) + 2.0;
            let q = math::pos(t - gamma);
            q * q
        });
        let (curve, _) = extract_gamma(&traj, 1e-9).unwrap();
        let fit = lipschitz_and_holder_fit(&curve, 0.0, 4.0).unwrap();
        let (alpha, _) = fit.alpha.expect("enough decades");
        assert!((alpha - 0.5).abs() < 0.15, "alpha = {alpha}");
    }

    #[test]
    fn classification_of_parabolic_gamma() {
        // Γ = x² + 0.5: only x = 0 is singular (∇Γ(0) = 0).
        let traj = synthetic_traj(1.0, 129, 2.0, 512, |x, t| {
            let q = math::pos(t - (x * x + 0.5));
            q * q
        });
        let (curve, _) = extract_gamma(&traj, 1e-9).unwrap();
        let (labeled, tol) = classify_points(&curve, None, None);
        let mid_label = labeled.sample_at(64).unwrap().label;
        assert_eq!(mid_label, PointLabel::Singular, "tol_grad = {tol}");
        let mut singular_count = 0;
        for s in &labeled.samples {
            if s.label == PointLabel::Singular {
                singular_count += 1;
                assert!(
                    math::abs(s.x) < 3.0 * labeled.h + 1e-12,
                    "singular at {}",
                    s.x
                );
            }
        }
        assert!(singular_count >= 1 && singular_count <= 3);
        assert!(regular_set_open(&labeled));
    }

    #[test]
    fn openness_flags_isolated_regular_points() {
        let traj = synthetic_traj(1.0, 65, 2.0, 64, |x, t| {
            let q = math::pos(t - (x * x + 0.5));
            q * q
        });
        let (curve, _) = extract_gamma(&traj, 1e-9).unwrap();
        let (mut labeled, _) = classify_points(&curve, None, None);
        for s in labeled.samples.iter_mut() {
            s.label = PointLabel::Singular;
        }
        let mid = labeled.samples.len() / 2;
        labeled.samples[mid].label = PointLabel::Regular;
        assert!(!regular_set_open(&labeled));
    }

    #[test]
    fn expansion_recovers_constructed_coefficients() {
        // v = 3(t − 0.5x)₊² around (0, 1): c0 = 3, a = 0.5 to 3+ digits.
        let traj = synthetic_traj(2.0, 257, 2.0, 256, |x, t| {
            let q = math::pos((t - 1.0) - 0.5 * x);
            3.0 * q * q
        });
        let grid_mid = 128usize;
        let (curve, _) = extract_gamma(&traj, 1e-12).unwrap();
        let fit = expansion_fit(&traj, &curve, grid_mid, 0.5, 3).unwrap();
        assert!((fit.c0 - 3.0).abs() < 3e-3, "c0 = {}", fit.c0);
        assert!((fit.a - 0.5).abs() < 5e-4, "a = {}", fit.a);
        assert!(fit.goodness < 1e-6, "goodness {}", fit.goodness);
    }

    #[test]
    fn expansion_measures_remainder_exponent() {
        // v = 3(t−0.5x)₊² + 0.1(|x|^2.5 + |t|^2.5): exponent ≈ 2.5.
        let traj = synthetic_traj(2.0, 513, 2.0, 512, |x, t| {
            let q = math::pos((t - 1.0) - 0.5 * x);
            3.0 * q * q
                + 0.1 * (math::powf(math::abs(x), 2.5) + math::powf(math::abs(t - 1.0), 2.5))
        });
        let (curve, _) = extract_gamma(&traj, 1e-9).unwrap();
        // the remainder perturbs Γ near x0 = 0; fit around the nominal node
        let fit = expansion_fit(&traj, &curve, 256, 0.8, 4).unwrap();
        let (p, _) = fit.residual_exponent.expect("nontrivial residuals");
        assert!((p - 2.5).abs() < 0.2, "residual exponent {p}");
    }

    #[test]
    fn slice_measure_counts_singular_cells() {
        let traj = synthetic_traj(1.0, 129, 2.0, 64, |x, t| {
            let q = math::pos(t - (x * x + 0.5));
            q * q
        });
        let (curve, _) = extract_gamma(&traj, 1e-9).unwrap();
        let (labeled, _) = classify_points(&curve, None, None);
        let measure = singular_slice_measure(&labeled, &traj);
        // isolated apex: at most a few singular cells in exactly one slice
        let nonzero: Vec<&(f64, f64)> = measure
            .per_slice
            .iter()
            .filter(|&&(_, f)| f > 0.0)
            .collect();
        assert!(
            nonzero.len() <= 2,
            "singular mass spread over {} slices",
            nonzero.len()
        );
        assert!(measure.median_fraction == 0.0);
        // an all-regular synthetic curve has zero fraction everywhere
        let mut all_reg = labeled.clone();
        for s in all_reg.samples.iter_mut() {
            s.label = PointLabel::Regular;
        }
        let m2 = singular_slice_measure(&all_reg, &traj);
        assert!(m2.per_slice.iter().all(|&(_, f)| f == 0.0));
    }
}
