//! Subcommand implementations: solve, verify, fb, kernel-check,
//! epsilon-study, report.

use std::fmt;
use std::path::{Path, PathBuf};

use fracobs_core::diag::{self, ClaimOutcome, RunMeta, Verdict};
use fracobs_core::fb::{self, PointLabel};
use fracobs_core::grid::{GridSpec, Trajectory};
use fracobs_core::heat;
use fracobs_core::kernel::KernelSpec;
use fracobs_core::lcp::{self, PsorParams};
use fracobs_core::math;
use fracobs_core::obstacle::{self, ObstacleSpec};
use fracobs_core::operator::{self, DiscreteOperator, FarField};
use fracobs_core::penalized::{self, PenalizedConfig};

use crate::config::RunConfig;
use crate::formats::{self, VerdictFile, VerdictJson};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    Verify,
    Fb,
    KernelCheck,
    EpsilonStudy,
    Report,
}

pub struct RunOptions {
    pub config: RunConfig,
    pub out: PathBuf,
    pub refine: bool,
    pub quiet: bool,
}

#[derive(Debug)]
pub enum RunnerError {
    Core(fracobs_core::CoreError),
    Io(std::io::Error),
    MissingArtifact { path: PathBuf, hint: &'static str },
    Environment(String),
}

impl fmt::Display for RunnerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunnerError::Core(e) => write!(f, "{e}"),
            RunnerError::Io(e) => write!(f, "{e}"),
            RunnerError::MissingArtifact { path, hint } => {
                write!(f, "missing artifact {}; {hint}", path.display())
            }
            RunnerError::Environment(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for RunnerError {}

impl From<fracobs_core::CoreError> for RunnerError {
    fn from(e: fracobs_core::CoreError) -> Self {
        RunnerError::Core(e)
    }
}

impl From<std::io::Error> for RunnerError {
    fn from(e: std::io::Error) -> Self {
        RunnerError::Io(e)
    }
}

impl From<formats::LoadError> for RunnerError {
    fn from(e: formats::LoadError) -> Self {
        match e {
            formats::LoadError::Io(io) => RunnerError::Io(io),
            formats::LoadError::Parse(m) => RunnerError::Environment(m),
        }
    }
}

/// Worker cap from the THREADS variable; compute is deterministic and
/// currently single-threaded, so any positive value is accepted.
pub fn thread_cap() -> Result<usize, RunnerError> {
    match std::env::var("THREADS") {
        Err(_) => Ok(1),
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                RunnerError::Environment(format!("THREADS must be a positive integer, got `{v}`"))
            })
            .map(|n| n.min(1)),
    }
}

struct Problem {
    grid: GridSpec,
    op: DiscreteOperator,
    obstacle: ObstacleSpec,
}

fn build_problem(cfg: &RunConfig) -> Result<Problem, RunnerError> {
    let grid = GridSpec::new(
        cfg.grid.dim,
        cfg.grid.r_dom,
        cfg.grid.n_points,
        cfg.grid.t_horizon,
        cfg.grid.dt,
    )?;
    let kernel = KernelSpec::fractional(cfg.kernel.s, cfg.grid.dim)?;
    let op = operator::build_discrete_operator(
        &kernel,
        &grid,
        cfg.grid.r_trunc,
        FarField::ZeroExtension,
    )?;
    let obstacle = obstacle::make_obstacle(cfg.obstacle_family(), &grid)?;
    Ok(Problem { grid, op, obstacle })
}

fn psor_params(cfg: &RunConfig) -> PsorParams {
    PsorParams {
        omega: cfg.solver.psor_omega,
        tol: cfg.solver.psor_tol,
        max_sweeps: cfg.solver.psor_max_sweeps,
    }
}

/// Default detachment threshold: 10 × max(complementarity tolerance,
/// ε·ln⁺‖Lφ‖_∞), per solver kind.
fn default_tol_fb(cfg: &RunConfig, problem: &Problem, epsilon: f64) -> Result<f64, RunnerError> {
    if cfg.analysis.tol_fb > 0.0 {
        return Ok(cfg.analysis.tol_fb);
    }
    let scale = problem.obstacle.sup_value().max(1.0);
    let l_phi = problem.obstacle.l_phi(&problem.grid, &problem.op)?;
    let floor = (cfg.solver.psor_tol * scale).max(epsilon * math::ln_plus(math::sup_abs(&l_phi)));
    Ok(10.0 * floor)
}

fn log(quiet: bool, line: &str) {
    if !quiet {
        println!("{line}");
    }
}

pub fn run(sub: Subcommand, opts: &RunOptions) -> Result<i32, RunnerError> {
    thread_cap()?;
    let echo = opts.config.echo_json();
    let hash = formats::fnv1a_hex(&echo);
    let paths = formats::out_paths(&opts.out);
    match sub {
        Subcommand::Solve => solve(opts, &echo, &hash),
        Subcommand::Verify => verify(opts, &hash),
        Subcommand::Fb => fb_cmd(opts, &hash),
        Subcommand::KernelCheck => kernel_check(opts, &hash),
        Subcommand::EpsilonStudy => epsilon_study_cmd(opts, &hash),
        Subcommand::Report => report_cmd(opts, &paths),
    }
}

fn write_traj(
    dir: &Path,
    problem: &Problem,
    traj: &Trajectory,
    solver: &str,
    hash: &str,
) -> Result<(), RunnerError> {
    formats::write_trajectory(
        dir,
        &problem.grid,
        traj,
        |snap| operator::apply_operator(&problem.op, &snap.u).unwrap_or_default(),
        solver,
        hash,
    )?;
    Ok(())
}

fn solve(opts: &RunOptions, echo: &str, hash: &str) -> Result<i32, RunnerError> {
    let cfg = &opts.config;
    let paths = formats::out_paths(&opts.out);
    formats::atomic_write(&paths.config_echo, echo)?;

    let problem = build_problem(cfg)?;
    let n_out = cfg.analysis.n_outputs;

    if cfg.solver.mode == "projected" || cfg.solver.mode == "both" {
        log(
            opts.quiet,
            "solving the complementarity problem (projected SOR)",
        );
        let traj = lcp::solve_obstacle(
            &problem.grid,
            &problem.op,
            &problem.obstacle,
            cfg.grid.dt,
            n_out,
            &psor_params(cfg),
        )?;
        write_traj(&paths.run_projected, &problem, &traj, "projected", hash)?;
    }
    if cfg.solver.mode == "penalized" || cfg.solver.mode == "both" {
        log(opts.quiet, "solving the penalized problem (imex)");
        let mut pcfg = PenalizedConfig::new(cfg.solver.epsilon, cfg.grid.dt)?;
        pcfg.linear_tol = cfg.solver.linear_tol;
        pcfg.max_newton = cfg.solver.max_newton;
        let traj = penalized::solve_penalized(
            &problem.grid,
            &problem.op,
            &problem.obstacle,
            &pcfg,
            n_out,
        )?;
        write_traj(&paths.run_penalized, &problem, &traj, "penalized", hash)?;
    }
    if opts.refine {
        log(opts.quiet, "solving the refined (h/2) projected problem");
        let fine_cfg = cfg.refined();
        let fine = build_problem(&fine_cfg)?;
        let traj = lcp::solve_obstacle(
            &fine.grid,
            &fine.op,
            &fine.obstacle,
            fine_cfg.grid.dt,
            fine_cfg.analysis.n_outputs,
            &psor_params(&fine_cfg),
        )?;
        write_traj(&paths.fine_projected, &fine, &traj, "projected", hash)?;
    }
    Ok(0)
}

fn require_projected(
    opts: &RunOptions,
) -> Result<(Trajectory, formats::TrajectoryManifest), RunnerError> {
    let paths = formats::out_paths(&opts.out);
    let manifest = paths.run_projected.join("manifest.json");
    if !manifest.exists() {
        return Err(RunnerError::MissingArtifact {
            path: manifest,
            hint: "run the `solve` subcommand first",
        });
    }
    Ok(formats::load_trajectory(&paths.run_projected)?)
}

/// Everything the per-run diagnostics need, computed from one trajectory.
struct RunChecks {
    ut: diag::UtIdentityCheck,
    lip: diag::LipschitzCheck,
    c_hat: f64,
    grad_vs_ut: f64,
    hopf: diag::HopfReport,
    mono: diag::MonotonicityCheck,
    c11: diag::C11Norms,
    curve: fb::FreeBoundaryCurve,
    upset: fb::UpSetStats,
    slice: fb::SliceMeasure,
    lipfit: fb::LipHolderFit,
    scale: f64,
    h: f64,
    dt_snap: f64,
}

fn run_checks(
    cfg: &RunConfig,
    problem: &Problem,
    traj: &Trajectory,
    tol_fb: f64,
    c11_stride: usize,
) -> Result<RunChecks, RunnerError> {
    let (t1, t2) = (cfg.analysis.t1, cfg.analysis.t2);
    let (curve, upset) = fb::extract_gamma(traj, tol_fb)?;
    let (curve, _) = fb::classify_points(&curve, None, None);
    let scale = problem.obstacle.sup_value().max(1.0);

    let ut = diag::check_ut_identity(traj, &problem.op, tol_fb)?;
    let lip = diag::check_lipschitz(
        traj,
        problem.obstacle.lipschitz(),
        problem.obstacle.sup_value(),
    )?;
    let c_hat = diag::check_semiconvexity(traj, t1, t2)?;
    let floor =
        diag::linear_noise_floor(traj, &problem.op, &problem.obstacle.sample(&problem.grid))?;
    let grad_vs_ut = diag::check_gradient_vs_ut(traj, t1, t2, 10.0 * floor)?;
    let nodes = diag::select_rate_nodes(
        &curve,
        t1,
        t2,
        problem.grid.t_horizon,
        cfg.analysis.fit_points,
    );
    let hopf = diag::check_hopf_antihopf(traj, &curve, &nodes, cfg.analysis.tau_max)?;
    let mono = diag::check_monotonicity_positivity(traj, tol_fb, scale)?;
    let c11 = diag::c11_norms(traj, &curve, t1, t2, c11_stride)?;
    let slice = fb::singular_slice_measure(&curve, traj);
    let lipfit = fb::lipschitz_and_holder_fit(&curve, t1, t2)?;
    let dt_snap = traj.snapshots[1].t - traj.snapshots[0].t;
    Ok(RunChecks {
        ut,
        lip,
        c_hat,
        grad_vs_ut,
        hopf,
        mono,
        c11,
        curve,
        upset,
        slice,
        lipfit,
        scale,
        h: problem.grid.h(),
        dt_snap,
    })
}

fn ratio_stable(coarse: f64, fine: f64, rel: f64) -> bool {
    if coarse == 0.0 && fine == 0.0 {
        return true;
    }
    if coarse <= 0.0 || fine <= 0.0 {
        return false;
    }
    let r = fine / coarse;
    r <= 1.0 + rel && r >= 1.0 / (1.0 + rel)
}

fn claims_from_checks(checks: &RunChecks, fine: Option<&RunChecks>) -> Vec<ClaimOutcome> {
    let mut claims = Vec::new();
    let c = checks;

    // identity u_t = (Lu)⁻; refinement stability of C = resid/(h + Δ)
    let ut_tol = 10.0 * (c.h + c.dt_snap) * c.scale;
    let ut_single = c.ut.contact_lu_min >= -ut_tol && c.ut.residual.is_finite();
    let (ut_verdict, mut ut_consts) = match fine {
        None => (
            if ut_single {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            vec![],
        ),
        Some(f) => {
            let stable = ratio_stable(c.ut.rate_constant, f.ut.rate_constant, 0.3);
            (
                if ut_single && stable {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
                vec![("rate_constant_fine".to_string(), f.ut.rate_constant)],
            )
        }
    };
    ut_consts.extend([
        ("residual".to_string(), c.ut.residual),
        ("rate_constant".to_string(), c.ut.rate_constant),
        ("contact_lu_min".to_string(), c.ut.contact_lu_min),
    ]);
    claims.push(ClaimOutcome {
        id: "ut-identity",
        anchor: "u_t = max(-Lu, 0); Lu >= 0 inside the contact set",
        constants: ut_consts,
        tolerance: ut_tol,
        verdict: ut_verdict,
    });

    claims.push(ClaimOutcome {
        id: "lipschitz",
        anchor: "|grad u| <= |phi|_C01, |u| <= |phi|_inf, u_t bounded",
        constants: vec![
            ("max_grad".to_string(), c.lip.max_grad),
            ("grad_bound".to_string(), c.lip.grad_bound),
            ("max_ut".to_string(), c.lip.max_ut),
            ("max_u".to_string(), c.lip.max_u),
        ],
        tolerance: 0.05,
        verdict: if c.lip.pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    });

    let semi = match fine {
        None => Verdict::Undetermined,
        Some(f) => {
            if ratio_stable(c.c_hat, f.c_hat, 0.25) {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
    };
    claims.push(ClaimOutcome {
        id: "semiconvexity",
        anchor: "second differences bounded below over an 8-direction fan",
        constants: {
            let mut v = vec![("c_hat".to_string(), c.c_hat)];
            if let Some(f) = fine {
                v.push(("c_hat_fine".to_string(), f.c_hat));
            }
            v
        },
        tolerance: 0.25,
        verdict: semi,
    });

    let grad_ut = match fine {
        None => {
            if c.grad_vs_ut.is_finite() {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        Some(f) => {
            if ratio_stable(c.grad_vs_ut, f.grad_vs_ut, 0.25) {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
    };
    claims.push(ClaimOutcome {
        id: "gradient-vs-ut",
        anchor: "|grad v| <= C v_t on [t1, t2]",
        constants: {
            let mut v = vec![("c".to_string(), c.grad_vs_ut)];
            if let Some(f) = fine {
                v.push(("c_fine".to_string(), f.grad_vs_ut));
            }
            v
        },
        tolerance: 0.25,
        verdict: grad_ut,
    });

    let hopf_ok = c.hopf.points.iter().all(|p| p.p >= 0.8 && p.p <= 1.2) && c.hopf.c0_lower > 0.0;
    claims.push(ClaimOutcome {
        id: "hopf",
        anchor: "v_t(x0, t0 + t) >= c0 t just above the free boundary",
        constants: vec![
            ("c0_lower".to_string(), c.hopf.c0_lower),
            ("n_points".to_string(), c.hopf.points.len() as f64),
            (
                "p_min".to_string(),
                c.hopf
                    .points
                    .iter()
                    .map(|p| p.p)
                    .fold(f64::INFINITY, f64::min),
            ),
            (
                "p_max".to_string(),
                c.hopf.points.iter().map(|p| p.p).fold(0.0f64, f64::max),
            ),
        ],
        tolerance: 0.2,
        verdict: if hopf_ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    });

    let anti_ok = c.hopf.m_upper.is_finite() && c.hopf.m_upper > 0.0;
    claims.push(ClaimOutcome {
        id: "antihopf",
        anchor: "v_t(x0, t0 + t) <= M t for all t > 0",
        constants: vec![("m_upper".to_string(), c.hopf.m_upper)],
        tolerance: 0.2,
        verdict: if anti_ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    });

    let nondeg_ok = c.hopf.points.iter().all(|p| p.q >= 1.8 && p.q <= 2.2);
    claims.push(ClaimOutcome {
        id: "nondegeneracy",
        anchor: "v(x0, t0 + r) grows like r^2",
        constants: vec![
            (
                "q_min".to_string(),
                c.hopf
                    .points
                    .iter()
                    .map(|p| p.q)
                    .fold(f64::INFINITY, f64::min),
            ),
            (
                "q_max".to_string(),
                c.hopf.points.iter().map(|p| p.q).fold(0.0f64, f64::max),
            ),
        ],
        tolerance: 0.2,
        verdict: if nondeg_ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    });

    let (c11_verdict, c11_opt_verdict, mut c11_consts) = match fine {
        None => (Verdict::Undetermined, Verdict::Undetermined, Vec::new()),
        Some(f) => {
            let check = diag::check_c11(c.c11.clone(), f.c11.clone());
            let consts = vec![
                ("ratio_uxx".to_string(), check.ratios.0),
                ("ratio_uxt".to_string(), check.ratios.1),
                ("ratio_utt".to_string(), check.ratios.2),
                ("third_ratio".to_string(), check.third_ratio),
            ];
            (
                if check.bounds_stable {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
                if check.optimality_witnessed {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
                consts,
            )
        }
    };
    c11_consts.extend([
        ("sup_uxx".to_string(), c.c11.sup_uxx),
        ("sup_uxt".to_string(), c.c11.sup_uxt),
        ("sup_utt".to_string(), c.c11.sup_utt),
        ("third_diff".to_string(), c.c11.third_diff_near_fb),
    ]);
    claims.push(ClaimOutcome {
        id: "c11-bounds",
        anchor: "D2x u, dt grad u, dtt u bounded on [t1, t2]",
        constants: c11_consts,
        tolerance: 1.3,
        verdict: c11_verdict,
    });
    claims.push(ClaimOutcome {
        id: "c11-optimality",
        anchor: "third differences near the free boundary grow under refinement",
        constants: vec![("third_diff".to_string(), c.c11.third_diff_near_fb)],
        tolerance: 1.2,
        verdict: c11_opt_verdict,
    });

    claims.push(ClaimOutcome {
        id: "monotonicity",
        anchor: "u_t > 0 in the detached set, u_t = 0 in contact",
        constants: vec![
            ("min_ut_detached".to_string(), c.mono.min_ut_detached),
            ("min_ut_all".to_string(), c.mono.min_ut_all),
        ],
        tolerance: c.mono.tolerance,
        verdict: if c.mono.pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    });

    claims
}

fn verify(opts: &RunOptions, hash: &str) -> Result<i32, RunnerError> {
    let cfg = &opts.config;
    let paths = formats::out_paths(&opts.out);
    let (traj, _) = require_projected(opts)?;
    let problem = build_problem(cfg)?;
    let tol_fb = default_tol_fb(cfg, &problem, 0.0)?;
    let checks = run_checks(cfg, &problem, &traj, tol_fb, 1)?;

    let fine_checks = if opts.refine {
        let manifest = paths.fine_projected.join("manifest.json");
        if !manifest.exists() {
            return Err(RunnerError::MissingArtifact {
                path: manifest,
                hint: "run `solve --refine` first",
            });
        }
        let (fine_traj, _) = formats::load_trajectory(&paths.fine_projected)?;
        let fine_cfg = cfg.refined();
        let fine_problem = build_problem(&fine_cfg)?;
        let fine_tol = default_tol_fb(&fine_cfg, &fine_problem, 0.0)?;
        Some(run_checks(
            &fine_cfg,
            &fine_problem,
            &fine_traj,
            fine_tol,
            2,
        )?)
    } else {
        None
    };

    let fb_verdicts = fb_verdicts_from_checks(&checks, fine_checks.as_ref(), cfg);
    let fb_fail = fb_verdicts.iter().any(|v| v.verdict == "fail");
    formats::atomic_write(
        &paths.verify_dir.join("fb_verdicts.json"),
        &serde_json::to_string_pretty(&VerdictFile {
            config_hash: hash.to_string(),
            verdicts: fb_verdicts,
        })
        .expect("verdicts serialize"),
    )?;

    let claims = claims_from_checks(&checks, fine_checks.as_ref());
    let meta = RunMeta {
        h: problem.grid.h(),
        dt: cfg.grid.dt,
        dt_snap: checks.dt_snap,
        s: cfg.kernel.s,
        epsilon: None,
        kernel: "fractional".into(),
        obstacle: format!("{} bumps", cfg.obstacle.bumps.len()),
    };
    let report = diag::assemble_report(meta, claims)?;
    let json = formats::report_json(&report, hash);
    formats::atomic_write(
        &paths.verify_dir.join("report.json"),
        &serde_json::to_string_pretty(&json).expect("report serializes"),
    )?;

    if let Some(first_fail) = report.claims.iter().find(|c| c.verdict == Verdict::Fail) {
        eprintln!("first failing claim: {}", first_fail.id);
        return Ok(1);
    }
    if fb_fail {
        eprintln!("first failing claim: free-boundary verdicts (see fb_verdicts.json)");
        return Ok(1);
    }
    log(opts.quiet, "verify: all claims pass or are undetermined");
    Ok(0)
}

fn fb_verdicts_from_checks(
    checks: &RunChecks,
    fine: Option<&RunChecks>,
    cfg: &RunConfig,
) -> Vec<VerdictJson> {
    let c = checks;
    let mut out = Vec::new();
    out.push(VerdictJson {
        id: "fb-graph-property".into(),
        constants: vec![
            ("violations".into(), c.upset.violations as f64),
            ("checked".into(), c.upset.checked as f64),
        ],
        verdict: if c.upset.graph_property && c.upset.violations == 0 {
            "pass".into()
        } else {
            "fail".into()
        },
    });
    let open = fb::regular_set_open(&c.curve);
    let n_singular = c
        .curve
        .samples
        .iter()
        .filter(|s| s.label == PointLabel::Singular)
        .count();
    out.push(VerdictJson {
        id: "fb-regular-set-open".into(),
        constants: vec![("n_singular".into(), n_singular as f64)],
        verdict: if open { "pass".into() } else { "fail".into() },
    });
    let lip_verdict = match fine {
        None => "undetermined".into(),
        Some(f) => {
            if ratio_stable(c.lipfit.lipschitz, f.lipfit.lipschitz, 0.25) {
                "pass".into()
            } else {
                "fail".into()
            }
        }
    };
    let mut lip_consts = vec![("lipschitz".to_string(), c.lipfit.lipschitz)];
    if let Some((alpha, hw)) = c.lipfit.alpha {
        lip_consts.push(("alpha".into(), alpha));
        lip_consts.push(("alpha_half_width".into(), hw));
    }
    if let Some(f) = fine {
        lip_consts.push(("lipschitz_fine".into(), f.lipfit.lipschitz));
    }
    out.push(VerdictJson {
        id: "fb-lipschitz-stable".into(),
        constants: lip_consts,
        verdict: lip_verdict,
    });
    let slice_verdict = match fine {
        None => "undetermined".into(),
        Some(f) => {
            let n_fine = 2 * (cfg.grid.n_points - 1) + 1;
            if fb::slice_refinement_pass(&c.slice, &f.slice, n_fine) {
                "pass".into()
            } else {
                "fail".into()
            }
        }
    };
    let mut slice_consts = vec![
        ("median_fraction".to_string(), c.slice.median_fraction),
        ("mean_nonempty".to_string(), c.slice.mean_nonempty),
    ];
    if let Some(f) = fine {
        slice_consts.push(("median_fraction_fine".into(), f.slice.median_fraction));
        slice_consts.push(("mean_nonempty_fine".into(), f.slice.mean_nonempty));
    }
    out.push(VerdictJson {
        id: "fb-singular-slice-refinement".into(),
        constants: slice_consts,
        verdict: slice_verdict,
    });
    out
}

fn fb_cmd(opts: &RunOptions, hash: &str) -> Result<i32, RunnerError> {
    let cfg = &opts.config;
    let paths = formats::out_paths(&opts.out);
    let (traj, _) = require_projected(opts)?;
    let problem = build_problem(cfg)?;
    let tol_fb = default_tol_fb(cfg, &problem, 0.0)?;
    let (curve, upset) = fb::extract_gamma(&traj, tol_fb)?;
    let (curve, _) = fb::classify_points(&curve, None, None);
    formats::atomic_write(
        &paths.fb_dir.join("curve.csv"),
        &formats::curve_csv(&curve, hash),
    )?;

    let nodes = fb::select_expansion_nodes(&curve, problem.grid.t_horizon, cfg.analysis.fit_points);
    for (i, &node) in nodes.iter().enumerate() {
        let window = 0.5;
        let levels = fb::max_expansion_levels(window, problem.grid.h(), curve.dt_snap);
        match fb::expansion_fit(&traj, &curve, node, window, levels) {
            Ok(fit) => {
                formats::atomic_write(
                    &paths.fb_dir.join(format!("expansion_{i}.json")),
                    &formats::expansion_json(&fit, hash),
                )?;
            }
            Err(e) => log(
                opts.quiet,
                &format!("expansion fit skipped at node {node}: {e}"),
            ),
        }
    }
    if !upset.graph_property {
        eprintln!(
            "graph-property failure: {} up-set violations of {} checked",
            upset.violations, upset.checked
        );
        return Ok(1);
    }
    log(
        opts.quiet,
        &format!("fb: {} curve samples, zero up-set violations", curve.len()),
    );
    Ok(0)
}

fn kernel_check(opts: &RunOptions, hash: &str) -> Result<i32, RunnerError> {
    let cfg = &opts.config;
    let paths = formats::out_paths(&opts.out);
    let mut verdicts: Vec<VerdictJson> = Vec::new();

    // golden: s = 1/2 spectral kernel against the closed-form Cauchy profile
    let golden_grid = GridSpec::new(1, 64.0, 4097, 1.0, 0.5)?;
    let t_golden = 0.05;
    let sample = heat::fractional_heat_kernel(0.5, t_golden, &golden_grid)?;
    let mut sup_dev = 0.0f64;
    for (i, &p) in sample.values.iter().enumerate() {
        sup_dev = sup_dev.max(math::abs(
            p - heat::cauchy_kernel(t_golden, golden_grid.x(i)),
        ));
    }
    let mass = sample.mass();
    let golden_pass = sup_dev < 1e-4 && math::abs(mass - 1.0) < 1e-3 && sample.min_value() > -1e-8;
    verdicts.push(VerdictJson {
        id: "cauchy-golden".into(),
        constants: vec![
            ("sup_deviation".into(), sup_dev),
            ("mass".into(), mass),
            ("min_value".into(), sample.min_value()),
        ],
        verdict: if golden_pass {
            "pass".into()
        } else {
            "fail".into()
        },
    });
    let mut csv = String::from("x,p\n");
    for (i, &p) in sample.values.iter().enumerate() {
        csv.push_str(&format!(
            "{},{}\n",
            formats::format_float(golden_grid.x(i)),
            formats::format_float(p)
        ));
    }
    formats::atomic_write(&paths.kernel_dir.join("p_s0.5_golden.csv"), &csv)?;

    // envelope fit stability over a 4x time range at s = 1/2 and config s
    for s_env in [0.5, cfg.kernel.s] {
        let grid = GridSpec::new(1, 8.0, 2049, 1.0, 0.5)?;
        let mut samples = Vec::new();
        for &t in &[0.1, 0.2, 0.4] {
            let sample = heat::fractional_heat_kernel(s_env, t, &grid)?;
            let mut csv = String::from("x,p\n");
            for (i, &p) in sample.values.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{}\n",
                    formats::format_float(grid.x(i)),
                    formats::format_float(p)
                ));
            }
            formats::atomic_write(&paths.kernel_dir.join(format!("p_s{s_env}_t{t}.csv")), &csv)?;
            samples.push(sample);
        }
        let (fits, stable) = heat::bound_fit_stability(&samples, 0.2);
        let mut constants = Vec::new();
        for (fit, t) in fits.iter().zip([0.1, 0.2, 0.4]) {
            constants.push((format!("c1_t{t}"), fit.c1));
            constants.push((format!("c2_t{t}"), fit.c2));
        }
        verdicts.push(VerdictJson {
            id: format!("envelope-fit-s{s_env}"),
            constants,
            verdict: if stable { "pass".into() } else { "fail".into() },
        });
    }

    // uniform tail gradients over t
    let grid = GridSpec::new(1, 8.0, 1025, 1.0, 0.5)?;
    let samples: Vec<heat::HeatKernelSample> = (1..=10)
        .map(|i| heat::fractional_heat_kernel(cfg.kernel.s, 0.05 * i as f64, &grid))
        .collect::<Result<_, _>>()?;
    let tail = heat::tail_gradient_check(&samples, 1.0)?;
    verdicts.push(VerdictJson {
        id: "tail-gradient".into(),
        constants: vec![
            ("max_over_t".into(), tail.max_over_t),
            ("median_over_t".into(), tail.median_over_t),
        ],
        verdict: if tail.pass {
            "pass".into()
        } else {
            "fail".into()
        },
    });

    // barrier growth with and without the admissible source
    let bgrid = GridSpec::new(1, 8.0, 513, 1.0, 1.0 / 64.0)?;
    for delta in [0.0, 1e-2] {
        let b = heat::barrier_check(cfg.kernel.s, &bgrid, delta)?;
        verdicts.push(VerdictJson {
            id: format!("barrier-delta{delta}"),
            constants: vec![
                ("ratio_lo".into(), b.ratio_lo),
                ("ratio_hi".into(), b.ratio_hi),
                ("doubling_lo".into(), b.doubling_lo),
                ("doubling_hi".into(), b.doubling_hi),
            ],
            verdict: if b.pass { "pass".into() } else { "fail".into() },
        });
    }

    let any_fail = verdicts.iter().any(|v| v.verdict == "fail");
    let file = VerdictFile {
        config_hash: hash.to_string(),
        verdicts,
    };
    formats::atomic_write(
        &paths.kernel_dir.join("verdicts.json"),
        &serde_json::to_string_pretty(&file).expect("verdicts serialize"),
    )?;
    if any_fail {
        let first = file.verdicts.iter().find(|v| v.verdict == "fail").unwrap();
        eprintln!("first failing check: {}", first.id);
        return Ok(1);
    }
    log(opts.quiet, "kernel-check: all checks pass");
    Ok(0)
}

fn epsilon_study_cmd(opts: &RunOptions, hash: &str) -> Result<i32, RunnerError> {
    let cfg = &opts.config;
    let paths = formats::out_paths(&opts.out);
    let problem = build_problem(cfg)?;
    let study = penalized::epsilon_study(
        &problem.grid,
        &problem.op,
        &problem.obstacle,
        &cfg.solver.epsilons,
        cfg.grid.dt,
        cfg.analysis.n_outputs,
        cfg.analysis.t1,
        cfg.analysis.t2,
    )?;

    let mut csv = String::from("epsilon,gap_to_next,gap_to_reference,fitted_c\n");
    for row in &study.rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            formats::format_float(row.epsilon),
            formats::format_float(row.gap_to_next),
            formats::format_float(row.gap_to_reference),
            formats::format_float(row.fitted_c)
        ));
    }
    formats::atomic_write(&paths.epsilon_dir.join("table.csv"), &csv)?;

    let order_ok = study.order_in_sqrt_eps >= 0.5 && study.order_in_sqrt_eps <= 1.5;
    let pass = study.gaps_monotone && study.reference_gaps_monotone && order_ok;
    let file = VerdictFile {
        config_hash: hash.to_string(),
        verdicts: vec![VerdictJson {
            id: "epsilon-convergence".into(),
            constants: vec![
                ("order_in_sqrt_eps".into(), study.order_in_sqrt_eps),
                (
                    "gaps_monotone".into(),
                    if study.gaps_monotone { 1.0 } else { 0.0 },
                ),
                (
                    "reference_gaps_monotone".into(),
                    if study.reference_gaps_monotone {
                        1.0
                    } else {
                        0.0
                    },
                ),
            ],
            verdict: if pass { "pass".into() } else { "fail".into() },
        }],
    };
    formats::atomic_write(
        &paths.epsilon_dir.join("verdicts.json"),
        &serde_json::to_string_pretty(&file).expect("verdicts serialize"),
    )?;
    if !pass {
        eprintln!("first failing check: epsilon-convergence");
        return Ok(1);
    }
    log(
        opts.quiet,
        &format!(
            "epsilon-study: monotone, order {:.3} in sqrt(eps)",
            study.order_in_sqrt_eps
        ),
    );
    Ok(0)
}

fn report_cmd(opts: &RunOptions, paths: &formats::OutPaths) -> Result<i32, RunnerError> {
    let mut text = String::from("fracobs summary\n===============\n");
    let mut any_fail = false;
    let mut any_section = false;

    let verify_path = paths.verify_dir.join("report.json");
    if verify_path.exists() {
        any_section = true;
        let report: formats::ReportJson =
            serde_json::from_str(&std::fs::read_to_string(&verify_path)?)
                .map_err(|e| RunnerError::Environment(e.to_string()))?;
        text.push_str(&format!("\nverify ({}):\n", report.overall));
        for c in &report.claims {
            text.push_str(&format!("  [{}] {} - {}\n", c.verdict, c.id, c.anchor));
            any_fail |= c.verdict == "fail";
        }
    }
    for (name, path) in [
        ("free boundary", paths.verify_dir.join("fb_verdicts.json")),
        ("kernel-check", paths.kernel_dir.join("verdicts.json")),
        ("epsilon-study", paths.epsilon_dir.join("verdicts.json")),
    ] {
        if path.exists() {
            any_section = true;
            let file: VerdictFile = serde_json::from_str(&std::fs::read_to_string(&path)?)
                .map_err(|e| RunnerError::Environment(e.to_string()))?;
            text.push_str(&format!("\n{name}:\n"));
            for v in &file.verdicts {
                text.push_str(&format!("  [{}] {}\n", v.verdict, v.id));
                any_fail |= v.verdict == "fail";
            }
        }
    }
    if !any_section {
        return Err(RunnerError::MissingArtifact {
            path: verify_path,
            hint: "run `verify`, `kernel-check` or `epsilon-study` first",
        });
    }
    text.push_str(&format!(
        "\noverall: {}\n",
        if any_fail { "FAIL" } else { "pass" }
    ));
    formats::atomic_write(&paths.report_txt, &text)?;
    log(opts.quiet, &text);
    Ok(if any_fail { 1 } else { 0 })
}
