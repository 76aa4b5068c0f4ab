//! Artifact formats: snapshot/curve/table CSVs and the report JSON.
//!
//! Every number prints with 17 significant digits, which round-trips f64
//! bit-exactly; writes go to a temp file and are renamed into place. All
//! artifacts embed the FNV-1a hash of the echoed configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fracobs_core::diag::{ClaimOutcome, DiagnosticsReport, Verdict};
use fracobs_core::fb::FreeBoundaryCurve;
use fracobs_core::grid::{FieldSnapshot, GridSpec, Trajectory};
use fracobs_core::ExpansionFit;

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// FNV-1a 64-bit hash, hex encoded.
pub fn fnv1a_hex(data: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in data.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Write-temp-then-rename so readers never observe partial artifacts.
pub fn atomic_write(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Snapshot CSV: header `x,u,v,Lu,ut`, one file per output time.
pub fn snapshot_csv(
    grid: &GridSpec,
    snap: &FieldSnapshot,
    lu: &[f64],
    config_hash: &str,
) -> String {
    let n = grid.n_points;
    let empty = vec![f64::NAN; n];
    let v = snap.v.as_deref().unwrap_or(&empty);
    let ut = snap.ut.as_deref().unwrap_or(&empty);
    let mut out = String::with_capacity(n * 96);
    out.push_str(&format!(
        "# t = {}\n# config_hash = {config_hash}\n",
        format_float(snap.t)
    ));
    out.push_str("x,u,v,Lu,ut\n");
    for i in 0..n {
        out.push_str(&format_float(grid.x(i)));
        out.push(',');
        out.push_str(&format_float(snap.u[i]));
        out.push(',');
        out.push_str(&format_float(v[i]));
        out.push(',');
        out.push_str(&format_float(lu[i]));
        out.push(',');
        out.push_str(&format_float(ut[i]));
        out.push('\n');
    }
    out
}

pub fn snapshot_filename(index: usize, t: f64) -> String {
    format!("snap_{index:04}_t{t:.9}.csv")
}

/// Manifest listing the snapshot files with full-precision times.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub config_hash: String,
    pub solver: String,
    pub dim: usize,
    pub r_dom: f64,
    pub n_points: usize,
    pub t_horizon: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub files: Vec<String>,
    pub valid: bool,
}

pub fn write_trajectory(
    dir: &Path,
    grid: &GridSpec,
    traj: &Trajectory,
    lu_of: impl Fn(&FieldSnapshot) -> Vec<f64>,
    solver: &str,
    config_hash: &str,
) -> std::io::Result<()> {
    let mut manifest = TrajectoryManifest {
        config_hash: config_hash.to_string(),
        solver: solver.to_string(),
        dim: grid.dim,
        r_dom: grid.r_dom,
        n_points: grid.n_points,
        t_horizon: grid.t_horizon,
        dt: grid.dt,
        times: Vec::new(),
        files: Vec::new(),
        valid: traj.valid,
    };
    for (idx, snap) in traj.snapshots.iter().enumerate() {
        let lu = lu_of(snap);
        let name = snapshot_filename(idx, snap.t);
        atomic_write(
            &dir.join(&name),
            &snapshot_csv(grid, snap, &lu, config_hash),
        )?;
        manifest.times.push(snap.t);
        manifest.files.push(name);
    }
    // per-step scalars
    let mut steps = String::from("t,max_beta,min_detachment,min_forward_diff\n");
    for rec in &traj.steps {
        steps.push_str(&format!(
            "{},{},{},{}\n",
            format_float(rec.t),
            format_float(rec.max_beta),
            format_float(rec.min_detachment),
            format_float(rec.min_forward_diff)
        ));
    }
    atomic_write(&dir.join("steps.csv"), &steps)?;
    atomic_write(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

#[derive(Debug)]
pub enum LoadError {
    Io(std::io::Error),
    Parse(String),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Io(e) => write!(f, "{e}"),
            LoadError::Parse(m) => write!(f, "malformed artifact: {m}"),
        }
    }
}

impl std::error::Error for LoadError {}

pub fn load_trajectory(dir: &Path) -> Result<(Trajectory, TrajectoryManifest), LoadError> {
    let manifest_text = fs::read_to_string(dir.join("manifest.json")).map_err(LoadError::Io)?;
    let manifest: TrajectoryManifest =
        serde_json::from_str(&manifest_text).map_err(|e| LoadError::Parse(e.to_string()))?;
    let grid = GridSpec::new(
        manifest.dim,
        manifest.r_dom,
        manifest.n_points,
        manifest.t_horizon,
        manifest.dt,
    )
    .map_err(|e| LoadError::Parse(e.to_string()))?;
    let mut traj = Trajectory::new(grid);
    traj.valid = manifest.valid;
    for (t, file) in manifest.times.iter().zip(&manifest.files) {
        let text = fs::read_to_string(dir.join(file)).map_err(LoadError::Io)?;
        let mut u = Vec::with_capacity(manifest.n_points);
        let mut v = Vec::with_capacity(manifest.n_points);
        let mut lu = Vec::with_capacity(manifest.n_points);
        let mut ut = Vec::with_capacity(manifest.n_points);
        for line in text.lines() {
            if line.starts_with('#') || line.starts_with('x') || line.is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = || -> Result<f64, LoadError> {
                cols.next()
                    .ok_or_else(|| LoadError::Parse(format!("short row in {file}")))?
                    .parse::<f64>()
                    .map_err(|e| LoadError::Parse(format!("{file}: {e}")))
            };
            let _x = next()?;
            u.push(next()?);
            v.push(next()?);
            lu.push(next()?);
            ut.push(next()?);
        }
        if u.len() != manifest.n_points {
            return Err(LoadError::Parse(format!(
                "{file}: {} rows, expected {}",
                u.len(),
                manifest.n_points
            )));
        }
        let mut snap = FieldSnapshot::new(*t, u);
        snap.v = Some(v);
        snap.lu = Some(lu);
        snap.ut = Some(ut);
        traj.snapshots.push(snap);
    }
    Ok((traj, manifest))
}

/// Free-boundary CSV: `x,gamma,grad_gamma,label`.
pub fn curve_csv(curve: &FreeBoundaryCurve, config_hash: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# tol_fb = {}\n# config_hash = {config_hash}\n",
        format_float(curve.tol_fb)
    ));
    out.push_str("x,gamma,grad_gamma,label\n");
    for s in &curve.samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_float(s.x),
            format_float(s.gamma),
            format_float(s.grad_gamma),
            s.label.as_str()
        ));
    }
    out
}

/// Expansion fit JSON, one file per analyzed point.
#[derive(Debug, Serialize, Deserialize)]
pub struct ExpansionJson {
    pub config_hash: String,
    pub x0: f64,
    pub t0: f64,
    pub c0: f64,
    pub a: f64,
    pub window: f64,
    pub residual_exponent: Option<f64>,
    pub exponent_half_width: Option<f64>,
    pub goodness: f64,
}

pub fn expansion_json(fit: &ExpansionFit, config_hash: &str) -> String {
    let doc = ExpansionJson {
        config_hash: config_hash.to_string(),
        x0: fit.x0,
        t0: fit.t0,
        c0: fit.c0,
        a: fit.a,
        window: fit.window,
        residual_exponent: fit.residual_exponent.map(|(p, _)| p),
        exponent_half_width: fit.residual_exponent.map(|(_, hw)| hw),
        goodness: fit.goodness,
    };
    serde_json::to_string_pretty(&doc).expect("expansion serializes")
}

/// Diagnostics report JSON mirror: {run: {...}, claims: [...], overall}.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportJson {
    pub run: RunMetaJson,
    pub claims: Vec<ClaimJson>,
    pub overall: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunMetaJson {
    pub config_hash: String,
    pub h: f64,
    pub dt: f64,
    pub dt_snap: f64,
    pub s: f64,
    pub epsilon: Option<f64>,
    pub kernel: String,
    pub obstacle: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClaimJson {
    pub id: String,
    pub anchor: String,
    pub constants: Vec<(String, f64)>,
    pub tolerance: f64,
    pub verdict: String,
}

pub fn report_json(report: &DiagnosticsReport, config_hash: &str) -> ReportJson {
    ReportJson {
        run: RunMetaJson {
            config_hash: config_hash.to_string(),
            h: report.run.h,
            dt: report.run.dt,
            dt_snap: report.run.dt_snap,
            s: report.run.s,
            epsilon: report.run.epsilon,
            kernel: report.run.kernel.to_string(),
            obstacle: report.run.obstacle.to_string(),
        },
        claims: report.claims.iter().map(claim_json).collect(),
        overall: if report.overall_pass {
            "pass".into()
        } else {
            "fail".into()
        },
    }
}

fn claim_json(c: &ClaimOutcome) -> ClaimJson {
    ClaimJson {
        id: c.id.to_string(),
        anchor: c.anchor.to_string(),
        constants: c
            .constants
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
        tolerance: c.tolerance,
        verdict: match c.verdict {
            Verdict::Pass => "pass".into(),
            Verdict::Fail => "fail".into(),
            Verdict::Undetermined => "undetermined".into(),
        },
    }
}

/// Generic verdict record used by kernel-check and the ε-study.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerdictJson {
    pub id: String,
    pub constants: Vec<(String, f64)>,
    pub verdict: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerdictFile {
    pub config_hash: String,
    pub verdicts: Vec<VerdictJson>,
}

pub fn out_paths(out: &Path) -> OutPaths {
    OutPaths {
        config_echo: out.join("config.echo.json"),
        run_projected: out.join("run").join("projected"),
        run_penalized: out.join("run").join("penalized"),
        fine_projected: out.join("run_fine").join("projected"),
        fb_dir: out.join("fb"),
        kernel_dir: out.join("kernel"),
        epsilon_dir: out.join("epsilon"),
        verify_dir: out.join("verify"),
        report_txt: out.join("report.txt"),
    }
}

pub struct OutPaths {
    pub config_echo: PathBuf,
    pub run_projected: PathBuf,
    pub run_penalized: PathBuf,
    pub fine_projected: PathBuf,
    pub fb_dir: PathBuf,
    pub kernel_dir: PathBuf,
    pub epsilon_dir: PathBuf,
    pub verify_dir: PathBuf,
    pub report_txt: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 1e-300, -2.5e17, core::f64::consts::PI] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a_hex(""), "cbf29ce484222325");
        assert_eq!(fnv1a_hex("a"), fnv1a_hex("a"));
        assert_ne!(fnv1a_hex("a"), fnv1a_hex("b"));
    }

    #[test]
    fn report_round_trips_bit_exactly() {
        let doc = ReportJson {
            run: RunMetaJson {
                config_hash: "deadbeef".into(),
                h: 0.015625,
                dt: 1.0 / 1024.0,
                dt_snap: 1.0 / 128.0,
                s: 0.25,
                epsilon: Some(0.01),
                kernel: "fractional".into(),
                obstacle: "bumps".into(),
            },
            claims: vec![ClaimJson {
                id: "hopf".into(),
                anchor: "v_t >= c0 t".into(),
                constants: vec![("c0".into(), 0.193_000_000_000_001)],
                tolerance: 0.2,
                verdict: "pass".into(),
            }],
            overall: "pass".into(),
        };
        let text = serde_json::to_string_pretty(&doc).unwrap();
        let back: ReportJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        let text2 = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(text, text2);
    }
}
