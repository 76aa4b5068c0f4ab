//! Run configuration: JSON on disk, validated and echoed with all defaults
//! made explicit.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use fracobs_core::obstacle::{Bump, ObstacleFamily};

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    /// Parse failures carry serde_json's line/column information.
    Parse(serde_json::Error),
    Invalid {
        field: &'static str,
        message: String,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Invalid { field, message } => {
                write!(f, "invalid config field `{field}`: {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub s: f64,
    #[serde(default = "default_kernel_kind")]
    pub kind: String,
}

fn default_kernel_kind() -> String {
    "fractional".into()
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            s: 0.25,
            kind: default_kernel_kind(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub r_dom: f64,
    pub n_points: usize,
    pub t_horizon: f64,
    pub dt: f64,
    pub r_trunc: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dim: 1,
            r_dom: 8.0,
            n_points: 1025,
            t_horizon: 1.0,
            dt: 1.0 / 1024.0,
            r_trunc: 16.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub amplitude: f64,
    pub radius: f64,
    pub center: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ObstacleConfig {
    pub bumps: Vec<BumpConfig>,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        // two unit bumps holding a weak middle bump whose contact island
        // collapses mid-run at x = 0
        ObstacleConfig {
            bumps: vec![
                BumpConfig {
                    amplitude: 1.0,
                    radius: 1.0,
                    center: -1.4,
                },
                BumpConfig {
                    amplitude: 0.2,
                    radius: 0.45,
                    center: 0.0,
                },
                BumpConfig {
                    amplitude: 1.0,
                    radius: 1.0,
                    center: 1.4,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// "penalized", "projected", or "both".
    pub mode: String,
    pub epsilon: f64,
    /// Strictly decreasing list for the ε-study.
    pub epsilons: Vec<f64>,
    pub psor_omega: f64,
    pub psor_tol: f64,
    pub psor_max_sweeps: usize,
    pub linear_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: "both".into(),
            epsilon: 0.01,
            epsilons: vec![4e-2, 1e-2, 2.5e-3],
            psor_omega: 1.5,
            psor_tol: 1e-10,
            psor_max_sweeps: 10_000,
            linear_tol: 1e-12,
            max_newton: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub t1: f64,
    pub t2: f64,
    /// Free-boundary threshold; 0 requests the solver-noise default.
    pub tol_fb: f64,
    pub fit_points: usize,
    pub tau_max: f64,
    pub n_outputs: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            t1: 0.2,
            t2: 0.8,
            tol_fb: 0.0,
            fit_points: 6,
            tau_max: 0.1,
            n_outputs: 128,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub obstacle: ObstacleConfig,
    pub solver: SolverConfig,
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = self.kernel.s;
        if !(s > 0.0 && s <= 0.5) {
            return Err(ConfigError::Invalid {
                field: "kernel.s",
                message: format!(
                    "s = {s} outside (0, 1/2]; the solvers run in the supercritical regime s < 1/2 \
                     (s = 1/2 is reserved for heat-kernel golden tests)"
                ),
            });
        }
        if self.kernel.kind != "fractional" {
            return Err(ConfigError::Invalid {
                field: "kernel.kind",
                message: format!(
                    "unknown kind `{}` (only `fractional` is configurable)",
                    self.kernel.kind
                ),
            });
        }
        if self.grid.dim != 1 {
            return Err(ConfigError::Invalid {
                field: "grid.dim",
                message: format!("dimension {} not supported (dim 1 only)", self.grid.dim),
            });
        }
        if !(self.analysis.t1 < self.analysis.t2 && self.analysis.t2 < self.grid.t_horizon) {
            return Err(ConfigError::Invalid {
                field: "analysis.t1",
                message: format!(
                    "need t1 < t2 < T, got t1 = {}, t2 = {}, T = {}",
                    self.analysis.t1, self.analysis.t2, self.grid.t_horizon
                ),
            });
        }
        if !self.solver.epsilons.is_empty() {
            for w in self.solver.epsilons.windows(2) {
                if !(w[1] < w[0]) {
                    return Err(ConfigError::Invalid {
                        field: "solver.epsilons",
                        message: format!(
                            "list must be strictly decreasing, got {:?}",
                            self.solver.epsilons
                        ),
                    });
                }
            }
        }
        if !(self.solver.epsilon > 0.0) {
            return Err(ConfigError::Invalid {
                field: "solver.epsilon",
                message: format!("must be positive, got {}", self.solver.epsilon),
            });
        }
        match self.solver.mode.as_str() {
            "penalized" | "projected" | "both" => {}
            other => {
                return Err(ConfigError::Invalid {
                    field: "solver.mode",
                    message: format!("unknown mode `{other}`"),
                })
            }
        }
        if self.obstacle.bumps.is_empty() {
            return Err(ConfigError::Invalid {
                field: "obstacle.bumps",
                message: "need at least one bump".into(),
            });
        }
        Ok(())
    }

    pub fn obstacle_family(&self) -> ObstacleFamily {
        let bumps: Vec<Bump> = self
            .obstacle
            .bumps
            .iter()
            .map(|b| Bump {
                amplitude: b.amplitude,
                radius: b.radius,
                center: b.center,
            })
            .collect();
        if bumps.len() == 1 {
            ObstacleFamily::CubicBump(bumps[0])
        } else {
            ObstacleFamily::SumOfBumps(bumps)
        }
    }

    /// Halved-spacing variant for refinement studies: h, dt and the snapshot
    /// spacing all halve.
    pub fn refined(&self) -> RunConfig {
        let mut fine = self.clone();
        fine.grid.n_points = 2 * (self.grid.n_points - 1) + 1;
        fine.grid.dt = self.grid.dt / 2.0;
        fine.analysis.n_outputs = self.analysis.n_outputs * 2;
        fine
    }

    /// Canonical JSON echo with every default filled in.
    pub fn echo_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
    let cfg: RunConfig = serde_json::from_str(&text).map_err(ConfigError::Parse)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"kernel": {"s": 0.3}}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.kernel.s, 0.3);
        assert_eq!(cfg.grid.n_points, 1025);
        assert_eq!(cfg.solver.mode, "both");
        assert_eq!(cfg.obstacle.bumps.len(), 3);
        // the echo records every default explicitly
        let echo = cfg.echo_json();
        for key in ["r_dom", "psor_omega", "tau_max", "epsilons", "n_outputs"] {
            assert!(echo.contains(key), "echo missing {key}");
        }
    }

    #[test]
    fn rejects_subcritical_order() {
        let cfg: RunConfig = serde_json::from_str(r#"{"kernel": {"s": 0.7}}"#).unwrap();
        let err = cfg.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("supercritical"), "{msg}");
    }

    #[test]
    fn rejects_increasing_epsilon_list() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"solver": {"epsilons": [0.1, 0.2]}}"#).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("strictly decreasing"));
    }

    #[test]
    fn parse_errors_carry_position() {
        let bad = "{\n  \"kernel\": { \"s\": }\n}";
        let err = serde_json::from_str::<RunConfig>(bad).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn refined_halves_every_spacing() {
        let cfg = RunConfig::default();
        let fine = cfg.refined();
        assert_eq!(fine.grid.n_points, 2049);
        assert_eq!(fine.grid.dt, cfg.grid.dt / 2.0);
        assert_eq!(fine.analysis.n_outputs, 256);
    }
}
