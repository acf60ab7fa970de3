//! Flat key-path configuration: `section.key = value` lines, `#` comments,
//! unknown keys rejected. Field defaults match the standard experiment
//! (n=1, m=1, L² = 4π, d=1, N=32, theta initial data).

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::ConfigError;
use crate::flow::{GradientDriver, StepMethod};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Theta,
    Constant,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowEngine {
    Direct,
    Metric,
}

/// Fully resolved run configuration (embedded verbatim in summary.json).
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub bundle: BundleConfig,
    pub tau: f64,
    pub init: InitConfig,
    pub flow: FlowConfig,
    pub monitors: MonitorConfig,
    pub oracle: OracleConfig,
    pub compare: CompareConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryConfig {
    pub m: usize,
    pub l: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BundleConfig {
    pub rank: usize,
    pub degree: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InitConfig {
    pub kind: InitKind,
    /// Constant init: φ ≡ amplitude (per component).
    pub amplitude: f64,
    /// Extra multiplier applied to φ₀ after construction.
    pub scale: f64,
    pub seed: u64,
    pub band_limit: usize,
    /// Random init: amplitude applied to the connection perturbation.
    pub a_amplitude: f64,
    pub truncation: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowConfig {
    pub engine: FlowEngine,
    /// Descent direction for the direct engine.
    #[serde(serialize_with = "serialize_driver")]
    pub driver: GradientDriver,
    #[serde(serialize_with = "serialize_method")]
    pub method: StepMethod,
    pub dt_init: f64,
    pub t_end: f64,
    pub cfl_factor: f64,
    pub adapt: bool,
    /// ‖Ψ_τ‖_∞ stopping threshold; non-positive disables it.
    pub eps_vortex: f64,
}

fn serialize_driver<S: serde::Serializer>(d: &GradientDriver, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(match d {
        GradientDriver::Ymh => "ymh",
        GradientDriver::Vortex => "vortex",
    })
}

fn serialize_method<S: serde::Serializer>(m: &StepMethod, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(match m {
        StepMethod::Euler => "euler",
        StepMethod::Rk4 => "rk4",
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MonitorConfig {
    /// Absolute tolerance for the max-principle and ΛF monitors.
    pub tol_abs: f64,
    /// Relative tolerance (of initial sup ê) for Bochner monotonicity.
    pub ehat_tol_rel: f64,
    /// Holomorphy threshold gating `vortex_gradient`.
    pub holo_threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleConfig {
    /// FD step for gradient checks.
    pub eps: f64,
    pub samples: usize,
    /// Accepting threshold for check-gradient.
    pub grad_tol: f64,
    /// Newton tolerance for kw-solve.
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareConfig {
    /// Relative discrepancy accepted by compare-flows.
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputConfig {
    pub directory: String,
    pub record_every: usize,
    /// Every k-th record also snapshots the state; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let l = (4.0 * std::f64::consts::PI).sqrt();
        Self {
            geometry: GeometryConfig { m: 1, l, n: 32 },
            bundle: BundleConfig { rank: 1, degree: 1 },
            tau: 2.0,
            init: InitConfig {
                kind: InitKind::Theta,
                amplitude: 1.0,
                scale: 1.0,
                seed: 1,
                band_limit: 4,
                a_amplitude: 0.3,
                truncation: 8,
            },
            flow: FlowConfig {
                engine: FlowEngine::Direct,
                driver: GradientDriver::Vortex,
                method: StepMethod::Rk4,
                dt_init: f64::INFINITY,
                t_end: 50.0,
                cfl_factor: 0.2,
                adapt: true,
                eps_vortex: 1e-3,
            },
            monitors: MonitorConfig {
                tol_abs: 1e-6,
                ehat_tol_rel: 1e-6,
                holo_threshold: 0.1,
            },
            oracle: OracleConfig {
                eps: 1e-5,
                samples: 50,
                grad_tol: 1e-6,
                tol: 1e-10,
            },
            compare: CompareConfig { tol: 0.01 },
            output: OutputConfig {
                directory: "out".to_string(),
                record_every: 10,
                snapshot_every: 0,
            },
        }
    }
}

impl RunConfig {
    /// Parses `key = value` lines over the defaults; rejects unknown keys
    /// and malformed values, then validates cross-field constraints.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: lineno + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            seen.insert(key.to_string(), value.to_string());
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        macro_rules! num {
            ($ty:ty) => {
                value
                    .parse::<$ty>()
                    .map_err(|e| bad(&e.to_string()))?
            };
        }
        match key {
            "geometry.m" => self.geometry.m = num!(usize),
            "geometry.L" | "geometry.l" => self.geometry.l = num!(f64),
            "geometry.N" | "geometry.n" => self.geometry.n = num!(usize),
            "bundle.n" | "bundle.rank" => self.bundle.rank = num!(usize),
            "bundle.d" | "bundle.degree" => self.bundle.degree = num!(i64),
            "tau" => self.tau = num!(f64),
            "init.kind" => {
                self.init.kind = match value {
                    "theta" => InitKind::Theta,
                    "constant" => InitKind::Constant,
                    "random" => InitKind::Random,
                    _ => return Err(bad("expected theta|constant|random")),
                }
            }
            "init.amplitude" => self.init.amplitude = num!(f64),
            "init.scale" => self.init.scale = num!(f64),
            "init.seed" => self.init.seed = num!(u64),
            "init.band_limit" => self.init.band_limit = num!(usize),
            "init.a_amplitude" => self.init.a_amplitude = num!(f64),
            "init.truncation" => self.init.truncation = num!(usize),
            "flow.driver" => {
                self.flow.driver = match value {
                    "ymh" => GradientDriver::Ymh,
                    "vortex" => GradientDriver::Vortex,
                    _ => return Err(bad("expected ymh|vortex")),
                }
            }
            "flow.engine" => {
                self.flow.engine = match value {
                    "direct" => FlowEngine::Direct,
                    "metric" => FlowEngine::Metric,
                    _ => return Err(bad("expected direct|metric")),
                }
            }
            "flow.method" => {
                self.flow.method = match value {
                    "euler" => StepMethod::Euler,
                    "rk4" => StepMethod::Rk4,
                    _ => return Err(bad("expected euler|rk4")),
                }
            }
            "flow.dt_init" => self.flow.dt_init = num!(f64),
            "flow.t_end" => self.flow.t_end = num!(f64),
            "flow.cfl_factor" => self.flow.cfl_factor = num!(f64),
            "flow.adapt" => {
                self.flow.adapt = match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    _ => return Err(bad("expected on|off")),
                }
            }
            "flow.eps_vortex" => {
                self.flow.eps_vortex = if value == "none" { -1.0 } else { num!(f64) }
            }
            "monitors.tol_abs" => self.monitors.tol_abs = num!(f64),
            "monitors.ehat_tol_rel" => self.monitors.ehat_tol_rel = num!(f64),
            "monitors.holo_threshold" => self.monitors.holo_threshold = num!(f64),
            "oracle.eps" => self.oracle.eps = num!(f64),
            "oracle.samples" => self.oracle.samples = num!(usize),
            "oracle.grad_tol" => self.oracle.grad_tol = num!(f64),
            "oracle.tol" => self.oracle.tol = num!(f64),
            "compare.tol" => self.compare.tol = num!(f64),
            "output.directory" => self.output.directory = value.to_string(),
            "output.record_every" => self.output.record_every = num!(usize),
            "output.snapshot_every" => self.output.snapshot_every = num!(usize),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Cross-field validation, mirroring module preconditions so a bad
    /// config fails before any allocation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if !(1..=2).contains(&self.geometry.m) {
            return fail(format!("geometry.m must be 1 or 2, got {}", self.geometry.m));
        }
        if self.geometry.n < 4 || self.geometry.n % 2 != 0 {
            return fail(format!(
                "geometry.N must be even and >= 4, got {}",
                self.geometry.n
            ));
        }
        if !(self.geometry.l > 0.0 && self.geometry.l.is_finite()) {
            return fail(format!("geometry.L must be positive, got {}", self.geometry.l));
        }
        if !(1..=2).contains(&self.bundle.rank) {
            return fail(format!("bundle.n must be 1 or 2, got {}", self.bundle.rank));
        }
        if self.bundle.degree != 0 && (self.bundle.rank != 1 || self.geometry.m != 1) {
            return fail("nonzero bundle.d requires rank 1 and m = 1".into());
        }
        if self.bundle.degree < 0 {
            return fail("bundle.d must be >= 0 (state serialization stores it unsigned)".into());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if self.init.kind == InitKind::Theta && self.bundle.degree < 1 {
            return fail("init.kind = theta requires bundle.d >= 1".into());
        }
        if self.init.kind == InitKind::Random && self.init.band_limit > self.geometry.n / 4 {
            return fail(format!(
                "init.band_limit {} exceeds N/4 = {}",
                self.init.band_limit,
                self.geometry.n / 4
            ));
        }
        if !(self.flow.cfl_factor > 0.0 && self.flow.cfl_factor <= 0.2 + 1e-12) {
            return fail(format!(
                "flow.cfl_factor must lie in (0, 0.2], got {}",
                self.flow.cfl_factor
            ));
        }
        if !(self.flow.t_end > 0.0) {
            return fail(format!("flow.t_end must be positive, got {}", self.flow.t_end));
        }
        if self.output.record_every == 0 {
            return fail("output.record_every must be >= 1".into());
        }
        if self.oracle.samples == 0 {
            return fail("oracle.samples must be >= 1".into());
        }
        Ok(())
    }
}
