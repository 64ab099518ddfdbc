//! Run configuration: flat INI sections with `key = value` pairs.
//!
//! Every key is listed in [`KNOWN_KEYS`]; anything else is rejected so that a
//! typo cannot silently fall back to a default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ini::Ini;
use thiserror::Error;

use crate::cbf::FluxAveraging;
use crate::ccm::{self, CcmParams, SourceMode};
use crate::mesh::Point;
use crate::motion::{self, EnteringRule};
use crate::stfem::MaterialSolid;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("`{0}` and `{1}` are mutually exclusive")]
    Conflict(String, String),
}

pub const KNOWN_KEYS: &[&str] = &[
    "material.rho_s",
    "material.cp_s",
    "material.kappa_s",
    "material.T_s",
    "material.rho_l",
    "material.cp_l",
    "material.kappa_l",
    "material.mu_l",
    "melting.h_m",
    "melting.T_m",
    "source.mode",
    "source.coupling",
    "source.T_w",
    "source.q_h",
    "source.F_ex",
    "source.mass",
    "source.gravity",
    "source.R",
    "source.tip_area",
    "source.tip",
    "source.dirichlet",
    "time.dt",
    "time.n_steps",
    "mesh.path",
    "mesh.direction",
    "mesh.entering",
    "numerics.solver_tol",
    "numerics.solver_max_iter",
    "numerics.secant_tol",
    "numerics.flux_averaging",
    "output.directory",
    "output.vtk_every",
    "output.csv",
    "output.flux_csv",
    "output.sensors",
    "output.sensor_csv",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Equilibrium,
    Transient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Force {
    Direct(f64),
    Weight { mass: f64, gravity: f64 },
}

impl Force {
    pub fn value(self) -> f64 {
        match self {
            Force::Direct(f) => f,
            Force::Weight { mass, gravity } => ccm::f_ex_from_weight(mass, gravity),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub rho_s: f64,
    pub cp_s: f64,
    pub kappa_s: f64,
    pub t_s: f64,
    pub rho_l: f64,
    pub cp_l: f64,
    pub kappa_l: f64,
    pub mu_l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub mode: SourceMode,
    pub coupling: Coupling,
    pub force: Force,
    pub r: f64,
    /// Area used to convert bulk power (W) to q_h (W/m²).
    pub tip_area: f64,
    /// Boundary tag on which q_s is recovered.
    pub tip: String,
    /// Tags held at T_m.
    pub dirichlet: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub path: PathBuf,
    pub direction: [f64; 2],
    pub entering: EnteringRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub secant_tol: f64,
    pub flux_averaging: FluxAveraging,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// 0 disables snapshots.
    pub vtk_every: usize,
    pub csv: String,
    pub flux_csv: String,
    pub sensors: Vec<Point>,
    pub sensor_csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub material: Material,
    pub h_m: f64,
    pub t_m: f64,
    pub source: SourceConfig,
    pub dt: f64,
    pub n_steps: usize,
    pub mesh: MeshConfig,
    pub numerics: Numerics,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn solid(&self) -> MaterialSolid {
        MaterialSolid {
            rho_s: self.material.rho_s,
            cp_s: self.material.cp_s,
            kappa_s: self.material.kappa_s,
            t_s_initial: self.material.t_s,
        }
    }

    pub fn closure(&self) -> CcmParams {
        CcmParams {
            rho_s: self.material.rho_s,
            rho_l: self.material.rho_l,
            cp_s: self.material.cp_s,
            cp_l: self.material.cp_l,
            kappa_l: self.material.kappa_l,
            mu_l: self.material.mu_l,
            h_m: self.h_m,
            t_m: self.t_m,
            t_s: self.material.t_s,
            r: self.source.r,
            f_ex: self.source.force.value(),
            mode: self.source.mode,
        }
    }
}

impl fmt::Display for FluxAveragingName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            FluxAveraging::NodeMean => "node_mean",
            FluxAveraging::LengthWeighted => "length_weighted",
        })
    }
}

struct FluxAveragingName(FluxAveraging);

/// Flattened `section.key -> value` view of an INI document.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut values = BTreeMap::new();
        for (section, props) in ini.iter() {
            for (k, v) in props.iter() {
                let key = match section {
                    Some(s) => format!("{s}.{k}"),
                    None => k.to_string(),
                };
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    return Err(ConfigError::Unknown(key));
                }
                if values.insert(key.clone(), v.trim().to_string()).is_some() {
                    return Err(ConfigError::Invalid { key, msg: "given more than once".into() });
                }
            }
        }
        Ok(Self { values })
    }

    /// Replaces (or adds) a value; the key must be a known one.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::Unknown(key.to_string()));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn req(&self, key: &str) -> Result<&str, ConfigError> {
        self.str(key).ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.str(key)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| invalid(key, format!("`{s}` is not a finite number")))
            })
            .transpose()
    }

    fn f64_req(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64_opt(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.f64_req(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(invalid(key, format!("must be positive, found {v}")))
        }
    }

    fn usize_opt(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.str(key)
            .map(|s| s.parse::<usize>().map_err(|_| invalid(key, format!("`{s}` is not a non-negative integer"))))
            .transpose()
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), msg: msg.into() }
}

fn parse_sensors(s: &str) -> Result<Vec<Point>, ConfigError> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let v: Vec<f64> = p
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| invalid("output.sensors", format!("bad point `{p}`")))?;
            match v[..] {
                [x, y] if x.is_finite() && y.is_finite() => Ok([x, y]),
                _ => Err(invalid("output.sensors", format!("expected `x y`, found `{p}`"))),
            }
        })
        .collect()
}

fn tag_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let material = Material {
            rho_s: raw.positive("material.rho_s")?,
            cp_s: raw.positive("material.cp_s")?,
            kappa_s: raw.positive("material.kappa_s")?,
            t_s: raw.positive("material.T_s")?,
            rho_l: raw.positive("material.rho_l")?,
            cp_l: raw.positive("material.cp_l")?,
            kappa_l: raw.positive("material.kappa_l")?,
            mu_l: raw.positive("material.mu_l")?,
        };
        let h_m = raw.positive("melting.h_m")?;
        let t_m = raw.positive("melting.T_m")?;

        let t_w = raw.f64_opt("source.T_w")?;
        let q_h = raw.f64_opt("source.q_h")?;
        if t_w.is_some() && q_h.is_some() {
            return Err(ConfigError::Conflict("source.T_w".into(), "source.q_h".into()));
        }
        let mode = match raw.req("source.mode")? {
            "temperature" => SourceMode::Temperature {
                t_w: t_w.ok_or_else(|| ConfigError::Missing("source.T_w".into()))?,
            },
            "power" => SourceMode::Power { q_h: q_h.ok_or_else(|| ConfigError::Missing("source.q_h".into()))? },
            other => return Err(invalid("source.mode", format!("expected temperature or power, found `{other}`"))),
        };
        let coupling = match raw.str("source.coupling").unwrap_or("transient") {
            "equilibrium" => Coupling::Equilibrium,
            "transient" => Coupling::Transient,
            other => {
                return Err(invalid("source.coupling", format!("expected equilibrium or transient, found `{other}`")))
            }
        };
        let f_ex = raw.f64_opt("source.F_ex")?;
        let mass = raw.f64_opt("source.mass")?;
        let gravity = raw.f64_opt("source.gravity")?;
        let force = match (f_ex, mass, gravity) {
            (Some(f), None, None) => Force::Direct(f),
            (None, Some(mass), Some(gravity)) => Force::Weight { mass, gravity },
            (Some(_), Some(_), _) => return Err(ConfigError::Conflict("source.F_ex".into(), "source.mass".into())),
            (Some(_), None, Some(_)) => {
                return Err(ConfigError::Conflict("source.F_ex".into(), "source.gravity".into()))
            }
            (None, Some(_), None) => return Err(ConfigError::Missing("source.gravity".into())),
            (None, None, Some(_)) => return Err(ConfigError::Missing("source.mass".into())),
            (None, None, None) => return Err(ConfigError::Missing("source.F_ex".into())),
        };
        let r = raw.positive("source.R")?;
        let tip_area = match raw.f64_opt("source.tip_area")? {
            Some(a) if a > 0.0 => a,
            Some(a) => return Err(invalid("source.tip_area", format!("must be positive, found {a}"))),
            None => std::f64::consts::PI * r * r,
        };
        let tip = raw.str("source.tip").unwrap_or("tip").to_string();
        let dirichlet = match raw.str("source.dirichlet") {
            Some(s) => tag_list(s),
            None => vec![tip.clone()],
        };
        if dirichlet.is_empty() {
            return Err(invalid("source.dirichlet", "needs at least one tag"));
        }

        let dt = raw.positive("time.dt")?;
        let n_steps = raw.usize_opt("time.n_steps")?.ok_or_else(|| ConfigError::Missing("time.n_steps".into()))?;
        if n_steps == 0 {
            return Err(invalid("time.n_steps", "must be at least 1"));
        }

        let direction_s = raw.str("mesh.direction").unwrap_or("-y");
        let direction = motion::parse_direction(direction_s)
            .ok_or_else(|| invalid("mesh.direction", format!("expected one of +x, -x, +y, -y, found `{direction_s}`")))?;
        let entering = match raw.str("mesh.entering").unwrap_or("far_field") {
            "far_field" => EnteringRule::FarField,
            "copy" => EnteringRule::Copy,
            other => return Err(invalid("mesh.entering", format!("expected far_field or copy, found `{other}`"))),
        };
        let mesh = MeshConfig { path: PathBuf::from(raw.req("mesh.path")?), direction, entering };

        let numerics = Numerics {
            solver_tol: match raw.f64_opt("numerics.solver_tol")? {
                Some(v) if v > 0.0 => v,
                Some(v) => return Err(invalid("numerics.solver_tol", format!("must be positive, found {v}"))),
                None => 1e-10,
            },
            solver_max_iter: raw.usize_opt("numerics.solver_max_iter")?.unwrap_or(10).max(1),
            secant_tol: match raw.f64_opt("numerics.secant_tol")? {
                Some(v) if v > 0.0 => v,
                Some(v) => return Err(invalid("numerics.secant_tol", format!("must be positive, found {v}"))),
                None => ccm::CLOSURE_TOL,
            },
            flux_averaging: match raw.str("numerics.flux_averaging").unwrap_or("node_mean") {
                "node_mean" => FluxAveraging::NodeMean,
                "length_weighted" => FluxAveraging::LengthWeighted,
                other => {
                    return Err(invalid(
                        "numerics.flux_averaging",
                        format!("expected node_mean or length_weighted, found `{other}`"),
                    ))
                }
            },
        };

        let output = OutputConfig {
            directory: PathBuf::from(raw.str("output.directory").unwrap_or("out")),
            vtk_every: raw.usize_opt("output.vtk_every")?.unwrap_or(10),
            csv: raw.str("output.csv").unwrap_or("run.csv").to_string(),
            flux_csv: raw.str("output.flux_csv").unwrap_or("flux.csv").to_string(),
            sensors: raw.str("output.sensors").map(parse_sensors).transpose()?.unwrap_or_default(),
            sensor_csv: raw.str("output.sensor_csv").unwrap_or("sensors.csv").to_string(),
        };

        let source = SourceConfig { mode, coupling, force, r, tip_area, tip, dirichlet };
        let cfg = RunConfig { material, h_m, t_m, source, dt, n_steps, mesh, numerics, output };
        cfg.closure().validate().map_err(|e| invalid("source", e.to_string()))?;
        Ok(cfg)
    }

    /// One line per resolved setting, for the log.
    pub fn describe(&self) -> String {
        let mode = match self.source.mode {
            SourceMode::Temperature { t_w } => format!("temperature (T_w = {t_w} K)"),
            SourceMode::Power { q_h } => format!("power (q_h = {q_h} W/m²)"),
        };
        [
            format!("source: {mode}, {:?} coupling, F_ex = {} N, R = {} m", self.source.coupling, self.source.force.value(), self.source.r),
            format!("source: tip tag `{}`, T_m on [{}], tip_area = {} m²", self.source.tip, self.source.dirichlet.join(", "), self.source.tip_area),
            format!("time: dt = {} s, {} steps", self.dt, self.n_steps),
            format!("mesh: {} moving {:?}, entering {:?}", self.mesh.path.display(), self.mesh.direction, self.mesh.entering),
            format!(
                "numerics: solver_tol = {:e}, solver_max_iter = {}, secant_tol = {:e}, flux averaging {}",
                self.numerics.solver_tol,
                self.numerics.solver_max_iter,
                self.numerics.secant_tol,
                FluxAveragingName(self.numerics.flux_averaging)
            ),
            format!(
                "output: {} (vtk every {}, csv {}, {} sensors)",
                self.output.directory.display(),
                self.output.vtk_every,
                self.output.csv,
                self.output.sensors.len()
            ),
        ]
        .join("\n")
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_raw(&RawConfig::parse(text)?)
}

pub fn load_raw(path: impl AsRef<Path>) -> Result<RawConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    RawConfig::parse(&text)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let cfg = RunConfig::from_raw(&load_raw(path)?)?;
    log::info!("configuration:\n{}", cfg.describe());
    Ok(cfg)
}
