//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys not listed in [`KEYS`] are rejected, as are repeated keys.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cones::{ConeParams, DistanceMode, EXACT_MAX_NODES};
use crate::energy::{EnergyModel, Nonlinearity};
use crate::exec::Execution;
use crate::flow::FlowParams;
use crate::grid::Grid;
use crate::minimax::{SurfaceVariant, MAX_MESH_LEVEL, MIN_MESH_LEVEL, MIN_PATH_NODES};

pub const KEYS: [&str; 13] = [
    "dimension",
    "n",
    "nonlinearity",
    "p",
    "eps",
    "distance_mode",
    "residual_tol",
    "seed",
    "mesh_level",
    "variants",
    "path_nodes",
    "execution",
    "output",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    /// Displays as `<key>: <reason>`.
    #[error("{key}: {reason}")]
    Key { key: String, reason: String },
}

fn key_error(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Key {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    pub n: usize,
    /// Only `odd_power` is available from a config file.
    pub nonlinearity: String,
    pub p: f64,
    pub eps: f64,
    pub distance_mode: DistanceMode,
    pub residual_tol: f64,
    pub seed: u64,
    pub mesh_level: u32,
    pub variants: Vec<SurfaceVariant>,
    pub path_nodes: usize,
    pub execution: Execution,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dimension: 1,
            n: 255,
            nonlinearity: "odd_power".into(),
            p: 4.0,
            eps: crate::cones::DEFAULT_CONE_EPS,
            distance_mode: DistanceMode::Surrogate,
            residual_tol: 1e-8,
            seed: 1,
            mesh_level: 4,
            variants: vec![SurfaceVariant::GammaS],
            path_nodes: crate::minimax::DEFAULT_PATH_NODES,
            execution: Execution::Parallel,
            output: PathBuf::from("out"),
        }
    }
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| key_error(key, format!("cannot parse {value:?}")))
}

fn mode_name(mode: DistanceMode) -> &'static str {
    match mode {
        DistanceMode::Surrogate => "surrogate",
        DistanceMode::Exact => "exact",
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses and validates; unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    message: "expected `key = value`".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(key_error(key, "unknown key"));
            }
            if seen.iter().any(|k| k == key) {
                return Err(key_error(key, "given more than once"));
            }
            seen.push(key.to_string());
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "dimension" => self.dimension = parse_number(key, value)?,
            "n" => self.n = parse_number(key, value)?,
            "nonlinearity" => self.nonlinearity = value.to_string(),
            "p" => self.p = parse_number(key, value)?,
            "eps" => self.eps = parse_number(key, value)?,
            "distance_mode" => {
                self.distance_mode = match value {
                    "surrogate" => DistanceMode::Surrogate,
                    "exact" => DistanceMode::Exact,
                    _ => return Err(key_error(key, "must be surrogate or exact")),
                }
            }
            "residual_tol" => self.residual_tol = parse_number(key, value)?,
            "seed" => self.seed = parse_number(key, value)?,
            "mesh_level" => self.mesh_level = parse_number(key, value)?,
            "variants" => {
                self.variants = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        SurfaceVariant::parse(s)
                            .ok_or_else(|| key_error(key, format!("unknown variant {s:?}")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "path_nodes" => self.path_nodes = parse_number(key, value)?,
            "execution" => {
                self.execution = match value {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(key_error(key, "must be parallel or sequential")),
                }
            }
            "output" => {
                if value.is_empty() {
                    return Err(key_error(key, "must not be empty"));
                }
                self.output = PathBuf::from(value);
            }
            _ => unreachable!("keys are checked against KEYS"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid()?;
        if self.nonlinearity != "odd_power" {
            return Err(key_error("nonlinearity", "must be odd_power"));
        }
        self.nonlinearity()?;
        self.cone_params()?;
        if self.distance_mode == DistanceMode::Exact && grid.len() > EXACT_MAX_NODES {
            return Err(key_error(
                "distance_mode",
                format!("exact mode needs at most {EXACT_MAX_NODES} nodes"),
            ));
        }
        if !(self.residual_tol > 0.0 && self.residual_tol.is_finite()) {
            return Err(key_error("residual_tol", "must be > 0"));
        }
        if !(MIN_MESH_LEVEL..=MAX_MESH_LEVEL).contains(&self.mesh_level) {
            return Err(key_error(
                "mesh_level",
                format!("must be in [{MIN_MESH_LEVEL}, {MAX_MESH_LEVEL}]"),
            ));
        }
        if self.variants.is_empty() {
            return Err(key_error("variants", "must list at least one variant"));
        }
        if self.path_nodes < MIN_PATH_NODES {
            return Err(key_error(
                "path_nodes",
                format!("must be ≥ {MIN_PATH_NODES}"),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.dimension, self.n).map_err(lift)
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, ConfigError> {
        Nonlinearity::odd_power(self.p).map_err(lift)
    }

    pub fn model(&self) -> Result<EnergyModel, ConfigError> {
        Ok(EnergyModel::new(self.grid()?, self.nonlinearity()?))
    }

    pub fn cone_params(&self) -> Result<ConeParams, ConfigError> {
        Ok(ConeParams::new(self.eps)
            .map_err(lift)?
            .with_mode(self.distance_mode))
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            residual_tol: self.residual_tol,
            ..FlowParams::default()
        }
    }

    /// Canonical `key = value` listing, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let variants: Vec<&str> = self.variants.iter().map(|v| v.as_str()).collect();
        let mut out = String::new();
        writeln!(out, "dimension = {}", self.dimension).unwrap();
        writeln!(out, "n = {}", self.n).unwrap();
        writeln!(out, "nonlinearity = {}", self.nonlinearity).unwrap();
        writeln!(out, "p = {}", self.p).unwrap();
        writeln!(out, "eps = {}", self.eps).unwrap();
        writeln!(out, "distance_mode = {}", mode_name(self.distance_mode)).unwrap();
        writeln!(out, "residual_tol = {}", self.residual_tol).unwrap();
        writeln!(out, "seed = {}", self.seed).unwrap();
        writeln!(out, "mesh_level = {}", self.mesh_level).unwrap();
        writeln!(out, "variants = {}", variants.join(",")).unwrap();
        writeln!(out, "path_nodes = {}", self.path_nodes).unwrap();
        let exec = match self.execution {
            Execution::Parallel => "parallel",
            Execution::Sequential => "sequential",
        };
        writeln!(out, "execution = {exec}").unwrap();
        writeln!(out, "output = {}", self.output.display()).unwrap();
        out
    }
}

fn lift(e: crate::Error) -> ConfigError {
    match e {
        crate::Error::InvalidParameter { name, reason } => ConfigError::Key { key: name, reason },
        other => key_error("config", other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = RunConfig::parse(
            "# header\n\n dimension = 2 # square\nn=31\nvariants = gamma_s, gamma_s_prime\n",
        )
        .unwrap();
        assert_eq!(cfg.dimension, 2);
        assert_eq!(cfg.n, 31);
        assert_eq!(
            cfg.variants,
            vec![SurfaceVariant::GammaS, SurfaceVariant::GammaSPrime]
        );
    }

    #[test]
    fn small_n_names_the_key() {
        let err = RunConfig::parse("n = 2\n").unwrap_err();
        assert_eq!(err.to_string(), "n: must be ≥ 3");
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert_eq!(
            RunConfig::parse("colour = red").unwrap_err().to_string(),
            "colour: unknown key"
        );
        assert!(RunConfig::parse("n = 5\nn = 7")
            .unwrap_err()
            .to_string()
            .starts_with("n:"));
        assert!(matches!(
            RunConfig::parse("n 5").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        assert!(RunConfig::parse("p = 2")
            .unwrap_err()
            .to_string()
            .starts_with("p:"));
        assert!(RunConfig::parse("mesh_level = 9")
            .unwrap_err()
            .to_string()
            .starts_with("mesh_level:"));
        assert!(RunConfig::parse("variants = gamma_x")
            .unwrap_err()
            .to_string()
            .starts_with("variants:"));
        assert!(RunConfig::parse("eps = -1")
            .unwrap_err()
            .to_string()
            .starts_with("eps:"));
        assert!(
            RunConfig::parse("dimension = 2\nn = 100\ndistance_mode = exact")
                .unwrap_err()
                .to_string()
                .starts_with("distance_mode:")
        );
    }
}
