//! Plain-text floorplan and process configuration.
//!
//! ```text
//! # comment
//! sigma_mismatch = 1
//! sigma_noise = 0.12
//! beta = 0.25
//! gradient = 1 1
//! target_wchd = 0.065
//!
//! design P1_a
//!   depth = 128
//!   width = 64
//!   mux = 4
//!   class = fast
//!   orient = R0
//!   pattern = 0(32)1(64)0(64)
//!   origin = 0 0
//! ```
//!
//! Global keys come before the first `design` stanza. A missing
//! `sigma_noise` is filled in by calibrating against `target_wchd`.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::biasdetect::RunLengthPattern;
use crate::layout::{Geometry, Orientation, PlacedMacro, SpeedClass};
use crate::metrics::{calibrate_noise, MetricsError};
use crate::simchip::{DesignEntry, Floorplan, ProcessParams};

/// Monte-Carlo chip budget used when a configuration needs calibration.
pub const CALIBRATION_BUDGET: usize = 64;
pub const DEFAULT_TARGET_WCHD: f64 = 0.065;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Calibration(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn syntax(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Syntax { line, message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sigma_mismatch: f64,
    pub sigma_noise: Option<f64>,
    pub beta: f64,
    pub gradient: (f64, f64),
    pub target_wchd: f64,
    pub floorplan: Floorplan,
}

impl Default for Config {
    fn default() -> Self {
        let p = ProcessParams::<f64>::uncalibrated();
        Config {
            sigma_mismatch: p.sigma_mismatch,
            sigma_noise: None,
            beta: p.beta,
            gradient: p.gradient,
            target_wchd: DEFAULT_TARGET_WCHD,
            floorplan: Floorplan::default_floorplan(),
        }
    }
}

#[derive(Default)]
struct Stanza {
    line: usize,
    name: String,
    depth: Option<usize>,
    width: Option<usize>,
    mux: Option<usize>,
    class: Option<SpeedClass>,
    orient: Option<Orientation>,
    pattern: Option<RunLengthPattern>,
    origin: Option<(i64, i64)>,
}

impl Stanza {
    fn finish(self) -> Result<DesignEntry, ConfigError> {
        let missing = |field: &str| syntax(self.line, format!("design {} is missing `{field}`", self.name));
        let geometry = Geometry::new(
            self.depth.ok_or_else(|| missing("depth"))?,
            self.width.ok_or_else(|| missing("width"))?,
            self.mux.ok_or_else(|| missing("mux"))?,
            self.class.unwrap_or(SpeedClass::Slow),
        )
        .map_err(|e| syntax(self.line, format!("design {}: {e}", self.name)))?;
        Ok(DesignEntry {
            placed: PlacedMacro::new(
                geometry,
                self.orient.ok_or_else(|| missing("orient"))?,
                self.origin.unwrap_or((0, 0)),
            ),
            pattern: self.pattern.ok_or_else(|| missing("pattern"))?,
            name: self.name,
        })
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| syntax(line, format!("`{key}` has invalid value `{value}`")))
}

fn parse_pair<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<(T, T), ConfigError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    match parts.as_slice() {
        [a, b] => Ok((parse_num(line, key, a)?, parse_num(line, key, b)?)),
        _ => Err(syntax(line, format!("`{key}` expects two numbers"))),
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config { floorplan: Floorplan::new(Vec::new()).expect("empty floorplan"), ..Config::default() };
        let mut designs = Vec::new();
        let mut current: Option<Stanza> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix("design") {
                let name = name.trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(syntax(line, "`design` takes exactly one name"));
                }
                if let Some(done) = current.take() {
                    designs.push(done.finish()?);
                }
                current = Some(Stanza { line, name: name.to_string(), ..Stanza::default() });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| syntax(line, format!("expected `key = value`, found `{content}`")))?;
            match current.as_mut() {
                None => match key {
                    "sigma_mismatch" => cfg.sigma_mismatch = parse_num(line, key, value)?,
                    "sigma_noise" => cfg.sigma_noise = Some(parse_num(line, key, value)?),
                    "beta" => cfg.beta = parse_num(line, key, value)?,
                    "gradient" => cfg.gradient = parse_pair(line, key, value)?,
                    "target_wchd" => cfg.target_wchd = parse_num(line, key, value)?,
                    _ => return Err(syntax(line, format!("unknown global key `{key}`"))),
                },
                Some(st) => match key {
                    "depth" => st.depth = Some(parse_num(line, key, value)?),
                    "width" => st.width = Some(parse_num(line, key, value)?),
                    "mux" => st.mux = Some(parse_num(line, key, value)?),
                    "class" => st.class = Some(value.parse().map_err(|e| syntax(line, format!("{e}")))?),
                    "orient" => st.orient = Some(value.parse().map_err(|e| syntax(line, format!("{e}")))?),
                    "pattern" => st.pattern = Some(value.parse().map_err(|e| syntax(line, format!("{e}")))?),
                    "origin" => st.origin = Some(parse_pair(line, key, value)?),
                    _ => return Err(syntax(line, format!("unknown design key `{key}`"))),
                },
            }
        }
        if let Some(done) = current.take() {
            designs.push(done.finish()?);
        }
        if designs.is_empty() {
            return Err(ConfigError::Invalid("configuration defines no designs".into()));
        }
        cfg.floorplan = Floorplan::new(designs).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.unresolved_params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(cfg.target_wchd >= 0.0 && cfg.target_wchd < 0.5) {
            return Err(ConfigError::Invalid(format!("target_wchd {} outside [0, 0.5)", cfg.target_wchd)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Config::parse(&text)
    }

    fn unresolved_params(&self) -> ProcessParams<f64> {
        ProcessParams {
            sigma_mismatch: self.sigma_mismatch,
            sigma_noise: self.sigma_noise.unwrap_or(0.0),
            beta: self.beta,
            gradient: self.gradient,
        }
    }

    /// Fills in `sigma_noise` by calibration when it is absent. The probe is
    /// the first design of the floorplan.
    pub fn resolved(mut self) -> Result<Self, ConfigError> {
        if self.sigma_noise.is_none() {
            let probe = self.floorplan.designs().first().expect("non-empty floorplan").clone();
            let sigma = calibrate_noise(self.target_wchd, &self.unresolved_params(), &probe, CALIBRATION_BUDGET)?;
            self.sigma_noise = Some(sigma);
        }
        Ok(self)
    }

    /// Process parameters; calibrates first when `sigma_noise` is missing.
    pub fn params(&self) -> Result<ProcessParams<f64>, ConfigError> {
        match self.sigma_noise {
            Some(_) => Ok(self.unresolved_params()),
            None => self.clone().resolved().map(|c| c.unresolved_params()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# srampuf floorplan\n");
        let _ = writeln!(out, "sigma_mismatch = {}", self.sigma_mismatch);
        if let Some(n) = self.sigma_noise {
            let _ = writeln!(out, "sigma_noise = {n}");
        }
        let _ = writeln!(out, "beta = {}", self.beta);
        let _ = writeln!(out, "gradient = {} {}", self.gradient.0, self.gradient.1);
        let _ = writeln!(out, "target_wchd = {}", self.target_wchd);
        for d in self.floorplan.designs() {
            let g = d.geometry();
            let _ = writeln!(out, "\ndesign {}", d.name);
            let _ = writeln!(out, "  depth = {}", g.depth());
            let _ = writeln!(out, "  width = {}", g.width());
            let _ = writeln!(out, "  mux = {}", g.mux());
            let _ = writeln!(out, "  class = {}", g.class());
            let _ = writeln!(out, "  orient = {}", d.placed.orientation);
            let _ = writeln!(out, "  pattern = {}", d.pattern);
            let _ = writeln!(out, "  origin = {} {}", d.placed.origin.0, d.placed.origin.1);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = Config { sigma_noise: Some(0.123), ..Config::default() };
        let text = cfg.to_text();
        let back = Config::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let text = "beta = 0.25\n\ndesign A\n  depth = 64\n  width = 32\n  mux = 4\n  orient = R180\n  pattern = 0(16)1(16)\n";
        let err = Config::parse(text).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 7, .. }), "{err}");
        assert!(err.to_string().contains("R180"));

        let err = Config::parse("bogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
        let err = Config::parse("design A\n  depth = 64\n").unwrap_err();
        assert!(err.to_string().contains("missing"));
        assert!(matches!(Config::parse("# nothing\n"), Err(ConfigError::Invalid(_))));
        assert!(Config::parse("sigma_mismatch = -1\ndesign A\ndepth=64\nwidth=32\nmux=4\norient=R0\npattern=0(16)1(16)\n").is_err());
        assert!(Config::parse("design A\ndepth=60\nwidth=32\nmux=8\norient=R0\npattern=0(16)1(16)\n").is_err());
    }

    #[test]
    fn minimal_design_defaults() {
        let cfg = Config::parse("sigma_noise = 0.1\ndesign A\ndepth=64\nwidth=32\nmux=4\norient=MX\npattern=0(16)1(16)\n").unwrap();
        let d = &cfg.floorplan.designs()[0];
        assert_eq!(d.geometry().class(), SpeedClass::Slow);
        assert_eq!(d.placed.origin, (0, 0));
        assert_eq!(cfg.params().unwrap().sigma_noise, 0.1);
    }
}
