//! Run configuration: a strict TOML schema with a default for every key.

use std::fmt;
use std::path::{Path, PathBuf};

use chnu::besov::{check_index_condition, BesovParams};
use chnu::initial_data::Preset;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CHNU_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "reports";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    NonuniformBasic,
    NonuniformAt,
    TruncationStability,
    Decoupling,
    TwoSolutionStability,
    TransportApriori,
    InterpolationSweep,
    ProductSweep,
    Robustness,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 9] = [
        ExperimentName::NonuniformBasic,
        ExperimentName::NonuniformAt,
        ExperimentName::TruncationStability,
        ExperimentName::Decoupling,
        ExperimentName::TwoSolutionStability,
        ExperimentName::TransportApriori,
        ExperimentName::InterpolationSweep,
        ExperimentName::ProductSweep,
        ExperimentName::Robustness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::NonuniformBasic => "nonuniform_basic",
            ExperimentName::NonuniformAt => "nonuniform_at",
            ExperimentName::TruncationStability => "truncation_stability",
            ExperimentName::Decoupling => "decoupling",
            ExperimentName::TwoSolutionStability => "two_solution_stability",
            ExperimentName::TransportApriori => "transport_apriori",
            ExperimentName::InterpolationSweep => "interpolation_sweep",
            ExperimentName::ProductSweep => "product_sweep",
            ExperimentName::Robustness => "robustness",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == name)
    }

    /// Experiments whose premises require `s > max(3/2, 1 + 1/p)`.
    pub fn needs_index_condition(self) -> bool {
        matches!(
            self,
            ExperimentName::NonuniformBasic
                | ExperimentName::NonuniformAt
                | ExperimentName::TruncationStability
                | ExperimentName::Decoupling
                | ExperimentName::TwoSolutionStability
                | ExperimentName::Robustness
        )
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lebesgue or summability exponent; written as a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exponent;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number >= 1 or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Exponent, E> {
                Ok(Exponent(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Exponent, E> {
                match v {
                    "inf" | "infinity" => Ok(Exponent(f64::INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub half_length: f64,
    #[serde(rename = "N")]
    pub points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            half_length: chnu::experiments::DEFAULT_HALF_LENGTH,
            points: chnu::experiments::DEFAULT_POINTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BesovSection {
    pub s: f64,
    pub p: Exponent,
    pub r: Exponent,
}

impl Default for BesovSection {
    fn default() -> Self {
        Self {
            s: 2.0,
            p: Exponent(2.0),
            r: Exponent(2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub b: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { b: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dt: f64,
    /// Defaults to `experiment.T0`.
    pub t_end: Option<f64>,
    pub sample_every: usize,
    pub dealias: bool,
    pub slope_threshold: f64,
    pub norm_threshold: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dt: chnu::experiments::DEFAULT_DT,
            t_end: None,
            sample_every: chnu::experiments::DEFAULT_SAMPLE_EVERY,
            dealias: true,
            slope_threshold: 1e3,
            norm_threshold: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub name: ExperimentName,
    pub n_list: Vec<i32>,
    /// Packet index of the decoupling experiment.
    pub n: i32,
    /// Defaults to `[8, 16, L/2]` (entries below `L/2` only); single-shift experiments use the last entry.
    pub m_list: Option<Vec<f64>>,
    pub omega: u8,
    pub u0: String,
    pub seed: u64,
    /// Problem count for calibration sets (default 20) and sweeps (default 500).
    pub samples: Option<usize>,
    #[serde(rename = "T0")]
    pub horizon: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: ExperimentName::NonuniformBasic,
            n_list: vec![4, 5, 6, 7],
            n: 5,
            m_list: None,
            omega: 1,
            u0: "gaussian".into(),
            seed: 7,
            samples: None,
            horizon: chnu::experiments::DEFAULT_HORIZON,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Summary,
    Curves,
    Plot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Defaults to `$CHNU_OUTPUT_DIR`, then `reports`.
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: None,
            formats: vec![Format::Summary, Format::Curves, Format::Plot],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub besov: BesovSection,
    pub model: ModelSection,
    pub solver: SolverSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn t_end(&self) -> f64 {
        self.solver.t_end.unwrap_or(self.experiment.horizon)
    }

    pub fn m_list(&self) -> Vec<f64> {
        self.experiment.m_list.clone().unwrap_or_else(|| {
            let half = self.grid.half_length / 2.0;
            let mut m: Vec<f64> = [8.0, 16.0].into_iter().filter(|&m| m < half).collect();
            m.push(half);
            m
        })
    }

    /// Shift used by single-shift experiments.
    pub fn m(&self) -> f64 {
        *self.m_list().last().expect("m_list is validated nonempty")
    }

    pub fn samples(&self) -> usize {
        self.experiment
            .samples
            .unwrap_or(match self.experiment.name {
                ExperimentName::InterpolationSweep | ExperimentName::ProductSweep => 500,
                _ => 20,
            })
    }

    pub fn besov_params(&self) -> Result<BesovParams<f64>, CliError> {
        BesovParams::new(self.besov.s, self.besov.p.0, self.besov.r.0).map_err(|e| {
            CliError::Schema {
                path: "besov".into(),
                message: e.to_string(),
            }
        })
    }

    pub fn u0_preset(&self) -> Result<Preset, CliError> {
        self.experiment
            .u0
            .parse()
            .map_err(|e: chnu::Error| CliError::Schema {
                path: "experiment.u0".into(),
                message: e.to_string(),
            })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.directory.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
        })
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |path: &str, message: String| {
            Err(CliError::Schema {
                path: path.into(),
                message,
            })
        };
        if !(self.grid.half_length > 0.0 && self.grid.half_length.is_finite()) {
            return bad(
                "grid.L",
                format!("must be positive, got {}", self.grid.half_length),
            );
        }
        if self.grid.points < 16 || !self.grid.points.is_power_of_two() {
            return bad(
                "grid.N",
                format!("must be a power of two >= 16, got {}", self.grid.points),
            );
        }
        let prm = self.besov_params()?;
        if self.experiment.name.needs_index_condition() && !check_index_condition(&prm) {
            return bad(
                "besov.s",
                format!(
                    "{} needs s > max(3/2, 1 + 1/p) and r < inf, got s = {}, p = {}, r = {}",
                    self.experiment.name, prm.s, prm.p, prm.r
                ),
            );
        }
        if !self.model.b.is_finite() {
            return bad("model.b", "must be finite".into());
        }
        if !(self.experiment.horizon > 0.0) {
            return bad(
                "experiment.T0",
                format!("must be positive, got {}", self.experiment.horizon),
            );
        }
        if self.t_end() < self.experiment.horizon {
            return bad(
                "solver.t_end",
                format!(
                    "{} is shorter than T0 = {}",
                    self.t_end(),
                    self.experiment.horizon
                ),
            );
        }
        if !(self.solver.dt > 0.0) || self.solver.dt > self.t_end() {
            return bad(
                "solver.dt",
                format!("must lie in (0, t_end], got {}", self.solver.dt),
            );
        }
        if self.solver.sample_every == 0 {
            return bad("solver.sample_every", "must be at least 1".into());
        }
        if !(self.solver.slope_threshold > 0.0) {
            return bad("solver.slope_threshold", "must be positive".into());
        }
        if !(self.solver.norm_threshold > 0.0) {
            return bad("solver.norm_threshold", "must be positive".into());
        }
        if self.experiment.n_list.is_empty() {
            return bad("experiment.n_list", "must not be empty".into());
        }
        let m_list = self.m_list();
        if m_list.is_empty() || m_list.windows(2).any(|w| !(w[0] < w[1])) {
            return bad(
                "experiment.m_list",
                "must be nonempty and increasing".into(),
            );
        }
        if self.experiment.omega > 1 {
            return bad(
                "experiment.omega",
                format!("must be 0 or 1, got {}", self.experiment.omega),
            );
        }
        self.u0_preset()?;
        if self.samples() == 0 {
            return bad("experiment.samples", "must be at least 1".into());
        }
        Ok(())
    }

    /// Hex SHA-256 over the canonical JSON of every field except `output`;
    /// key order and formatting of the source file do not matter.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `{experiment}_seed{seed}_{hash12}`.
    pub fn stem(&self) -> String {
        format!(
            "{}_seed{}_{}",
            self.experiment.name,
            self.experiment.seed,
            &self.hash()[..12]
        )
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Schema {
        path: String::new(),
        message: e.to_string(),
    })?;
    let cfg: RunConfig =
        serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            CliError::Schema {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            }
        })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config_str("[experiment]\nname = \"nonuniform_basic\"\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.t_end(), 0.25);
        assert_eq!(cfg.m(), cfg.grid.half_length / 2.0);
    }

    #[test]
    fn index_condition_is_enforced_for_theorem_experiments() {
        let err = parse_config_str("[besov]\ns = 1.2\np = 2\n").unwrap_err();
        assert!(
            matches!(&err, CliError::Schema { path, .. } if path == "besov.s"),
            "{err}"
        );
        let cfg = "[besov]\ns = 1.2\n[experiment]\nname = \"interpolation_sweep\"\n";
        assert!(parse_config_str(cfg).is_ok());
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let err = parse_config_str("[solver]\ntheta = 0.5\n").unwrap_err();
        match err {
            CliError::Schema { path, message } => {
                assert_eq!(path, "solver.theta");
                assert!(message.contains("theta"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_type_reports_its_path() {
        let err = parse_config_str("[grid]\nN = \"many\"\n").unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, .. } if path == "grid.N"));
    }

    #[test]
    fn infinite_exponent_round_trips() {
        let cfg = parse_config_str("[besov]\np = \"inf\"\nr = 2\n").unwrap();
        assert!(cfg.besov.p.0.is_infinite());
        let back: RunConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn hash_ignores_layout_and_output() {
        let a = parse_config_str("[model]\nb = 2.0\n[grid]\nN = 32768\n").unwrap();
        let b = parse_config_str("[grid]\n  N   = 32768\n\n[output]\ndirectory = \"elsewhere\"\n")
            .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse_config_str("[model]\nb = 3.0\n").unwrap();
        assert_ne!(a.hash(), c.hash());
        let d = parse_config_str("[experiment]\nseed = 8\n").unwrap();
        assert_ne!(a.hash(), d.hash());
    }

    #[test]
    fn unknown_preset_is_a_schema_error() {
        let err = parse_config_str("[experiment]\nu0 = \"sawtooth\"\n").unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, .. } if path == "experiment.u0"));
    }
}
