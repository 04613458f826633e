//! Versioned TOML scenario files.
//!
//! ```toml
//! version = 1
//! peers = 25
//!
//! [endowments]
//! distribution = "lognormal"   # or "explicit" with `values = [...]`
//! mu_log = 4.5
//! sigma_sq = 0.25
//! seed = 7
//!
//! [init]
//! mode = "random"              # or "equal"
//! seed = 0
//!
//! [run]
//! algorithm = "sparse"         # "pr", "sparse" or "egsparse"
//! max_iters = 5000
//! conv_tol = 1e-8
//! record_every = 100
//!
//! [params]
//! c = 0.1
//! eps = 0.01
//! tau = 0.01
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sparse_exchange::dynamics::{Algorithm, RunConfig};
use sparse_exchange::market::SparsityParams;
use sparse_exchange::scenario::{EndowmentSpec, InitMode, ScenarioSpec, DEFAULT_MU_LOG, DEFAULT_SIGMA_SQ};

use crate::error::SimError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub peers: usize,
    pub endowments: EndowmentsSection,
    #[serde(default)]
    pub init: InitSection,
    pub run: RunSection,
    pub params: ParamsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "lowercase", deny_unknown_fields)]
pub enum EndowmentsSection {
    Explicit {
        values: Vec<f64>,
    },
    Lognormal {
        #[serde(default = "default_mu_log")]
        mu_log: f64,
        #[serde(default = "default_sigma_sq")]
        sigma_sq: f64,
        seed: u64,
    },
}

fn default_mu_log() -> f64 {
    DEFAULT_MU_LOG
}

fn default_sigma_sq() -> f64 {
    DEFAULT_SIGMA_SQ
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitModeName {
    Equal,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub mode: InitModeName,
    #[serde(default)]
    pub seed: u64,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            mode: InitModeName::Equal,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmName {
    Pr,
    Sparse,
    Egsparse,
}

impl From<AlgorithmName> for Algorithm {
    fn from(name: AlgorithmName) -> Self {
        match name {
            AlgorithmName::Pr => Algorithm::Pr,
            AlgorithmName::Sparse => Algorithm::Sparse,
            AlgorithmName::Egsparse => Algorithm::EgSparse,
        }
    }
}

impl From<Algorithm> for AlgorithmName {
    fn from(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Pr => AlgorithmName::Pr,
            Algorithm::Sparse => AlgorithmName::Sparse,
            Algorithm::EgSparse => AlgorithmName::Egsparse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub algorithm: AlgorithmName,
    pub max_iters: u64,
    #[serde(default = "default_conv_tol")]
    pub conv_tol: f64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
}

fn default_conv_tol() -> f64 {
    RunConfig::DEFAULT_CONV_TOL
}

fn default_record_every() -> u64 {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub c: f64,
    pub eps: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    SparsityParams::DEFAULT_TAU
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        if file.version != SCHEMA_VERSION {
            return Err(SimError::Scenario(format!(
                "unsupported scenario version {} (expected {SCHEMA_VERSION})",
                file.version
            )));
        }
        file.to_spec()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            SimError::Scenario(msg) => SimError::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    pub fn to_spec(&self) -> Result<ScenarioSpec, SimError> {
        let endowments = match &self.endowments {
            EndowmentsSection::Explicit { values } => {
                if values.len() != self.peers {
                    return Err(SimError::Scenario(format!(
                        "endowments.values has {} entries but peers = {}",
                        values.len(),
                        self.peers
                    )));
                }
                EndowmentSpec::Explicit(values.clone())
            }
            EndowmentsSection::Lognormal { mu_log, sigma_sq, seed } => EndowmentSpec::LogNormal {
                mu_log: *mu_log,
                sigma_sq: *sigma_sq,
                seed: *seed,
            },
        };
        let init = match self.init.mode {
            InitModeName::Equal => InitMode::Equal,
            InitModeName::Random => InitMode::Random { seed: self.init.seed },
        };
        let params = SparsityParams {
            c: self.params.c,
            eps: self.params.eps,
            tau: self.params.tau,
        };
        let run = RunConfig {
            max_iters: self.run.max_iters,
            conv_tol: self.run.conv_tol,
            algorithm: self.run.algorithm.into(),
            params,
            record_every: self.run.record_every,
        };
        run.validate()?;
        let spec = ScenarioSpec {
            n: self.peers,
            endowments,
            init,
            run,
        };
        spec.endowments()?;
        Ok(spec)
    }

    /// Endowment seed, if the endowments are drawn.
    pub fn endowment_seed(&self) -> Option<u64> {
        match self.endowments {
            EndowmentsSection::Lognormal { seed, .. } => Some(seed),
            EndowmentsSection::Explicit { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
version = 1
peers = 9

[endowments]
distribution = "lognormal"
seed = 3

[init]
mode = "random"
seed = 4

[run]
algorithm = "egsparse"
max_iters = 500

[params]
c = 0.1
eps = 0.01
"#;

    #[test]
    fn parses_with_defaults() {
        let file = ScenarioFile::parse(EXAMPLE).unwrap();
        let spec = file.to_spec().unwrap();
        assert_eq!(spec.n, 9);
        assert_eq!(spec.init, InitMode::Random { seed: 4 });
        assert_eq!(spec.run.algorithm, Algorithm::EgSparse);
        assert_eq!(spec.run.conv_tol, 1e-8);
        assert_eq!(spec.run.params.tau, 0.01);
        assert_eq!(
            spec.endowments,
            EndowmentSpec::LogNormal {
                mu_log: 4.5,
                sigma_sq: 0.25,
                seed: 3
            }
        );
    }

    #[test]
    fn round_trips_through_toml() {
        let file = ScenarioFile::parse(EXAMPLE).unwrap();
        assert_eq!(ScenarioFile::parse(&file.to_toml()).unwrap(), file);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = EXAMPLE.replace("c = 0.1", "c = 0.1\ngamma = 2");
        let err = ScenarioFile::parse(&text).unwrap_err().to_string();
        assert!(err.contains("gamma"), "{err}");
        assert!(err.contains("line"), "{err}");

        let text = EXAMPLE.replace("seed = 3", "seed = 3\nmean = 1.0");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn version_is_checked() {
        let text = EXAMPLE.replace("version = 1", "version = 2");
        assert!(ScenarioFile::parse(&text).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn explicit_endowments_must_match_peers() {
        let text = EXAMPLE.replace(
            "distribution = \"lognormal\"\nseed = 3",
            "distribution = \"explicit\"\nvalues = [1.0, 2.0]",
        );
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn invalid_parameters_are_errors() {
        assert!(ScenarioFile::parse(&EXAMPLE.replace("eps = 0.01", "eps = 0.0")).is_err());
        assert!(ScenarioFile::parse(&EXAMPLE.replace("max_iters = 500", "max_iters = 0")).is_err());
    }
}
