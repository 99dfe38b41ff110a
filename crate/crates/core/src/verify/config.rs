//! Experiment configuration: the JSON wire format consumed by `verify`.

use serde::{Deserialize, Serialize};

use super::events::{Model, TailEvent};
use super::VerifyError;
use crate::bounds::FormulaId;
use crate::sim::{DistSpec, IncrementModel};

pub const SCHEMA_VERSION: u32 = 1;

/// Minimum replication count accepted in verification mode.
pub const MIN_VERIFY_REPS: u64 = 1000;

/// Serializable model description. Converted to a [`Model`] together with
/// the resolved step count `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Iid {
        dist: DistSpec,
    },
    /// Conditionally symmetric increments with the built-in variance-damped
    /// scale rule.
    CondSymmetric {
        base: DistSpec,
    },
    Ar1 {
        theta: f64,
        noise_c: f64,
    },
}

impl ModelSpec {
    pub fn build(&self, n: usize) -> Model {
        match *self {
            ModelSpec::Iid { dist } => Model::Martingale(IncrementModel::iid(dist, n)),
            ModelSpec::CondSymmetric { base } => {
                Model::Martingale(IncrementModel::cond_symmetric(base, n))
            }
            ModelSpec::Ar1 { theta, noise_c } => Model::Ar1 { theta, noise_c, n },
        }
    }
}

/// One bound to check against a case's empirical tail. `formula` selects
/// the formula; the optional fields supply formula-specific parameters:
///
/// * `y_split` — the free split level of `iid_self_norm`;
/// * `moment_p` — the moment exponent in `(1, 2]` (default 2);
/// * `holder_p` — pin the Hölder exponent of an expectation-type bound
///   instead of optimizing it;
/// * `theta_abs_max` — certified bound on `|theta|` for the AR bounds
///   (defaults to the simulated `|theta|`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub formula: FormulaId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_split: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_abs_max: Option<f64>,
}

impl BoundSpec {
    pub fn formula_only(formula: FormulaId) -> Self {
        BoundSpec {
            formula,
            y_split: None,
            moment_p: None,
            holder_p: None,
            theta_abs_max: None,
        }
    }
}

/// One verification case: an event on a model, checked against one or more
/// bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub event: TailEvent,
    pub bounds: Vec<BoundSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
}

/// Top-level experiment configuration. `model`, `n` and `reps` are defaults
/// that individual cases may override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub master_seed: u64,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    pub cases: Vec<CaseConfig>,
}

fn default_ci_level() -> f64 {
    0.99
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self, VerifyError> {
        let config: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| VerifyError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(VerifyError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(VerifyError::Config(format!(
                "ci_level {} not in (0, 1)",
                self.ci_level
            )));
        }
        if self.cases.is_empty() {
            return Err(VerifyError::Config("no cases".to_string()));
        }
        for (i, case) in self.cases.iter().enumerate() {
            let tag = case.name.clone().unwrap_or_else(|| format!("case #{i}"));
            if case.bounds.is_empty() {
                return Err(VerifyError::Config(format!("{tag}: no bounds")));
            }
            if case.model.is_none() && self.model.is_none() {
                return Err(VerifyError::Config(format!("{tag}: no model")));
            }
            if case.n.is_none() && self.n.is_none() {
                return Err(VerifyError::Config(format!("{tag}: no n")));
            }
            let reps = case.reps.or(self.reps).unwrap_or(0);
            if reps < MIN_VERIFY_REPS {
                return Err(VerifyError::Config(format!(
                    "{tag}: reps {reps} below verification minimum {MIN_VERIFY_REPS}"
                )));
            }
        }
        Ok(())
    }

    /// Resolved `(name, model, n, reps)` for case `index`.
    pub(crate) fn resolve(&self, index: usize) -> (String, Model, usize, u64) {
        let case = &self.cases[index];
        let name = case.name.clone().unwrap_or_else(|| format!("case-{index}"));
        let n = case.n.or(self.n).expect("validated");
        let spec = case
            .model
            .as_ref()
            .or(self.model.as_ref())
            .expect("validated");
        let reps = case.reps.or(self.reps).expect("validated");
        (name, spec.build(n), n, reps)
    }
}
