use std::path::{Path, PathBuf};

use friedrichs_core::reduction::{ErrorNorm, ReferenceKind};
use friedrichs_core::sections::{SearchMode, SelectionRule};
use friedrichs_core::system::{ParameterDomain, SamplePlan};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: Option<SystemSpec>,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub reduction: ReductionSpec,
    #[serde(default)]
    pub sectional: Option<SectionalSpec>,
    #[serde(default)]
    pub validation: ValidationSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub id: String,
    #[serde(default)]
    pub raw: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cells {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub cells: Cells,
    #[serde(default)]
    pub order: usize,
    #[serde(default)]
    pub periodic: Vec<bool>,
    /// Needed only without a system.
    #[serde(default)]
    pub domain: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingKind {
    /// `count` points per axis.
    Grid,
    #[default]
    Uniform,
    Random,
    List,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    pub kind: SamplingKind,
    pub count: usize,
    pub points: Vec<Vec<f64>>,
    /// Parameter box when no system is configured.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            kind: SamplingKind::Uniform,
            count: 10,
            points: Vec::new(),
            lower: None,
            upper: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionSpec {
    pub n_max: usize,
    pub tol: f64,
    pub reference: Option<ReferenceKind>,
    pub error_norm: ErrorNorm,
}

impl Default for ReductionSpec {
    fn default() -> Self {
        ReductionSpec {
            n_max: 20,
            tol: 0.0,
            reference: None,
            error_norm: ErrorNorm::PerParameter,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionalSpec {
    pub target: TargetSpec,
    pub dictionaries: Vec<DictionarySpec>,
    #[serde(default = "default_sectional_n")]
    pub n_max: usize,
    #[serde(default)]
    pub tol: f64,
    #[serde(default)]
    pub rule: SelectionRule,
    #[serde(default)]
    pub mode: SearchMode,
}

fn default_sectional_n() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Discrete solutions of the configured system.
    Solution,
    /// `u₀(x − shift(μ))` on a periodic 1D mesh.
    ShiftedProfile { profile: ProfileSpec, shift: ShiftSpec },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Sine {
        frequency: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// `shift(μ) = scale · μ[axis]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftSpec {
    pub scale: f64,
    pub axis: usize,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec { scale: 1.0, axis: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DictionarySpec {
    Constant { id: String, source: ConstantSource },
    Shift { id: String, profiles: Vec<NamedProfile> },
}

impl DictionarySpec {
    pub fn id(&self) -> &str {
        match self {
            DictionarySpec::Constant { id, .. } | DictionarySpec::Shift { id, .. } => id,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantSource {
    /// Target evaluated at every training parameter.
    Training,
    /// Target evaluated at the listed parameters.
    Samples(Vec<Vec<f64>>),
    DofBasis,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedProfile {
    pub label: String,
    pub profile: ProfileSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    pub per_axis: usize,
    pub random_points: usize,
    pub random_params: Option<usize>,
    /// Parameters for the mesh-level checks.
    pub parameters: usize,
    pub coercivity_trials: usize,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        let plan = SamplePlan::default();
        ValidationSpec {
            per_axis: plan.per_axis,
            random_points: plan.random_points,
            random_params: plan.random_params,
            parameters: 3,
            coercivity_trials: 20,
        }
    }
}

impl ValidationSpec {
    pub fn plan(&self, seed: u64) -> SamplePlan {
        SamplePlan {
            per_axis: self.per_axis,
            random_points: self.random_points,
            random_params: self.random_params,
            seed,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, Value), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parsed config plus its canonical JSON value.
    pub fn parse(text: &str) -> Result<(Self, Value), CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("malformed JSON at line {}, column {}: {e}", e.line(), e.column()))
        })?;
        let cfg: ExperimentConfig = serde_json::from_value(value.clone())
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.check()?;
        Ok((cfg, value))
    }

    fn check(&self) -> Result<(), CliError> {
        if self.mesh.order > 1 {
            return Err(CliError::Config("mesh.order must be 0 or 1".into()));
        }
        if self.system.is_none() && self.mesh.domain.is_none() {
            return Err(CliError::Config("mesh.domain is required without a system".into()));
        }
        if self.reduction.n_max == 0 {
            return Err(CliError::Config("reduction.n_max must be positive".into()));
        }
        if let Some(s) = &self.sectional {
            if s.dictionaries.is_empty() {
                return Err(CliError::Config("sectional.dictionaries is empty".into()));
            }
        }
        match self.sampling.kind {
            SamplingKind::List if self.sampling.points.is_empty() => {
                Err(CliError::Config("sampling.points is empty".into()))
            }
            SamplingKind::List => Ok(()),
            _ if self.sampling.count == 0 => Err(CliError::Config("sampling.count must be positive".into())),
            _ => Ok(()),
        }
    }

    pub fn parameter_box(&self, system_box: Option<&ParameterDomain>) -> Result<ParameterDomain, CliError> {
        match (&self.sampling.lower, &self.sampling.upper, system_box) {
            (Some(lo), Some(hi), _) => ParameterDomain::new(lo.clone(), hi.clone(), Vec::new())
                .map_err(|e| CliError::Config(format!("sampling box: {e}"))),
            (None, None, Some(b)) => Ok(b.clone()),
            _ => Err(CliError::Config(
                "sampling.lower and sampling.upper are required without a system".into(),
            )),
        }
    }

    pub fn samples(&self, domain: &ParameterDomain, seed: u64) -> Vec<Vec<f64>> {
        let s = &self.sampling;
        match s.kind {
            SamplingKind::Grid => domain.grid(s.count),
            SamplingKind::Uniform => domain.uniform_samples(s.count),
            SamplingKind::Random => domain.random_samples(s.count, &mut ChaCha8Rng::seed_from_u64(seed)),
            SamplingKind::List => s.points.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let (c, _) = ExperimentConfig::parse(r#"{"system": {"id": "advection-reaction-1d"}, "mesh": {"cells": 8}}"#).unwrap();
        assert_eq!(c.sampling.count, 10);
        assert_eq!(c.reduction.n_max, 20);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::parse(r#"{"mesh": {"cells": 8, "colour": 1}, "system": {"id": "x"}}"#);
        assert!(matches!(e, Err(CliError::Config(_))));
    }

    #[test]
    fn malformed_json_reports_position() {
        let Err(CliError::Config(msg)) = ExperimentConfig::parse("{\n  \"mesh\": }") else {
            panic!("expected a config error");
        };
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn sectional_spec_parses() {
        let text = r#"{
            "mesh": {"cells": 64, "periodic": [true], "domain": [[0, 1]]},
            "sampling": {"kind": "uniform", "count": 8, "lower": [0], "upper": [1]},
            "sectional": {
                "target": {"kind": "shifted-profile", "profile": {"kind": "gaussian", "center": 0.5, "width": 0.05}, "shift": {}},
                "dictionaries": [
                    {"id": "c", "kind": "constant", "source": {"samples": [[0.1], [0.2]]}},
                    {"id": "s", "kind": "shift", "profiles": [{"label": "u0", "profile": {"kind": "sine", "frequency": 1}}]}
                ]
            }
        }"#;
        let (c, _) = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.sectional.unwrap().dictionaries.len(), 2);
    }

    #[test]
    fn empty_dictionary_list_is_a_config_error() {
        let text = r#"{"system": {"id": "advection-reaction-1d"}, "mesh": {"cells": 8},
            "sectional": {"target": {"kind": "solution"}, "dictionaries": []}}"#;
        assert!(matches!(ExperimentConfig::parse(text), Err(CliError::Config(_))));
    }
}
