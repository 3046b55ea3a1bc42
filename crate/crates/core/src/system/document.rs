use serde::{Deserialize, Serialize};

use super::{registry::build, FriedrichsSystem, ParameterDomain};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientTags {
    pub tag: String,
    #[serde(default)]
    pub constants: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFlags {
    pub n1_structure: bool,
    pub kappa: Option<f64>,
    pub param_independent_boundary: bool,
    pub denseness_d1_d2: bool,
    pub solve_supported: bool,
    pub separable: bool,
    pub q_b: usize,
    pub declared_epsilon: f64,
}

/// Serializable description of a registry system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub id: String,
    pub d: usize,
    pub m: usize,
    pub coefficients: CoefficientTags,
    pub parameter_box: ParameterDomain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<SystemFlags>,
}

impl SystemDocument {
    pub fn from_system(sys: &FriedrichsSystem) -> Self {
        Self {
            id: sys.id.clone(),
            d: sys.d,
            m: sys.m,
            coefficients: CoefficientTags {
                tag: sys.coefficient_tag.clone(),
                constants: sys.constants.clone(),
            },
            parameter_box: sys.params.clone(),
            flags: Some(SystemFlags {
                n1_structure: sys.n1.is_some(),
                kappa: sys.n1.as_ref().map(|n| n.kappa),
                param_independent_boundary: sys.boundary.param_independent,
                denseness_d1_d2: sys.denseness_d1_d2,
                solve_supported: sys.solve_supported,
                separable: sys.expansion.is_some(),
                q_b: sys.q_b(),
                declared_epsilon: sys.declared_epsilon,
            }),
        }
    }

    /// Rebuilds the system from the registry. Flags are derived, so a
    /// document whose flags disagree with the rebuilt system is rejected.
    pub fn to_system(&self) -> Result<FriedrichsSystem> {
        let sys = build(&self.id, &self.coefficients.constants, Some(&self.parameter_box))?;
        if sys.d != self.d || sys.m != self.m {
            return Err(Error::invalid(format!(
                "document declares d = {}, m = {} but '{}' has d = {}, m = {}",
                self.d, self.m, self.id, sys.d, sys.m
            )));
        }
        if sys.coefficient_tag != self.coefficients.tag {
            return Err(Error::invalid(format!(
                "coefficient tag '{}' does not match '{}'",
                self.coefficients.tag, sys.coefficient_tag
            )));
        }
        if let Some(flags) = &self.flags {
            let derived = Self::from_system(&sys).flags.expect("flags");
            if *flags != derived {
                return Err(Error::invalid(format!(
                    "flags {flags:?} do not match the system's {derived:?}"
                )));
            }
        }
        Ok(sys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{registry_get, registry_ids};

    #[test]
    fn round_trip_through_json() {
        for id in registry_ids() {
            let sys = registry_get(&id, &serde_json::Value::Null).unwrap();
            let doc = SystemDocument::from_system(&sys);
            let text = serde_json::to_string(&doc).unwrap();
            let back: SystemDocument = serde_json::from_str(&text).unwrap();
            assert_eq!(back, doc);
            let rebuilt = back.to_system().unwrap();
            assert_eq!(SystemDocument::from_system(&rebuilt), doc);
        }
    }

    #[test]
    fn box_override_changes_epsilon() {
        let sys = registry_get("advection-reaction-1d", &serde_json::Value::Null).unwrap();
        let mut doc = SystemDocument::from_system(&sys);
        doc.parameter_box.lower = vec![2.0];
        doc.flags = None;
        assert_eq!(doc.to_system().unwrap().declared_epsilon, 2.0);
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"id":"cdr-1d","d":1,"m":2,"coefficients":{"tag":"x"},"parameter_box":{"lower":[1],"upper":[2]},"extra":1}"#;
        assert!(serde_json::from_str::<SystemDocument>(text).is_err());
    }
}
