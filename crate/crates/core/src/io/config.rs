use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelRegistry, SystemModel};
use crate::error::{NcpError, Result};
use crate::geometry::{Metric, Norm, Region};
use crate::policy::ModelRef;
use crate::synthesis::SynthesisConfig;

/// One JSON document describing a run: the system, the working norm, the
/// region to certify and the synthesis knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelRef,
    pub norm: Norm,
    pub region: Region,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.synthesis.validate()?;
        Ok(cfg)
    }

    /// Parsed config plus the raw bytes it came from (for hashing).
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = fs::read_to_string(path)?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn build_model(&self, registry: &ModelRegistry) -> Result<SystemModel> {
        let model = registry.build(&self.model.name, &self.model.params)?;
        if self.norm.dim() != model.dim {
            return Err(NcpError::config(
                "norm.weights",
                format!("has {} entries, model state dimension is {}", self.norm.dim(), model.dim),
            ));
        }
        self.region.validate(&Metric::new(self.norm.clone(), model.angular_flags())?)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENDULUM: &str = r#"{
        "model": {"name": "inverted_pendulum", "params": {}},
        "norm": {"kind": "max", "weights": [1.0, 0.2]},
        "region": {"kind": "box", "lower": [-3.141592653589793, -15.707963267948966], "upper": [3.141592653589793, 15.707963267948966]},
        "synthesis": {"alpha": 0.01, "tau_max": 2.0, "eps": 0.01}
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::parse(PENDULUM).unwrap();
        let model = cfg.build_model(&ModelRegistry::builtin()).unwrap();
        assert_eq!(model.dim, 2);
        assert_eq!(cfg.synthesis.dt, 0.01);
    }

    #[test]
    fn bad_alpha_names_the_field() {
        let text = PENDULUM.replace("\"alpha\": 0.01", "\"alpha\": 0.0");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("alpha"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = PENDULUM.replace("\"synthesis\"", "\"synthesys\"");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn norm_dimension_mismatch() {
        let text = PENDULUM.replace("[1.0, 0.2]", "[1.0]");
        let cfg = RunConfig::parse(&text).unwrap();
        let err = cfg.build_model(&ModelRegistry::builtin()).unwrap_err().to_string();
        assert!(err.contains("norm.weights"), "{err}");
    }
}
