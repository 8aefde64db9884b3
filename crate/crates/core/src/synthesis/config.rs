use serde::{Deserialize, Serialize};

use crate::dynamics::{steps_for, EstimationParams};
use crate::error::{NcpError, Result};
use crate::search::SearchParams;

/// How the initial grid sizes its cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridMode {
    /// Cell radius about `fraction · ‖x_i − x*‖`; splitting supplies the rest.
    Fraction { initial_radius_fraction: f64 },
    /// Covering ratio from the known exponential-stability constants.
    Rho { lambda: f64, k_gain: f64 },
}

impl Default for GridMode {
    fn default() -> Self {
        GridMode::Fraction { initial_radius_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapParams {
    pub enabled: bool,
    /// `α′ = alpha_ratio · α` for bootstrapped cells.
    pub alpha_ratio: f64,
    /// Probe points per landing ball when testing it against the anchors.
    pub probe_samples: usize,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams { enabled: true, alpha_ratio: 0.5, probe_samples: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub alpha: f64,
    pub tau_max: f64,
    pub eps: f64,
    pub dt: f64,
    /// Duration of the default control; `None` means one step.
    pub default_tau: Option<f64>,
    pub max_splits: usize,
    pub grid: GridMode,
    pub search: SearchParams,
    pub estimation: EstimationParams,
    pub bootstrap: BootstrapParams,
    pub covering_samples: usize,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            alpha: 0.01,
            tau_max: 1.0,
            eps: 0.01,
            dt: 0.01,
            default_tau: None,
            max_splits: 3,
            grid: GridMode::default(),
            search: SearchParams::default(),
            estimation: EstimationParams::default(),
            bootstrap: BootstrapParams::default(),
            covering_samples: 10_000,
            seed: 0,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(NcpError::config("alpha", "must be > 0"));
        }
        if !(self.dt > 0.0) {
            return Err(NcpError::config("dt", "must be > 0"));
        }
        if !(self.tau_max >= self.dt) {
            return Err(NcpError::config("tau_max", "must be >= dt"));
        }
        steps_for(self.tau_max, self.dt).map_err(|_| NcpError::config("tau_max", "must be a multiple of dt"))?;
        if let Some(t) = self.default_tau {
            let n = steps_for(t, self.dt).map_err(|_| NcpError::config("default_tau", "must be a multiple of dt"))?;
            if n == 0 || t > self.tau_max {
                return Err(NcpError::config("default_tau", "must lie in [dt, tau_max]"));
            }
        }
        if !(self.eps > 0.0) {
            return Err(NcpError::config("eps", "must be > 0"));
        }
        match self.grid {
            GridMode::Fraction { initial_radius_fraction: f } if !(f > 0.0 && f < 1.0) => {
                return Err(NcpError::config("grid.initial_radius_fraction", "must lie in (0, 1)"));
            }
            GridMode::Rho { lambda, k_gain } if !(lambda > self.alpha) || !(k_gain >= 1.0) => {
                return Err(NcpError::config("grid", "rho mode needs lambda > alpha and k_gain >= 1"));
            }
            _ => {}
        }
        if !(self.bootstrap.alpha_ratio > 0.0 && self.bootstrap.alpha_ratio < 1.0) {
            return Err(NcpError::config("bootstrap.alpha_ratio", "must lie in (0, 1)"));
        }
        if self.covering_samples < 10_000 {
            return Err(NcpError::config("covering_samples", "must be >= 10000"));
        }
        if !(self.estimation.inflation >= 1.0) {
            return Err(NcpError::config("estimation.inflation", "must be >= 1"));
        }
        self.search.validate()
    }

    pub fn tau0(&self) -> f64 {
        self.default_tau.unwrap_or(self.dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SynthesisConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let c = SynthesisConfig { alpha: 0.0, ..Default::default() };
        match c.validate() {
            Err(NcpError::InvalidConfig { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_misaligned_tau() {
        let c = SynthesisConfig { tau_max: 1.005, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn parses_partial_json() {
        let c: SynthesisConfig =
            serde_json::from_str(r#"{"alpha": 0.5, "grid": {"mode": "rho", "lambda": 1.0, "k_gain": 1.0}}"#).unwrap();
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.grid, GridMode::Rho { lambda: 1.0, k_gain: 1.0 });
        assert!(serde_json::from_str::<SynthesisConfig>(r#"{"alpah": 1}"#).is_err());
    }
}
