use serde::{Deserialize, Serialize};

use super::SpaceError;

/// The frozen default solver configuration, also shipped as `config/solver.toml`.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../../config/solver.toml");

/// Solver hyperparameters.
///
/// Serialized as flat `key = value` TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Dimension of the space, 2 or 3.
    pub dim: usize,
    /// Temporal weighting base, `p_t = 1 - alpha_t^t`.
    pub alpha_t: f64,
    /// Spatial weighting base, `p_x = alpha_x^|x|`.
    pub alpha_x: f64,
    /// Exponent of `f(c) = c^gamma`.
    pub gamma: f64,
    /// Parent radius.
    pub r_par: f64,
    /// Maximum number of active words.
    pub n_max: usize,
    /// Gradient descent step size.
    pub step: f64,
    pub max_iters_per_round: usize,
    /// Convergence threshold on per-word displacement.
    pub epsilon: f64,
    /// Distance floor for the repulsion term, also the jitter radius for new words.
    pub delta: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dim: 2,
            alpha_t: 0.5,
            alpha_x: 0.8,
            gamma: 0.5,
            r_par: 1.5,
            n_max: 60,
            step: 0.05,
            max_iters_per_round: 200,
            epsilon: 1e-4,
            delta: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SpaceError> {
        let bad = |msg: &str| Err(SpaceError::InvalidConfig(msg.to_string()));
        if !(2..=3).contains(&self.dim) {
            return bad("dim must be 2 or 3");
        }
        if !(self.alpha_t > 0.0 && self.alpha_t < 1.0) {
            return bad("alpha_t must lie in (0, 1)");
        }
        if !(self.alpha_x > 0.0 && self.alpha_x < 1.0) {
            return bad("alpha_x must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.r_par > 0.0 && self.r_par.is_finite()) {
            return bad("r_par must be positive");
        }
        if self.n_max < 1 {
            return bad("n_max must be at least 1");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive");
        }
        if self.max_iters_per_round < 1 {
            return bad("max_iters_per_round must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        Ok(())
    }

    /// Parses and validates `key = value` TOML. Missing keys take defaults.
    pub fn from_toml(text: &str) -> Result<Self, SpaceError> {
        let cfg: SolverConfig =
            toml::from_str(text).map_err(|e| SpaceError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}
