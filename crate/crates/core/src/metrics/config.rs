use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Recall/precision weight in the METEOR harmonic mean.
    pub meteor_alpha: f64,
    /// Exponent of the fragmentation penalty.
    pub meteor_beta: f64,
    /// Maximum fragmentation penalty.
    pub meteor_gamma: f64,
    /// Recall weight in the ROUGE-L F-measure.
    pub rouge_beta: f64,
    /// Enables the Porter-stem matching stage of METEOR.
    pub use_stemming: bool,
    /// Candidates up to this many tokens get an exhaustive minimum-chunk
    /// alignment search; longer ones use the greedy alignment.
    pub exhaustive_max_tokens: usize,
    /// Node budget for one exhaustive search before it settles for the best
    /// alignment found so far.
    pub exhaustive_node_budget: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            meteor_alpha: 0.9,
            meteor_beta: 3.0,
            meteor_gamma: 0.5,
            rouge_beta: 1.2,
            use_stemming: true,
            exhaustive_max_tokens: 20,
            exhaustive_node_budget: 1_000_000,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.meteor_alpha) {
            return Err(Error::invalid(format!(
                "meteor_alpha must lie in [0, 1], got {}",
                self.meteor_alpha
            )));
        }
        for (name, value) in [
            ("meteor_beta", self.meteor_beta),
            ("meteor_gamma", self.meteor_gamma),
            ("rouge_beta", self.rouge_beta),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }
}
