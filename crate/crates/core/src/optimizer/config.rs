use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyper-parameters of the training loop.
///
/// Every field has a default, so a JSON config may name only what it
/// changes; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the top-push term; `1 - alpha` weighs the pull term.
    pub alpha: f64,
    /// Margin between the positive distance and the nearest negative.
    pub rho: f64,
    /// Initial step size.
    pub lambda0: f64,
    /// Step growth factor after an accepted (loss-decreasing) step.
    pub lambda_up: f64,
    /// Step shrink factor after a rejected (loss-increasing) step.
    pub lambda_down: f64,
    /// Budget of step attempts, accepted or rejected.
    pub max_iters: usize,
    /// Stop once `|f_t − f_{t−1}| / max(f_{t−1}, 1e-12)` drops below this.
    pub rel_tol: f64,
    /// Stop once the step size falls below this.
    pub lambda_floor: f64,
    pub rng_seed: u64,
    /// Fraction of anchors whose top-push terms enter each gradient.
    /// `1.0` is full-batch descent.
    pub anchor_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.1,
            rho: 1.0,
            lambda0: 1e-3,
            lambda_up: 1.01,
            lambda_down: 0.5,
            max_iters: 300,
            rel_tol: 1e-6,
            lambda_floor: 1e-12,
            rng_seed: 0,
            anchor_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return fail(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return fail(format!("lambda0 must be positive, got {}", self.lambda0));
        }
        if !(self.lambda_up > 1.0 && self.lambda_up.is_finite()) {
            return fail(format!("lambda_up must exceed 1, got {}", self.lambda_up));
        }
        if !(self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            return fail(format!("lambda_down must lie in (0, 1), got {}", self.lambda_down));
        }
        if self.max_iters == 0 {
            return fail("max_iters must be positive".into());
        }
        if !(self.rel_tol >= 0.0 && self.rel_tol.is_finite()) {
            return fail(format!("rel_tol must be nonnegative, got {}", self.rel_tol));
        }
        if !(self.lambda_floor > 0.0) {
            return fail(format!("lambda_floor must be positive, got {}", self.lambda_floor));
        }
        if !(self.anchor_fraction > 0.0 && self.anchor_fraction <= 1.0) {
            return fail(format!(
                "anchor_fraction must lie in (0, 1], got {}",
                self.anchor_fraction
            ));
        }
        Ok(())
    }
}
