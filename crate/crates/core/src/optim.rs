use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl RmsPropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rmsprop decay must lie in (0, 1), got {}",
                self.decay
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rmsprop epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// One RMSprop update, in place:
///
/// ```text
/// state  <- decay * state + (1 - decay) * grad^2
/// params <- params - lr * grad / (sqrt(state) + eps)
/// ```
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], state: &mut [f64], config: &RmsPropConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::ShapeMismatch(format!(
            "params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.len()
        )));
    }
    let RmsPropConfig {
        learning_rate,
        decay,
        epsilon,
    } = *config;
    for ((p, &g), s) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
        *s = decay * *s + (1.0 - decay) * g * g;
        *p -= learning_rate * g / (libm::sqrt(*s) + epsilon);
    }
    Ok(())
}

/// RMSprop with its running mean of squared gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    pub mean_sq: Vec<f64>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, num_params: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            mean_sq: alloc::vec![0.0; num_params],
        })
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        rmsprop_step(params, grads, &mut self.mean_sq, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_leave_params_and_decay_state() {
        let cfg = RmsPropConfig {
            learning_rate: 0.1,
            decay: 0.9,
            epsilon: 1e-8,
        };
        let mut p = [1.0, -2.0];
        let mut s = [4.0, 1.0];
        rmsprop_step(&mut p, &[0.0, 0.0], &mut s, &cfg).unwrap();
        assert_eq!(p, [1.0, -2.0]);
        assert!((s[0] - 3.6).abs() < 1e-15 && (s[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn scalar_hand_evaluation() {
        let cfg = RmsPropConfig {
            learning_rate: 0.1,
            decay: 0.9,
            epsilon: 1e-8,
        };
        let mut p = [1.0];
        let mut s = [0.0];
        rmsprop_step(&mut p, &[2.0], &mut s, &cfg).unwrap();
        assert!((s[0] - 0.4).abs() < 1e-15);
        // 1 - 0.2 / (sqrt(0.4) + 1e-8)
        assert!((p[0] - 0.683_772_239).abs() < 1e-9, "{}", p[0]);
    }

    #[test]
    fn second_identical_step_is_smaller() {
        let cfg = RmsPropConfig {
            learning_rate: 0.1,
            decay: 0.9,
            epsilon: 1e-8,
        };
        let mut opt = RmsProp::new(cfg, 1).unwrap();
        let mut p = [0.0];
        opt.step(&mut p, &[1.0]).unwrap();
        let first = p[0].abs();
        let before = p[0];
        opt.step(&mut p, &[1.0]).unwrap();
        let second = (p[0] - before).abs();
        assert!(second < first);
    }

    #[test]
    fn shape_mismatch() {
        let cfg = RmsPropConfig::default();
        assert!(rmsprop_step(&mut [0.0; 2], &[0.0; 3], &mut [0.0; 2], &cfg).is_err());
    }

    #[test]
    fn bad_hyperparameters() {
        let mut cfg = RmsPropConfig::default();
        cfg.decay = 1.0;
        assert!(cfg.validate().is_err());
        cfg = RmsPropConfig::default();
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
    }
}
