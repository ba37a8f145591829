//! Gamma–Poisson learning of the base rate.
//!
//! Shocks arrive as a Poisson process with intensity `λ f(s(t))`, so given
//! the usage `U = ∫ f(s(u)) du` the shock count is Poisson with mean `λ U`
//! and a Gamma prior on `λ` stays Gamma.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Gamma(alpha, beta)` in the shape/rate parametrization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaPrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(Self { alpha, beta })
    }

    /// Prior with the given mean and coefficient of variation:
    /// `alpha = 1/cv²`, `beta = alpha/mean`.
    pub fn from_mean_cv(mean: f64, cv: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::InvalidParameter {
                name: "prior mean",
                reason: format!("must be positive, got {mean}"),
            });
        }
        if !(cv.is_finite() && cv > 0.0) {
            return Err(Error::InvalidParameter {
                name: "prior cv",
                reason: format!("must be positive, got {cv}"),
            });
        }
        let alpha = 1.0 / (cv * cv);
        Self::new(alpha, alpha / mean)
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }

    pub fn cv(&self) -> f64 {
        1.0 / self.alpha.sqrt()
    }
}

/// Accumulated usage `∫ f(s(u)) du`.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct UsageIntegral(pub f64);

impl UsageIntegral {
    pub fn add(&mut self, f_value: f64, duration: f64) {
        self.0 += f_value * duration;
    }
}

/// Posterior after `shocks` observed over `usage`.
pub fn posterior_update(prior: GammaPrior, shocks: u64, usage: UsageIntegral) -> GammaPrior {
    GammaPrior {
        alpha: prior.alpha + shocks as f64,
        beta: prior.beta + usage.0,
    }
}

/// Posterior mean used as the certainty-equivalent estimate of the base rate.
pub fn ce_estimate(prior: GammaPrior, shocks: u64, usage: UsageIntegral) -> f64 {
    posterior_update(prior, shocks, usage).mean()
}

/// Re-optimization epochs `t_j = j T / (n_opt + 1)` for `j = 1..=n_opt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CESchedule {
    pub n_opt: usize,
    pub epochs: Vec<f64>,
}

pub fn ce_schedule(horizon: f64, n_opt: usize) -> CESchedule {
    let epochs = (1..=n_opt)
        .map(|j| j as f64 * horizon / (n_opt + 1) as f64)
        .collect();
    CESchedule { n_opt, epochs }
}

impl CESchedule {
    /// Epochs snapped to the nearest cell boundary of a `dt` grid.
    pub fn epoch_cells(&self, dt: f64) -> Vec<usize> {
        self.epochs.iter().map(|t| (t / dt).round() as usize).collect()
    }
}
