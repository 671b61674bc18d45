//! Uncertainty-aware advantage shaping.
//!
//! A rollout's sequence entropy is compared against an adaptive threshold
//! (an exponential moving average of batch-mean entropies). The signed gap,
//! squashed by `tanh`, scales an entropy bonus added to the advantage:
//!
//! ```text
//! omega   = tanh(gamma * (H_seq - tau))
//! shaped  = A + lambda * omega * H_seq
//! tau_s   = alpha * tau_{s-1} + (1 - alpha) * mean(H_seq over batch)
//! ```

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::policy::PolicySnapshot;
use crate::rng;
use crate::stats;
use crate::tasks::TaskInstance;

pub const DEFAULT_ALPHA: f64 = 0.99;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UadtState {
    /// Adaptive threshold in nats.
    pub tau: f64,
    /// EMA decay.
    pub alpha: f64,
    /// tanh steepness.
    pub gamma: f64,
    /// Shaping scale.
    pub lambda: f64,
    pub step: u64,
}

impl UadtState {
    pub fn new(tau: f64, alpha: f64, gamma: f64, lambda: f64) -> Result<Self> {
        let s = Self { tau, alpha, gamma, lambda, step: 0 };
        s.validate()?;
        Ok(s)
    }

    pub fn with_defaults(tau: f64) -> Self {
        Self { tau, alpha: DEFAULT_ALPHA, gamma: DEFAULT_GAMMA, lambda: DEFAULT_LAMBDA, step: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() {
            return Err(Error::Config("tau must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0,1)", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma {} must be > 0", self.gamma)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }

    /// One EMA update with the mean of `batch_entropies`.
    pub fn update_threshold(&self, batch_entropies: &[f64]) -> Self {
        assert!(!batch_entropies.is_empty(), "batch_entropies must be nonempty");
        self.update_with_mean(stats::mean(batch_entropies))
    }

    pub fn update_with_mean(&self, batch_mean: f64) -> Self {
        Self {
            tau: self.alpha * self.tau + (1.0 - self.alpha) * batch_mean,
            step: self.step + 1,
            ..*self
        }
    }

    pub fn uncertainty_factor(&self, seq_entropy: f64) -> f64 {
        libm::tanh(self.gamma * (seq_entropy - self.tau))
    }

    pub fn shape_advantage(&self, advantage: f64, seq_entropy: f64) -> f64 {
        advantage + self.lambda * self.uncertainty_factor(seq_entropy) * seq_entropy
    }
}

/// Which entropy a rollout is shaped with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropyGranularity {
    /// The rollout's own sequence entropy.
    #[default]
    Rollout,
    /// The mean sequence entropy of the rollout's group.
    Question,
}

/// Shapes a group's advantages; `entropies[i]` belongs to rollout `i`.
pub fn shape_group(
    state: &UadtState,
    advantages: &[f64],
    entropies: &[f64],
    granularity: EntropyGranularity,
) -> Vec<f64> {
    let group_mean = stats::mean(entropies);
    advantages
        .iter()
        .zip(entropies)
        .map(|(a, h)| {
            let h = match granularity {
                EntropyGranularity::Rollout => *h,
                EntropyGranularity::Question => group_mean,
            };
            state.shape_advantage(*a, h)
        })
        .collect()
}

/// Median sequence entropy of `rollouts_per_task` samples per task under
/// `policy` (temperature 1).
pub fn init_threshold(
    policy: &PolicySnapshot,
    tasks: &[TaskInstance],
    rollouts_per_task: usize,
    seed: u64,
    max_len: usize,
) -> Result<f64> {
    if tasks.is_empty() || rollouts_per_task == 0 {
        return Err(Error::Config("threshold init needs tasks and rollouts".into()));
    }
    let mut ent = Vec::with_capacity(tasks.len() * rollouts_per_task);
    for task in tasks {
        for j in 0..rollouts_per_task {
            let s = rng::derive_seed(&[seed, rng::hash_str(&task.id), j as u64, 0x7a0]);
            ent.push(policy.sample_rollout(task, s, max_len)?.seq_entropy);
        }
    }
    Ok(stats::median(&ent))
}
