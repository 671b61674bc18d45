//! Group-relative advantages and the clipped surrogate objective.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::policy::{PolicySnapshot, Rollout};
use crate::stats;
use crate::tasks::TaskInstance;
use crate::vocab::Token;

/// Added to the group reward std before dividing.
pub const ADVANTAGE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub clip_eps: f64,
    pub kl_beta: f64,
    pub learning_rate: f64,
    pub epochs_per_batch: usize,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            clip_eps: 0.2,
            kl_beta: 0.04,
            learning_rate: 1e-2,
            epochs_per_batch: 1,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::Config("group_size must be at least 2".into()));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::Config(format!("clip_eps {} outside (0,1)", self.clip_eps)));
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            return Err(Error::Config(format!("kl_beta {} must be >= 0", self.kl_beta)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs_per_batch == 0 {
            return Err(Error::Config("epochs_per_batch must be at least 1".into()));
        }
        Ok(())
    }
}

/// `G` rollouts for one task plus their reward statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBatch {
    pub task: TaskInstance,
    pub rollouts: Vec<Rollout>,
    pub reward_mean: f64,
    pub reward_std: f64,
}

impl GroupBatch {
    pub fn new(task: TaskInstance, rollouts: Vec<Rollout>) -> Result<Self> {
        if rollouts.len() < 2 {
            return Err(Error::Config("a group needs at least two rollouts".into()));
        }
        let r = Self::rewards_of(&rollouts);
        Ok(Self {
            task,
            reward_mean: stats::mean(&r),
            reward_std: stats::std_pop(&r),
            rollouts,
        })
    }

    fn rewards_of(rollouts: &[Rollout]) -> Vec<f64> {
        rollouts.iter().map(|r| r.reward.total).collect()
    }

    pub fn rewards(&self) -> Vec<f64> {
        Self::rewards_of(&self.rollouts)
    }
}

/// `(r_i - mean) / (std + 1e-8)` with population std; an all-equal group
/// yields exact zeros.
pub fn group_advantages(rewards: &[f64]) -> Vec<f64> {
    let m = stats::mean(rewards);
    if rewards.iter().all(|r| Some(r) == rewards.first()) {
        return vec![0.0; rewards.len()];
    }
    let s = stats::std_pop(rewards) + ADVANTAGE_EPS;
    rewards.iter().map(|r| (r - m) / s).collect()
}

/// Per-token estimator `exp(ref - pol) - (ref - pol) - 1`, averaged.
pub fn token_kl(policy_logprobs: &[f64], ref_logprobs: &[f64]) -> f64 {
    assert_eq!(policy_logprobs.len(), ref_logprobs.len(), "length mismatch");
    let ks: Vec<f64> = policy_logprobs
        .iter()
        .zip(ref_logprobs)
        .map(|(p, r)| kl_term(r - p))
        .collect();
    stats::mean(&ks)
}

fn kl_term(delta: f64) -> f64 {
    // expm1 keeps tiny deltas from cancelling to a negative value
    (libm::expm1(delta) - delta).max(0.0)
}

/// Objective value, its gradient and the mean KL term.
#[derive(Debug, Clone, PartialEq)]
pub struct GrpoEval {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Group mean of per-rollout token-mean KL estimates.
    pub kl: f64,
}

/// Clipped surrogate with KL penalty for one group, to be maximized.
///
/// Each rollout's shaped advantage is broadcast over its tokens, surrogate
/// and KL are token-averaged per rollout and then averaged over the group.
/// Advantages are constants; only `policy` receives gradient.
pub fn grpo_objective(
    policy: &PolicySnapshot,
    old: &PolicySnapshot,
    reference: &PolicySnapshot,
    group: &GroupBatch,
    shaped_advantages: &[f64],
    cfg: &GrpoConfig,
) -> Result<GrpoEval> {
    if shaped_advantages.len() != group.rollouts.len() {
        return Err(Error::Domain(format!(
            "{} shaped advantages for {} rollouts",
            shaped_advantages.len(),
            group.rollouts.len()
        )));
    }
    let ctx = &group.task.context;
    let g = group.rollouts.len() as f64;
    let (lo, hi) = (1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    let mut value = 0.0;
    let mut kl_total = 0.0;
    let mut grad = vec![0.0; policy.params().len()];
    for (i, (ro, &adv)) in group.rollouts.iter().zip(shaped_advantages).enumerate() {
        let toks = &ro.tokens;
        let (lp, _) = policy.logprob_and_entropy(ctx, toks)?;
        let (lp_old, _) = old.logprob_and_entropy(ctx, toks)?;
        let (lp_ref, _) = reference.logprob_and_entropy(ctx, toks)?;
        let t = toks.len() as f64;
        let mut weights = Vec::with_capacity(toks.len());
        let mut surr_sum = 0.0;
        let mut kl_sum = 0.0;
        for k in 0..toks.len() {
            let ratio = libm::exp(lp[k] - lp_old[k]);
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(lo, hi) * adv;
            let d_surr = if unclipped <= clipped { ratio * adv } else { 0.0 };
            let delta = lp_ref[k] - lp[k];
            let d_kl = 1.0 - libm::exp(delta);
            surr_sum += unclipped.min(clipped);
            kl_sum += kl_term(delta);
            weights.push((d_surr - cfg.kl_beta * d_kl) / (t * g));
        }
        let contrib = (surr_sum - cfg.kl_beta * kl_sum) / t;
        if !contrib.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical {
                rollout: i,
                detail: format!("non-finite objective term {contrib}"),
            });
        }
        value += contrib / g;
        kl_total += kl_sum / t;
        policy.accumulate_weighted_grad(ctx, toks, &weights, &mut grad)?;
    }
    if let Some(j) = grad.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numerical { rollout: 0, detail: format!("non-finite gradient at parameter {j}") });
    }
    Ok(GrpoEval { value, grad, kl: kl_total / g })
}

/// Negative mean token log-likelihood of `target` and its gradient.
pub fn sft_objective(policy: &PolicySnapshot, context: &[Token], target: &[Token]) -> Result<(f64, Vec<f64>)> {
    if target.is_empty() {
        return Err(Error::Domain("target must be nonempty".into()));
    }
    let (lp, _) = policy.logprob_and_entropy(context, target)?;
    let t = target.len() as f64;
    let loss = -lp.iter().sum::<f64>() / t;
    let mut grad = vec![0.0; policy.params().len()];
    policy.accumulate_weighted_grad(context, target, &vec![-1.0 / t; target.len()], &mut grad)?;
    Ok((loss, grad))
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// One descent step on `grad` (the gradient of a loss).
    pub fn descend(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * (mhat / (libm::sqrt(vhat) + self.eps) + self.weight_decay * params[i]);
        }
    }

    /// One ascent step on `grad` (the gradient of an objective).
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        self.descend(params, &neg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rewards_standardize_to_unit() {
        let a = group_advantages(&[1.0, 0.0]);
        assert!((a[0] - 1.0).abs() < 1e-6 && (a[1] + 1.0).abs() < 1e-6);
        assert_eq!(group_advantages(&[0.3, 0.3, 0.3]), vec![0.0; 3]);
    }

    #[test]
    fn kl_estimator_examples() {
        assert_eq!(token_kl(&[-1.0, -2.0], &[-1.0, -2.0]), 0.0);
        let k = token_kl(&[-2.0], &[-1.0]);
        assert!((k - (core::f64::consts::E - 2.0)).abs() < 1e-12);
        assert!((k - 0.718282).abs() < 1e-6);
    }

    #[test]
    fn config_ranges() {
        assert!(GrpoConfig::default().validate().is_ok());
        for bad in [
            GrpoConfig { group_size: 1, ..Default::default() },
            GrpoConfig { clip_eps: 1.0, ..Default::default() },
            GrpoConfig { kl_beta: -0.1, ..Default::default() },
            GrpoConfig { epochs_per_batch: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut opt = AdamW::new(0.1, 2);
        let mut p = [1.0, -1.0];
        opt.descend(&mut p, &[2.0, -3.0]);
        // first bias-corrected step has magnitude lr
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }
}
