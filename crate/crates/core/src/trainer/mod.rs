//! In-memory training drivers.
//!
//! Everything here is a pure function of the configuration, the task suites
//! and the seed; file output is the caller's business. Wall-clock time comes
//! from an injected [`Clock`] and is kept out of the deterministic records.

mod ablation;
mod heatmap;

pub use ablation::{run_ablation, AblationArm, AblationReport, AblationSeed, EntropyHistogram};
pub use heatmap::{Heatmap, HeatmapCell, RolloutTriple};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, EvalReport};
use crate::grpo::{self, group_advantages, sft_objective, AdamW, GroupBatch, GrpoConfig};
use crate::policy::{PolicyShape, PolicySnapshot};
use crate::rewards::{compute_reward, RewardWeights};
use crate::rng;
use crate::stats;
use crate::tasks::{check_disjoint, TaskInstance, TaskSuite};
use crate::uadt::{init_threshold, shape_group, EntropyGranularity, UadtState};
use crate::vocab::Vocab;

/// Source of elapsed seconds for [`StepMetrics::wall_time`].
pub trait Clock {
    fn elapsed(&mut self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub num_labels: usize,
    pub num_symbols: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self { num_labels: 4, num_symbols: 0, embed_dim: 16, hidden_dim: 32, init_scale: 0.05 }
    }
}

impl PolicyConfig {
    pub fn shape(&self) -> Result<PolicyShape> {
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("embed_dim and hidden_dim must be positive".into()));
        }
        Ok(PolicyShape {
            vocab: Vocab::new(self.num_labels, self.num_symbols)?,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
        })
    }

    pub fn init_policy(&self, seed: u64) -> Result<PolicySnapshot> {
        Ok(PolicySnapshot::init(self.shape()?, self.init_scale, rng::derive_seed(&[seed, 0x1417])))
    }
}

/// Where the entropy used for shaping comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropySource {
    /// Stored at sampling time under the rollout policy.
    #[default]
    SamplingTime,
    /// Re-scored under the current policy before the update.
    Rescored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UadtConfig {
    pub enabled: bool,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub entropy_source: EntropySource,
    pub granularity: EntropyGranularity,
    /// Training tasks sampled for the initial threshold (first N, all if 0).
    pub init_tasks: usize,
    pub init_rollouts_per_task: usize,
}

impl Default for UadtConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            alpha: crate::uadt::DEFAULT_ALPHA,
            gamma: crate::uadt::DEFAULT_GAMMA,
            lambda: crate::uadt::DEFAULT_LAMBDA,
            entropy_source: EntropySource::SamplingTime,
            granularity: EntropyGranularity::Rollout,
            init_tasks: 64,
            init_rollouts_per_task: 4,
        }
    }
}

impl UadtConfig {
    /// Shaping and threshold updates run only when enabled with `lambda > 0`.
    pub fn active(&self) -> bool {
        self.enabled && self.lambda > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SftConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-2, epochs: 10, batch_size: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub max_len: usize,
    pub policy: PolicyConfig,
    pub sft: SftConfig,
    pub grpo: GrpoConfig,
    pub uadt: UadtConfig,
    pub weights: RewardWeights,
    /// RL epochs over the training suites.
    pub epochs: usize,
    /// Questions per RL step.
    pub batch_size: usize,
    /// Optional cap on RL steps.
    pub max_steps: Option<usize>,
    /// Evaluate and checkpoint every this many RL steps (0 = final only).
    pub eval_every: usize,
    pub eval: EvalOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            max_len: 16,
            policy: PolicyConfig::default(),
            sft: SftConfig::default(),
            grpo: GrpoConfig::default(),
            uadt: UadtConfig::default(),
            weights: RewardWeights::default(),
            epochs: 5,
            batch_size: 8,
            max_steps: None,
            eval_every: 50,
            eval: EvalOptions { max_len: 16, ..EvalOptions::default() },
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.grpo.validate()?;
        self.policy.shape()?;
        UadtState::new(0.0, self.uadt.alpha, self.uadt.gamma, self.uadt.lambda)?;
        if self.max_len == 0 || self.batch_size == 0 || self.sft.batch_size == 0 {
            return Err(Error::Config("max_len and batch sizes must be positive".into()));
        }
        if self.sft.learning_rate.is_nan() || self.sft.learning_rate <= 0.0 {
            return Err(Error::Config("sft learning_rate must be positive".into()));
        }
        if self.uadt.init_rollouts_per_task == 0 {
            return Err(Error::Config("init_rollouts_per_task must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SftStep {
    pub step: usize,
    pub epoch: usize,
    /// Batch-mean loss before the update.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftOutcome {
    pub policy: PolicySnapshot,
    pub log: Vec<SftStep>,
}

/// Mean supervised loss over every instance of `suites`.
pub fn dataset_loss(policy: &PolicySnapshot, suites: &[TaskSuite]) -> Result<f64> {
    let mut losses = Vec::new();
    for t in suites.iter().flat_map(|s| &s.instances) {
        let (lp, _) = policy.logprob_and_entropy(&t.context, cot_of(t)?)?;
        losses.push(-stats::mean(&lp));
    }
    Ok(stats::mean(&losses))
}

fn cot_of(t: &TaskInstance) -> Result<&[crate::vocab::Token]> {
    t.cot_target
        .as_deref()
        .ok_or_else(|| Error::Config(format!("task {} has no cot_target", t.id)))
}

/// Supervised fine-tuning on reasoning traces from a fresh policy.
pub fn run_sft(cfg: &TrainConfig, train: &[TaskSuite]) -> Result<SftOutcome> {
    let init = cfg.policy.init_policy(cfg.seed)?;
    run_sft_from(cfg, init, train)
}

pub fn run_sft_from(cfg: &TrainConfig, mut policy: PolicySnapshot, train: &[TaskSuite]) -> Result<SftOutcome> {
    cfg.validate()?;
    let tasks: Vec<&TaskInstance> = train.iter().flat_map(|s| &s.instances).collect();
    for t in &tasks {
        cot_of(t)?;
        t.validate(policy.vocab())?;
    }
    let mut opt = AdamW::new(cfg.sft.learning_rate, policy.params().len());
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.sft.epochs {
        rng::shuffle(&mut rng::rng(rng::derive_seed(&[cfg.seed, 0x5f7, epoch as u64])), &mut order);
        for batch in order.chunks(cfg.sft.batch_size) {
            let mut grad = vec![0.0; policy.params().len()];
            let mut loss = 0.0;
            for &i in batch {
                let t = tasks[i];
                let (l, g) = sft_objective(&policy, &t.context, cot_of(t)?)?;
                loss += l;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let n = batch.len() as f64;
            grad.iter_mut().for_each(|g| *g /= n);
            opt.descend(policy.params_mut(), &grad);
            log.push(SftStep { step, epoch, loss: loss / n });
            step += 1;
        }
    }
    Ok(SftOutcome { policy, log })
}

/// Per-step training record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_format_rate: f64,
    /// Batch mean of the shaping entropies.
    pub mean_seq_entropy: f64,
    /// Threshold used for this step's shaping.
    pub tau: f64,
    pub mean_advantage: f64,
    pub mean_shaped_advantage: f64,
    pub kl: f64,
    pub objective: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub step: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    /// Threshold before the first step.
    pub tau0: f64,
    pub steps: Vec<StepMetrics>,
    pub rollouts: Vec<RolloutTriple>,
    pub evals: Vec<EvalRecord>,
    pub checkpoints: Vec<(usize, PolicySnapshot)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlOutcome {
    pub policy: PolicySnapshot,
    pub log: RunLog,
}

/// RL aborted on a numerical failure; the last good policy is retained.
#[derive(Debug, Clone, PartialEq)]
pub struct RlFailure {
    pub step: usize,
    pub task_id: String,
    pub error: Error,
    pub last_good: PolicySnapshot,
    pub log: RunLog,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RlError {
    /// Invalid configuration or data; nothing was trained.
    Setup(Error),
    Aborted(alloc::boxed::Box<RlFailure>),
}

impl core::fmt::Display for RlError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Setup(e) => write!(f, "{e}"),
            Self::Aborted(a) => write!(f, "aborted at step {} on task {}: {}", a.step, a.task_id, a.error),
        }
    }
}

impl core::error::Error for RlError {}

impl From<Error> for RlError {
    fn from(e: Error) -> Self {
        Self::Setup(e)
    }
}

/// Round-robin interleave of the suites' shuffled orders.
fn epoch_schedule(cfg: &TrainConfig, train: &[TaskSuite], epoch: usize) -> Vec<Vec<(usize, usize)>> {
    let mut orders: Vec<Vec<usize>> = train
        .iter()
        .enumerate()
        .map(|(si, s)| {
            let mut o: Vec<usize> = (0..s.len()).collect();
            rng::shuffle(&mut rng::rng(rng::derive_seed(&[cfg.seed, 0xe90c, epoch as u64, si as u64])), &mut o);
            o
        })
        .collect();
    orders.retain(|o| !o.is_empty());
    let live: Vec<usize> = (0..train.len()).filter(|i| !train[*i].is_empty()).collect();
    let total: usize = train.iter().map(|s| s.len()).sum();
    let steps = total.div_ceil(cfg.batch_size);
    let mut cursors = vec![0usize; live.len()];
    let mut k = 0usize;
    (0..steps)
        .map(|_| {
            (0..cfg.batch_size)
                .map(|_| {
                    let j = k % live.len();
                    k += 1;
                    let item = orders[j][cursors[j] % orders[j].len()];
                    cursors[j] += 1;
                    (live[j], item)
                })
                .collect()
        })
        .collect()
}

fn abort(step: usize, task_id: &str, error: Error, last_good: &PolicySnapshot, log: RunLog) -> RlError {
    RlError::Aborted(alloc::boxed::Box::new(RlFailure {
        step,
        task_id: String::from(task_id),
        error,
        last_good: last_good.clone(),
        log,
    }))
}

/// Group-relative RL with optional entropy-based advantage shaping.
///
/// The reference policy is `init`, frozen. Each step samples `G` rollouts per
/// question under a snapshot of the current policy, standardizes rewards per
/// group, updates the threshold with the batch-mean entropy, shapes the
/// advantages with the updated threshold and takes `epochs_per_batch` AdamW
/// ascent steps on the clipped objective.
pub fn run_rl(
    cfg: &TrainConfig,
    init: &PolicySnapshot,
    train: &[TaskSuite],
    eval: &[TaskSuite],
    clock: &mut dyn Clock,
) -> core::result::Result<RlOutcome, RlError> {
    cfg.validate()?;
    check_disjoint(train, eval)?;
    let vocab = *init.vocab();
    for t in train.iter().flat_map(|s| &s.instances) {
        t.validate(&vocab)?;
    }
    if train.iter().all(|s| s.is_empty()) {
        return Err(Error::Config("no training instances".into()).into());
    }
    let reference = init.clone();
    let mut policy = init.clone();
    let mut opt = AdamW::new(cfg.grpo.learning_rate, policy.params().len());
    let active = cfg.uadt.active();

    let init_pool: Vec<TaskInstance> = {
        let all = train.iter().flat_map(|s| s.instances.iter().cloned());
        if cfg.uadt.init_tasks == 0 { all.collect() } else { all.take(cfg.uadt.init_tasks).collect() }
    };
    let tau0 = init_threshold(init, &init_pool, cfg.uadt.init_rollouts_per_task, cfg.seed, cfg.max_len)?;
    let mut state = UadtState::new(tau0, cfg.uadt.alpha, cfg.uadt.gamma, cfg.uadt.lambda)?;
    let mut log = RunLog { tau0, ..RunLog::default() };

    let mut step = 0usize;
    'epochs: for epoch in 0..cfg.epochs {
        for batch in epoch_schedule(cfg, train, epoch) {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            step += 1;
            let old = policy.clone();
            let mut groups = Vec::with_capacity(batch.len());
            for &(si, ii) in &batch {
                let task = &train[si].instances[ii];
                let mut rollouts = Vec::with_capacity(cfg.grpo.group_size);
                for g in 0..cfg.grpo.group_size {
                    let seed = rng::derive_seed(&[cfg.seed, step as u64, rng::hash_str(&task.id), g as u64]);
                    let mut r = old.sample_rollout(task, seed, cfg.max_len)?;
                    r.reward = compute_reward(&r.parsed, &task.key, cfg.weights);
                    rollouts.push(r);
                }
                let adv = group_advantages(&rollouts.iter().map(|r| r.reward.total).collect::<Vec<_>>());
                rollouts.iter_mut().zip(&adv).for_each(|(r, a)| r.advantage = *a);
                groups.push(GroupBatch::new(task.clone(), rollouts)?);
            }

            let entropies: Vec<Vec<f64>> = groups
                .iter()
                .map(|g| {
                    g.rollouts
                        .iter()
                        .map(|r| match cfg.uadt.entropy_source {
                            EntropySource::SamplingTime => Ok(r.seq_entropy),
                            EntropySource::Rescored => policy
                                .logprob_and_entropy(&g.task.context, &r.tokens)
                                .map(|(_, e)| stats::mean(&e)),
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            let flat: Vec<f64> = entropies.iter().flatten().copied().collect();
            let batch_mean = stats::mean(&flat);
            if active {
                state = state.update_with_mean(batch_mean);
            }
            for (g, ent) in groups.iter_mut().zip(&entropies) {
                let adv: Vec<f64> = g.rollouts.iter().map(|r| r.advantage).collect();
                let shaped = if active { shape_group(&state, &adv, ent, cfg.uadt.granularity) } else { adv };
                g.rollouts.iter_mut().zip(&shaped).for_each(|(r, s)| r.shaped_advantage = *s);
            }

            let mut objective = 0.0;
            let mut kl = 0.0;
            for e in 0..cfg.grpo.epochs_per_batch {
                let mut grad = vec![0.0; policy.params().len()];
                let mut value = 0.0;
                let mut kl_e = 0.0;
                for g in &groups {
                    let shaped: Vec<f64> = g.rollouts.iter().map(|r| r.shaped_advantage).collect();
                    let ev = match grpo::grpo_objective(&policy, &old, &reference, g, &shaped, &cfg.grpo) {
                        Ok(ev) => ev,
                        Err(err) => return Err(abort(step, &g.task.id, err, &old, log)),
                    };
                    value += ev.value;
                    kl_e += ev.kl;
                    grad.iter_mut().zip(&ev.grad).for_each(|(a, b)| *a += b);
                }
                let n = groups.len() as f64;
                grad.iter_mut().for_each(|x| *x /= n);
                if e == 0 {
                    objective = value / n;
                    kl = kl_e / n;
                }
                opt.ascend(policy.params_mut(), &grad);
            }
            if policy.params().iter().any(|x| !x.is_finite()) {
                let err = Error::Numerical { rollout: 0, detail: "non-finite parameters after update".into() };
                return Err(abort(step, &groups[0].task.id, err, &old, log));
            }

            let all: Vec<&crate::policy::Rollout> = groups.iter().flat_map(|g| &g.rollouts).collect();
            let avg = |f: &dyn Fn(&crate::policy::Rollout) -> f64| stats::mean(&all.iter().map(|r| f(r)).collect::<Vec<_>>());
            log.steps.push(StepMetrics {
                step,
                epoch,
                mean_reward: avg(&|r| r.reward.total),
                mean_format_rate: avg(&|r| r.reward.format),
                mean_seq_entropy: batch_mean,
                tau: state.tau,
                mean_advantage: avg(&|r| r.advantage),
                mean_shaped_advantage: avg(&|r| r.shaped_advantage),
                kl,
                objective,
                wall_time: clock.elapsed(),
            });
            for (g, ent) in groups.iter().zip(&entropies) {
                for (i, (r, h)) in g.rollouts.iter().zip(ent).enumerate() {
                    log.rollouts.push(RolloutTriple {
                        step,
                        epoch,
                        task_id: g.task.id.clone(),
                        index: i,
                        seq_entropy: *h,
                        advantage: r.advantage,
                        shaped_advantage: r.shaped_advantage,
                        reward: r.reward.total,
                    });
                }
            }
            if cfg.eval_every > 0 && step.is_multiple_of(cfg.eval_every) {
                record_eval(cfg, &policy, eval, step, &mut log)?;
            }
        }
    }
    if log.checkpoints.last().map(|(s, _)| *s) != Some(step) {
        record_eval(cfg, &policy, eval, step, &mut log)?;
    }
    Ok(RlOutcome { policy, log })
}

fn record_eval(cfg: &TrainConfig, policy: &PolicySnapshot, eval: &[TaskSuite], step: usize, log: &mut RunLog) -> Result<()> {
    for s in eval {
        let report = evaluate(policy, s, &cfg.eval)?;
        log.evals.push(EvalRecord { step, report });
    }
    log.checkpoints.push((step, policy.clone()));
    Ok(())
}

/// Mean token-level KL estimate of `policy` against `reference` over greedy
/// and sampled responses to `tasks`.
pub fn mean_kl_to(policy: &PolicySnapshot, reference: &PolicySnapshot, tasks: &[TaskInstance], samples: usize, seed: u64, max_len: usize) -> Result<f64> {
    let mut kls = Vec::new();
    for t in tasks {
        for j in 0..samples {
            let s = rng::derive_seed(&[seed, rng::hash_str(&t.id), j as u64, 0xc1]);
            let r = policy.sample_rollout(t, s, max_len)?;
            let (lr, _) = reference.logprob_and_entropy(&t.context, &r.tokens)?;
            kls.push(grpo::token_kl(&r.per_token_logprob, &lr));
        }
    }
    Ok(stats::mean(&kls))
}

/// Recomputes the threshold trajectory from logged batch means.
pub fn replay_tau(tau0: f64, alpha: f64, steps: &[StepMetrics]) -> Vec<f64> {
    let mut tau = tau0;
    steps
        .iter()
        .map(|m| {
            tau = alpha * tau + (1.0 - alpha) * m.mean_seq_entropy;
            tau
        })
        .collect()
}
