//! TOML run configuration. Every table is optional; unknown keys are errors.
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use uadt_core::eval::{Decode, EvalOptions};
use uadt_core::grpo::GrpoConfig;
use uadt_core::rewards::RewardWeights;
use uadt_core::trainer::{EntropySource, PolicyConfig, SftConfig, TrainConfig, UadtConfig};
use uadt_core::uadt::EntropyGranularity;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Sft,
    #[default]
    Rl,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub train: Vec<PathBuf>,
    pub eval: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub num_labels: usize,
    pub num_symbols: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
}

impl Default for PolicySection {
    fn default() -> Self {
        let p = PolicyConfig::default();
        Self {
            num_labels: p.num_labels,
            num_symbols: p.num_symbols,
            embed_dim: p.embed_dim,
            hidden_dim: p.hidden_dim,
            init_scale: p.init_scale,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SftSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SftSection {
    fn default() -> Self {
        let s = SftConfig::default();
        Self { learning_rate: s.learning_rate, epochs: s.epochs, batch_size: s.batch_size }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrpoSection {
    pub group_size: usize,
    pub clip_eps: f64,
    pub kl_beta: f64,
    pub learning_rate: f64,
    pub epochs_per_batch: usize,
}

impl Default for GrpoSection {
    fn default() -> Self {
        let g = GrpoConfig::default();
        Self {
            group_size: g.group_size,
            clip_eps: g.clip_eps,
            kl_beta: g.kl_beta,
            learning_rate: g.learning_rate,
            epochs_per_batch: g.epochs_per_batch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EntropySourceName {
    #[default]
    SamplingTime,
    Rescored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GranularityName {
    #[default]
    Rollout,
    Question,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UadtSection {
    pub enabled: bool,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub entropy_source: EntropySourceName,
    pub granularity: GranularityName,
    pub init_tasks: usize,
    pub init_rollouts_per_task: usize,
}

impl Default for UadtSection {
    fn default() -> Self {
        let u = UadtConfig::default();
        Self {
            enabled: u.enabled,
            alpha: u.alpha,
            gamma: u.gamma,
            lambda: u.lambda,
            entropy_source: EntropySourceName::default(),
            granularity: GranularityName::default(),
            init_tasks: u.init_tasks,
            init_rollouts_per_task: u.init_rollouts_per_task,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub format: f64,
    pub accuracy: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        let w = RewardWeights::default();
        Self { format: w.format, accuracy: w.accuracy }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub max_steps: Option<usize>,
    pub eval_every: usize,
    pub max_len: usize,
}

impl Default for RlSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            max_steps: t.max_steps,
            eval_every: t.eval_every,
            max_len: t.max_len,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub max_len: usize,
    /// Sampled candidates per instance; 0 decodes greedily.
    pub samples: usize,
    pub sample_seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { max_len: TrainConfig::default().eval.max_len, samples: 0, sample_seed: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub stage: Stage,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub init_checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub sft: SftSection,
    #[serde(default)]
    pub grpo: GrpoSection,
    #[serde(default)]
    pub uadt: UadtSection,
    #[serde(default)]
    pub rewards: RewardSection,
    #[serde(default)]
    pub rl: RlSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_seed() -> u64 {
    TrainConfig::default().seed
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Reads the file, resolves relative paths and checks that inputs exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        cfg.check_inputs()?;
        cfg.train_config().validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        self.init_checkpoint.iter_mut().for_each(fix);
        self.data.train.iter_mut().for_each(fix);
        self.data.eval.iter_mut().for_each(fix);
    }

    fn check_inputs(&self) -> Result<()> {
        if self.data.train.is_empty() {
            return Err(Error::Config("data.train lists no suites".into()));
        }
        let inputs = self.data.train.iter().chain(&self.data.eval).chain(&self.init_checkpoint);
        for p in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            max_len: self.rl.max_len,
            policy: PolicyConfig {
                num_labels: self.policy.num_labels,
                num_symbols: self.policy.num_symbols,
                embed_dim: self.policy.embed_dim,
                hidden_dim: self.policy.hidden_dim,
                init_scale: self.policy.init_scale,
            },
            sft: SftConfig {
                learning_rate: self.sft.learning_rate,
                epochs: self.sft.epochs,
                batch_size: self.sft.batch_size,
            },
            grpo: GrpoConfig {
                group_size: self.grpo.group_size,
                clip_eps: self.grpo.clip_eps,
                kl_beta: self.grpo.kl_beta,
                learning_rate: self.grpo.learning_rate,
                epochs_per_batch: self.grpo.epochs_per_batch,
            },
            uadt: UadtConfig {
                enabled: self.uadt.enabled,
                alpha: self.uadt.alpha,
                gamma: self.uadt.gamma,
                lambda: self.uadt.lambda,
                entropy_source: match self.uadt.entropy_source {
                    EntropySourceName::SamplingTime => EntropySource::SamplingTime,
                    EntropySourceName::Rescored => EntropySource::Rescored,
                },
                granularity: match self.uadt.granularity {
                    GranularityName::Rollout => EntropyGranularity::Rollout,
                    GranularityName::Question => EntropyGranularity::Question,
                },
                init_tasks: self.uadt.init_tasks,
                init_rollouts_per_task: self.uadt.init_rollouts_per_task,
            },
            weights: RewardWeights { format: self.rewards.format, accuracy: self.rewards.accuracy },
            epochs: self.rl.epochs,
            batch_size: self.rl.batch_size,
            max_steps: self.rl.max_steps,
            eval_every: self.rl.eval_every,
            eval: EvalOptions {
                decode: if self.eval.samples == 0 {
                    Decode::Greedy
                } else {
                    Decode::Sample { k: self.eval.samples, seed: self.eval.sample_seed }
                },
                max_len: self.eval.max_len,
                weights: RewardWeights { format: self.rewards.format, accuracy: self.rewards.accuracy },
            },
        }
    }
}
