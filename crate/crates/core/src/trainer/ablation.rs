use alloc::vec;
use alloc::vec::Vec;

use super::{run_rl, run_sft, Clock, Heatmap, RlError, RunLog, TrainConfig};
use crate::stats;
use crate::tasks::TaskSuite;

/// Histogram of sequence entropies over fixed edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl EntropyHistogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let raw = libm::floor((v - lo) / (hi - lo) * bins as f64);
            let i = if raw < 0.0 { 0 } else { (raw as usize).min(bins - 1) };
            counts[i] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationArm {
    pub uadt: bool,
    pub final_eval_reward: f64,
    pub final_eval_accuracy: f64,
    pub median_final_entropy: f64,
    pub hist_first: EntropyHistogram,
    pub hist_final: EntropyHistogram,
    pub heatmap: Heatmap,
    pub log: RunLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSeed {
    pub seed: u64,
    pub vanilla: AblationArm,
    pub uadt: AblationArm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub seeds: Vec<AblationSeed>,
    pub bins_x: usize,
    pub bins_y: usize,
}

impl AblationReport {
    /// Seeds where the shaped arm's median final-epoch entropy is not above
    /// the vanilla arm's.
    pub fn seeds_with_lower_entropy(&self) -> usize {
        self.seeds
            .iter()
            .filter(|s| s.uadt.median_final_entropy <= s.vanilla.median_final_entropy)
            .count()
    }
}

pub const ABLATION_BINS: usize = 20;

fn arm(uadt: bool, log: RunLog, x_hi: f64, y: (f64, f64)) -> AblationArm {
    let first = log.steps.first().map_or(0, |m| m.epoch);
    let last = log.steps.last().map_or(0, |m| m.epoch);
    let ent_at = |e: usize| -> Vec<f64> { log.rollouts.iter().filter(|r| r.epoch == e).map(|r| r.seq_entropy).collect() };
    let final_ent = ent_at(last);
    let final_step = log.evals.last().map(|e| e.step);
    let finals: Vec<_> = log.evals.iter().filter(|e| Some(e.step) == final_step).collect();
    AblationArm {
        uadt,
        final_eval_reward: stats::mean(&finals.iter().map(|e| e.report.mean_reward).collect::<Vec<_>>()),
        final_eval_accuracy: stats::mean(&finals.iter().map(|e| e.report.choice_accuracy()).collect::<Vec<_>>()),
        median_final_entropy: stats::median(&final_ent),
        hist_first: EntropyHistogram::new(&ent_at(first), 0.0, x_hi, ABLATION_BINS),
        hist_final: EntropyHistogram::new(&final_ent, 0.0, x_hi, ABLATION_BINS),
        heatmap: Heatmap::with_range(&log.rollouts, (0.0, x_hi), y, ABLATION_BINS, ABLATION_BINS),
        log,
    }
}

/// Runs matched vanilla and shaped RL arms per seed from a shared starting
/// policy (supervised-tuned first when `cfg.sft.epochs > 0`).
pub fn run_ablation(
    cfg: &TrainConfig,
    train: &[TaskSuite],
    eval: &[TaskSuite],
    seeds: &[u64],
    clock: &mut dyn Clock,
) -> core::result::Result<AblationReport, RlError> {
    if seeds.len() < 2 {
        return Err(crate::Error::Config("ablation needs at least two seeds".into()).into());
    }
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let base = TrainConfig { seed, ..*cfg };
        let init = if base.sft.epochs > 0 {
            run_sft(&base, train)?.policy
        } else {
            base.policy.init_policy(seed)?
        };
        let mut vanilla_cfg = base;
        vanilla_cfg.uadt.enabled = false;
        let mut uadt_cfg = base;
        uadt_cfg.uadt.enabled = true;
        let v = run_rl(&vanilla_cfg, &init, train, eval, clock)?.log;
        let u = run_rl(&uadt_cfg, &init, train, eval, clock)?.log;
        let x_hi = libm::log(init.vocab_size() as f64);
        let y = v
            .rollouts
            .iter()
            .chain(&u.rollouts)
            .map(|r| r.advantage)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| (lo.min(a), hi.max(a)));
        let y = if y.0 <= y.1 { y } else { (0.0, 0.0) };
        out.push(AblationSeed {
            seed,
            vanilla: arm(false, v, x_hi, y),
            uadt: arm(true, u, x_hi, y),
        });
    }
    Ok(AblationReport { seeds: out, bins_x: ABLATION_BINS, bins_y: ABLATION_BINS })
}
