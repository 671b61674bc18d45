//! Implementations behind the command-line subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use uadt_core::eval::{evaluate, EvalOptions, EvalReport};
use uadt_core::policy::PolicySnapshot;
use uadt_core::tasks::{gen_mcq_suite, gen_open_suite, Split, TaskSuite};
use uadt_core::trainer::{run_ablation, run_rl, run_sft_from, AblationArm, Clock, Heatmap, RlError, TrainConfig};
use uadt_core::Vocab;

use crate::config::{RunConfig, Stage};
use crate::error::{Error, Result};
use crate::{checkpoint, corpus, output};

/// Seconds since construction.
#[derive(Debug)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

fn load_suites(paths: &[PathBuf], vocab: &Vocab, split: Split) -> Result<Vec<TaskSuite>> {
    paths.iter().map(|p| corpus::load_suite(p, vocab, split)).collect()
}

fn initial_policy(cfg: &RunConfig, tc: &TrainConfig) -> Result<PolicySnapshot> {
    match &cfg.init_checkpoint {
        Some(path) => {
            let p = checkpoint::load(path)?;
            if *p.shape() != tc.policy.shape()? {
                return Err(Error::Config(format!(
                    "checkpoint {} does not match the configured policy shape",
                    path.display()
                )));
            }
            Ok(p)
        }
        None => Ok(tc.policy.init_policy(tc.seed)?),
    }
}

fn write_reports(dir: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut csv = String::from(output::REPORT_CSV_HEADER);
    csv.push('\n');
    for r in reports {
        output::write_text(&dir.join(format!("eval_{}.json", r.suite)), &output::report_json(r))?;
        csv.push_str(&output::report_csv_row(r));
        csv.push('\n');
    }
    output::write_text(&dir.join("eval.csv"), &csv)
}

/// Runs the configured stage and writes its artifacts under `output_dir`.
pub fn train(config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let tc = cfg.train_config();
    let vocab = tc.policy.shape()?.vocab;
    let train = load_suites(&cfg.data.train, &vocab, Split::Train)?;
    let eval = load_suites(&cfg.data.eval, &vocab, Split::Eval)?;
    let init = initial_policy(&cfg, &tc)?;
    let out = &cfg.output_dir;
    output::create_dir(out)?;
    match cfg.stage {
        Stage::Sft => {
            let res = run_sft_from(&tc, init, &train)?;
            output::write_sft_log(&out.join("sft_metrics.jsonl"), &res.log)?;
            checkpoint::save(&res.policy, &out.join("final.ckpt"))?;
            let reports = eval.iter().map(|s| evaluate(&res.policy, s, &tc.eval)).collect::<uadt_core::Result<Vec<_>>>()?;
            write_reports(out, &reports)
        }
        Stage::Rl => match run_rl(&tc, &init, &train, &eval, &mut WallClock::start()) {
            Ok(res) => {
                output::write_run_log(out, &res.log)?;
                let ckpt_dir = out.join("checkpoints");
                output::create_dir(&ckpt_dir)?;
                for (step, p) in &res.log.checkpoints {
                    checkpoint::save(p, &ckpt_dir.join(format!("step_{step:06}.ckpt")))?;
                }
                checkpoint::save(&res.policy, &out.join("final.ckpt"))?;
                let last = res.log.evals.last().map(|e| e.step);
                let finals: Vec<EvalReport> =
                    res.log.evals.iter().filter(|e| Some(e.step) == last).map(|e| e.report.clone()).collect();
                write_reports(out, &finals)
            }
            Err(RlError::Aborted(f)) => {
                output::write_run_log(out, &f.log)?;
                checkpoint::save(&f.last_good, &out.join("last_good.ckpt"))?;
                Err(RlError::Aborted(f).into())
            }
            Err(e) => Err(e.into()),
        },
    }
}

/// Evaluates a checkpoint on one suite and returns the report.
pub fn eval(checkpoint_path: &Path, suite: &Path, opts: &EvalOptions) -> Result<EvalReport> {
    let policy = checkpoint::load(checkpoint_path)?;
    let suite = corpus::load_suite(suite, policy.vocab(), Split::Eval)?;
    Ok(evaluate(&policy, &suite, opts)?)
}

fn arm_summary(arm: &AblationArm) -> serde_json::Value {
    json!({
        "final_eval_reward": arm.final_eval_reward,
        "final_eval_accuracy": arm.final_eval_accuracy,
        "median_final_entropy": arm.median_final_entropy,
        "tau0": arm.log.tau0,
        "rollouts": arm.log.rollouts.len(),
    })
}

fn write_arm(dir: &Path, arm: &AblationArm) -> Result<()> {
    output::write_run_log(dir, &arm.log)?;
    output::write_text(&dir.join("heatmap.csv"), &output::heatmap_csv(&arm.heatmap))?;
    output::write_text(&dir.join("hist_first.csv"), &output::histogram_csv(&arm.hist_first))?;
    output::write_text(&dir.join("hist_final.csv"), &output::histogram_csv(&arm.hist_final))
}

/// Runs matched vanilla and shaped arms per seed; returns the summary JSON.
pub fn ablate(config: &Path, seeds: &[u64]) -> Result<serde_json::Value> {
    let cfg = RunConfig::load(config)?;
    let tc = cfg.train_config();
    let vocab = tc.policy.shape()?.vocab;
    let train = load_suites(&cfg.data.train, &vocab, Split::Train)?;
    let eval = load_suites(&cfg.data.eval, &vocab, Split::Eval)?;
    let report = run_ablation(&tc, &train, &eval, seeds, &mut WallClock::start())?;
    let root = cfg.output_dir.join("ablation");
    let mut per_seed = Vec::new();
    for s in &report.seeds {
        let dir = root.join(format!("seed_{}", s.seed));
        write_arm(&dir.join("vanilla"), &s.vanilla)?;
        write_arm(&dir.join("uadt"), &s.uadt)?;
        per_seed.push(json!({ "seed": s.seed, "vanilla": arm_summary(&s.vanilla), "uadt": arm_summary(&s.uadt) }));
    }
    let summary = json!({
        "seeds": per_seed,
        "bins_x": report.bins_x,
        "bins_y": report.bins_y,
        "seeds_with_lower_entropy": report.seeds_with_lower_entropy(),
    });
    output::write_text(&root.join("summary.json"), &serde_json::to_string_pretty(&summary).expect("json"))?;
    Ok(summary)
}

/// Heatmap table from a rollout log file or a run directory holding one.
pub fn export_heatmap(log: &Path, bins_x: usize, bins_y: usize) -> Result<String> {
    if bins_x == 0 || bins_y == 0 {
        return Err(Error::Config("bin counts must be positive".into()));
    }
    let path = if log.is_dir() { log.join("rollouts.jsonl") } else { log.to_path_buf() };
    let triples = output::read_rollouts(&path)?;
    if triples.is_empty() {
        return Ok(format!("{}\n", output::HEATMAP_HEADER));
    }
    Ok(output::heatmap_csv(&Heatmap::from_triples(&triples, bins_x, bins_y)))
}

#[derive(Debug, Clone)]
pub enum SuiteSpec {
    Mcq { num_options: usize, noise: f64, multi: bool },
    Open { transform_len: usize },
}

pub fn gen_suite(vocab: &Vocab, name: &str, n: usize, spec: &SuiteSpec, seed: u64, out: &Path) -> Result<()> {
    let suite = match *spec {
        SuiteSpec::Mcq { num_options, noise, multi } => gen_mcq_suite(vocab, name, n, num_options, noise, multi, seed)?,
        SuiteSpec::Open { transform_len } => gen_open_suite(vocab, name, n, transform_len, seed)?,
    };
    corpus::save_suite(out, vocab, &suite)
}
