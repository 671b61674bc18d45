//! Metrics logs, heatmap tables and evaluation reports.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use uadt_core::eval::EvalReport;
use uadt_core::trainer::{EntropyHistogram, Heatmap, RolloutTriple, RunLog, SftStep, StepMetrics};

use crate::error::{Error, Result};

/// Step record as logged; wall time lives in the timing sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_format_rate: f64,
    pub mean_seq_entropy: f64,
    pub tau: f64,
    pub mean_advantage: f64,
    pub mean_shaped_advantage: f64,
    pub kl: f64,
    pub objective: f64,
}

impl From<&StepMetrics> for StepRecord {
    fn from(m: &StepMetrics) -> Self {
        Self {
            step: m.step,
            epoch: m.epoch,
            mean_reward: m.mean_reward,
            mean_format_rate: m.mean_format_rate,
            mean_seq_entropy: m.mean_seq_entropy,
            tau: m.tau,
            mean_advantage: m.mean_advantage,
            mean_shaped_advantage: m.mean_shaped_advantage,
            kl: m.kl,
            objective: m.objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutRecord {
    pub step: usize,
    pub epoch: usize,
    pub task_id: String,
    pub index: usize,
    pub seq_entropy: f64,
    pub advantage: f64,
    pub shaped_advantage: f64,
    pub reward: f64,
}

impl From<&RolloutTriple> for RolloutRecord {
    fn from(t: &RolloutTriple) -> Self {
        Self {
            step: t.step,
            epoch: t.epoch,
            task_id: t.task_id.clone(),
            index: t.index,
            seq_entropy: t.seq_entropy,
            advantage: t.advantage,
            shaped_advantage: t.shaped_advantage,
            reward: t.reward,
        }
    }
}

impl From<RolloutRecord> for RolloutTriple {
    fn from(r: RolloutRecord) -> Self {
        Self {
            step: r.step,
            epoch: r.epoch,
            task_id: r.task_id,
            index: r.index,
            seq_entropy: r.seq_entropy,
            advantage: r.advantage,
            shaped_advantage: r.shaped_advantage,
            reward: r.reward,
        }
    }
}

#[derive(Serialize)]
struct TimingRecord {
    step: usize,
    wall_time: f64,
}

#[derive(Serialize)]
struct SftRecord {
    step: usize,
    epoch: usize,
    loss: f64,
}

#[derive(Serialize)]
struct EvalLine<'a> {
    step: usize,
    #[serde(flatten)]
    report: ReportJson<'a>,
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `metrics.jsonl`, `rollouts.jsonl`, `evals.jsonl`, `timing.jsonl`
/// and `tau0.json` into `dir`.
pub fn write_run_log(dir: &Path, log: &RunLog) -> Result<()> {
    create_dir(dir)?;
    write_jsonl(&dir.join("metrics.jsonl"), log.steps.iter().map(StepRecord::from))?;
    write_jsonl(&dir.join("rollouts.jsonl"), log.rollouts.iter().map(RolloutRecord::from))?;
    write_jsonl(
        &dir.join("evals.jsonl"),
        log.evals.iter().map(|e| EvalLine { step: e.step, report: ReportJson::from(&e.report) }),
    )?;
    write_jsonl(
        &dir.join("timing.jsonl"),
        log.steps.iter().map(|m| TimingRecord { step: m.step, wall_time: m.wall_time }),
    )?;
    write_jsonl(&dir.join("tau0.json"), [serde_json::json!({ "tau0": log.tau0 })])
}

pub fn write_sft_log(path: &Path, log: &[SftStep]) -> Result<()> {
    write_jsonl(path, log.iter().map(|s| SftRecord { step: s.step, epoch: s.epoch, loss: s.loss }))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            line: i + 1,
            field: "<record>".into(),
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_rollouts(path: &Path) -> Result<Vec<RolloutTriple>> {
    Ok(read_jsonl::<RolloutRecord>(path)?.into_iter().map(RolloutTriple::from).collect())
}

pub const HEATMAP_HEADER: &str = "ix,iy,entropy_lo,entropy_hi,advantage_lo,advantage_hi,count,mean_shaped_advantage";

pub fn heatmap_csv(map: &Heatmap) -> String {
    let mut s = String::from(HEATMAP_HEADER);
    s.push('\n');
    for ix in 0..map.bins_x() {
        for iy in 0..map.bins_y() {
            let c = map.cell(ix, iy);
            let mean = c.mean_shaped_advantage.map_or_else(String::new, |m| m.to_string());
            let _ = writeln!(
                s,
                "{ix},{iy},{},{},{},{},{},{mean}",
                map.x_edges[ix],
                map.x_edges[ix + 1],
                map.y_edges[iy],
                map.y_edges[iy + 1],
                c.count
            );
        }
    }
    s
}

pub fn histogram_csv(h: &EntropyHistogram) -> String {
    let mut s = String::from("bin,entropy_lo,entropy_hi,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{c}", h.edges[i], h.edges[i + 1]);
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportJson<'a> {
    pub suite: &'a str,
    pub n: usize,
    pub format_rate: f64,
    pub mean_reward: f64,
    pub choice_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub single: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_false: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multi: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub open: Option<serde_json::Value>,
}

impl<'a> From<&'a EvalReport> for ReportJson<'a> {
    fn from(r: &'a EvalReport) -> Self {
        use serde_json::json;
        Self {
            suite: &r.suite,
            n: r.n,
            format_rate: r.format_rate,
            mean_reward: r.mean_reward,
            choice_accuracy: r.choice_accuracy(),
            single: r.single.map(|b| json!({ "n": b.n, "accuracy": b.accuracy })),
            true_false: r.true_false.map(|b| json!({ "n": b.n, "accuracy": b.accuracy })),
            multi: r.multi.map(|b| {
                json!({
                    "n": b.n, "acc": b.scores.acc, "jaccard": b.scores.jaccard,
                    "precision": b.scores.precision, "recall": b.scores.recall, "f1": b.scores.f1,
                })
            }),
            open: r.open.map(|b| {
                json!({
                    "n": b.n, "bleu": b.scores.bleu, "rouge1": b.scores.rouge1,
                    "rouge_l": b.scores.rouge_l, "meteor": b.scores.meteor, "mean": b.scores.mean,
                })
            }),
        }
    }
}

pub fn report_json(r: &EvalReport) -> String {
    serde_json::to_string_pretty(&ReportJson::from(r)).expect("reports serialize")
}

pub const REPORT_CSV_HEADER: &str = "suite,n,format_rate,mean_reward,single_acc,tf_acc,multi_acc,multi_jaccard,\
multi_precision,multi_recall,multi_f1,open_bleu,open_rouge1,open_rouge_l,open_meteor,open_mean";

pub fn report_csv_row(r: &EvalReport) -> String {
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    let m = r.multi.map(|b| b.scores);
    let o = r.open.map(|b| b.scores);
    let cols = [
        r.suite.replace(',', "_"),
        r.n.to_string(),
        r.format_rate.to_string(),
        r.mean_reward.to_string(),
        opt(r.single.map(|b| b.accuracy)),
        opt(r.true_false.map(|b| b.accuracy)),
        opt(m.map(|s| s.acc)),
        opt(m.map(|s| s.jaccard)),
        opt(m.map(|s| s.precision)),
        opt(m.map(|s| s.recall)),
        opt(m.map(|s| s.f1)),
        opt(o.map(|s| s.bleu)),
        opt(o.map(|s| s.rouge1)),
        opt(o.map(|s| s.rouge_l)),
        opt(o.map(|s| s.meteor)),
        opt(o.map(|s| s.mean)),
    ];
    cols.join(",")
}
