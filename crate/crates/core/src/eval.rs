//! Evaluation metrics and the per-suite report.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::policy::PolicySnapshot;
use crate::rewards::{self, compute_reward, parse_response, RewardWeights, RougeVariant};
use crate::rng;
use crate::stats::mean;
use crate::tasks::{Split, TaskInstance, TaskKind, TaskSuite};
use crate::vocab::{Token, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MultiLabelScores {
    /// Exact set match.
    pub acc: f64,
    pub jaccard: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MultiLabelScores {
    fn fields(&self) -> [f64; 5] {
        [self.acc, self.jaccard, self.precision, self.recall, self.f1]
    }
}

pub fn multi_label_metrics(predicted: &[Token], truth: &[Token]) -> MultiLabelScores {
    use alloc::collections::BTreeSet;
    let p: BTreeSet<Token> = predicted.iter().copied().collect();
    let t: BTreeSet<Token> = truth.iter().copied().collect();
    let inter = p.intersection(&t).count() as f64;
    let precision = if p.is_empty() { 0.0 } else { inter / p.len() as f64 };
    let recall = if t.is_empty() { 0.0 } else { inter / t.len() as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    MultiLabelScores {
        acc: if p == t && !t.is_empty() { 1.0 } else { 0.0 },
        jaccard: rewards::iou_accuracy(predicted, truth),
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decode {
    Greedy,
    /// `k` temperature-1 samples, seeded per instance.
    Sample { k: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub decode: Decode,
    pub max_len: usize,
    pub weights: RewardWeights,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { decode: Decode::Greedy, max_len: 32, weights: RewardWeights::default() }
    }
}

/// Open-ended metric values for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpenScores {
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub mean: f64,
}

/// Metrics of one evaluated instance, averaged over its candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEval {
    pub id: String,
    pub kind: TaskKind,
    pub format: f64,
    pub reward: f64,
    /// Choice kinds only.
    pub labels: Option<MultiLabelScores>,
    /// Open-ended only.
    pub open: Option<OpenScores>,
}

fn score_candidate(vocab: &Vocab, task: &TaskInstance, tokens: &[Token], weights: RewardWeights) -> InstanceEval {
    let parsed = parse_response(vocab, tokens, task.kind);
    let reward = compute_reward(&parsed, &task.key, weights).total;
    let answer: &[Token] = match (&parsed.answer, parsed.well_formed) {
        (Some(a), true) => a,
        _ => &[],
    };
    let (labels, open) = if task.kind.is_choice() {
        (Some(multi_label_metrics(&task.key.filter_labels(answer), &task.key.truth)), None)
    } else if answer.is_empty() {
        (None, Some(OpenScores::default()))
    } else {
        let r = &task.key.truth;
        let s = OpenScores {
            bleu: rewards::bleu(answer, r, rewards::BLEU_MAX_ORDER),
            rouge1: rewards::rouge(answer, r, RougeVariant::Rouge1),
            rouge_l: rewards::rouge(answer, r, RougeVariant::RougeL),
            meteor: rewards::meteor(answer, r),
            mean: rewards::open_ended_score(answer, r),
        };
        (None, Some(s))
    };
    InstanceEval {
        id: task.id.clone(),
        kind: task.kind,
        format: if parsed.well_formed { 1.0 } else { 0.0 },
        reward,
        labels,
        open,
    }
}

/// Scores up to `k` candidate responses for `task` and averages them.
pub fn score_instance(vocab: &Vocab, task: &TaskInstance, candidates: &[Vec<Token>], weights: RewardWeights) -> InstanceEval {
    let cands = &candidates[..candidates.len().min(rewards::TOP_K)];
    let each: Vec<InstanceEval> = cands.iter().map(|c| score_candidate(vocab, task, c, weights)).collect();
    let avg = |f: &dyn Fn(&InstanceEval) -> f64| mean(&each.iter().map(f).collect::<Vec<_>>());
    let labels = task.kind.is_choice().then(|| {
        let col = |j: usize| avg(&|e: &InstanceEval| e.labels.unwrap_or_default().fields()[j]);
        MultiLabelScores { acc: col(0), jaccard: col(1), precision: col(2), recall: col(3), f1: col(4) }
    });
    let open = (!task.kind.is_choice()).then(|| {
        let o = |f: fn(&OpenScores) -> f64| avg(&|e: &InstanceEval| f(&e.open.unwrap_or_default()));
        OpenScores {
            bleu: o(|s| s.bleu),
            rouge1: o(|s| s.rouge1),
            rouge_l: o(|s| s.rouge_l),
            meteor: o(|s| s.meteor),
            mean: o(|s| s.mean),
        }
    });
    InstanceEval {
        id: task.id.clone(),
        kind: task.kind,
        format: avg(&|e| e.format),
        reward: avg(&|e| e.reward),
        labels,
        open,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChoiceBlock {
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MultiBlock {
    pub n: usize,
    pub scores: MultiLabelScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpenBlock {
    pub n: usize,
    pub scores: OpenScores,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub suite: String,
    pub n: usize,
    pub format_rate: f64,
    pub mean_reward: f64,
    pub single: Option<ChoiceBlock>,
    pub true_false: Option<ChoiceBlock>,
    pub multi: Option<MultiBlock>,
    pub open: Option<OpenBlock>,
}

impl EvalReport {
    /// Accuracy over all choice instances (exact set match).
    pub fn choice_accuracy(&self) -> f64 {
        let parts = [
            self.single.map(|b| (b.n, b.accuracy)),
            self.true_false.map(|b| (b.n, b.accuracy)),
            self.multi.map(|b| (b.n, b.scores.acc)),
        ];
        let (n, s) = parts.iter().flatten().fold((0, 0.0), |(n, s), (k, a)| (n + k, s + *k as f64 * a));
        if n == 0 { 0.0 } else { s / n as f64 }
    }
}

/// Averages per-instance results into a report.
pub fn aggregate(suite: &str, results: &[InstanceEval]) -> EvalReport {
    let of = |kind: TaskKind| results.iter().filter(move |r| r.kind == kind);
    let choice = |kind: TaskKind| {
        let acc: Vec<f64> = of(kind).map(|r| r.labels.unwrap_or_default().acc).collect();
        (!acc.is_empty()).then(|| ChoiceBlock { n: acc.len(), accuracy: mean(&acc) })
    };
    let multi = {
        let rows: Vec<[f64; 5]> = of(TaskKind::MultiMcq).map(|r| r.labels.unwrap_or_default().fields()).collect();
        (!rows.is_empty()).then(|| {
            let c = |j: usize| mean(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
            MultiBlock {
                n: rows.len(),
                scores: MultiLabelScores { acc: c(0), jaccard: c(1), precision: c(2), recall: c(3), f1: c(4) },
            }
        })
    };
    let open = {
        let rows: Vec<OpenScores> = of(TaskKind::OpenEnded).map(|r| r.open.unwrap_or_default()).collect();
        (!rows.is_empty()).then(|| {
            let c = |f: fn(&OpenScores) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
            OpenBlock {
                n: rows.len(),
                scores: OpenScores {
                    bleu: c(|s| s.bleu),
                    rouge1: c(|s| s.rouge1),
                    rouge_l: c(|s| s.rouge_l),
                    meteor: c(|s| s.meteor),
                    mean: c(|s| s.mean),
                },
            }
        })
    };
    EvalReport {
        suite: String::from(suite),
        n: results.len(),
        format_rate: mean(&results.iter().map(|r| r.format).collect::<Vec<_>>()),
        mean_reward: mean(&results.iter().map(|r| r.reward).collect::<Vec<_>>()),
        single: choice(TaskKind::SingleMcq),
        true_false: choice(TaskKind::TrueFalse),
        multi,
        open,
    }
}

/// Evaluates arbitrary responders; `respond` returns the candidate responses
/// for one task.
pub fn evaluate_with<F>(vocab: &Vocab, suite: &TaskSuite, weights: RewardWeights, mut respond: F) -> Result<(EvalReport, Vec<InstanceEval>)>
where
    F: FnMut(&TaskInstance) -> Result<Vec<Vec<Token>>>,
{
    let mut results = Vec::with_capacity(suite.len());
    for task in &suite.instances {
        let cands = respond(task)?;
        if cands.is_empty() {
            return Err(Error::Domain(format!("no candidates for task {}", task.id)));
        }
        results.push(score_instance(vocab, task, &cands, weights));
    }
    Ok((aggregate(&suite.name, &results), results))
}

/// Evaluates `policy` on an eval suite.
pub fn evaluate(policy: &PolicySnapshot, suite: &TaskSuite, opts: &EvalOptions) -> Result<EvalReport> {
    evaluate_detailed(policy, suite, opts).map(|(r, _)| r)
}

pub fn evaluate_detailed(policy: &PolicySnapshot, suite: &TaskSuite, opts: &EvalOptions) -> Result<(EvalReport, Vec<InstanceEval>)> {
    if suite.split != Split::Eval {
        return Err(Error::Config(format!("suite {} is not an eval split", suite.name)));
    }
    let vocab = *policy.vocab();
    for t in &suite.instances {
        t.validate(&vocab)
            .map_err(|e| Error::Config(format!("suite {} incompatible with checkpoint vocabulary: {e}", suite.name)))?;
    }
    evaluate_with(&vocab, suite, opts.weights, |task| match opts.decode {
        Decode::Greedy => Ok(alloc::vec![policy.greedy_tokens(&task.context, opts.max_len)?.tokens]),
        Decode::Sample { k, seed } => (0..k.max(1))
            .map(|j| {
                let s = rng::derive_seed(&[seed, rng::hash_str(&task.id), j as u64]);
                Ok(policy.sample_tokens(&task.context, &mut rng::rng(s), opts.max_len)?.tokens)
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_label_examples() {
        let s = multi_label_metrics(&[1], &[1, 2]);
        assert_eq!((s.acc, s.jaccard, s.precision, s.recall), (0.0, 0.5, 1.0, 0.5));
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        let e = multi_label_metrics(&[1, 2], &[2, 1]);
        assert_eq!(e.fields(), [1.0; 5]);
        let d = multi_label_metrics(&[3], &[1, 2]);
        assert_eq!(d.fields(), [0.0; 5]);
        let empty = multi_label_metrics(&[], &[1]);
        assert_eq!(empty.fields(), [0.0; 5]);
    }

    #[test]
    fn empty_suite_report() {
        let r = aggregate("none", &[]);
        assert_eq!(r.n, 0);
        assert_eq!(r.format_rate, 0.0);
        assert_eq!(r.choice_accuracy(), 0.0);
        assert!(r.single.is_none() && r.open.is_none());
    }
}
