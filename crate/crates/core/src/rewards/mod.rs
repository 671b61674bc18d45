//! Composite rewards: structural format check plus task-dependent accuracy.

mod metrics;
mod parse;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

pub use metrics::{bleu, iou_accuracy, meteor, open_ended_accuracy, open_ended_score, rouge, RougeVariant, BLEU_MAX_ORDER, BLEU_SMOOTHING, TOP_K};
pub use parse::{parse_response, ParsedResponse};

use crate::error::{Error, Result};
use crate::tasks::TaskKind;
use crate::vocab::Token;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub format: f64,
    pub accuracy: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { format: 0.5, accuracy: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardBreakdown {
    pub format: f64,
    pub accuracy: f64,
    pub total: f64,
    pub weights: RewardWeights,
}

/// Ground truth for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerKey {
    pub kind: TaskKind,
    /// Valid answer labels; `None` for open-ended tasks.
    pub options: Option<Vec<Token>>,
    /// Truth label set, or the reference sequence for open-ended tasks.
    pub truth: Vec<Token>,
}

impl AnswerKey {
    pub fn validate(&self) -> Result<()> {
        let n = self.truth.len();
        let ok = match self.kind {
            TaskKind::SingleMcq | TaskKind::TrueFalse => n == 1,
            TaskKind::MultiMcq => n >= 1,
            TaskKind::OpenEnded => n >= 1,
        };
        if !ok {
            return Err(Error::Config(format!(
                "{:?} key has {n} truth entries",
                self.kind
            )));
        }
        if self.kind.is_choice() {
            let set: BTreeSet<Token> = self.truth.iter().copied().collect();
            if set.len() != n {
                return Err(Error::Config("duplicate truth labels".into()));
            }
            if let Some(opts) = &self.options {
                if let Some(t) = self.truth.iter().find(|t| !opts.contains(t)) {
                    return Err(Error::Config(format!("truth label {t} not among options")));
                }
            }
        }
        Ok(())
    }

    /// Predicted labels restricted to the option set, deduplicated.
    pub fn filter_labels(&self, answer: &[Token]) -> Vec<Token> {
        let set: BTreeSet<Token> = answer
            .iter()
            .copied()
            .filter(|t| self.options.as_ref().is_none_or(|o| o.contains(t)))
            .collect();
        set.into_iter().collect()
    }
}

/// Accuracy component alone; 0 for malformed responses.
pub fn accuracy_reward(parsed: &ParsedResponse, key: &AnswerKey) -> f64 {
    if !parsed.well_formed {
        return 0.0;
    }
    let Some(answer) = parsed.answer.as_deref() else {
        return 0.0;
    };
    match key.kind {
        TaskKind::OpenEnded => open_ended_accuracy(&[answer], &key.truth),
        _ => iou_accuracy(&key.filter_labels(answer), &key.truth),
    }
}

pub fn compute_reward(parsed: &ParsedResponse, key: &AnswerKey, weights: RewardWeights) -> RewardBreakdown {
    let format = if parsed.well_formed { 1.0 } else { 0.0 };
    let accuracy = accuracy_reward(parsed, key);
    RewardBreakdown {
        format,
        accuracy,
        total: weights.format * format + weights.accuracy * accuracy,
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::*;
    use alloc::vec;

    fn v() -> Vocab {
        Vocab::new(4, 4).unwrap()
    }

    fn mcq(v: &Vocab, labels: &[usize]) -> Vec<Token> {
        let mut t = vec![THINK_OPEN, STEP, THINK_CLOSE, ANSWER_OPEN];
        t.extend(labels.iter().map(|k| v.label(*k)));
        t.extend([ANSWER_CLOSE, EOS]);
        t
    }

    fn key(v: &Vocab, kind: TaskKind, truth: &[usize]) -> AnswerKey {
        AnswerKey {
            kind,
            options: Some((0..4).map(|k| v.label(k)).collect()),
            truth: truth.iter().map(|k| v.label(*k)).collect(),
        }
    }

    #[test]
    fn multi_partial_credit_total() {
        let v = v();
        let p = parse_response(&v, &mcq(&v, &[0]), TaskKind::MultiMcq);
        let r = compute_reward(&p, &key(&v, TaskKind::MultiMcq, &[0, 1]), RewardWeights::default());
        assert_eq!(r.format, 1.0);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.total, 1.0);
    }

    #[test]
    fn malformed_scores_zero() {
        let v = v();
        let mut toks = mcq(&v, &[0]);
        toks.swap(0, 3);
        let p = parse_response(&v, &toks, TaskKind::SingleMcq);
        let r = compute_reward(&p, &key(&v, TaskKind::SingleMcq, &[0]), RewardWeights::default());
        assert_eq!((r.format, r.accuracy, r.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn wrong_single_choice_earns_format_only() {
        let v = v();
        let p = parse_response(&v, &mcq(&v, &[2]), TaskKind::SingleMcq);
        let w = RewardWeights::default();
        let r = compute_reward(&p, &key(&v, TaskKind::SingleMcq, &[0]), w);
        assert_eq!(r.total, w.format);
    }

    #[test]
    fn labels_outside_options_are_dropped() {
        let v = v();
        let mut k = key(&v, TaskKind::MultiMcq, &[0]);
        k.options = Some(vec![v.label(0), v.label(1)]);
        let p = parse_response(&v, &mcq(&v, &[0, 3]), TaskKind::MultiMcq);
        assert_eq!(accuracy_reward(&p, &k), 1.0);
    }

    #[test]
    fn open_ended_identity_reward() {
        let v = v();
        let reference: Vec<Token> = (0..4).map(|k| v.symbol(k)).collect();
        let mut toks = vec![CAPTION_OPEN, v.symbol(0), CAPTION_CLOSE, THINK_OPEN, STEP, THINK_CLOSE, ANSWER_OPEN];
        toks.extend(&reference);
        toks.push(ANSWER_CLOSE);
        let p = parse_response(&v, &toks, TaskKind::OpenEnded);
        assert!(p.well_formed);
        let k = AnswerKey { kind: TaskKind::OpenEnded, options: None, truth: reference };
        let acc = accuracy_reward(&p, &k);
        assert!((acc - (1.0 + 1.0 + 0.9921875) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn key_validation() {
        let v = v();
        assert!(key(&v, TaskKind::SingleMcq, &[0, 1]).validate().is_err());
        assert!(key(&v, TaskKind::MultiMcq, &[]).validate().is_err());
        assert!(key(&v, TaskKind::MultiMcq, &[1, 1]).validate().is_err());
        assert!(key(&v, TaskKind::MultiMcq, &[1, 2]).validate().is_ok());
    }
}
