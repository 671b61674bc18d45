//! Synthetic task suites with a controllable difficulty knob.
//!
//! MCQ instances pass their truth labels through a noisy evidence channel:
//! each evidence token in the context names a truth label with probability
//! `1 - noise` and a uniformly random option otherwise. Open-ended instances
//! ask for a cyclic symbol shift of a context span.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rewards::{accuracy_reward, parse_response, AnswerKey};
use crate::rng;
use crate::vocab::*;

/// Evidence tokens per MCQ context (the kind marker comes first).
pub const MCQ_EVIDENCE_LEN: usize = 6;
const MAX_MULTI_TRUTH: usize = 3;
const OPEN_SPAN_MIN: usize = 2;
const OPEN_SPAN_MAX: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    SingleMcq,
    MultiMcq,
    TrueFalse,
    OpenEnded,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [Self::SingleMcq, Self::MultiMcq, Self::TrueFalse, Self::OpenEnded];

    pub fn is_choice(self) -> bool {
        self != Self::OpenEnded
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SingleMcq => "single_mcq",
            Self::MultiMcq => "multi_mcq",
            Self::TrueFalse => "true_false",
            Self::OpenEnded => "open_ended",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown task kind {s:?}")))
    }

    pub fn marker(self) -> Token {
        match self {
            Self::SingleMcq => Q_SINGLE,
            Self::MultiMcq => Q_MULTI,
            Self::TrueFalse => Q_TF,
            Self::OpenEnded => Q_OPEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub id: String,
    pub kind: TaskKind,
    /// Stands in for the images and question.
    pub context: Vec<Token>,
    pub key: AnswerKey,
    pub difficulty: f64,
    /// Reasoning trace plus answer, terminated by EOS, for supervised tuning.
    pub cot_target: Option<Vec<Token>>,
}

impl TaskInstance {
    pub fn validate(&self, vocab: &Vocab) -> Result<()> {
        let fail = |what: String| Err(Error::Config(format!("task {}: {what}", self.id)));
        if self.context.is_empty() {
            return fail("empty context".into());
        }
        for t in self.context.iter().chain(&self.key.truth).chain(self.cot_target.iter().flatten()) {
            vocab.check(*t)?;
        }
        if !(0.0..=1.0).contains(&self.difficulty) {
            return fail(format!("difficulty {} outside [0,1]", self.difficulty));
        }
        if self.key.kind != self.kind {
            return fail("key kind differs from task kind".into());
        }
        self.key.validate()?;
        if let Some(cot) = &self.cot_target {
            let parsed = parse_response(vocab, cot, self.kind);
            if !parsed.well_formed {
                return fail("cot_target is not well formed".into());
            }
            if self.kind.is_choice() && accuracy_reward(&parsed, &self.key) != 1.0 {
                return fail("cot_target answer does not match the key".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSuite {
    pub name: String,
    pub instances: Vec<TaskInstance>,
    pub split: Split,
}

impl TaskSuite {
    /// Builds a suite after validating every instance and id uniqueness.
    pub fn new(name: impl Into<String>, instances: Vec<TaskInstance>, split: Split, vocab: &Vocab) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for inst in &instances {
            inst.validate(vocab)?;
            if !ids.insert(inst.id.as_str()) {
                return Err(Error::Config(format!("duplicate task id {}", inst.id)));
            }
        }
        Ok(Self { name: name.into(), instances, split })
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Concatenates suites, re-checking id uniqueness.
    pub fn merge(name: impl Into<String>, suites: &[TaskSuite], split: Split, vocab: &Vocab) -> Result<Self> {
        let all = suites.iter().flat_map(|s| s.instances.iter().cloned()).collect();
        Self::new(name, all, split, vocab)
    }
}

/// Fails if any id appears in both a training and an evaluation suite.
pub fn check_disjoint(train: &[TaskSuite], eval: &[TaskSuite]) -> Result<()> {
    let ids: BTreeSet<&str> = train.iter().flat_map(|s| s.instances.iter().map(|i| i.id.as_str())).collect();
    for s in eval {
        if let Some(i) = s.instances.iter().find(|i| ids.contains(i.id.as_str())) {
            return Err(Error::Config(format!("eval task {} also appears in training data", i.id)));
        }
    }
    Ok(())
}

/// Generates an MCQ suite; `difficulty = noise`. Multi-answer instances draw
/// 1 to 3 truth labels, each guaranteed one evidence slot before noise.
pub fn gen_mcq_suite(
    vocab: &Vocab,
    name: &str,
    n: usize,
    num_options: usize,
    noise: f64,
    multi: bool,
    seed: u64,
) -> Result<TaskSuite> {
    if num_options < 2 || num_options > vocab.num_labels() {
        return Err(Error::Config(format!(
            "num_options {num_options} must be in 2..={}",
            vocab.num_labels()
        )));
    }
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Config(format!("noise {noise} outside [0,1]")));
    }
    let mut r = rng::rng(seed);
    let kind = if multi { TaskKind::MultiMcq } else { TaskKind::SingleMcq };
    let options: Vec<Token> = (0..num_options).map(|k| vocab.label(k)).collect();
    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let truth: Vec<usize> = if multi {
            let k = (1 + rng::below(&mut r, MAX_MULTI_TRUTH)).min(num_options);
            let mut pool: Vec<usize> = (0..num_options).collect();
            rng::shuffle(&mut r, &mut pool);
            let mut t = pool[..k].to_vec();
            t.sort_unstable();
            t
        } else {
            vec![rng::below(&mut r, num_options)]
        };
        let mut evidence: Vec<Token> = (0..MCQ_EVIDENCE_LEN)
            .map(|slot| {
                let base = if slot < truth.len() { truth[slot] } else { truth[rng::below(&mut r, truth.len())] };
                let label = if rng::uniform(&mut r) < noise { rng::below(&mut r, num_options) } else { base };
                vocab.evidence(label)
            })
            .collect();
        rng::shuffle(&mut r, &mut evidence);
        let mut context = vec![kind.marker()];
        context.extend(&evidence);

        let mut cot = vec![THINK_OPEN];
        cot.extend(truth.iter().map(|k| vocab.evidence(*k)));
        cot.extend([THINK_CLOSE, ANSWER_OPEN]);
        cot.extend(truth.iter().map(|k| vocab.label(*k)));
        cot.extend([ANSWER_CLOSE, EOS]);

        instances.push(TaskInstance {
            id: format!("{name}-{seed}-{i}"),
            kind,
            context,
            key: AnswerKey {
                kind,
                options: Some(options.clone()),
                truth: truth.iter().map(|k| vocab.label(*k)).collect(),
            },
            difficulty: noise,
            cot_target: Some(cot),
        });
    }
    TaskSuite::new(name, instances, Split::Train, vocab)
}

/// Shifts every symbol by `k` positions, cyclically over the symbol range.
pub fn shift_symbols(vocab: &Vocab, span: &[Token], k: usize) -> Vec<Token> {
    let m = vocab.num_symbols();
    span.iter()
        .map(|t| vocab.symbol((vocab.symbol_index(*t).expect("symbol token") + k) % m))
        .collect()
}

/// Generates open-ended instances whose reference answer is the context span
/// shifted by `transform_len`. The reasoning trace spells every intermediate
/// shift.
pub fn gen_open_suite(vocab: &Vocab, name: &str, n: usize, transform_len: usize, seed: u64) -> Result<TaskSuite> {
    if transform_len == 0 {
        return Err(Error::Config("transform_len must be at least 1".into()));
    }
    if vocab.num_symbols() < 2 {
        return Err(Error::Config("open-ended tasks need at least two symbols".into()));
    }
    let mut r = rng::rng(seed);
    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let len = OPEN_SPAN_MIN + rng::below(&mut r, OPEN_SPAN_MAX - OPEN_SPAN_MIN + 1);
        let span: Vec<Token> = (0..len).map(|_| vocab.symbol(rng::below(&mut r, vocab.num_symbols()))).collect();
        let reference = shift_symbols(vocab, &span, transform_len);
        let mut context = vec![Q_OPEN];
        context.extend(&span);

        let mut cot = vec![CAPTION_OPEN];
        cot.extend(&span);
        cot.extend([CAPTION_CLOSE, THINK_OPEN]);
        for k in 1..=transform_len {
            cot.push(STEP);
            cot.extend(shift_symbols(vocab, &span, k));
        }
        cot.extend([THINK_CLOSE, ANSWER_OPEN]);
        cot.extend(&reference);
        cot.extend([ANSWER_CLOSE, EOS]);

        instances.push(TaskInstance {
            id: format!("{name}-{seed}-{i}"),
            kind: TaskKind::OpenEnded,
            context,
            key: AnswerKey { kind: TaskKind::OpenEnded, options: None, truth: reference },
            difficulty: transform_len as f64 / (transform_len as f64 + 1.0),
            cot_target: Some(cot),
        });
    }
    TaskSuite::new(name, instances, Split::Train, vocab)
}

/// Decodes MCQ evidence by frequency: the most frequent label for single
/// answer tasks (ties to the lowest label), every observed label otherwise.
pub fn frequency_decode(vocab: &Vocab, task: &TaskInstance) -> Vec<Token> {
    let mut counts = vec![0usize; vocab.num_labels()];
    for t in &task.context {
        if let Some(k) = vocab.evidence_index(*t) {
            counts[k] += 1;
        }
    }
    match task.kind {
        TaskKind::MultiMcq => (0..counts.len()).filter(|k| counts[*k] > 0).map(|k| vocab.label(k)).collect(),
        _ => {
            let best = (0..counts.len()).fold(0, |b, k| if counts[k] > counts[b] { k } else { b });
            vec![vocab.label(best)]
        }
    }
}
