//! Synthetic token vocabulary.
//!
//! Layout (ids are contiguous):
//!
//! ```text
//! 0      <eos>
//! 1..=6  <caption> </caption> <think> </think> <answer> </answer>
//! 7..=10 <q:single> <q:multi> <q:tf> <q:open>
//! 11     <step>
//! 12,13  true false
//! then   labels A, B, ...        (num_labels)
//! then   evidence e0, e1, ...    (num_labels, e_k backs label k)
//! then   symbols s0, s1, ...     (num_symbols)
//! ```

use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};

pub type Token = u32;

pub const EOS: Token = 0;
pub const CAPTION_OPEN: Token = 1;
pub const CAPTION_CLOSE: Token = 2;
pub const THINK_OPEN: Token = 3;
pub const THINK_CLOSE: Token = 4;
pub const ANSWER_OPEN: Token = 5;
pub const ANSWER_CLOSE: Token = 6;
pub const Q_SINGLE: Token = 7;
pub const Q_MULTI: Token = 8;
pub const Q_TF: Token = 9;
pub const Q_OPEN: Token = 10;
pub const STEP: Token = 11;
pub const TRUE: Token = 12;
pub const FALSE: Token = 13;

const FIXED: u32 = 14;
pub const MAX_LABELS: usize = 26;

const FIXED_NAMES: [&str; FIXED as usize] = [
    "<eos>",
    "<caption>",
    "</caption>",
    "<think>",
    "</think>",
    "<answer>",
    "</answer>",
    "<q:single>",
    "<q:multi>",
    "<q:tf>",
    "<q:open>",
    "<step>",
    "true",
    "false",
];

/// Returns true for the six block tags.
pub fn is_tag(token: Token) -> bool {
    (CAPTION_OPEN..=ANSWER_CLOSE).contains(&token)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vocab {
    num_labels: u32,
    num_symbols: u32,
}

impl Vocab {
    pub fn new(num_labels: usize, num_symbols: usize) -> Result<Self> {
        if num_labels > MAX_LABELS {
            return Err(Error::Config(format!(
                "num_labels {num_labels} exceeds {MAX_LABELS}"
            )));
        }
        if num_symbols > 10_000 {
            return Err(Error::Config(format!("num_symbols {num_symbols} too large")));
        }
        Ok(Self {
            num_labels: num_labels as u32,
            num_symbols: num_symbols as u32,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels as usize
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols as usize
    }

    pub fn size(&self) -> usize {
        (FIXED + 2 * self.num_labels + self.num_symbols) as usize
    }

    pub fn label(&self, k: usize) -> Token {
        debug_assert!(k < self.num_labels());
        FIXED + k as u32
    }

    pub fn evidence(&self, k: usize) -> Token {
        debug_assert!(k < self.num_labels());
        FIXED + self.num_labels + k as u32
    }

    pub fn symbol(&self, k: usize) -> Token {
        debug_assert!(k < self.num_symbols());
        FIXED + 2 * self.num_labels + k as u32
    }

    /// Index of a label token, if `token` is one of `A, B, ...`.
    pub fn label_index(&self, token: Token) -> Option<usize> {
        (FIXED..FIXED + self.num_labels)
            .contains(&token)
            .then(|| (token - FIXED) as usize)
    }

    pub fn evidence_index(&self, token: Token) -> Option<usize> {
        let lo = FIXED + self.num_labels;
        (lo..lo + self.num_labels)
            .contains(&token)
            .then(|| (token - lo) as usize)
    }

    pub fn symbol_index(&self, token: Token) -> Option<usize> {
        let lo = FIXED + 2 * self.num_labels;
        (lo..lo + self.num_symbols)
            .contains(&token)
            .then(|| (token - lo) as usize)
    }

    /// Tokens allowed inside an MCQ / true-false answer block.
    pub fn is_answer_label(&self, token: Token) -> bool {
        token == TRUE || token == FALSE || self.label_index(token).is_some()
    }

    pub fn check(&self, token: Token) -> Result<()> {
        if (token as usize) < self.size() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "token id {token} out of range for vocabulary of size {}",
                self.size()
            )))
        }
    }

    pub fn name(&self, token: Token) -> String {
        if token < FIXED {
            return String::from(FIXED_NAMES[token as usize]);
        }
        if let Some(k) = self.label_index(token) {
            return String::from(char::from(b'A' + k as u8));
        }
        if let Some(k) = self.evidence_index(token) {
            return format!("e{k}");
        }
        if let Some(k) = self.symbol_index(token) {
            return format!("s{k}");
        }
        format!("<unk:{token}>")
    }

    pub fn parse(&self, name: &str) -> Result<Token> {
        if let Some(i) = FIXED_NAMES.iter().position(|n| *n == name) {
            return Ok(i as Token);
        }
        let bad = || Error::Domain(format!("unknown token name {name:?}"));
        let bytes = name.as_bytes();
        if bytes.len() == 1 && bytes[0].is_ascii_uppercase() {
            let k = (bytes[0] - b'A') as usize;
            return if k < self.num_labels() { Ok(self.label(k)) } else { Err(bad()) };
        }
        let indexed = |prefix: &str, limit: usize| -> Option<usize> {
            let digits = name.strip_prefix(prefix)?;
            if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
                return None;
            }
            let k: usize = digits.parse().ok()?;
            (k < limit).then_some(k)
        };
        if let Some(k) = indexed("e", self.num_labels()) {
            return Ok(self.evidence(k));
        }
        if let Some(k) = indexed("s", self.num_symbols()) {
            return Ok(self.symbol(k));
        }
        Err(bad())
    }
}
