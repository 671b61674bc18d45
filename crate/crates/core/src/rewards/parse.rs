use alloc::vec::Vec;

use crate::tasks::TaskKind;
use crate::vocab::{
    is_tag, Token, Vocab, ANSWER_CLOSE, ANSWER_OPEN, CAPTION_CLOSE, CAPTION_OPEN, EOS, THINK_CLOSE,
    THINK_OPEN,
};

/// Spans extracted from a response.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedResponse {
    pub caption: Option<Vec<Token>>,
    pub think: Option<Vec<Token>>,
    pub answer: Option<Vec<Token>>,
    pub well_formed: bool,
}

/// Parses a token response against the tag grammar of `kind`.
///
/// Choice tasks: `<think> body </think> <answer> labels </answer>`.
/// Open-ended tasks prepend a `<caption> body </caption>` block. Bodies may
/// not contain tags or EOS; a single trailing EOS is accepted. Spans are
/// extracted best-effort even when the structure does not match.
pub fn parse_response(vocab: &Vocab, tokens: &[Token], kind: TaskKind) -> ParsedResponse {
    let body = match tokens.split_last() {
        Some((&EOS, rest)) => rest,
        _ => tokens,
    };
    let mut parsed = ParsedResponse {
        caption: find_block(body, CAPTION_OPEN, CAPTION_CLOSE),
        think: find_block(body, THINK_OPEN, THINK_CLOSE),
        answer: find_block(body, ANSWER_OPEN, ANSWER_CLOSE),
        well_formed: false,
    };
    parsed.well_formed = matches_grammar(vocab, body, kind);
    parsed
}

fn find_block(tokens: &[Token], open: Token, close: Token) -> Option<Vec<Token>> {
    let start = tokens.iter().position(|t| *t == open)? + 1;
    let len = tokens[start..].iter().position(|t| *t == close)?;
    Some(tokens[start..start + len].to_vec())
}

/// Consumes `open body close` from the front of `rest`; returns the body.
fn take_block<'a>(rest: &mut &'a [Token], open: Token, close: Token) -> Option<&'a [Token]> {
    let (&first, tail) = rest.split_first()?;
    if first != open {
        return None;
    }
    let end = tail.iter().position(|t| is_tag(*t) || *t == EOS)?;
    if tail[end] != close {
        return None;
    }
    let body = &tail[..end];
    *rest = &tail[end + 1..];
    Some(body)
}

fn matches_grammar(vocab: &Vocab, tokens: &[Token], kind: TaskKind) -> bool {
    let mut rest = tokens;
    if kind == TaskKind::OpenEnded && take_block(&mut rest, CAPTION_OPEN, CAPTION_CLOSE).is_none() {
        return false;
    }
    if take_block(&mut rest, THINK_OPEN, THINK_CLOSE).is_none() {
        return false;
    }
    let Some(answer) = take_block(&mut rest, ANSWER_OPEN, ANSWER_CLOSE) else {
        return false;
    };
    if !rest.is_empty() || answer.is_empty() {
        return false;
    }
    kind == TaskKind::OpenEnded || answer.iter().all(|t| vocab.is_answer_label(*t))
}
