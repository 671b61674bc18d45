//! Line-delimited JSON task corpora.
//!
//! One object per line with fields `id`, `kind`, `context`, `options`,
//! `truth`, `difficulty` and optional `cot_target`. Token sequences are
//! space-separated token names. Blank lines are skipped.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use uadt_core::rewards::AnswerKey;
use uadt_core::tasks::{Split, TaskInstance, TaskKind, TaskSuite};
use uadt_core::{Token, Vocab};

use crate::error::{Error, Result};

const FIELDS: [&str; 7] = ["id", "kind", "context", "options", "truth", "difficulty", "cot_target"];

#[derive(Serialize)]
struct Record<'a> {
    id: &'a str,
    kind: &'a str,
    context: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    options: Option<String>,
    truth: String,
    difficulty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cot_target: Option<String>,
}

fn names(vocab: &Vocab, tokens: &[Token]) -> String {
    tokens.iter().map(|t| vocab.name(*t)).collect::<Vec<_>>().join(" ")
}

pub fn to_line(vocab: &Vocab, t: &TaskInstance) -> String {
    let rec = Record {
        id: &t.id,
        kind: t.kind.as_str(),
        context: names(vocab, &t.context),
        options: t.key.options.as_ref().map(|o| names(vocab, o)),
        truth: names(vocab, &t.key.truth),
        difficulty: t.difficulty,
        cot_target: t.cot_target.as_ref().map(|c| names(vocab, c)),
    };
    serde_json::to_string(&rec).expect("records serialize")
}

struct LineCtx<'a> {
    path: &'a Path,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, field: &str, msg: impl Into<String>) -> Error {
        Error::Record { path: self.path.to_path_buf(), line: self.line, field: field.into(), msg: msg.into() }
    }

    fn str_field<'v>(&self, obj: &'v Map<String, Value>, field: &str) -> Result<Option<&'v str>> {
        match obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.err(field, "expected a string")),
        }
    }

    fn required<'v>(&self, obj: &'v Map<String, Value>, field: &str) -> Result<&'v str> {
        self.str_field(obj, field)?.ok_or_else(|| self.err(field, "missing"))
    }

    fn tokens(&self, vocab: &Vocab, field: &str, s: &str) -> Result<Vec<Token>> {
        s.split_whitespace()
            .map(|n| vocab.parse(n).map_err(|e| self.err(field, e.to_string())))
            .collect()
    }
}

pub fn parse_line(vocab: &Vocab, line: &str, path: &Path, line_no: usize) -> Result<TaskInstance> {
    let cx = LineCtx { path, line: line_no };
    let value: Value = serde_json::from_str(line).map_err(|e| cx.err("<record>", e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(cx.err("<record>", "expected a JSON object"));
    };
    if let Some(k) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(cx.err(k, "unknown field"));
    }
    let id = cx.required(&obj, "id")?.to_string();
    let kind = TaskKind::parse(cx.required(&obj, "kind")?).map_err(|e| cx.err("kind", e.to_string()))?;
    let context = cx.tokens(vocab, "context", cx.required(&obj, "context")?)?;
    let options = cx.str_field(&obj, "options")?.map(|s| cx.tokens(vocab, "options", s)).transpose()?;
    let truth = cx.tokens(vocab, "truth", cx.required(&obj, "truth")?)?;
    let difficulty = match obj.get("difficulty") {
        Some(Value::Number(n)) => n.as_f64().ok_or_else(|| cx.err("difficulty", "not a finite number"))?,
        Some(_) => return Err(cx.err("difficulty", "expected a number")),
        None => return Err(cx.err("difficulty", "missing")),
    };
    let cot_target = cx.str_field(&obj, "cot_target")?.map(|s| cx.tokens(vocab, "cot_target", s)).transpose()?;
    let task = TaskInstance { id, kind, context, key: AnswerKey { kind, options, truth }, difficulty, cot_target };
    task.validate(vocab).map_err(|e| cx.err("<record>", e.to_string()))?;
    Ok(task)
}

/// Reads and validates a corpus; duplicate ids abort the load.
pub fn load_suite(path: &Path, vocab: &Vocab, split: Split) -> Result<TaskSuite> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut instances: Vec<TaskInstance> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let task = parse_line(vocab, &line, path, i + 1)?;
        if !seen.insert(task.id.clone()) {
            return Err(Error::Record {
                path: path.to_path_buf(),
                line: i + 1,
                field: "id".into(),
                msg: format!("duplicate id {}", task.id),
            });
        }
        instances.push(task);
    }
    let name = path.file_stem().map_or_else(|| "suite".into(), |s| s.to_string_lossy().into_owned());
    Ok(TaskSuite::new(name, instances, split, vocab)?)
}

pub fn save_suite(path: &Path, vocab: &Vocab, suite: &TaskSuite) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in &suite.instances {
        writeln!(w, "{}", to_line(vocab, t)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
