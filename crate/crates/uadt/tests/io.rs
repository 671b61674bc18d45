use std::path::Path;
use std::process::{Command, Stdio};

use uadt::config::RunConfig;
use uadt::{checkpoint, commands, corpus, output, Error};
use uadt_core::policy::{PolicyShape, PolicySnapshot};
use uadt_core::tasks::{gen_mcq_suite, gen_open_suite, Split, TaskSuite};
use uadt_core::Vocab;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uadt"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let shape = PolicyShape { vocab: Vocab::new(3, 5).unwrap(), embed_dim: 4, hidden_dim: 7 };
    let mut p = PolicySnapshot::init(shape, 0.3, 9);
    p.params_mut()[0] = f64::MIN_POSITIVE;
    p.params_mut()[1] = -0.0;
    let path = dir.path().join("p.ckpt");
    checkpoint::save(&p, &path).unwrap();
    let q = checkpoint::load(&path).unwrap();
    assert_eq!(q.shape(), p.shape());
    assert!(p.params().iter().zip(q.params()).all(|(a, b)| a.to_bits() == b.to_bits()));

    let bytes = std::fs::read(&path).unwrap();
    for bad in [&bytes[..bytes.len() - 3], &bytes[1..]] {
        assert!(matches!(checkpoint::decode(bad, &path), Err(Error::Format { .. })));
    }
    let mut wrong_version = bytes.clone();
    wrong_version[8] = 9;
    assert!(checkpoint::decode(&wrong_version, &path).is_err());
}

#[test]
fn corpus_round_trip_preserves_suites() {
    let dir = tempfile::tempdir().unwrap();
    let v = Vocab::new(4, 6).unwrap();
    let suite = TaskSuite::merge(
        "mix",
        &[gen_mcq_suite(&v, "m", 20, 4, 0.3, true, 1).unwrap(), gen_open_suite(&v, "o", 20, 3, 2).unwrap()],
        Split::Train,
        &v,
    )
    .unwrap();
    let path = dir.path().join("mix.jsonl");
    corpus::save_suite(&path, &v, &suite).unwrap();
    let back = corpus::load_suite(&path, &v, Split::Train).unwrap();
    assert_eq!(back.instances, suite.instances);
    assert_eq!(back.name, "mix");
}

#[test]
fn corpus_errors_name_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let v = Vocab::new(4, 0).unwrap();
    let good = r#"{"id":"a","kind":"single_mcq","context":"<q:single> e0","options":"A B","truth":"A","difficulty":0.0}"#;
    let cases = [
        (r#"{"id":"b","context":"<q:single> e0","truth":"A","difficulty":0.0}"#, "kind"),
        (r#"{"id":"b","kind":"single_mcq","context":"<q:single> e0","truth":"A","difficulty":0.0,"extra":1}"#, "extra"),
        (r#"{"id":"b","kind":"single_mcq","context":"<q:single> zz","truth":"A","difficulty":0.0}"#, "context"),
        (r#"{"id":"b","kind":"single_mcq","context":"<q:single> e0","truth":"A","difficulty":"x"}"#, "difficulty"),
        (r#"{"id":"a","kind":"single_mcq","context":"<q:single> e0","truth":"A","difficulty":0.0}"#, "id"),
    ];
    for (line, field) in cases {
        let p = write(dir.path(), "bad.jsonl", &format!("{good}\n\n{line}\n"));
        match corpus::load_suite(&p, &v, Split::Train) {
            Err(Error::Record { line: 3, field: f, .. }) => assert_eq!(f, field),
            other => panic!("{field}: {other:?}"),
        }
    }
    let empty = write(dir.path(), "empty.jsonl", "");
    assert!(corpus::load_suite(&empty, &v, Split::Eval).unwrap().is_empty());
}

#[test]
fn config_rejects_unknown_keys_and_missing_files() {
    assert!(matches!(RunConfig::parse("output_dir = \"o\"\nbogus = 1\n"), Err(Error::Config(_))));
    assert!(matches!(RunConfig::parse("output_dir = \"o\"\n[grpo]\nclip = 0.1\n"), Err(Error::Config(_))));
    let cfg = RunConfig::parse("output_dir = \"o\"\n[uadt]\nentropy_source = \"rescored\"\n").unwrap();
    assert_eq!(cfg.train_config().uadt.entropy_source, uadt_core::trainer::EntropySource::Rescored);
    assert_eq!(RunConfig::parse("output_dir = \"o\"").unwrap().train_config(), uadt_core::trainer::TrainConfig::default());

    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "c.toml", "output_dir = \"o\"\n[data]\ntrain = [\"missing.jsonl\"]\n");
    assert!(matches!(RunConfig::load(&p), Err(Error::Config(_))));
    let p = write(dir.path(), "d.toml", "output_dir = \"o\"\n[data]\ntrain = [\"c.toml\"]\n[grpo]\ngroup_size = 1\n");
    assert!(matches!(RunConfig::load(&p), Err(Error::Config(_))));
}

#[test]
fn heatmap_export_from_empty_and_real_logs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "rollouts.jsonl", "");
    assert_eq!(commands::export_heatmap(&empty, 4, 4).unwrap(), format!("{}\n", output::HEATMAP_HEADER));
    let line = r#"{"step":1,"epoch":0,"task_id":"t","index":0,"seq_entropy":0.5,"advantage":1.0,"shaped_advantage":1.2,"reward":1.5}"#;
    let one = write(dir.path(), "one.jsonl", &format!("{line}\n"));
    let csv = commands::export_heatmap(&one, 3, 2).unwrap();
    let counts: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert_eq!(counts.len(), 6);
    assert_eq!(counts.iter().sum::<usize>(), 1);
    assert!(commands::export_heatmap(&one, 0, 2).is_err());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("s.jsonl");
    let out = bin()
        .args(["gen-suite", "--name", "s", "--n", "20", "--seed", "3", "--out"])
        .arg(&suite)
        .status()
        .unwrap();
    assert_eq!(out.code(), Some(0));

    let cfg = write(
        dir.path(),
        "c.toml",
        "stage = \"sft\"\noutput_dir = \"run\"\n[data]\ntrain = [\"s.jsonl\"]\n[sft]\nepochs = 2\n",
    );
    assert_eq!(bin().args(["train", "--config"]).arg(&cfg).stderr(Stdio::null()).status().unwrap().code(), Some(0));
    let ckpt = dir.path().join("run/final.ckpt");
    assert!(ckpt.is_file());

    let eval = bin().args(["eval", "--checkpoint"]).arg(&ckpt).arg("--suite").arg(&suite).output().unwrap();
    assert_eq!(eval.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(report["n"], 20);

    let bad = write(dir.path(), "bad.toml", "output_dir = \"o\"\nnope = true\n");
    assert_eq!(bin().args(["train", "--config"]).arg(&bad).stderr(Stdio::null()).status().unwrap().code(), Some(1));
    let missing = dir.path().join("absent.ckpt");
    let code = bin().args(["eval", "--checkpoint"]).arg(&missing).arg("--suite").arg(&suite).stderr(Stdio::null()).status().unwrap().code();
    assert_eq!(code, Some(3));
    assert_eq!(bin().arg("train").stderr(Stdio::null()).status().unwrap().code(), Some(1));
}
