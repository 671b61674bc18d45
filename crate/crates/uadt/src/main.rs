use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uadt::commands::{self, SuiteSpec};
use uadt::{output, Error};
use uadt_core::eval::{Decode, EvalOptions};
use uadt_core::Vocab;

#[derive(Parser)]
#[command(name = "uadt", version, about = "Group-relative RL with entropy-shaped advantages on synthetic tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run supervised tuning or RL as configured.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on a task suite.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = 32)]
        max_len: usize,
        /// Sampled candidates per instance; 0 decodes greedily.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        sample_seed: u64,
        /// Directory for report.json and report.csv; prints JSON if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare plain and entropy-shaped RL across seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
    },
    /// Bin logged rollouts by entropy and advantage.
    ExportHeatmap {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins_x: usize,
        #[arg(long, default_value_t = 20)]
        bins_y: usize,
        /// Output CSV path; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic task suite.
    GenSuite {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        labels: usize,
        #[arg(long, default_value_t = 0)]
        symbols: usize,
        /// Open-ended suite with this shift; multiple choice if absent.
        #[arg(long)]
        transform_len: Option<usize>,
        #[arg(long, default_value_t = 4)]
        options: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        multi: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> uadt::Result<()> {
    match cli.command {
        Command::Train { config } => commands::train(&config),
        Command::Eval { checkpoint, suite, max_len, samples, sample_seed, out } => {
            let decode = if samples == 0 { Decode::Greedy } else { Decode::Sample { k: samples, seed: sample_seed } };
            let opts = EvalOptions { decode, max_len, ..EvalOptions::default() };
            let report = commands::eval(&checkpoint, &suite, &opts)?;
            match out {
                Some(dir) => {
                    output::create_dir(&dir)?;
                    output::write_text(&dir.join("report.json"), &output::report_json(&report))?;
                    let csv = format!("{}\n{}\n", output::REPORT_CSV_HEADER, output::report_csv_row(&report));
                    output::write_text(&dir.join("report.csv"), &csv)
                }
                None => {
                    println!("{}", output::report_json(&report));
                    Ok(())
                }
            }
        }
        Command::Ablate { config, seeds } => {
            let summary = commands::ablate(&config, &seeds)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            Ok(())
        }
        Command::ExportHeatmap { log, bins_x, bins_y, out } => {
            let csv = commands::export_heatmap(&log, bins_x, bins_y)?;
            match out {
                Some(p) => output::write_text(&p, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::GenSuite { out, name, n, labels, symbols, transform_len, options, noise, multi, seed } => {
            let vocab = Vocab::new(labels, symbols).map_err(Error::from)?;
            let spec = match transform_len {
                Some(t) => SuiteSpec::Open { transform_len: t },
                None => SuiteSpec::Mcq { num_options: options, noise, multi },
            };
            commands::gen_suite(&vocab, &name, n, &spec, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
