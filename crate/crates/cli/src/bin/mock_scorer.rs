//! Test double for the line-delimited JSON scorer protocol.
//!
//! Reads one request object per stdin line (`{"id", "text", "aspect",
//! "labels"}`) and answers one response per line. Four behaviours:
//! `--mirror-lightweight` trains the in-process lightweight surrogate on
//! `--train` and scores with it (so a pipeline driven over the wire must
//! match one scored in process), `--fixed` answers every request with a
//! constant uniform triple, `--malformed` answers garbage, and `--hang`
//! never answers.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::{Deserialize, Serialize};

use boostaug_core::{
    load_absc_dataset, load_tc_dataset, train_lightweight, LightweightModel, SurrogateModel,
    SurrogateTrainConfig, Task,
};

#[derive(Parser)]
#[command(name = "mock_scorer", about = "Scripted scorer for protocol tests")]
struct Cli {
    /// Score with a lightweight surrogate trained on --train.
    #[arg(long, conflicts_with_all = ["fixed", "malformed", "hang"])]
    mirror_lightweight: bool,

    /// Answer every request with perplexity 2 and a uniform posterior.
    #[arg(long, conflicts_with_all = ["malformed", "hang"])]
    fixed: bool,

    /// Answer every request with a non-protocol line.
    #[arg(long, conflicts_with = "hang")]
    malformed: bool,

    /// Read requests but never answer.
    #[arg(long)]
    hang: bool,

    /// Training dataset for --mirror-lightweight.
    #[arg(long)]
    train: Option<PathBuf>,

    /// Dataset task for --train: tc or absc.
    #[arg(long, default_value = "tc")]
    task: String,
}

#[derive(Deserialize)]
struct Request {
    id: u64,
    text: String,
    aspect: Option<String>,
    labels: Vec<String>,
}

#[derive(Serialize)]
struct Response {
    id: u64,
    perplexity: f64,
    confidence: Vec<f64>,
    label: String,
}

fn train_mirror(cli: &Cli) -> Result<LightweightModel, String> {
    let path = cli
        .train
        .as_ref()
        .ok_or("--mirror-lightweight needs --train")?;
    let task: Task = cli.task.parse().map_err(|e| format!("{e}"))?;
    let dataset = match task {
        Task::Tc => load_tc_dataset(path),
        Task::Absc => load_absc_dataset(path),
    }
    .map_err(|e| format!("{e}"))?;
    train_lightweight(
        &dataset,
        &dataset.empty_like(),
        &SurrogateTrainConfig::default(),
        0,
    )
    .map_err(|e| format!("{e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let model = if cli.mirror_lightweight {
        match train_mirror(&cli) {
            Ok(model) => Some(model),
            Err(msg) => {
                eprintln!("mock_scorer: {msg}");
                return ExitCode::from(2);
            }
        }
    } else {
        None
    };

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if cli.hang {
            loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            }
        }
        let mut out = stdout.lock();
        if cli.malformed {
            let _ = writeln!(out, "{{\"surprise\": true}}");
            let _ = out.flush();
            continue;
        }
        let request: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("mock_scorer: bad request: {e}");
                return ExitCode::from(1);
            }
        };
        let response = match &model {
            Some(model) => match model.score(&request.text, request.aspect.as_deref()) {
                Ok(triple) => Response {
                    id: request.id,
                    perplexity: triple.perplexity,
                    confidence: triple.confidence.clone(),
                    label: triple.predicted_label.clone(),
                },
                Err(e) => {
                    eprintln!("mock_scorer: scoring failed: {e}");
                    return ExitCode::from(1);
                }
            },
            None => {
                // Uniform posterior; ties argmax to the first label.
                let k = request.labels.len().max(1);
                Response {
                    id: request.id,
                    perplexity: 2.0,
                    confidence: vec![1.0 / k as f64; k],
                    label: request.labels.first().cloned().unwrap_or_default(),
                }
            }
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&response).expect("serializes"));
        let _ = out.flush();
    }
    ExitCode::SUCCESS
}
