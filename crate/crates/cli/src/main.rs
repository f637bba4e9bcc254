use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kgrel_core::pipeline::{inspect, run_command, Command};
use kgrel_core::{PipelineError, RunConfig};

#[derive(Parser)]
#[command(
    name = "kgrel",
    version,
    about = "Relation extraction with corpus-local knowledge-graph embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the knowledge graph and vocabularies from the training split.
    BuildKg(RunArgs),
    /// Train a KGE model; writes the checkpoint and a per-epoch loss CSV.
    TrainKge(RunArgs),
    /// Relation-slot link prediction, raw and filtered.
    EvalLp(RunArgs),
    /// Train the fusion classifier (CR-only when no KGE checkpoint is set).
    TrainRe(RunArgs),
    /// Evaluate a trained classifier on the test documents.
    EvalRe(RunArgs),
    /// CR vs CR+KGE on identical splits and seeds.
    Ablate(RunArgs),
    /// Both arms on test documents whose entity pairs are withheld from the KG.
    Holdout(RunArgs),
    /// Write a synthetic corpus with its ground-truth manifest.
    GenSynthetic(RunArgs),
    /// Print the header of a KGE1, CTXE, CTXB or FUSE file.
    Inspect { path: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// transe | distmult | complex
    #[arg(long = "kge")]
    kge: Option<String>,
    /// builtin | external:PATH
    #[arg(long)]
    encoder: Option<String>,
    /// add | concat
    #[arg(long)]
    fusion: Option<String>,
    /// Any config key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        let flags = [
            ("seed", self.seed.map(|s| s.to_string())),
            ("out", self.out.clone()),
            ("kge.kind", self.kge.clone()),
            ("encoder.mode", self.encoder.clone()),
            ("fusion.mode", self.fusion.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<serde_json::Value, PipelineError> {
    let (command, args) = match cli.command {
        Cmd::Inspect { path } => return inspect(&path),
        Cmd::BuildKg(a) => (Command::BuildKg, a),
        Cmd::TrainKge(a) => (Command::TrainKge, a),
        Cmd::EvalLp(a) => (Command::EvalLp, a),
        Cmd::TrainRe(a) => (Command::TrainRe, a),
        Cmd::EvalRe(a) => (Command::EvalRe, a),
        Cmd::Ablate(a) => (Command::Ablate, a),
        Cmd::Holdout(a) => (Command::Holdout, a),
        Cmd::GenSynthetic(a) => (Command::GenSynthetic, a),
    };
    let out = run_command(command, &args.resolve()?)?;
    Ok(serde_json::json!({
        "command": out.command,
        "out_dir": out.out_dir,
        "summary": out.summary,
    }))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("summary serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kgrel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
