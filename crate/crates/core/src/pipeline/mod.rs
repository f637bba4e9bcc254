//! End-to-end commands over a [`RunConfig`]. Every command writes its
//! resolved config (`config.resolved`) and a `manifest.json` with stage
//! seeds, input fingerprints and output digests into the output directory.

mod commands;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::corpus::{
    extract_triples, insert_entity_markers, parse_re_dataset, split_documents, to_jsonl,
    DatasetFormat, MarkedDocument, RelationDocument,
};
use crate::encoder::{load_external_embeddings, BuiltinEncoder, ContextEncoder, EncoderError};
use crate::error::PipelineError;
use crate::fusion::{FusionMode, ReTrainConfig};
use crate::kge::{KgeTrainConfig, ModelKind, OptimizerKind};
use crate::kgstore::{
    build_kg, read_kg, EntityVocab, KnowledgeGraph, NegativeStrategy, RelationVocab, Vocab,
};

pub use commands::{
    cmd_ablate, cmd_build_kg, cmd_eval_lp, cmd_eval_re, cmd_gen_synthetic, cmd_holdout,
    cmd_train_kge, cmd_train_re, inspect,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BuildKg,
    TrainKge,
    EvalLp,
    TrainRe,
    EvalRe,
    Ablate,
    Holdout,
    GenSynthetic,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::BuildKg,
        Command::TrainKge,
        Command::EvalLp,
        Command::TrainRe,
        Command::EvalRe,
        Command::Ablate,
        Command::Holdout,
        Command::GenSynthetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::BuildKg => "build-kg",
            Command::TrainKge => "train-kge",
            Command::EvalLp => "eval-lp",
            Command::TrainRe => "train-re",
            Command::EvalRe => "eval-re",
            Command::Ablate => "ablate",
            Command::Holdout => "holdout",
            Command::GenSynthetic => "gen-synthetic",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandOutput {
    pub command: &'static str,
    pub out_dir: PathBuf,
    /// Output file name → SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub summary: Value,
}

pub fn run_command(command: Command, cfg: &RunConfig) -> Result<CommandOutput, PipelineError> {
    match command {
        Command::BuildKg => cmd_build_kg(cfg),
        Command::TrainKge => cmd_train_kge(cfg),
        Command::EvalLp => cmd_eval_lp(cfg),
        Command::TrainRe => cmd_train_re(cfg),
        Command::EvalRe => cmd_eval_re(cfg),
        Command::Ablate => cmd_ablate(cfg),
        Command::Holdout => cmd_holdout(cfg),
        Command::GenSynthetic => cmd_gen_synthetic(cfg),
    }
}

pub const STAGES: [&str; 6] = ["split", "holdout", "kge", "encoder", "fusion", "synthetic"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn fingerprint_docs(docs: &[RelationDocument]) -> String {
    sha256_hex(to_jsonl(docs).as_bytes())
}

/// Collects outputs of one command run and writes the run record.
pub(crate) struct Run<'a> {
    command: &'static str,
    cfg: &'a RunConfig,
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
    fingerprints: BTreeMap<String, String>,
}

impl<'a> Run<'a> {
    pub fn start(command: Command, cfg: &'a RunConfig) -> Result<Self, PipelineError> {
        cfg.seed()?;
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        let path = dir.join("config.resolved");
        fs::write(&path, cfg.to_text()).map_err(|e| PipelineError::io(&path, e))?;
        Ok(Run {
            command: command.name(),
            cfg,
            dir,
            outputs: BTreeMap::new(),
            fingerprints: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn fingerprint(&mut self, name: &str, docs: &[RelationDocument]) {
        self.fingerprints
            .insert(name.to_string(), fingerprint_docs(docs));
    }

    /// Records a file already written under the output directory.
    pub fn record(&mut self, name: &str) -> Result<(), PipelineError> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(|e| PipelineError::io(&path, e))?;
        self.outputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| PipelineError::Data(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, summary: Value) -> Result<CommandOutput, PipelineError> {
        let seeds: BTreeMap<&str, u64> = STAGES
            .iter()
            .map(|s| Ok((*s, self.cfg.stage_seed(s)?)))
            .collect::<Result<_, PipelineError>>()?;
        let manifest = json!({
            "command": self.command,
            "seed": self.cfg.seed()?,
            "stage_seeds": seeds,
            "data_fingerprints": self.fingerprints,
            "outputs": self.outputs,
        });
        let path = self.path("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| PipelineError::Data(e.to_string()))?
            + "\n";
        fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))?;
        Ok(CommandOutput {
            command: self.command,
            out_dir: self.dir,
            outputs: self.outputs,
            summary,
        })
    }
}

pub(crate) fn load_docs(
    cfg: &RunConfig,
    path: &Path,
) -> Result<Vec<RelationDocument>, PipelineError> {
    let format = match cfg.optional("data.format") {
        Some(f) => f.parse::<DatasetFormat>().map_err(PipelineError::Config)?,
        None => DatasetFormat::from_path(path),
    };
    Ok(parse_re_dataset(path, format)?)
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Splits {
    pub train: Vec<RelationDocument>,
    pub dev: Vec<RelationDocument>,
    pub test: Vec<RelationDocument>,
}

/// `data.corpus` is split by the `split` stage seed; otherwise the explicit
/// `data.train` / `data.dev` / `data.test` files are read.
pub(crate) fn load_splits(cfg: &RunConfig) -> Result<Splits, PipelineError> {
    if let Some(corpus) = cfg.path("data.corpus") {
        let docs = load_docs(cfg, &corpus)?;
        let s = split_documents(
            docs,
            cfg.get("data.dev_fraction")?,
            cfg.get("data.test_fraction")?,
            cfg.stage_seed("split")?,
        )?;
        return Ok(Splits {
            train: s.train,
            dev: s.dev,
            test: s.test,
        });
    }
    let read = |key: &str| match cfg.path(key) {
        Some(p) => load_docs(cfg, &p),
        None => Ok(Vec::new()),
    };
    Ok(Splits {
        train: read("data.train")?,
        dev: read("data.dev")?,
        test: read("data.test")?,
    })
}

pub(crate) fn require_training_data(cfg: &RunConfig) -> Result<(), PipelineError> {
    if cfg.optional("data.corpus").is_none() && cfg.optional("data.train").is_none() {
        return Err(PipelineError::Config(
            "set data.corpus or data.train".into(),
        ));
    }
    Ok(())
}

pub(crate) fn marked(docs: &[RelationDocument]) -> Result<Vec<MarkedDocument>, PipelineError> {
    docs.iter()
        .map(|d| {
            insert_entity_markers(d)
                .map_err(|e| PipelineError::Data(format!("document `{}`: {e}", d.id)))
        })
        .collect()
}

pub(crate) struct KgBundle {
    pub kg: KnowledgeGraph,
    pub entities: EntityVocab,
    pub relations: RelationVocab,
}

impl KgBundle {
    pub fn from_docs(train: &[RelationDocument]) -> Result<(Self, usize), PipelineError> {
        let extraction = extract_triples(train);
        let (entities, relations) = Vocab::from_triples(&extraction.triples);
        let kg = build_kg(&extraction.triples, &entities, &relations)?;
        Ok((
            KgBundle {
                kg,
                entities,
                relations,
            },
            extraction.skipped_unlabeled,
        ))
    }

    pub fn read(dir: &Path) -> Result<Self, PipelineError> {
        Ok(KgBundle {
            kg: read_kg(&dir.join("kg.tsv"))?,
            entities: Vocab::read(&dir.join("entities.txt"))?,
            relations: Vocab::read(&dir.join("relations.txt"))?,
        })
    }

    /// `kg.dir` when set, otherwise built from the training documents.
    pub fn resolve(cfg: &RunConfig) -> Result<Self, PipelineError> {
        match cfg.path("kg.dir") {
            Some(dir) => Self::read(&dir),
            None => {
                require_training_data(cfg)?;
                Ok(Self::from_docs(&load_splits(cfg)?.train)?.0)
            }
        }
    }

    pub fn write(&self, run: &mut Run<'_>) -> Result<(), PipelineError> {
        crate::kgstore::write_kg(&run.path("kg.tsv"), &self.kg)?;
        self.entities.write(&run.path("entities.txt"))?;
        self.relations.write(&run.path("relations.txt"))?;
        for name in ["kg.tsv", "entities.txt", "relations.txt"] {
            run.record(name)?;
        }
        Ok(())
    }
}

fn parse_with<T: FromStr<Err = String>>(cfg: &RunConfig, key: &str) -> Result<T, PipelineError> {
    cfg.raw(key)
        .parse()
        .map_err(|e: String| PipelineError::Config(format!("`{key}`: {e}")))
}

pub(crate) fn kge_config(cfg: &RunConfig) -> Result<KgeTrainConfig, PipelineError> {
    Ok(KgeTrainConfig {
        kind: parse_with::<ModelKind>(cfg, "kge.kind")?,
        dim: cfg.get("kge.dim")?,
        epochs: cfg.get("kge.epochs")?,
        learning_rate: cfg.get("kge.learning_rate")?,
        optimizer: parse_with::<OptimizerKind>(cfg, "kge.optimizer")?,
        margin: cfg.get("kge.margin")?,
        l2_lambda: cfg.get("kge.l2_lambda")?,
        negatives_per_positive: cfg.get("kge.negatives")?,
        batch_size: cfg.get("kge.batch_size")?,
        strategy: parse_with::<NegativeStrategy>(cfg, "kge.strategy")?,
        seed: cfg.stage_seed("kge")?,
    })
}

pub(crate) fn re_config(cfg: &RunConfig) -> Result<ReTrainConfig, PipelineError> {
    Ok(ReTrainConfig {
        mode: parse_with::<FusionMode>(cfg, "fusion.mode")?,
        dropout: cfg.get("fusion.dropout")?,
        learning_rate: cfg.get("fusion.learning_rate")?,
        max_epochs: cfg.get("fusion.max_epochs")?,
        patience: cfg.get("fusion.patience")?,
        batch_size: cfg.get("fusion.batch_size")?,
        class_weights: cfg.get("fusion.class_weights")?,
        train_encoder: cfg.get("encoder.train")?,
        seed: cfg.stage_seed("fusion")?,
    })
}

/// Fresh encoder: random builtin table from the `encoder` stage seed, or
/// the external table named by `encoder.mode = external:PATH`.
pub(crate) fn make_encoder(cfg: &RunConfig) -> Result<ContextEncoder, PipelineError> {
    let mode = cfg.raw("encoder.mode");
    if mode == "builtin" {
        let v: usize = cfg.get("encoder.vocab_size")?;
        let d: usize = cfg.get("encoder.dim")?;
        if v == 0 || d == 0 {
            return Err(EncoderError::Config("vocab_size and dim must be positive".into()).into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.stage_seed("encoder")?);
        return Ok(ContextEncoder::Builtin(BuiltinEncoder::random(
            v, d, &mut rng,
        )));
    }
    match mode.strip_prefix("external:") {
        Some(path) if !path.is_empty() => Ok(ContextEncoder::External(load_external_embeddings(
            Path::new(path),
        )?)),
        _ => Err(PipelineError::Config(format!(
            "encoder.mode must be `builtin` or `external:PATH`, got `{mode}`"
        ))),
    }
}

/// Plot-ready rows: `epoch,split,metric,value`.
pub(crate) fn metrics_csv(rows: &[(usize, &str, &str, f64)]) -> String {
    let mut out = String::from("epoch,split,metric,value\n");
    for (epoch, split, metric, value) in rows {
        out.push_str(&format!("{epoch},{split},{metric},{value}\n"));
    }
    out
}
