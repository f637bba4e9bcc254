use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde_json::{json, Value};

use super::{
    kge_config, load_splits, make_encoder, marked, metrics_csv, re_config, require_training_data,
    CommandOutput, KgBundle, Run,
};
use crate::config::RunConfig;
use crate::corpus::{
    make_heldout_relation_split, split_documents, write_jsonl, MarkedDocument, RelationDocument,
};
use crate::encoder::{BuiltinEncoder, ContextEncoder, EmbeddingTable, CTXB_MAGIC, CTXE_MAGIC};
use crate::error::PipelineError;
use crate::fusion::{
    evaluate_re_detailed, train_re, FusionClassifier, KgeLookup, ReEvaluation, TrainedRe,
    FUSE_MAGIC,
};
use crate::kge::{evaluate_link_prediction, train_kge, KgeModel, RankMode, TrainedKge, KGE_MAGIC};
use crate::kgstore::{EntityVocab, KnowledgeGraph, Triple};
use crate::pipeline::Command;
use crate::synthetic::CorpusSpec;

pub fn cmd_build_kg(cfg: &RunConfig) -> Result<CommandOutput, PipelineError> {
    require_training_data(cfg)?;
    let mut run = Run::start(Command::BuildKg, cfg)?;
    let splits = load_splits(cfg)?;
    run.fingerprint("train", &splits.train);
    let (bundle, skipped) = KgBundle::from_docs(&splits.train)?;
    bundle.write(&mut run)?;
    let summary = json!({
        "documents": splits.train.len(),
        "surface_triples": splits.train.len() - skipped,
        "skipped_unlabeled": skipped,
        "triples": bundle.kg.len(),
        "entities": bundle.entities.len(),
        "relations": bundle.relations.len(),
        "entity_pairs": bundle.kg.num_pairs(),
    });
    run.write_json("build_kg.json", &summary)?;
    run.finish(summary)
}

fn train_kge_stage(
    cfg: &RunConfig,
    run: &mut Run<'_>,
    kg: &KnowledgeGraph,
) -> Result<TrainedKge, PipelineError> {
    let trained = train_kge(kg, &kge_config(cfg)?)?;
    run.write("model.kge", &trained.model.to_bytes())?;
    let rows: Vec<_> = trained
        .epoch_losses
        .iter()
        .enumerate()
        .map(|(i, &l)| (i + 1, "train", "loss", l))
        .collect();
    run.write("kge_loss.csv", metrics_csv(&rows).as_bytes())?;
    Ok(trained)
}

pub fn cmd_train_kge(cfg: &RunConfig) -> Result<CommandOutput, PipelineError> {
    let bundle = KgBundle::resolve(cfg)?;
    let mut run = Run::start(Command::TrainKge, cfg)?;
    if cfg.optional("kg.dir").is_none() {
        let splits = load_splits(cfg)?;
        run.fingerprint("train", &splits.train);
        bundle.write(&mut run)?;
    }
    let trained = train_kge_stage(cfg, &mut run, &bundle.kg)?;
    let summary = json!({
        "kind": trained.model.kind(),
        "dim": trained.model.dim(),
        "epochs": trained.epoch_losses.len(),
        "final_loss": trained.epoch_losses.last(),
        "flagged_negatives": trained.flagged_negatives,
    });
    run.finish(summary)
}

fn load_kge(cfg: &RunConfig, bundle: &KgBundle) -> Result<KgeModel, PipelineError> {
    let path = cfg
        .path("kge.checkpoint")
        .ok_or_else(|| PipelineError::Config("kge.checkpoint is required".into()))?;
    let model = KgeModel::load(&path)?;
    if model.num_entities() != bundle.entities.len()
        || model.num_relations() != bundle.relations.len()
    {
        return Err(PipelineError::Data(format!(
            "checkpoint has {} entities / {} relations but the vocabularies have {} / {}",
            model.num_entities(),
            model.num_relations(),
            bundle.entities.len(),
            bundle.relations.len()
        )));
    }
    Ok(model)
}

fn encode_triples(docs: &[RelationDocument], bundle: &KgBundle) -> (Vec<Triple>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    for d in docs {
        let ids = (
            bundle.entities.id(&d.head_key()),
            bundle.relations.id(&d.label),
            bundle.entities.id(&d.tail_key()),
        );
        match ids {
            (Some(h), Some(r), Some(t)) => out.push(Triple::new(h, r, t)),
            _ => skipped += 1,
        }
    }
    out.sort();
    out.dedup();
    (out, skipped)
}

pub fn cmd_eval_lp(cfg: &RunConfig) -> Result<CommandOutput, PipelineError> {
    let bundle = KgBundle::resolve(cfg)?;
    let model = load_kge(cfg, &bundle)?;
    let mut run = Run::start(Command::EvalLp, cfg)?;
    let splits = load_splits(cfg)?;
    let (test, skipped, source) = if splits.test.is_empty() {
        (bundle.kg.triples().to_vec(), 0, "kg")
    } else {
        run.fingerprint("test", &splits.test);
        let (t, s) = encode_triples(&splits.test, &bundle);
        (t, s, "test")
    };
    let known = KnowledgeGraph::from_triples(
        bundle.kg.num_entities(),
        bundle.kg.num_relations(),
        bundle.kg.triples().iter().chain(&test).copied(),
    )?;
    let raw = evaluate_link_prediction(&model, &test, &known, RankMode::Raw)?;
    let filtered = evaluate_link_prediction(&model, &test, &known, RankMode::Filtered)?;
    let summary = json!({
        "raw": raw,
        "filtered": filtered,
        "queries": test.len(),
        "query_source": source,
        "skipped_unknown": skipped,
    });
    run.write_json("lp_metrics.json", &summary)?;
    run.finish(summary)
}

fn entity_vocab_for_kge(cfg: &RunConfig) -> Result<Option<(KgeModel, EntityVocab)>, PipelineError> {
    if cfg.optional("kge.checkpoint").is_none() {
        return Ok(None);
    }
    let dir = cfg
        .path("kg.dir")
        .ok_or_else(|| PipelineError::Config("kg.dir is required with kge.checkpoint".into()))?;
    let bundle = KgBundle::read(&dir)?;
    let model = load_kge(cfg, &bundle)?;
    Ok(Some((model, bundle.entities)))
}

fn lookup<'a>(
    cfg: &RunConfig,
    model: &'a KgeModel,
    entities: &'a EntityVocab,
) -> Result<KgeLookup<'a>, PipelineError> {
    Ok(KgeLookup {
        model,
        entities,
        min_score: cfg.get_optional("kge.min_score")?,
        force_absent: cfg.get("fusion.force_absent")?,
    })
}

fn history_rows(t: &TrainedRe) -> Vec<(usize, &'static str, &'static str, f64)> {
    let mut rows = Vec::new();
    for r in &t.history {
        rows.push((r.epoch, "train", "loss", r.train_loss));
        for (name, v) in [
            ("accuracy", r.dev_accuracy),
            ("macro_f1", r.dev_macro_f1),
            ("micro_f1", r.dev_micro_f1),
        ] {
            if let Some(v) = v {
                rows.push((r.epoch, "dev", name, v));
            }
        }
    }
    rows
}

fn save_re(run: &mut Run<'_>, prefix: &str, t: &TrainedRe) -> Result<(), PipelineError> {
    run.write(
        &format!("{prefix}classifier.fuse"),
        &t.classifier.to_bytes()?,
    )?;
    if let ContextEncoder::Builtin(b) = &t.encoder {
        run.write(&format!("{prefix}encoder.ctxb"), &b.to_bytes())?;
    }
    run.write(
        &format!("{prefix}re_history.csv"),
        metrics_csv(&history_rows(t)).as_bytes(),
    )
}

fn evaluation_json(e: &ReEvaluation) -> Value {
    json!({
        "metrics": e.metrics,
        "fallbacks": e.fallbacks,
        "fallback_rate": e.fallback_rate(),
    })
}

pub fn cmd_train_re(cfg: &RunConfig) -> Result<CommandOutput, PipelineError> {
    require_training_data(cfg)?;
    let kge = entity_vocab_for_kge(cfg)?;
    let encoder = make_encoder(cfg)?;
    let re_cfg = re_config(cfg)?;
    let mut run = Run::start(Command::TrainRe, cfg)?;
    let splits = load_splits(cfg)?;
    run.fingerprint("train", &splits.train);
    run.fingerprint("dev", &splits.dev);
    let lk = kge.as_ref().map(|(m, e)| lookup(cfg, m, e)).transpose()?;
    let (train, dev) = (marked(&splits.train)?, marked(&splits.dev)?);
    let trained = train_re(&train, &dev, lk.as_ref(), &encoder, &re_cfg)?;
    save_re(&mut run, "", &trained)?;
    let mut summary = json!({
        "arm": if lk.is_some() { "cr_kge" } else { "cr" },
        "labels": trained.classifier.labels().names(),
        "best_epoch": trained.best_epoch,
        "epochs_run": trained.history.len(),
        "train_fallbacks": trained.train_fallbacks,
    });
    if !splits.test.is_empty() {
        run.fingerprint("test", &splits.test);
        let e = evaluate_re_detailed(
            &trained.classifier,
            &trained.encoder,
            lk.as_ref(),
            &marked(&splits.test)?,
        )?;
        summary["test"] = evaluation_json(&e);
    }
    run.write_json("re_metrics.json", &summary)?;
    run.finish(summary)
}

fn load_trained_encoder(cfg: &RunConfig, dir: &Path) -> Result<ContextEncoder, PipelineError> {
    let path = dir.join("encoder.ctxb");
    if path.exists() {
        Ok(ContextEncoder::Builtin(BuiltinEncoder::load(&path)?))
    } else {
        make_encoder(cfg)
    }
}

pub fn cmd_eval_re(cfg: &RunConfig) -> Result<CommandOutput, PipelineError> {
    let dir = cfg
        .path("fusion.dir")
        .ok_or_else(|| PipelineError::Config("fusion.dir is required".into()))?;
    let clf = FusionClassifier::load(&dir.join("classifier.fuse"))?;
    let encoder = load_trained_encoder(cfg, &dir)?;
    let kge = entity_vocab_for_kge(cfg)?;
    let mut run = Run::start(Command::EvalRe, cfg)?;
    let splits = load_splits(cfg)?;
    if splits.test.is_empty() {
        return Err(PipelineError::Data(
            "no test documents (set data.test or data.corpus)".into(),
        ));
    }
    run.fingerprint("test", &splits.test);
    let lk = kge.as_ref().map(|(m, e)| lookup(cfg, m, e)).transpose()?;
    let e = evaluate_re_detailed(&clf, &encoder, lk.as_ref(), &marked(&splits.test)?)?;
    let summary = evaluation_json(&e);
    run.write_json("re_eval.json", &summary)?;
    run.finish(summary)
}

struct ArmResult {
    trained: TrainedRe,
    test: ReEvaluation,
}

/// Trains and evaluates both arms from one encoder initialization.
fn paired_arms(
    cfg: &RunConfig,
    run: &mut Run<'_>,
    train: &[MarkedDocument],
    dev: &[MarkedDocument],
    test: &[MarkedDocument],
    kge: &KgeLookup<'_>,
) -> Result<(ArmResult, ArmResult), PipelineError> {
    let encoder = make_encoder(cfg)?;
    let re_cfg = re_config(cfg)?;
    let mut arm = |name: &str, lk: Option<&KgeLookup<'_>>| -> Result<ArmResult, PipelineError> {
        let trained = train_re(train, dev, lk, &encoder, &re_cfg)?;
        save_re(run, &format!("{name}_"), &trained)?;
        let test = evaluate_re_detailed(&trained.classifier, &trained.encoder, lk, test)?;
        Ok(ArmResult { trained, test })
    };
    let cr = arm("cr", None)?;
    let cr_kge = arm("cr_kge", Some(kge))?;
    Ok((cr, cr_kge))
}

fn arm_json(a: &ArmResult) -> Value {
    json!({
        "best_epoch": a.trained.best_epoch,
        "epochs_run": a.trained.history.len(),
        "train_fallbacks": a.trained.train_fallbacks,
        "test": evaluation_json(&a.test),
    })
}

fn delta_json(cr: &ArmResult, cr_kge: &ArmResult) -> Value {
    let delta = cr_kge.test.metrics.macro_f1 - cr.test.metrics.macro_f1;
    let sign = if delta > 0.0 {
        "positive"
    } else if delta < 0.0 {
        "negative"
    } else {
        "zero"
    };
    json!({
        "macro_f1": delta,
        "macro_f1_points": 100.0 * delta,
        "accuracy": cr_kge.test.metrics.accuracy - cr.test.metrics.accuracy,
        "sign": sign,
    })
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<CommandOutput, PipelineError> {
    require_training_data(cfg)?;
    let mut run = Run::start(Command::Ablate, cfg)?;
    let splits = load_splits(cfg)?;
    if splits.test.is_empty() {
        return Err(PipelineError::Data("ablation needs test documents".into()));
    }
    let fingerprints: BTreeMap<&str, String> = [
        ("train", &splits.train),
        ("dev", &splits.dev),
        ("test", &splits.test),
    ]
    .into_iter()
    .map(|(k, d)| (k, super::fingerprint_docs(d)))
    .collect();
    for (k, d) in [
        ("train", &splits.train),
        ("dev", &splits.dev),
        ("test", &splits.test),
    ] {
        run.fingerprint(k, d);
    }
    let (bundle, _) = KgBundle::from_docs(&splits.train)?;
    bundle.write(&mut run)?;
    let trained = train_kge_stage(cfg, &mut run, &bundle.kg)?;
    let lk = lookup(cfg, &trained.model, &bundle.entities)?;
    let (train, dev, test) = (
        marked(&splits.train)?,
        marked(&splits.dev)?,
        marked(&splits.test)?,
    );
    let (cr, cr_kge) = paired_arms(cfg, &mut run, &train, &dev, &test, &lk)?;
    let summary = json!({
        "data_fingerprints": {"cr": &fingerprints, "cr_kge": &fingerprints},
        "kge": {"kind": trained.model.kind(), "dim": trained.model.dim(), "final_loss": trained.epoch_losses.last()},
        "arms": {"cr": arm_json(&cr), "cr_kge": arm_json(&cr_kge)},
        "delta": delta_json(&cr, &cr_kge),
    });
    run.write_json("ablation.json", &summary)?;
    run.finish(summary)
}

pub fn cmd_holdout(cfg: &RunConfig) -> Result<CommandOutput, PipelineError> {
    require_training_data(cfg)?;
    let mut run = Run::start(Command::Holdout, cfg)?;
    let docs = match cfg.path("data.corpus") {
        Some(p) => super::load_docs(cfg, &p)?,
        None => load_splits(cfg)?.train,
    };
    run.fingerprint("corpus", &docs);
    let split = make_heldout_relation_split(
        &docs,
        cfg.get("holdout.fraction")?,
        cfg.stage_seed("holdout")?,
    )?;
    let s = split_documents(
        split.kge_train,
        cfg.get("data.dev_fraction")?,
        0.0,
        cfg.stage_seed("split")?,
    )?;
    let (train_docs, dev_docs, test_docs) = (s.train, s.dev, split.re_test);
    run.fingerprint("train", &train_docs);
    run.fingerprint("dev", &dev_docs);
    run.fingerprint("test", &test_docs);

    let (bundle, _) = KgBundle::from_docs(&train_docs)?;
    let kg_pairs: BTreeSet<(u32, u32)> = bundle
        .kg
        .triples()
        .iter()
        .map(|t| (t.head, t.tail))
        .collect();
    for d in &test_docs {
        if let (Some(h), Some(t)) = (
            bundle.entities.id(&d.head_key()),
            bundle.entities.id(&d.tail_key()),
        ) {
            if kg_pairs.contains(&(h, t)) {
                return Err(PipelineError::Data(format!(
                    "held-out document `{}` shares its entity pair with the KGE training graph",
                    d.id
                )));
            }
        }
    }
    bundle.write(&mut run)?;
    let trained = train_kge_stage(cfg, &mut run, &bundle.kg)?;
    let lk = lookup(cfg, &trained.model, &bundle.entities)?;
    let oov = test_docs
        .iter()
        .filter(|d| {
            bundle.entities.id(&d.head_key()).is_none()
                || bundle.entities.id(&d.tail_key()).is_none()
        })
        .count();
    let (train, dev, test) = (
        marked(&train_docs)?,
        marked(&dev_docs)?,
        marked(&test_docs)?,
    );
    let (cr, cr_kge) = paired_arms(cfg, &mut run, &train, &dev, &test, &lk)?;
    let summary = json!({
        "heldout_pairs": split.heldout_pairs.len(),
        "pair_disjoint": true,
        "documents": {"train": train.len(), "dev": dev.len(), "test": test.len()},
        "oov_documents": oov,
        "oov_rate": oov as f64 / test.len() as f64,
        "fallback_rate": cr_kge.test.fallback_rate(),
        "arms": {"cr": arm_json(&cr), "cr_kge": arm_json(&cr_kge)},
        "delta": delta_json(&cr, &cr_kge),
    });
    run.write_json("holdout.json", &summary)?;
    run.finish(summary)
}

pub fn synthetic_spec(cfg: &RunConfig) -> Result<CorpusSpec, PipelineError> {
    Ok(CorpusSpec {
        docs: cfg.get("synthetic.docs")?,
        labels: cfg.get("synthetic.labels")?,
        entity_types: cfg.get("synthetic.entity_types")?,
        entities_per_type: cfg.get("synthetic.entities_per_type")?,
        pair_fraction: cfg.get("synthetic.pair_fraction")?,
        noise: cfg.get("synthetic.noise")?,
        filler_words: cfg.get("synthetic.filler_words")?,
        min_filler: cfg.get("synthetic.min_filler")?,
        max_filler: cfg.get("synthetic.max_filler")?,
        seed: cfg.stage_seed("synthetic")?,
    })
}

pub fn cmd_gen_synthetic(cfg: &RunConfig) -> Result<CommandOutput, PipelineError> {
    let spec = synthetic_spec(cfg)?;
    let corpus = spec.generate().map_err(PipelineError::Config)?;
    let mut run = Run::start(Command::GenSynthetic, cfg)?;
    let path = run.path("corpus.jsonl");
    write_jsonl(&path, &corpus.docs).map_err(|e| PipelineError::io(&path, e))?;
    run.record("corpus.jsonl")?;
    run.fingerprint("corpus", &corpus.docs);
    run.write_json("ground_truth.json", &corpus.truth)?;
    let pair_docs = corpus
        .truth
        .documents
        .iter()
        .filter(|d| d.source == crate::synthetic::LabelSource::Pair)
        .count();
    run.finish(json!({
        "documents": corpus.docs.len(),
        "pair_determined": pair_docs,
        "labels": corpus.truth.label_names,
    }))
}

/// Header of a `KGE1`, `CTXE`, `CTXB` or `FUSE` file.
pub fn inspect(path: &Path) -> Result<Value, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    let magic = bytes
        .get(..4)
        .ok_or_else(|| PipelineError::Data(format!("{}: shorter than 4 bytes", path.display())))?;
    if magic == KGE_MAGIC {
        let h = crate::kge::read_header(path)?;
        return Ok(json!({"format": "KGE1", "header": h}));
    }
    if magic == CTXE_MAGIC {
        let t = EmbeddingTable::from_bytes(&bytes)?;
        return Ok(json!({"format": "CTXE", "count": t.len(), "dim": t.dim()}));
    }
    if magic == CTXB_MAGIC {
        let b = BuiltinEncoder::from_bytes(&bytes)?;
        return Ok(json!({"format": "CTXB", "vocab_size": b.vocab_size(), "dim": b.dim()}));
    }
    if magic == FUSE_MAGIC {
        let c = FusionClassifier::from_bytes(&bytes)?;
        return Ok(json!({
            "format": "FUSE",
            "context_dim": c.context_dim(),
            "relation_dim": c.relation_dim(),
            "labels": c.labels().names(),
            "mode": c.mode(),
            "dropout": c.dropout(),
        }));
    }
    Err(PipelineError::Data(format!(
        "{}: unrecognized magic {magic:?}",
        path.display()
    )))
}
