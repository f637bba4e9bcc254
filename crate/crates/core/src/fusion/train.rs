use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classifier::{softmax, FusionClassifier, FusionMode};
use super::metrics::{score_predictions, ReMetrics};
use super::FusionError;
use crate::corpus::MarkedDocument;
use crate::encoder::ContextEncoder;
use crate::kge::{relation_representation_with_threshold, representation_dim, KgeModel};
use crate::kgstore::{EntityVocab, Vocab};

const ADAGRAD_EPS: f64 = 1e-10;

/// Frozen KGE model plus the vocabulary mapping document entities to rows.
#[derive(Debug, Clone, Copy)]
pub struct KgeLookup<'a> {
    pub model: &'a KgeModel,
    pub entities: &'a EntityVocab,
    /// Scores below this also count as "no relation found".
    pub min_score: Option<f64>,
    /// Ablation switch: treat every document as having no relation vector.
    pub force_absent: bool,
}

impl<'a> KgeLookup<'a> {
    pub fn new(model: &'a KgeModel, entities: &'a EntityVocab) -> Self {
        KgeLookup {
            model,
            entities,
            min_score: None,
            force_absent: false,
        }
    }

    pub fn relation_dim(&self) -> usize {
        representation_dim(self.model)
    }

    pub fn representation(&self, doc: &MarkedDocument) -> Option<Vec<f64>> {
        if self.force_absent {
            return None;
        }
        let h = self.entities.id(&doc.head_entity);
        let t = self.entities.id(&doc.tail_entity);
        relation_representation_with_threshold(self.model, h, t, self.min_score)
            .map(|v| v.into_iter().map(f64::from).collect())
    }
}

fn representation(kge: Option<&KgeLookup<'_>>, doc: &MarkedDocument) -> Option<Vec<f64>> {
    kge.and_then(|k| k.representation(doc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReTrainConfig {
    pub mode: FusionMode,
    pub dropout: f32,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without dev macro-F1 improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    /// Weight each document's loss by N / (|L| · count(label)).
    pub class_weights: bool,
    /// Update the builtin encoder's token table along with the classifier.
    pub train_encoder: bool,
    pub seed: u64,
}

impl Default for ReTrainConfig {
    fn default() -> Self {
        ReTrainConfig {
            mode: FusionMode::Add,
            dropout: 0.1,
            learning_rate: 0.05,
            max_epochs: 100,
            patience: 5,
            batch_size: 32,
            class_weights: false,
            train_encoder: true,
            seed: 0,
        }
    }
}

impl ReTrainConfig {
    fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: &str| Err(FusionError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return bad("max_epochs and batch_size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: Option<f64>,
    pub dev_macro_f1: Option<f64>,
    pub dev_micro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRe {
    pub classifier: FusionClassifier,
    /// Encoder in the state matching `classifier`; unchanged for external
    /// vectors or when encoder training is off.
    pub encoder: ContextEncoder,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Training documents with no relation vector.
    pub train_fallbacks: usize,
}

fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_PROJECTION: u64 = 1;
const STREAM_HEAD: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

struct Adagrad {
    lr: f64,
    acc: Vec<f64>,
}

impl Adagrad {
    fn new(lr: f64, n: usize) -> Self {
        Adagrad {
            lr,
            acc: vec![0.0; n],
        }
    }

    fn step(&mut self, params: &mut [f32], grads: &[f64], scale: f64) {
        for ((p, a), &g) in params.iter_mut().zip(&mut self.acc).zip(grads) {
            let g = g * scale;
            if g != 0.0 {
                *a += g * g;
                *p = (*p as f64 - self.lr * g / (a.sqrt() + ADAGRAD_EPS)) as f32;
            }
        }
    }
}

struct Grads {
    w_star: Vec<f64>,
    b_star: Vec<f64>,
    head_w: Vec<f64>,
    head_b: Vec<f64>,
    /// Bucket → gradient of the token row.
    tokens: BTreeMap<usize, Vec<f64>>,
}

impl Grads {
    fn new(clf: &FusionClassifier) -> Self {
        Grads {
            w_star: vec![0.0; clf.w_star.len()],
            b_star: vec![0.0; clf.b_star.len()],
            head_w: vec![0.0; clf.head_w.len()],
            head_b: vec![0.0; clf.head_b.len()],
            tokens: BTreeMap::new(),
        }
    }

    fn clear(&mut self) {
        for v in [
            &mut self.w_star,
            &mut self.b_star,
            &mut self.head_w,
            &mut self.head_b,
        ] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        self.tokens.clear();
    }
}

struct Example {
    label: usize,
    weight: f64,
    /// Hashed token rows for the builtin encoder.
    buckets: Vec<usize>,
    /// Fixed H_c when the encoder is not trained.
    context: Option<Vec<f64>>,
    relation: Option<Vec<f64>>,
}

fn label_vocab(docs: &[MarkedDocument]) -> Result<Vocab, FusionError> {
    let mut names: Vec<&str> = docs.iter().map(|d| d.label.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.is_empty() {
        return Err(FusionError::EmptyLabelVocab);
    }
    Ok(Vocab::from_names(names).expect("names are deduplicated"))
}

fn label_id(labels: &Vocab, label: &str) -> Result<usize, FusionError> {
    labels
        .id(label)
        .map(|i| i as usize)
        .ok_or_else(|| FusionError::UnknownLabel(label.to_string()))
}

/// Cross-entropy training of the fusion classifier (and the builtin token
/// table) with dev macro-F1 early stopping. The KGE model is read only.
pub fn train_re(
    train: &[MarkedDocument],
    dev: &[MarkedDocument],
    kge: Option<&KgeLookup<'_>>,
    encoder: &ContextEncoder,
    cfg: &ReTrainConfig,
) -> Result<TrainedRe, FusionError> {
    cfg.validate()?;
    let labels = label_vocab(train)?;
    for doc in dev {
        label_id(&labels, &doc.label)?;
    }
    let relation_dim = kge.map_or(0, |k| k.relation_dim());
    let mut clf = FusionClassifier::random(
        cfg.mode,
        encoder.dim(),
        relation_dim,
        labels,
        cfg.dropout,
        &mut seeded_stream(cfg.seed, STREAM_PROJECTION),
        &mut seeded_stream(cfg.seed, STREAM_HEAD),
    );
    let mut encoder = encoder.clone();
    let trainable = cfg.train_encoder && matches!(encoder, ContextEncoder::Builtin(_));

    let mut counts = vec![0usize; clf.labels.len()];
    let mut examples = Vec::with_capacity(train.len());
    for doc in train {
        let label = label_id(&clf.labels, &doc.label)?;
        counts[label] += 1;
        let (buckets, context) = match &encoder {
            ContextEncoder::Builtin(b) if trainable => {
                if doc.tokens.is_empty() {
                    return Err(
                        crate::encoder::EncoderError::EmptyDocument { id: doc.id.clone() }.into(),
                    );
                }
                (b.buckets(&doc.tokens), None)
            }
            _ => (Vec::new(), Some(encoder.encode_document(doc)?)),
        };
        examples.push(Example {
            label,
            weight: 1.0,
            buckets,
            context,
            relation: representation(kge, doc),
        });
    }
    if cfg.class_weights {
        let n = train.len() as f64;
        let k = clf.labels.len() as f64;
        for ex in &mut examples {
            ex.weight = n / (k * counts[ex.label] as f64);
        }
    }
    let train_fallbacks = examples.iter().filter(|e| e.relation.is_none()).count();

    let dev_relations: Vec<Option<Vec<f64>>> = dev.iter().map(|d| representation(kge, d)).collect();

    let mut opt_w_star = Adagrad::new(cfg.learning_rate, clf.w_star.len());
    let mut opt_b_star = Adagrad::new(cfg.learning_rate, clf.b_star.len());
    let mut opt_head_w = Adagrad::new(cfg.learning_rate, clf.head_w.len());
    let mut opt_head_b = Adagrad::new(cfg.learning_rate, clf.head_b.len());
    let mut token_acc: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut grads = Grads::new(&clf);

    let mut shuffle_rng = seeded_stream(cfg.seed, STREAM_SHUFFLE);
    let mut dropout_rng = seeded_stream(cfg.seed, STREAM_DROPOUT);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, FusionClassifier, ContextEncoder)> = None;
    let mut stale = 0;
    let d_c = clf.context_dim;
    let width = clf.width();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            for &i in batch {
                let ex = &examples[i];
                let h_c = match (&ex.context, &encoder) {
                    (Some(c), _) => c.clone(),
                    (None, ContextEncoder::Builtin(b)) => b.pool(&ex.buckets),
                    (None, ContextEncoder::External(_)) => {
                        unreachable!("external contexts are precomputed")
                    }
                };
                let fwd = clf.forward(&h_c, ex.relation.as_deref(), Some(&mut dropout_rng));
                let p = softmax(&clf.logits(&fwd.nu));
                total_loss -= ex.weight * p[ex.label].max(f64::MIN_POSITIVE).ln();

                let mut d_nu = vec![0.0; width];
                for (l, &pl) in p.iter().enumerate() {
                    let dz = ex.weight * (pl - if l == ex.label { 1.0 } else { 0.0 });
                    grads.head_b[l] += dz;
                    let row = &clf.head_w[l * width..(l + 1) * width];
                    let g_row = &mut grads.head_w[l * width..(l + 1) * width];
                    for j in 0..width {
                        g_row[j] += dz * fwd.nu[j];
                        d_nu[j] += dz * row[j] as f64;
                    }
                }
                if let Some(h_r) = &ex.relation {
                    let offset = if clf.mode == FusionMode::Concat {
                        d_c
                    } else {
                        0
                    };
                    for k in 0..d_c {
                        let mut g = d_nu[offset + k];
                        if let Some(m) = &fwd.mask {
                            g *= m[k];
                        }
                        if g == 0.0 {
                            continue;
                        }
                        grads.b_star[k] += g;
                        let g_row = &mut grads.w_star[k * relation_dim..(k + 1) * relation_dim];
                        for (gw, &x) in g_row.iter_mut().zip(h_r) {
                            *gw += g * x;
                        }
                    }
                }
                if trainable {
                    let share = 1.0 / ex.buckets.len() as f64;
                    for &b in &ex.buckets {
                        let g = grads.tokens.entry(b).or_insert_with(|| vec![0.0; d_c]);
                        for (gi, &dn) in g.iter_mut().zip(&d_nu[..d_c]) {
                            *gi += share * dn;
                        }
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            opt_w_star.step(&mut clf.w_star, &grads.w_star, scale);
            opt_b_star.step(&mut clf.b_star, &grads.b_star, scale);
            opt_head_w.step(&mut clf.head_w, &grads.head_w, scale);
            opt_head_b.step(&mut clf.head_b, &grads.head_b, scale);
            if let ContextEncoder::Builtin(b) = &mut encoder {
                for (&bucket, g) in &grads.tokens {
                    let acc = token_acc.entry(bucket).or_insert_with(|| vec![0.0; d_c]);
                    let mut opt = Adagrad {
                        lr: cfg.learning_rate,
                        acc: std::mem::take(acc),
                    };
                    opt.step(b.row_mut(bucket), g, scale);
                    *acc = opt.acc;
                }
            }
        }
        let train_loss = total_loss / examples.len() as f64;
        if !train_loss.is_finite() || !clf.is_finite() {
            return Err(FusionError::Divergence {
                epoch,
                detail: format!("training loss {train_loss}"),
            });
        }

        let mut record = EpochRecord {
            epoch,
            train_loss,
            dev_accuracy: None,
            dev_macro_f1: None,
            dev_micro_f1: None,
        };
        if dev.is_empty() {
            history.push(record);
            continue;
        }
        let mut predicted = Vec::with_capacity(dev.len());
        for (doc, h_r) in dev.iter().zip(&dev_relations) {
            let h_c = encoder.encode_document(doc)?;
            let p = clf.probabilities(&h_c, h_r.as_deref())?;
            predicted.push(
                clf.labels
                    .name(argmax(&p) as u32)
                    .unwrap_or_default()
                    .to_string(),
            );
        }
        let gold: Vec<&str> = dev.iter().map(|d| d.label.as_str()).collect();
        let predicted: Vec<&str> = predicted.iter().map(String::as_str).collect();
        let m = score_predictions(&gold, &predicted)?;
        record.dev_accuracy = Some(m.accuracy);
        record.dev_macro_f1 = Some(m.macro_f1);
        record.dev_micro_f1 = Some(m.micro_f1);
        history.push(record);
        if best.as_ref().is_none_or(|b| m.macro_f1 > b.0) {
            best = Some((m.macro_f1, epoch, clf.clone(), encoder.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let (classifier, encoder, best_epoch) = match best {
        Some((_, epoch, c, e)) => (c, e, epoch),
        None => (clf, encoder, history.len()),
    };
    Ok(TrainedRe {
        classifier,
        encoder,
        history,
        best_epoch,
        train_fallbacks,
    })
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        )
        .0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub probabilities: Vec<f64>,
    /// True when no relation vector was available for the document.
    pub fallback: bool,
}

pub fn predict(
    clf: &FusionClassifier,
    encoder: &ContextEncoder,
    kge: Option<&KgeLookup<'_>>,
    doc: &MarkedDocument,
) -> Result<Prediction, FusionError> {
    let h_c = encoder.encode_document(doc)?;
    let h_r = representation(kge, doc);
    let probabilities = clf.probabilities(&h_c, h_r.as_deref())?;
    let label = clf
        .labels
        .name(argmax(&probabilities) as u32)
        .unwrap_or_default()
        .to_string();
    Ok(Prediction {
        label,
        probabilities,
        fallback: h_r.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReEvaluation {
    pub metrics: ReMetrics,
    pub fallbacks: usize,
    pub predictions: Vec<Prediction>,
}

impl ReEvaluation {
    pub fn fallback_rate(&self) -> f64 {
        self.fallbacks as f64 / self.predictions.len() as f64
    }
}

pub fn evaluate_re_detailed(
    clf: &FusionClassifier,
    encoder: &ContextEncoder,
    kge: Option<&KgeLookup<'_>>,
    docs: &[MarkedDocument],
) -> Result<ReEvaluation, FusionError> {
    if docs.is_empty() {
        return Err(FusionError::EmptyDocs);
    }
    for doc in docs {
        label_id(&clf.labels, &doc.label)?;
    }
    let predictions = docs
        .iter()
        .map(|d| predict(clf, encoder, kge, d))
        .collect::<Result<Vec<_>, _>>()?;
    let gold: Vec<&str> = docs.iter().map(|d| d.label.as_str()).collect();
    let pred: Vec<&str> = predictions.iter().map(|p| p.label.as_str()).collect();
    Ok(ReEvaluation {
        metrics: score_predictions(&gold, &pred)?,
        fallbacks: predictions.iter().filter(|p| p.fallback).count(),
        predictions,
    })
}

pub fn evaluate_re(
    clf: &FusionClassifier,
    encoder: &ContextEncoder,
    kge: Option<&KgeLookup<'_>>,
    docs: &[MarkedDocument],
) -> Result<ReMetrics, FusionError> {
    evaluate_re_detailed(clf, encoder, kge, docs).map(|e| e.metrics)
}
