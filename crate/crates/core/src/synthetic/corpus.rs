use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RelationDocument, Span};

/// Knobs of the synthetic relation-extraction corpus.
///
/// Entities belong to hidden types. A pair-determined document takes its
/// label from the (head type, tail type) table and contains only filler
/// words; any other document draws its label uniformly and carries the
/// label's cue word, which `noise` replaces by filler with that
/// probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub docs: usize,
    pub labels: usize,
    pub entity_types: usize,
    pub entities_per_type: usize,
    pub pair_fraction: f64,
    pub noise: f64,
    pub filler_words: usize,
    pub min_filler: usize,
    pub max_filler: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            docs: 5000,
            labels: 6,
            entity_types: 4,
            entities_per_type: 25,
            pair_fraction: 0.5,
            noise: 0.0,
            filler_words: 300,
            min_filler: 6,
            max_filler: 14,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Pair,
    Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTruth {
    pub id: String,
    pub source: LabelSource,
    /// Whether the cue word was replaced by filler.
    pub cue_dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: CorpusSpec,
    pub label_names: Vec<String>,
    pub cue_words: Vec<String>,
    /// Entity name → type index.
    pub entity_types: BTreeMap<String, usize>,
    /// `type_table[a][b]` is the label of a pair-determined document whose
    /// head has type `a` and tail has type `b`.
    pub type_table: Vec<Vec<String>>,
    pub documents: Vec<DocTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub docs: Vec<RelationDocument>,
    pub truth: GroundTruth,
}

/// Label of the type pair `(a, b)`; differs from that of `(b, a)` whenever
/// `a ≢ b (mod labels)`.
pub fn type_pair_label(a: usize, b: usize, labels: usize) -> usize {
    (a + 2 * b) % labels
}

const ONSETS: [&str; 12] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "t", "v"];
const NUCLEI: [&str; 5] = ["a", "e", "i", "o", "u"];

fn word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| {
            format!(
                "{}{}",
                ONSETS.choose(rng).unwrap(),
                NUCLEI.choose(rng).unwrap()
            )
        })
        .collect()
}

fn unique_words(
    rng: &mut ChaCha8Rng,
    n: usize,
    syllables: usize,
    taken: &mut BTreeSet<String>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = word(rng, syllables);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.labels < 2 || self.entity_types == 0 || self.entities_per_type == 0 {
            return Err("need at least 2 labels and one entity of one type".into());
        }
        if self.entity_types * self.entities_per_type < 2 {
            return Err("need at least 2 entities".into());
        }
        if !(0.0..=1.0).contains(&self.pair_fraction) || !(0.0..=1.0).contains(&self.noise) {
            return Err("pair_fraction and noise must be in [0, 1]".into());
        }
        if self.filler_words == 0 || self.min_filler > self.max_filler {
            return Err("filler vocabulary must be nonempty and min_filler <= max_filler".into());
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SyntheticCorpus, String> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut taken = BTreeSet::new();
        let label_names: Vec<String> = (0..self.labels).map(|i| format!("rel{i}")).collect();
        let cue_words = unique_words(&mut rng, self.labels, 2, &mut taken);
        let filler = unique_words(&mut rng, self.filler_words, 2, &mut taken);
        let n_entities = self.entity_types * self.entities_per_type;
        let entities = unique_words(&mut rng, n_entities, 3, &mut taken);
        let type_of = |e: usize| e / self.entities_per_type;

        let type_table = (0..self.entity_types)
            .map(|a| {
                (0..self.entity_types)
                    .map(|b| label_names[type_pair_label(a, b, self.labels)].clone())
                    .collect()
            })
            .collect();

        let mut docs = Vec::with_capacity(self.docs);
        let mut truths = Vec::with_capacity(self.docs);
        for i in 0..self.docs {
            let e1 = rng.gen_range(0..n_entities);
            let mut e2 = rng.gen_range(0..n_entities - 1);
            if e2 >= e1 {
                e2 += 1;
            }
            let source = if rng.gen::<f64>() < self.pair_fraction {
                LabelSource::Pair
            } else {
                LabelSource::Context
            };
            let label = match source {
                LabelSource::Pair => type_pair_label(type_of(e1), type_of(e2), self.labels),
                LabelSource::Context => rng.gen_range(0..self.labels),
            };
            let n_filler = rng.gen_range(self.min_filler..=self.max_filler);
            let mut words: Vec<String> = (0..n_filler)
                .map(|_| filler.choose(&mut rng).unwrap().clone())
                .collect();
            let mut cue_dropped = false;
            if source == LabelSource::Context {
                let cue = if rng.gen::<f64>() < self.noise {
                    cue_dropped = true;
                    filler.choose(&mut rng).unwrap().clone()
                } else {
                    cue_words[label].clone()
                };
                let at = rng.gen_range(0..=words.len());
                words.insert(at, cue);
            }
            let first_pos = rng.gen_range(0..=words.len());
            words.insert(first_pos, String::new());
            let second_pos = rng.gen_range(first_pos + 1..=words.len());
            words.insert(second_pos, String::new());
            let e1_first = rng.gen::<bool>();
            let (first, second) = if e1_first { (e1, e2) } else { (e2, e1) };
            words[first_pos] = entities[first].clone();
            words[second_pos] = entities[second].clone();

            let mut text = String::new();
            let mut spans = [Span::new(0, 0); 2];
            let mut chars = 0;
            for (k, w) in words.iter().enumerate() {
                if k > 0 {
                    text.push(' ');
                    chars += 1;
                }
                let len = w.chars().count();
                if k == first_pos {
                    spans[0] = Span::new(chars, chars + len);
                } else if k == second_pos {
                    spans[1] = Span::new(chars, chars + len);
                }
                text.push_str(w);
                chars += len;
            }
            let (e1_span, e2_span) = if e1_first {
                (spans[0], spans[1])
            } else {
                (spans[1], spans[0])
            };
            let id = format!("syn{i:05}");
            docs.push(
                RelationDocument::new(
                    id.clone(),
                    text,
                    e1_span,
                    e2_span,
                    label_names[label].clone(),
                )
                .expect("generated spans are valid"),
            );
            truths.push(DocTruth {
                id,
                source,
                cue_dropped,
            });
        }

        let entity_types = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), type_of(i)))
            .collect();
        Ok(SyntheticCorpus {
            docs,
            truth: GroundTruth {
                spec: self.clone(),
                label_names,
                cue_words,
                entity_types,
                type_table,
                documents: truths,
            },
        })
    }
}
