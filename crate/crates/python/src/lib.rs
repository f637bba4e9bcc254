//! Python bindings: `import kgrel`.
//!
//! Structured results (metrics, command summaries, headers) are returned
//! as JSON strings.

use std::path::PathBuf;

use kgrel_core::corpus::{self, DatasetFormat, RelationDocument, Span};
use kgrel_core::encoder;
use kgrel_core::fusion::score_predictions;
use kgrel_core::kge::{self, KgeTrainConfig, ModelKind, OptimizerKind, RankMode};
use kgrel_core::kgstore::{self, NegativeStrategy, Triple};
use kgrel_core::pipeline::{self, Command};
use kgrel_core::RunConfig;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_json<T: serde::Serialize + ?Sized>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(value_err)
}

fn kind_of(s: &str) -> PyResult<ModelKind> {
    s.parse().map_err(value_err)
}

fn mode_of(s: &str) -> PyResult<RankMode> {
    s.parse().map_err(value_err)
}

#[pyfunction]
pub fn tokenize(text: &str) -> Vec<String> {
    corpus::tokenize(text)
}

/// Tokens of `text` with `<< >>` around e1 and `[[ ]]` around e2.
#[pyfunction]
pub fn insert_markers(text: &str, e1: (usize, usize), e2: (usize, usize)) -> PyResult<Vec<String>> {
    let doc = RelationDocument::new(
        "doc",
        text,
        Span::new(e1.0, e1.1),
        Span::new(e2.0, e2.1),
        "",
    )
    .map_err(value_err)?;
    Ok(corpus::insert_entity_markers(&doc)
        .map_err(value_err)?
        .tokens)
}

/// Documents of a JSONL or TSV dataset, as a JSON array.
#[pyfunction]
#[pyo3(signature = (path, format=None))]
pub fn parse_dataset(path: PathBuf, format: Option<&str>) -> PyResult<String> {
    let format = match format {
        Some(f) => f.parse().map_err(value_err)?,
        None => DatasetFormat::from_path(&path),
    };
    to_json(&corpus::parse_re_dataset(&path, format).map_err(value_err)?)
}

/// Accuracy, macro/micro F1 and per-label scores, as JSON.
#[pyfunction]
pub fn score(gold: Vec<String>, predicted: Vec<String>) -> PyResult<String> {
    to_json(&score_predictions(&gold, &predicted).map_err(value_err)?)
}

/// Runs a pipeline command; `overrides` are `key=value` strings applied
/// after the config file. Returns the command summary as JSON.
#[pyfunction]
#[pyo3(signature = (command, config=None, overrides=Vec::new()))]
pub fn run_command(
    command: &str,
    config: Option<PathBuf>,
    overrides: Vec<String>,
) -> PyResult<String> {
    let command: Command = command.parse().map_err(value_err)?;
    let mut cfg = match config {
        Some(p) => RunConfig::from_file(&p).map_err(value_err)?,
        None => RunConfig::default(),
    };
    for o in &overrides {
        cfg.apply_override(o).map_err(value_err)?;
    }
    let out = pipeline::run_command(command, &cfg).map_err(|e| match e.exit_code() {
        4 => PyRuntimeError::new_err(e.to_string()),
        _ => value_err(e),
    })?;
    to_json(&out)
}

#[pyfunction]
pub fn inspect(path: PathBuf) -> PyResult<String> {
    to_json(&pipeline::inspect(&path).map_err(value_err)?)
}

#[pyclass(name = "KnowledgeGraph", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyKnowledgeGraph {
    pub inner: kgstore::KnowledgeGraph,
}

#[pymethods]
impl PyKnowledgeGraph {
    #[new]
    pub fn new(
        num_entities: usize,
        num_relations: usize,
        triples: Vec<(u32, u32, u32)>,
    ) -> PyResult<Self> {
        let triples = triples.into_iter().map(|(h, r, t)| Triple::new(h, r, t));
        Ok(PyKnowledgeGraph {
            inner: kgstore::KnowledgeGraph::from_triples(num_entities, num_relations, triples)
                .map_err(value_err)?,
        })
    }

    #[staticmethod]
    pub fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyKnowledgeGraph {
            inner: kgstore::read_kg(&path).map_err(value_err)?,
        })
    }

    pub fn save(&self, path: PathBuf) -> PyResult<()> {
        kgstore::write_kg(&path, &self.inner).map_err(value_err)
    }

    #[getter]
    pub fn num_entities(&self) -> usize {
        self.inner.num_entities()
    }

    #[getter]
    pub fn num_relations(&self) -> usize {
        self.inner.num_relations()
    }

    pub fn __len__(&self) -> usize {
        self.inner.len()
    }

    pub fn contains(&self, head: u32, relation: u32, tail: u32) -> bool {
        self.inner.contains(&Triple::new(head, relation, tail))
    }

    pub fn relations_between(&self, head: u32, tail: u32) -> Vec<u32> {
        self.inner.relations_between(head, tail).collect()
    }

    pub fn triples(&self) -> Vec<(u32, u32, u32)> {
        self.inner
            .triples()
            .iter()
            .map(|t| (t.head, t.relation, t.tail))
            .collect()
    }
}

#[pyclass(name = "KgeModel", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyKgeModel {
    pub inner: kge::KgeModel,
    epoch_losses: Vec<f64>,
}

#[pymethods]
impl PyKgeModel {
    /// Trains on `kg`; defaults follow `KgeTrainConfig`.
    #[staticmethod]
    #[pyo3(signature = (
        kg, kind="complex", dim=200, epochs=100, learning_rate=0.1, optimizer="adagrad",
        margin=1.0, l2_lambda=1e-3, negatives=10, batch_size=512, strategy="mixed", seed=0
    ))]
    #[allow(clippy::too_many_arguments)]
    pub fn train(
        kg: &PyKnowledgeGraph,
        kind: &str,
        dim: usize,
        epochs: usize,
        learning_rate: f64,
        optimizer: &str,
        margin: f64,
        l2_lambda: f64,
        negatives: usize,
        batch_size: usize,
        strategy: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = KgeTrainConfig {
            kind: kind_of(kind)?,
            dim,
            epochs,
            learning_rate,
            optimizer: optimizer.parse::<OptimizerKind>().map_err(value_err)?,
            margin,
            l2_lambda,
            negatives_per_positive: negatives,
            batch_size,
            strategy: strategy.parse::<NegativeStrategy>().map_err(value_err)?,
            seed,
        };
        let trained = kge::train_kge(&kg.inner, &cfg).map_err(|e| match e {
            kge::KgeError::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
            _ => value_err(e),
        })?;
        Ok(PyKgeModel {
            inner: trained.model,
            epoch_losses: trained.epoch_losses,
        })
    }

    #[staticmethod]
    pub fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyKgeModel {
            inner: kge::KgeModel::load(&path).map_err(value_err)?,
            epoch_losses: Vec::new(),
        })
    }

    pub fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(value_err)
    }

    #[getter]
    pub fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    #[getter]
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    pub fn epoch_losses(&self) -> Vec<f64> {
        self.epoch_losses.clone()
    }

    pub fn score(&self, head: u32, relation: u32, tail: u32) -> PyResult<f64> {
        self.inner.score(head, relation, tail).map_err(value_err)
    }

    #[pyo3(signature = (head, tail, gold, kg, mode="filtered"))]
    pub fn rank(
        &self,
        head: u32,
        tail: u32,
        gold: u32,
        kg: &PyKnowledgeGraph,
        mode: &str,
    ) -> PyResult<f64> {
        kge::rank_relations(&self.inner, head, tail, gold, &kg.inner, mode_of(mode)?)
            .map_err(value_err)
    }

    /// Link-prediction metrics as JSON.
    #[pyo3(signature = (test, kg, mode="filtered"))]
    pub fn evaluate(
        &self,
        test: Vec<(u32, u32, u32)>,
        kg: &PyKnowledgeGraph,
        mode: &str,
    ) -> PyResult<String> {
        let test: Vec<Triple> = test
            .into_iter()
            .map(|(h, r, t)| Triple::new(h, r, t))
            .collect();
        to_json(
            &kge::evaluate_link_prediction(&self.inner, &test, &kg.inner, mode_of(mode)?)
                .map_err(value_err)?,
        )
    }

    /// H_r for the pair, or `None` when an entity is unknown or the best
    /// score is below `min_score`.
    #[pyo3(signature = (head, tail, min_score=None))]
    pub fn relation_representation(
        &self,
        head: Option<u32>,
        tail: Option<u32>,
        min_score: Option<f64>,
    ) -> Option<Vec<f32>> {
        kge::relation_representation_with_threshold(&self.inner, head, tail, min_score)
    }
}

#[pyclass(name = "EmbeddingTable", skip_from_py_object)]
#[derive(Clone)]
pub struct PyEmbeddingTable {
    pub inner: encoder::EmbeddingTable,
}

#[pymethods]
impl PyEmbeddingTable {
    #[new]
    pub fn new(dim: usize) -> Self {
        PyEmbeddingTable {
            inner: encoder::EmbeddingTable::new(dim),
        }
    }

    #[staticmethod]
    pub fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyEmbeddingTable {
            inner: encoder::load_external_embeddings(&path).map_err(value_err)?,
        })
    }

    pub fn save(&self, path: PathBuf) -> PyResult<()> {
        encoder::write_external_embeddings(&path, &self.inner).map_err(value_err)
    }

    pub fn insert(&mut self, id: String, vector: Vec<f32>) -> PyResult<()> {
        self.inner.insert(id, &vector).map_err(value_err)
    }

    pub fn get(&self, id: &str) -> Option<Vec<f32>> {
        self.inner.get(id).map(<[f32]>::to_vec)
    }

    #[getter]
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn ids(&self) -> Vec<String> {
        self.inner.ids().to_vec()
    }

    pub fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pymodule]
fn kgrel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(insert_markers, m)?)?;
    m.add_function(wrap_pyfunction!(parse_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    m.add_function(wrap_pyfunction!(inspect, m)?)?;
    m.add_class::<PyKnowledgeGraph>()?;
    m.add_class::<PyKgeModel>()?;
    m.add_class::<PyEmbeddingTable>()?;
    Ok(())
}
