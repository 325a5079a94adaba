//! Python bindings. Structured values cross the boundary as JSON strings
//! or plain lists, so the Python side needs no extra dependencies.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use d4d_core::mutator::{self, KillCriteria, MutationOp};
use d4d_core::nn::ModelConfig;
use d4d_core::pipeline::{self, ExperimentConfig, SeedRef};
use d4d_core::probe::{self, FeatureMatrix};
use d4d_core::rng::SeedTree;

fn to_py(e: d4d_core::Error) -> PyErr {
    match e {
        d4d_core::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("value serializes")
}

/// Label lists as Python ints (a `Vec<u8>` would become `bytes`).
fn ints(labels: &[u8]) -> Vec<u32> {
    labels.iter().map(|&l| u32::from(l)).collect()
}

/// `(labels, ranked (class, probability) pairs, text report)`.
type Diagnosis = (Vec<u32>, Vec<(u8, f64)>, String);

fn seed_model(name: &str, epochs: usize) -> PyResult<pipeline::SeedModel> {
    SeedRef::Named(name.to_string()).resolve(epochs).map_err(to_py)
}

/// Names of the bundled seed models.
#[pyfunction]
fn bundled_seeds() -> Vec<&'static str> {
    pipeline::BUNDLED.to_vec()
}

/// JSON document of a bundled seed model (task plus model config).
#[pyfunction]
#[pyo3(signature = (name, epochs = 20))]
fn seed_model_json(name: &str, epochs: usize) -> PyResult<String> {
    Ok(json(&seed_model(name, epochs)?))
}

/// The eight descriptive statistics of a list of numbers, as a dict-like
/// list of `(name, value)` pairs.
#[pyfunction]
fn descriptive_stats(values: Vec<f64>) -> PyResult<Vec<(&'static str, f64)>> {
    let s = probe::descriptive_stats(&values).map_err(to_py)?;
    Ok(vec![
        ("mean", s.mean),
        ("min", s.min),
        ("max", s.max),
        ("median", s.median),
        ("variance", s.variance),
        ("std", s.std),
        ("sem", s.sem),
        ("skew", s.skew),
    ])
}

/// Applies a mutation operator (JSON, e.g. `{"op": "change_learning_rate",
/// "lr": 0.1}`) to a model config (JSON) and returns the mutant as JSON.
#[pyfunction]
fn apply_operator(model_json: &str, op_json: &str) -> PyResult<String> {
    let model: ModelConfig = parse("model", model_json)?;
    let op: MutationOp = parse("operator", op_json)?;
    Ok(json(&mutator::apply_operator(&model, &op).map_err(to_py)?))
}

/// Sorted class labels of a list of operators (JSON array).
#[pyfunction]
fn labels_of(ops_json: &str) -> PyResult<Vec<u32>> {
    let ops: Vec<MutationOp> = parse("operators", ops_json)?;
    Ok(ints(&mutator::labels_of(&ops)))
}

/// Kill check of a mutated bundled seed: trains seed and mutant `runs`
/// times each and returns the verdict as JSON.
#[pyfunction]
#[pyo3(signature = (seed_name, op_json, epochs = 20, runs = 5, seed = 42))]
fn is_killed(py: Python<'_>, seed_name: &str, op_json: &str, epochs: usize, runs: usize, seed: u64) -> PyResult<String> {
    let s = seed_model(seed_name, epochs)?;
    let op: MutationOp = parse("operator", op_json)?;
    let mutant = mutator::apply_operator(&s.model, &op).map_err(to_py)?;
    let criteria = KillCriteria { runs, ..KillCriteria::default() };
    let v = py
        .detach(|| {
            let data = pipeline::target_data(&s, 0.3, SeedTree::new(seed))?;
            mutator::is_killed(&s.model, &mutant, &data, &criteria, SeedTree::new(seed).child("kill"))
        })
        .map_err(to_py)?;
    Ok(json(&v))
}

/// Token stream of a model spec's exported graph.
#[pyfunction]
fn graph_tokens(model_json: &str) -> PyResult<Vec<String>> {
    let model: ModelConfig = parse("model", model_json)?;
    Ok(d4d_core::graph::export_graph(&model.spec).tokens().into_iter().map(str::to_string).collect())
}

/// Reads a feature-matrix CSV: `(column_names, rows)`.
#[pyfunction]
fn read_trace(path: PathBuf) -> PyResult<(Vec<String>, Vec<Vec<f64>>)> {
    let fm = FeatureMatrix::read_csv(&path).map_err(to_py)?;
    let rows = (0..fm.epochs()).map(|r| fm.row(r).to_vec()).collect();
    Ok((FeatureMatrix::column_names(fm.max_layers()), rows))
}

/// Experiment configuration loaded from a JSON file.
#[pyclass(name = "ExperimentConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig { inner: ExperimentConfig::load(&path).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyConfig { inner: ExperimentConfig::from_json(text, "config").map_err(to_py)? })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    #[getter]
    fn runs(&self) -> usize {
        self.inner.runs
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Builds a corpus into `out` and returns the number of records.
    fn build_corpus(&self, py: Python<'_>, out: PathBuf) -> PyResult<usize> {
        let cfg = self.inner.clone();
        py.detach(|| pipeline::build_corpus(&cfg, &out)).map(|rows| rows.len()).map_err(to_py)
    }

    /// Trains one localizer on `corpus`, using the seed of the first
    /// experiment run.
    fn train(&self, py: Python<'_>, corpus: &PyCorpus) -> PyResult<PyLocalizer> {
        let cfg = self.inner.clone();
        let seed = SeedTree::new(cfg.seed).child("classifier").index(0).seed();
        let (loc, _) = py
            .detach(|| pipeline::train_localizer(&corpus.inner, cfg.classifier, &cfg.fit, seed))
            .map_err(to_py)?;
        Ok(PyLocalizer { inner: loc })
    }

    /// Trains and scores the classifier `runs` times; returns the report JSON.
    #[pyo3(signature = (corpus, runs = None))]
    fn run_experiment(&self, py: Python<'_>, corpus: &PyCorpus, runs: Option<usize>) -> PyResult<String> {
        let cfg = self.inner.clone();
        let report = py
            .detach(|| pipeline::run_experiment(&corpus.inner, cfg.classifier, &cfg.fit, runs.unwrap_or(cfg.runs), cfg.seed))
            .map_err(to_py)?;
        Ok(report.to_json())
    }
}

/// A corpus directory loaded into memory.
#[pyclass(name = "Corpus")]
struct PyCorpus {
    inner: pipeline::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyCorpus { inner: pipeline::Corpus::load(&dir).map_err(to_py)? })
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    /// `(correct, single, multi)` record counts.
    fn counts(&self) -> (usize, usize, usize) {
        let c = self.inner.counts();
        (c.correct, c.single, c.multi)
    }

    /// Manifest rows as `(mutant_id, seed_id, labels, split)` tuples.
    fn rows(&self) -> Vec<(String, String, Vec<u32>, String)> {
        self.inner
            .rows
            .iter()
            .map(|r| (r.mutant_id.clone(), r.seed_id.clone(), ints(&r.labels), r.split.clone()))
            .collect()
    }
}

/// A trained localizer with its vocabulary and trace geometry.
#[pyclass(name = "Localizer")]
struct PyLocalizer {
    inner: d4d_core::localizer::Localizer,
}

#[pymethods]
impl PyLocalizer {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyLocalizer { inner: d4d_core::localizer::Localizer::load(&path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs()
    }

    #[getter]
    fn max_layers(&self) -> usize {
        self.inner.max_layers
    }

    /// Trains a model once with instrumentation and diagnoses it. `model`
    /// is a bundled seed name or a seed-model JSON document; `ops_json`
    /// optionally mutates it first. Returns `(labels, ranked, report)`.
    #[pyo3(signature = (model, ops_json = None, seed = 42))]
    fn diagnose(
        &self,
        py: Python<'_>,
        model: &str,
        ops_json: Option<&str>,
        seed: u64,
    ) -> PyResult<Diagnosis> {
        let s = if model.trim_start().starts_with('{') {
            parse::<pipeline::SeedModel>("seed model", model)?
        } else {
            seed_model(model, self.inner.epochs())?
        };
        let ops: Vec<MutationOp> = ops_json.map(|t| parse("operators", t)).transpose()?.unwrap_or_default();
        let mut target = mutator::apply_all(&s.model, &ops).map_err(to_py)?;
        target.train.epochs = self.inner.epochs();
        let loc = &self.inner;
        let d = py
            .detach(|| {
                let data = pipeline::target_data(&s, 0.3, SeedTree::new(seed))?;
                pipeline::diagnose(loc, &target, &data.train, seed)
            })
            .map_err(to_py)?;
        let report = d.report(5);
        Ok((ints(&d.labels), d.ranked(), report))
    }
}

#[pymodule]
fn d4d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bundled_seeds, m)?)?;
    m.add_function(wrap_pyfunction!(seed_model_json, m)?)?;
    m.add_function(wrap_pyfunction!(descriptive_stats, m)?)?;
    m.add_function(wrap_pyfunction!(apply_operator, m)?)?;
    m.add_function(wrap_pyfunction!(labels_of, m)?)?;
    m.add_function(wrap_pyfunction!(is_killed, m)?)?;
    m.add_function(wrap_pyfunction!(graph_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(read_trace, m)?)?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyLocalizer>()?;
    m.add("NUM_CLASSES", mutator::NUM_CLASSES)?;
    Ok(())
}
