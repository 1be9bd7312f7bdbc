//! Python bindings: sets, pairwise models, distributions and evaluation.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use coref_core::baselines::{self, PkTable};
use coref_core::config::{InferenceModel, RunConfig};
use coref_core::eval::set_cross_entropy;
use coref_core::features::Keys;
use coref_core::io::{self as cio, SavedModel, SetRecord};
use coref_core::pairs::PairTable;
use coref_core::partition::{count_set_configurations, set_configurations, smooth, DEFAULT_ENUMERATION_CAP};
use coref_core::pipeline::{self, PairSource};
use coref_core::set::{Configuration, Distribution as CoreDistribution};
use coref_core::synth::{generate_synthetic_corpus, SynthConfig};
use coref_core::{evidential, merging, CorefError as CoreError};

create_exception!(coref, CorefError, PyException);

fn err(e: CoreError) -> PyErr {
    CorefError::new_err(e.to_string())
}

type Cells = Vec<Vec<String>>;

/// Kept entries, remainder mass and remainder count.
type Smoothed = (Vec<(Cells, f64)>, f64, u64);

fn pair_table(pairs: HashMap<(String, String), f64>) -> PairTable {
    let mut table = PairTable::new();
    for ((a, b), p) in pairs {
        table.insert(&a, &b, p);
    }
    table
}

fn parse_model(name: &str) -> PyResult<InferenceModel> {
    name.parse().map_err(err)
}

/// A set of templates that may describe the same objects.
#[pyclass(frozen, skip_from_py_object, module = "coref")]
#[derive(Clone)]
pub struct CoreferenceSet {
    inner: coref_core::set::CoreferenceSet,
}

impl CoreferenceSet {
    fn config(&self, cells: Cells) -> PyResult<Configuration> {
        let c = Configuration::from_ids(&self.inner, &cells).map_err(err)?;
        c.validate(&self.inner).map_err(err)?;
        Ok(c)
    }
}

#[pymethods]
impl CoreferenceSet {
    /// Parse one corpus line: `{"id": ..., "templates": [...], "exclusions": [...]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let record: SetRecord = serde_json::from_str(text).map_err(|e| CorefError::new_err(e.to_string()))?;
        Ok(CoreferenceSet { inner: record.into_set().map_err(err)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&SetRecord::from_set(&self.inner)).expect("records serialize")
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id().to_string()
    }

    /// Template ids in text order.
    fn ids(&self) -> Vec<String> {
        self.inner.ids().into_iter().map(String::from).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("CoreferenceSet({:?}, {} templates)", self.inner.id(), self.inner.len())
    }

    /// Every valid configuration, as lists of cells of template ids.
    #[pyo3(signature = (cap = Some(DEFAULT_ENUMERATION_CAP)))]
    fn configurations(&self, cap: Option<usize>) -> PyResult<Vec<Cells>> {
        let configs = set_configurations(&self.inner, cap).map_err(err)?;
        Ok(configs.iter().map(|c| c.to_ids(&self.inner)).collect())
    }

    fn count_configurations(&self) -> u64 {
        count_set_configurations(&self.inner)
    }

    fn greedy_configuration(&self) -> Cells {
        baselines::greedy_configuration(&self.inner).to_ids(&self.inner)
    }
}

/// Probabilities over the configurations of one set.
#[pyclass(frozen, module = "coref")]
pub struct Distribution {
    set: CoreferenceSet,
    inner: CoreDistribution,
}

#[pymethods]
impl Distribution {
    /// `(cells, probability)` in enumeration order.
    fn entries(&self) -> Vec<(Cells, f64)> {
        self.inner.entries().iter().map(|(c, p)| (c.to_ids(&self.set.inner), *p)).collect()
    }

    fn probability(&self, cells: Cells) -> PyResult<f64> {
        Ok(self.inner.probability(&self.set.config(cells)?))
    }

    /// The single most probable configuration, or `None` on a tie.
    fn argmax(&self) -> Option<Cells> {
        self.inner.unique_argmax().map(|c| c.to_ids(&self.set.inner))
    }

    /// `-log2 p(gold)`; infinite when the key gets no mass.
    fn cross_entropy(&self, gold: Cells) -> PyResult<f64> {
        set_cross_entropy(&self.inner, &self.set.inner, &self.set.config(gold)?).map_err(err)
    }

    /// Kept `(cells, probability)` pairs, pooled remainder mass and its count.
    fn smooth(&self, epsilon: f64) -> PyResult<Smoothed> {
        let s = smooth(&self.inner, epsilon).map_err(err)?;
        let kept = s.kept.iter().map(|(c, p)| (c.to_ids(&self.set.inner), *p)).collect();
        Ok((kept, s.remainder_mass, s.remainder_count))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn wrap(set: &CoreferenceSet, dist: coref_core::Result<CoreDistribution>) -> PyResult<Distribution> {
    Ok(Distribution { set: set.clone(), inner: dist.map_err(err)? })
}

/// Dempster combination of pairwise probabilities keyed by `(earlier, later)` ids.
#[pyfunction]
fn evidential_distribution(set: &CoreferenceSet, pairs: HashMap<(String, String), f64>) -> PyResult<Distribution> {
    wrap(set, evidential::evidential_distribution(&pair_table(pairs), &set.inner))
}

#[pyfunction]
fn merging_distribution(set: &CoreferenceSet, pairs: HashMap<(String, String), f64>) -> PyResult<Distribution> {
    wrap(set, merging::merging_distribution(&pair_table(pairs), &set.inner))
}

/// `p_k` for the greedy configuration by set size (2, 3, more), the rest shared.
#[pyfunction]
fn greedy_distribution(set: &CoreferenceSet, p2: f64, p3: f64, p_gt3: f64) -> PyResult<Distribution> {
    let pk = PkTable::new(p2, p3, p_gt3).map_err(err)?;
    wrap(set, baselines::greedy_distribution(&set.inner, &pk))
}

#[pyfunction]
fn uniform_distribution(set: &CoreferenceSet) -> PyResult<Distribution> {
    wrap(set, baselines::uniform_distribution(&set.inner))
}

/// A trained pairwise model with its greedy confidence table.
#[pyclass(frozen, module = "coref")]
pub struct Model {
    inner: SavedModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model { inner: SavedModel::load(&path).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Model { inner: SavedModel::from_json(text, "<string>").map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    /// `(feature, lambda)` for every active feature.
    fn weights(&self) -> Vec<(String, f64)> {
        self.inner.model.weights().map(|(f, l)| (f.to_string(), l)).collect()
    }

    #[getter]
    fn training_cross_entropy(&self) -> Option<f64> {
        self.inner.training_cross_entropy
    }

    /// Coreference probability of every compatible pair of `set`.
    fn pair_probabilities(&self, set: &CoreferenceSet) -> HashMap<(String, String), f64> {
        PairTable::from_model(&self.inner.model, &set.inner)
            .iter()
            .map(|(a, b, p)| ((a.to_string(), b.to_string()), p))
            .collect()
    }

    /// Distribution of `set` under `model`: evidential, merging, greedy or uniform.
    #[pyo3(signature = (set, model = "evidential"))]
    fn distribution(&self, set: &CoreferenceSet, model: &str) -> PyResult<Distribution> {
        let m = parse_model(model)?;
        let pairs = PairTable::from_model(&self.inner.model, &set.inner);
        let dist = pipeline::infer_set(&set.inner, m, Some(&pairs), self.inner.pk.as_ref(), &Default::default());
        wrap(set, dist)
    }
}

/// A keyed corpus.
#[pyclass(module = "coref")]
pub struct Corpus {
    sets: Vec<coref_core::set::CoreferenceSet>,
    keys: Keys,
}

fn run_config(config: Option<&str>) -> PyResult<RunConfig> {
    match config {
        Some(text) => RunConfig::from_toml(text).map_err(err),
        None => Ok(RunConfig::default()),
    }
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    fn load(corpus: PathBuf, keys: PathBuf) -> PyResult<Self> {
        let sets = cio::load_corpus(&corpus).map_err(err)?;
        let keys = cio::load_keys(&keys, &sets).map_err(err)?;
        Ok(Corpus { sets, keys })
    }

    /// A seeded synthetic corpus.
    #[staticmethod]
    #[pyo3(signature = (seed, sets = 200, fidelity = 0.8, noise = 0.15, coref_rate = 0.5))]
    fn synthetic(seed: u64, sets: usize, fidelity: f64, noise: f64, coref_rate: f64) -> PyResult<Self> {
        let cfg = SynthConfig { sets, fidelity, noise, coref_rate, ..SynthConfig::default() };
        let (sets, keys) = generate_synthetic_corpus(&cfg, seed).map_err(err)?;
        Ok(Corpus { sets, keys })
    }

    fn save(&self, corpus: PathBuf, keys: PathBuf) -> PyResult<()> {
        cio::save_corpus(&corpus, &self.sets).map_err(err)?;
        cio::save_keys(&keys, &self.keys, &self.sets).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.sets.len()
    }

    fn sets(&self) -> Vec<CoreferenceSet> {
        self.sets.iter().cloned().map(|inner| CoreferenceSet { inner }).collect()
    }

    fn key(&self, set_id: &str) -> Option<Cells> {
        let set = self.sets.iter().find(|s| s.id() == set_id)?;
        self.keys.get(set_id).map(|c| c.to_ids(set))
    }

    /// Seeded split into a training and a test corpus.
    #[pyo3(signature = (fraction = 0.7, seed = 0))]
    fn split(&self, fraction: f64, seed: u64) -> (Corpus, Corpus) {
        let (a, b) = pipeline::split_corpus(&self.sets, fraction, seed);
        let part = |sets: Vec<_>| Corpus { sets, keys: self.keys.clone() };
        (part(a), part(b))
    }

    /// Select features and fit; `config` is optional TOML run configuration.
    #[pyo3(signature = (config = None))]
    fn train(&self, config: Option<&str>) -> PyResult<Model> {
        let cfg = run_config(config)?;
        Ok(Model { inner: pipeline::train(&self.sets, &self.keys, &cfg).map_err(err)?.saved })
    }

    /// Average bits and top-1 count per inference model.
    #[pyo3(signature = (model, epsilon = 0.01))]
    fn evaluate(&self, model: &Model, epsilon: f64) -> PyResult<BTreeMap<String, (f64, usize)>> {
        let cfg = RunConfig { epsilon, ..RunConfig::default() };
        cfg.validate().map_err(err)?;
        let models: Vec<InferenceModel> = InferenceModel::ALL
            .into_iter()
            .filter(|m| *m != InferenceModel::Greedy || model.inner.pk.is_some())
            .collect();
        let reports = pipeline::evaluate_models(
            &self.sets,
            &self.keys,
            &models,
            Some(PairSource::Model(&model.inner)),
            None,
            &cfg,
        )
        .map_err(err)?;
        Ok(reports.into_iter().map(|(m, r)| (m.name().to_string(), (r.avg_bits, r.top1_count))).collect())
    }
}

#[pymodule]
pub fn coref(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CorefError", m.py().get_type::<CorefError>())?;
    m.add_class::<CoreferenceSet>()?;
    m.add_class::<Distribution>()?;
    m.add_class::<Model>()?;
    m.add_class::<Corpus>()?;
    m.add_function(wrap_pyfunction!(evidential_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(merging_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_distribution, m)?)?;
    Ok(())
}
