//! Line-delimited corpus, key, pair-override and dataset files, and the
//! versioned model file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::PkTable;
use crate::error::{CorefError, Result};
use crate::features::{DatasetMode, DistanceConfig, Feature, Keys, PairInstance, Predicate};
use crate::maxent::MaxentModel;
use crate::pairs::PairTable;
use crate::set::{Configuration, CoreferenceSet};
use crate::template::Template;

pub const MODEL_FORMAT: &str = "coref-maxent";
pub const MODEL_VERSION: u32 = 1;

pub(crate) fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CorefError::File { path: path.display().to_string(), source })
}

/// Write `contents` to `path`, naming the path on failure.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CorefError::File { path: path.display().to_string(), source })
}

/// Parse non-blank lines as JSON records, reporting 1-based line numbers.
fn parse_lines<T: DeserializeOwned>(text: &str, origin: &str) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map(|r| (i + 1, r)).map_err(|e| CorefError::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn to_lines<T: Serialize>(records: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetRecord {
    pub id: String,
    pub templates: Vec<Template>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclusions: Vec<(String, String)>,
}

impl SetRecord {
    pub fn from_set(set: &CoreferenceSet) -> Self {
        SetRecord {
            id: set.id().to_string(),
            templates: set.templates().to_vec(),
            exclusions: set.exclusions().iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    pub fn into_set(self) -> Result<CoreferenceSet> {
        CoreferenceSet::new(self.id, self.templates, self.exclusions)
    }
}

pub fn parse_corpus(text: &str, origin: &str) -> Result<Vec<CoreferenceSet>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (line, record) in parse_lines::<SetRecord>(text, origin)? {
        if let Some(first) = seen.insert(record.id.clone(), line) {
            return Err(CorefError::validation(&record.id, format!("set id repeats the one on line {first}")));
        }
        out.push(record.into_set()?);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CoreferenceSet>> {
    parse_corpus(&read(path)?, &path.display().to_string())
}

pub fn corpus_to_string(corpus: &[CoreferenceSet]) -> String {
    to_lines(corpus.iter().map(SetRecord::from_set))
}

pub fn save_corpus(path: &Path, corpus: &[CoreferenceSet]) -> Result<()> {
    write_file(path, &corpus_to_string(corpus))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyRecord {
    set: String,
    partition: Vec<Vec<String>>,
}

/// Keys are resolved against `corpus`; every key must name a set in it and
/// form a valid configuration of that set.
pub fn parse_keys(text: &str, origin: &str, corpus: &[CoreferenceSet]) -> Result<Keys> {
    let by_id: BTreeMap<&str, &CoreferenceSet> = corpus.iter().map(|s| (s.id(), s)).collect();
    let mut keys = Keys::new();
    for (line, record) in parse_lines::<KeyRecord>(text, origin)? {
        let set = by_id.get(record.set.as_str()).ok_or_else(|| {
            CorefError::validation(&record.set, format!("key on line {line} names no set in the corpus"))
        })?;
        let config = Configuration::from_ids(set, &record.partition).map_err(|e| {
            CorefError::validation(&record.set, format!("key on line {line} is not a valid configuration: {e}"))
        })?;
        if keys.insert(record.set.clone(), config).is_some() {
            return Err(CorefError::validation(&record.set, format!("second key on line {line}")));
        }
    }
    Ok(keys)
}

pub fn load_keys(path: &Path, corpus: &[CoreferenceSet]) -> Result<Keys> {
    parse_keys(&read(path)?, &path.display().to_string(), corpus)
}

/// Keys in corpus order; keys for sets outside the corpus are skipped.
pub fn keys_to_string(keys: &Keys, corpus: &[CoreferenceSet]) -> String {
    to_lines(corpus.iter().filter_map(|set| {
        keys.get(set.id()).map(|c| KeyRecord { set: set.id().to_string(), partition: c.to_ids(set) })
    }))
}

pub fn save_keys(path: &Path, keys: &Keys, corpus: &[CoreferenceSet]) -> Result<()> {
    write_file(path, &keys_to_string(keys, corpus))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    set: String,
    s: String,
    t: String,
    p: f64,
}

/// Fixed pairwise probabilities, by set id.
pub fn parse_pairs(text: &str, origin: &str) -> Result<BTreeMap<String, PairTable>> {
    let mut out: BTreeMap<String, PairTable> = BTreeMap::new();
    for (line, r) in parse_lines::<PairRecord>(text, origin)? {
        if !(0.0..=1.0).contains(&r.p) {
            return Err(CorefError::Parse {
                path: origin.to_string(),
                line,
                message: format!("probability {} is outside [0, 1]", r.p),
            });
        }
        out.entry(r.set).or_default().insert(&r.s, &r.t, r.p);
    }
    Ok(out)
}

pub fn load_pairs(path: &Path) -> Result<BTreeMap<String, PairTable>> {
    parse_pairs(&read(path)?, &path.display().to_string())
}

pub fn pairs_to_string(pairs: &BTreeMap<String, PairTable>) -> String {
    to_lines(pairs.iter().flat_map(|(set, table)| {
        table.iter().map(move |(s, t, p)| PairRecord { set: set.clone(), s: s.to_string(), t: t.to_string(), p })
    }))
}

pub fn parse_dataset(text: &str, origin: &str) -> Result<Vec<PairInstance>> {
    Ok(parse_lines(text, origin)?.into_iter().map(|(_, r)| r).collect())
}

pub fn load_dataset(path: &Path) -> Result<Vec<PairInstance>> {
    parse_dataset(&read(path)?, &path.display().to_string())
}

pub fn dataset_to_string(instances: &[PairInstance]) -> String {
    to_lines(instances)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureRecord {
    characteristic: String,
    value: String,
    outcome: u8,
    lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    distance_thresholds: [u64; 4],
    dataset_mode: DatasetMode,
    features: Vec<FeatureRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pk: Option<PkTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training_cross_entropy: Option<f64>,
}

/// A trained pairwise model with what is needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: MaxentModel,
    pub dataset_mode: DatasetMode,
    pub pk: Option<PkTable>,
    pub training_cross_entropy: Option<f64>,
}

impl SavedModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            distance_thresholds: self.model.distance_config().thresholds,
            dataset_mode: self.dataset_mode,
            features: self
                .model
                .weights()
                .map(|(f, lambda)| FeatureRecord {
                    characteristic: f.predicate.characteristic().to_string(),
                    value: f.predicate.value(),
                    outcome: u8::from(f.outcome),
                    lambda,
                })
                .collect(),
            pk: self.pk,
            training_cross_entropy: self.training_cross_entropy,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |e: serde_json::Error| CorefError::Parse {
            path: origin.to_string(),
            line: e.line(),
            message: e.to_string(),
        };
        // check the version before the layout, which may differ across versions
        let raw: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        match raw.get("version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            Some(v) => {
                return Err(CorefError::VersionMismatch {
                    found: u32::try_from(v).unwrap_or(u32::MAX),
                    expected: MODEL_VERSION,
                })
            }
            None => {
                return Err(CorefError::Parse {
                    path: origin.to_string(),
                    line: 1,
                    message: "model file has no numeric version".into(),
                })
            }
        }
        let file: ModelFile = serde_json::from_str(text).map_err(parse_err)?;
        if file.format != MODEL_FORMAT {
            return Err(CorefError::Parse {
                path: origin.to_string(),
                line: 1,
                message: format!("unexpected format {:?}", file.format),
            });
        }
        let dcfg = DistanceConfig::new(file.distance_thresholds)?;
        let mut active = Vec::with_capacity(file.features.len());
        let mut lambdas = Vec::with_capacity(file.features.len());
        for r in file.features {
            let predicate = Predicate::parse(&r.characteristic, &r.value).ok_or_else(|| CorefError::Parse {
                path: origin.to_string(),
                line: 1,
                message: format!("unknown feature {}={}", r.characteristic, r.value),
            })?;
            let outcome = match r.outcome {
                0 => false,
                1 => true,
                o => {
                    return Err(CorefError::Parse {
                        path: origin.to_string(),
                        line: 1,
                        message: format!("feature outcome must be 0 or 1, got {o}"),
                    })
                }
            };
            active.push(Feature::new(predicate, outcome));
            lambdas.push(r.lambda);
        }
        if let Some(pk) = &file.pk {
            pk.validate()?;
        }
        Ok(SavedModel {
            model: MaxentModel::new(active, lambdas, dcfg)?,
            dataset_mode: file.dataset_mode,
            pk: file.pk,
            training_cross_entropy: file.training_cross_entropy,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read(path)?, &path.display().to_string())
    }
}
