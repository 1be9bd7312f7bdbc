//! Training, inference and evaluation over whole corpora.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{estimate_pk, greedy_distribution, uniform_distribution, PkTable};
use crate::config::{InferenceModel, RunConfig};
use crate::error::{CorefError, Result};
use crate::eval::{corpus_evaluate, Report};
use crate::evidential::evidential_distribution_pruned;
use crate::features::{build_dataset, Keys};
use crate::io::SavedModel;
use crate::maxent::{select_and_train, SelectionStep};
use crate::merging::merging_distribution_pruned;
use crate::pairs::PairTable;
use crate::partition::{smooth, PruneConfig, SmoothedDistribution};
use crate::set::{CoreferenceSet, Distribution};

/// Where pairwise probabilities come from.
#[derive(Debug, Clone, Copy)]
pub enum PairSource<'a> {
    Model(&'a SavedModel),
    /// Fixed probabilities by set id.
    Fixed(&'a BTreeMap<String, PairTable>),
}

impl PairSource<'_> {
    pub fn pairs_for(&self, set: &CoreferenceSet) -> Result<PairTable> {
        match self {
            PairSource::Model(m) => Ok(PairTable::from_model(&m.model, set)),
            PairSource::Fixed(map) => map
                .get(set.id())
                .cloned()
                .ok_or_else(|| CorefError::validation(set.id(), "no pairwise probabilities supplied for this set")),
        }
    }

    fn pk(&self) -> Option<&PkTable> {
        match self {
            PairSource::Model(m) => m.pk.as_ref(),
            PairSource::Fixed(_) => None,
        }
    }
}

/// The distribution `model` assigns to the configurations of `set`.
pub fn infer_set(
    set: &CoreferenceSet,
    model: InferenceModel,
    pairs: Option<&PairTable>,
    pk: Option<&PkTable>,
    prune: &PruneConfig,
) -> Result<Distribution> {
    let need_pairs =
        || pairs.ok_or_else(|| CorefError::Config(format!("the {model} model needs pairwise probabilities")));
    match model {
        InferenceModel::Evidential => evidential_distribution_pruned(need_pairs()?, set, prune),
        InferenceModel::Merging => merging_distribution_pruned(need_pairs()?, set, prune),
        InferenceModel::Greedy => {
            let pk = pk.ok_or_else(|| CorefError::Config("the greedy model needs a p_k table".into()))?;
            greedy_distribution(set, pk)
        }
        InferenceModel::Uniform => uniform_distribution(set),
    }
}

/// Smooth at `epsilon`, or, when that would drop everything, at the largest
/// probability present so that at least the top configurations survive.
pub fn smooth_lowering(dist: &Distribution, epsilon: f64) -> SmoothedDistribution {
    match smooth(dist, epsilon) {
        Ok(s) => s,
        Err(_) => {
            let top = dist.entries().iter().map(|(_, p)| *p).fold(0.0, f64::max);
            log::warn!("smoothing threshold {epsilon} prunes every configuration; lowering it to {top}");
            smooth(dist, top).expect("the top configuration survives")
        }
    }
}

/// Infer and smooth every set of `corpus` with `model`.
pub fn infer_corpus(
    corpus: &[CoreferenceSet],
    model: InferenceModel,
    source: Option<PairSource<'_>>,
    pk: Option<&PkTable>,
    cfg: &RunConfig,
) -> Result<Vec<SmoothedDistribution>> {
    let pk = pk.or_else(|| source.as_ref().and_then(|s| s.pk()));
    corpus
        .iter()
        .map(|set| {
            let pairs = match (&source, model.uses_pairs()) {
                (Some(src), true) => Some(src.pairs_for(set)?),
                _ => None,
            };
            let dist = infer_set(set, model, pairs.as_ref(), pk, &cfg.prune)?;
            dist.validate(set)?;
            Ok(smooth_lowering(&dist, cfg.epsilon))
        })
        .collect()
}

/// Seeded shuffle of `corpus` into a training part of `fraction` and the rest.
pub fn split_corpus(corpus: &[CoreferenceSet], fraction: f64, seed: u64) -> (Vec<CoreferenceSet>, Vec<CoreferenceSet>) {
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((corpus.len() as f64) * fraction).round() as usize;
    let (a, b) = order.split_at(n_train.min(corpus.len()));
    let pick = |ix: &[usize]| {
        let mut ix = ix.to_vec();
        ix.sort_unstable();
        ix.into_iter().map(|i| corpus[i].clone()).collect()
    };
    (pick(a), pick(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub saved: SavedModel,
    pub steps: Vec<SelectionStep>,
}

/// Select features and fit the pairwise model on a keyed corpus, and estimate
/// the greedy baseline's confidence table from the same sets.
pub fn train(corpus: &[CoreferenceSet], keys: &Keys, cfg: &RunConfig) -> Result<Training> {
    let dcfg = cfg.distance_config();
    let data = build_dataset(corpus, keys, cfg.dataset_mode, &dcfg)?;
    let trained = select_and_train(&data, dcfg, &cfg.train)?;
    let pk = estimate_pk(corpus, keys)?;
    Ok(Training {
        saved: SavedModel {
            model: trained.model,
            dataset_mode: cfg.dataset_mode,
            pk: Some(pk),
            training_cross_entropy: Some(trained.cross_entropy),
        },
        steps: trained.steps,
    })
}

/// Evaluate each of `models` on the keyed `corpus`.
pub fn evaluate_models(
    corpus: &[CoreferenceSet],
    keys: &Keys,
    models: &[InferenceModel],
    source: Option<PairSource<'_>>,
    pk: Option<&PkTable>,
    cfg: &RunConfig,
) -> Result<Vec<(InferenceModel, Report)>> {
    models
        .iter()
        .map(|&m| {
            let dists = infer_corpus(corpus, m, source, pk, cfg)?;
            Ok((m, corpus_evaluate(corpus.iter().zip(dists.iter()), keys)?))
        })
        .collect()
}

/// Train on `folds - 1` parts and test on the remaining one, for every part.
/// With one fold the corpus is split once by `cfg.train_fraction`.
pub fn cross_validate(
    corpus: &[CoreferenceSet],
    keys: &Keys,
    folds: usize,
    cfg: &RunConfig,
) -> Result<Vec<Vec<(InferenceModel, Report)>>> {
    let splits: Vec<(Vec<CoreferenceSet>, Vec<CoreferenceSet>)> = if folds <= 1 {
        vec![split_corpus(corpus, cfg.train_fraction, cfg.seed)]
    } else {
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
        (0..folds)
            .map(|k| {
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (pos, &i) in order.iter().enumerate() {
                    if pos % folds == k {
                        test.push(i)
                    } else {
                        train.push(i)
                    }
                }
                train.sort_unstable();
                test.sort_unstable();
                (
                    train.into_iter().map(|i| corpus[i].clone()).collect(),
                    test.into_iter().map(|i| corpus[i].clone()).collect(),
                )
            })
            .collect()
    };
    splits
        .iter()
        .map(|(train_sets, test_sets)| {
            if train_sets.is_empty() || test_sets.is_empty() {
                return Err(CorefError::Config("corpus too small to split into training and test sets".into()));
            }
            let t = train(train_sets, keys, cfg)?;
            evaluate_models(test_sets, keys, &InferenceModel::ALL, Some(PairSource::Model(&t.saved)), None, cfg)
        })
        .collect()
}
