//! Pairwise coreference probabilities for the templates of one set.

use std::collections::BTreeMap;

use crate::error::{CorefError, Result};
use crate::maxent::MaxentModel;
use crate::set::CoreferenceSet;

/// Probabilities keyed by unordered template-id pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairTable {
    probs: BTreeMap<(String, String), f64>,
}

impl PairTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn insert(&mut self, a: &str, b: &str, p: f64) {
        self.probs.insert(Self::key(a, b), p);
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.probs.get(&Self::key(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.probs.iter().map(|((a, b), p)| (a.as_str(), b.as_str(), *p))
    }

    /// Score every compatible pair of `set` with a trained model.
    pub fn from_model(model: &MaxentModel, set: &CoreferenceSet) -> Self {
        let mut table = PairTable::new();
        for (i, j) in set.compatible_pairs() {
            let x = crate::features::extract_characteristics_at(set, i, j, model.distance_config());
            table.insert(&set.template(i).id, &set.template(j).id, model.predict(&x));
        }
        table
    }

    /// Dense position-indexed matrix for `set`. Excluded pairs read as 0.
    pub fn matrix(&self, set: &CoreferenceSet) -> Result<PairMatrix> {
        let n = set.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, j) in set.compatible_pairs() {
            let (s, t) = (&set.template(i).id, &set.template(j).id);
            let p = self.get(s, t).ok_or_else(|| CorefError::MissingPair {
                set: set.id().to_string(),
                s: s.clone(),
                t: t.clone(),
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(CorefError::InvalidProbability(p));
            }
            m[i][j] = p;
            m[j][i] = p;
        }
        Ok(PairMatrix(m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix(Vec<Vec<f64>>);

impl PairMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }
}
