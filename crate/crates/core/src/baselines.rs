//! Comparison models: deterministic greedy merging with a per-cardinality
//! confidence, and the uniform distribution.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{CorefError, Result};
use crate::features::Keys;
use crate::partition::{count_set_configurations, set_configurations, DEFAULT_ENUMERATION_CAP};
use crate::set::{Configuration, CoreferenceSet, Distribution};
use crate::template::{slots_conflict, unify, Template};

/// An object built so far by the greedy merger.
struct Object {
    members: Vec<usize>,
    unified: Template,
}

impl Object {
    fn latest(&self) -> usize {
        *self.members.iter().max().expect("objects are non-empty")
    }

    fn accepts(&self, other: &Object, set: &CoreferenceSet) -> bool {
        !slots_conflict(&self.unified, &other.unified)
            && self.members.iter().all(|&i| other.members.iter().all(|&j| set.compatible(i, j)))
    }
}

/// Merge each new template into every earlier object it unifies with,
/// scanning from the most recent object backwards.
pub fn greedy_configuration(set: &CoreferenceSet) -> Configuration {
    let mut objects: Vec<Object> = Vec::new();
    for t in 0..set.len() {
        let mut current = Object { members: vec![t], unified: set.template(t).clone() };
        objects.sort_by_key(|o| std::cmp::Reverse(o.latest()));
        let mut rest = Vec::with_capacity(objects.len());
        for obj in objects.drain(..) {
            if current.accepts(&obj, set) {
                current.unified = unify(&obj.unified, &current.unified).expect("checked compatible");
                current.members.extend(obj.members);
            } else {
                rest.push(obj);
            }
        }
        rest.push(current);
        objects = rest;
    }
    Configuration::from_cells(objects.into_iter().map(|o| o.members).collect())
}

/// How often greedy merging found the key, by set cardinality 2, 3 and 4 or more.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkTable {
    pub p2: f64,
    pub p3: f64,
    pub p_gt3: f64,
    /// Number of sets seen in each bucket.
    pub counts: [u64; 3],
}

impl PkTable {
    pub fn new(p2: f64, p3: f64, p_gt3: f64) -> Result<Self> {
        let table = PkTable { p2, p3, p_gt3, counts: [0; 3] };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.p2, self.p3, self.p_gt3] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CorefError::InvalidProbability(p));
            }
        }
        Ok(())
    }

    pub fn for_cardinality(&self, n: usize) -> f64 {
        match n {
            0..=2 => self.p2,
            3 => self.p3,
            _ => self.p_gt3,
        }
    }
}

fn bucket(n: usize) -> usize {
    n.clamp(2, 4) - 2
}

pub fn estimate_pk(corpus: &[CoreferenceSet], keys: &Keys) -> Result<PkTable> {
    let mut correct = [0u64; 3];
    let mut counts = [0u64; 3];
    for set in corpus {
        let gold = keys.get(set.id()).ok_or_else(|| CorefError::MissingKey(set.id().to_string()))?;
        let b = bucket(set.len());
        counts[b] += 1;
        if greedy_configuration(set) == *gold {
            correct[b] += 1;
        }
    }
    let mut p = [0.0; 3];
    for b in 0..3 {
        if counts[b] == 0 {
            warn!("no training sets of cardinality {}; its greedy confidence is 0", ["2", "3", ">3"][b]);
        } else {
            p[b] = correct[b] as f64 / counts[b] as f64;
        }
    }
    Ok(PkTable { p2: p[0], p3: p[1], p_gt3: p[2], counts })
}

/// The greedy configuration gets `p_k`; the remaining valid configurations share
/// the rest uniformly. With a single valid configuration it gets everything.
pub fn greedy_distribution(set: &CoreferenceSet, pk: &PkTable) -> Result<Distribution> {
    pk.validate()?;
    let pick = greedy_configuration(set);
    let configs = set_configurations(set, Some(DEFAULT_ENUMERATION_CAP))?;
    let m = configs.len();
    if m == 1 {
        return Ok(Distribution::point(pick));
    }
    let p = pk.for_cardinality(set.len());
    let other = (1.0 - p) / (m - 1) as f64;
    let entries = configs
        .into_iter()
        .map(|c| {
            let q = if c == pick { p } else { other };
            (c, q)
        })
        .collect();
    Distribution::new(entries)
}

pub fn uniform_distribution(set: &CoreferenceSet) -> Result<Distribution> {
    let configs = set_configurations(set, Some(DEFAULT_ENUMERATION_CAP))?;
    let each = 1.0 / configs.len() as f64;
    Distribution::new(configs.into_iter().map(|c| (c, each)).collect())
}

/// Cross-entropy of the uniform model against any valid key, without enumerating.
pub fn uniform_bits(set: &CoreferenceSet) -> f64 {
    (count_set_configurations(set) as f64).log2()
}
