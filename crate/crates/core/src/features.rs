//! Pairwise context characteristics, the binary feature pool over them, and
//! empirical training datasets.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CorefError, Result};
use crate::merging::gold_decision_pairs;
use crate::set::{Configuration, CoreferenceSet};
use crate::template::{content_relation, ContentRelation, RefForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntecedentStatus {
    Preferred,
    Possible,
    Absent,
    NotApplicable,
}

impl AntecedentStatus {
    pub const ALL: [AntecedentStatus; 4] = [
        AntecedentStatus::Preferred,
        AntecedentStatus::Possible,
        AntecedentStatus::Absent,
        AntecedentStatus::NotApplicable,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceClass {
    VeryClose,
    Close,
    MidDistance,
    FarAway,
    VeryFarAway,
}

impl DistanceClass {
    pub const ALL: [DistanceClass; 5] = [
        DistanceClass::VeryClose,
        DistanceClass::Close,
        DistanceClass::MidDistance,
        DistanceClass::FarAway,
        DistanceClass::VeryFarAway,
    ];
}

/// Upper bounds (exclusive, in characters) of the first four distance classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceConfig {
    pub thresholds: [u64; 4],
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig { thresholds: [120, 400, 1000, 2500] }
    }
}

impl DistanceConfig {
    pub fn new(thresholds: [u64; 4]) -> Result<Self> {
        let cfg = DistanceConfig { thresholds };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.thresholds;
        if t[0] == 0 || t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CorefError::Config(format!(
                "distance thresholds must be positive and strictly increasing, got {t:?}"
            )));
        }
        Ok(())
    }

    pub fn classify(&self, distance: u64) -> DistanceClass {
        let t = self.thresholds;
        if distance < t[0] {
            DistanceClass::VeryClose
        } else if distance < t[1] {
            DistanceClass::Close
        } else if distance < t[2] {
            DistanceClass::MidDistance
        } else if distance < t[3] {
            DistanceClass::FarAway
        } else {
            DistanceClass::VeryFarAway
        }
    }
}

/// The context of a pair (S, T) where T appears later in the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Characteristics {
    pub content_relation: ContentRelation,
    pub shared_ge2: bool,
    pub name_match: bool,
    pub ref_form: RefForm,
    pub antecedent_status: AntecedentStatus,
    pub distance_class: DistanceClass,
}

/// One value of one characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    ContentRelation(ContentRelation),
    SharedGe2(bool),
    NameMatch(bool),
    RefForm(RefForm),
    AntecedentStatus(AntecedentStatus),
    DistanceClass(DistanceClass),
}

fn snake<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => unreachable!("enum values serialize to strings"),
    }
}

fn parse_snake<T: for<'de> Deserialize<'de>>(value: &str) -> Option<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string())).ok()
}

impl Predicate {
    /// Every legal (characteristic, value) pair, in a fixed order.
    pub fn all() -> Vec<Predicate> {
        let mut out = Vec::with_capacity(20);
        out.extend(ContentRelation::ALL.map(Predicate::ContentRelation));
        out.extend([true, false].map(Predicate::SharedGe2));
        out.extend([true, false].map(Predicate::NameMatch));
        out.extend(RefForm::ALL.map(Predicate::RefForm));
        out.extend(AntecedentStatus::ALL.map(Predicate::AntecedentStatus));
        out.extend(DistanceClass::ALL.map(Predicate::DistanceClass));
        out
    }

    pub fn holds(&self, x: &Characteristics) -> bool {
        match *self {
            Predicate::ContentRelation(v) => x.content_relation == v,
            Predicate::SharedGe2(v) => x.shared_ge2 == v,
            Predicate::NameMatch(v) => x.name_match == v,
            Predicate::RefForm(v) => x.ref_form == v,
            Predicate::AntecedentStatus(v) => x.antecedent_status == v,
            Predicate::DistanceClass(v) => x.distance_class == v,
        }
    }

    pub fn characteristic(&self) -> &'static str {
        match self {
            Predicate::ContentRelation(_) => "content_relation",
            Predicate::SharedGe2(_) => "shared_ge2",
            Predicate::NameMatch(_) => "name_match",
            Predicate::RefForm(_) => "ref_form",
            Predicate::AntecedentStatus(_) => "antecedent_status",
            Predicate::DistanceClass(_) => "distance_class",
        }
    }

    pub fn value(&self) -> String {
        match self {
            Predicate::ContentRelation(v) => snake(v),
            Predicate::SharedGe2(v) | Predicate::NameMatch(v) => v.to_string(),
            Predicate::RefForm(v) => snake(v),
            Predicate::AntecedentStatus(v) => snake(v),
            Predicate::DistanceClass(v) => snake(v),
        }
    }

    pub fn parse(characteristic: &str, value: &str) -> Option<Predicate> {
        let boolean = || value.parse::<bool>().ok();
        Some(match characteristic {
            "content_relation" => Predicate::ContentRelation(parse_snake(value)?),
            "shared_ge2" => Predicate::SharedGe2(boolean()?),
            "name_match" => Predicate::NameMatch(boolean()?),
            "ref_form" => Predicate::RefForm(parse_snake(value)?),
            "antecedent_status" => Predicate::AntecedentStatus(parse_snake(value)?),
            "distance_class" => Predicate::DistanceClass(parse_snake(value)?),
            _ => return None,
        })
    }
}

/// A binary feature: fires iff the predicate holds on x and the outcome is `outcome`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Feature {
    pub predicate: Predicate,
    pub outcome: bool,
}

impl Feature {
    pub fn new(predicate: Predicate, outcome: bool) -> Self {
        Feature { predicate, outcome }
    }

    pub fn fires(&self, x: &Characteristics, y: bool) -> bool {
        y == self.outcome && self.predicate.holds(x)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={} y={}", self.predicate.characteristic(), self.predicate.value(), u8::from(self.outcome))
    }
}

/// The full candidate pool: every predicate crossed with both outcomes.
pub fn candidate_features() -> Vec<Feature> {
    Predicate::all().into_iter().flat_map(|p| [Feature::new(p, true), Feature::new(p, false)]).collect()
}

/// Characteristics of the pair at positions `s < t` of `set`.
pub(crate) fn extract_characteristics_at(
    set: &CoreferenceSet,
    s: usize,
    t: usize,
    dcfg: &DistanceConfig,
) -> Characteristics {
    debug_assert!(s < t);
    let st = set.template(s);
    let tt = set.template(t);
    let cmp = content_relation(st, tt);

    let ref_form = tt.mention.form;
    let antecedent_status = if ref_form != RefForm::Definite {
        AntecedentStatus::NotApplicable
    } else if preferred_chain_reaches(set, t, s) {
        AntecedentStatus::Preferred
    } else if tt.mention.possible_antecedents.contains(&st.id) {
        AntecedentStatus::Possible
    } else {
        AntecedentStatus::Absent
    };

    Characteristics {
        content_relation: cmp.relation,
        shared_ge2: cmp.shared_ge2,
        name_match: cmp.name_match,
        ref_form,
        antecedent_status,
        distance_class: dcfg.classify(tt.char_offset - st.char_offset),
    }
}

/// Whether following preferred-antecedent links from `from` reaches `target`.
fn preferred_chain_reaches(set: &CoreferenceSet, from: usize, target: usize) -> bool {
    let mut cur = from;
    // links always point strictly backwards, so this terminates
    while let Some(next) = set.template(cur).mention.preferred_antecedent.as_deref().and_then(|id| set.index_of(id)) {
        if next == target {
            return true;
        }
        if next >= cur {
            return false;
        }
        cur = next;
    }
    false
}

/// Characteristics of the pair (S, T) of `set`, where T must follow S in text order.
pub fn extract_characteristics(
    set: &CoreferenceSet,
    s: &str,
    t: &str,
    dcfg: &DistanceConfig,
) -> Result<Characteristics> {
    let si = set.index_of(s).ok_or_else(|| CorefError::validation(set.id(), format!("unknown template {s}")))?;
    let ti = set.index_of(t).ok_or_else(|| CorefError::validation(set.id(), format!("unknown template {t}")))?;
    if ti <= si {
        return Err(CorefError::OrderViolation { earlier: s.to_string(), later: t.to_string() });
    }
    Ok(extract_characteristics_at(set, si, ti, dcfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DatasetMode {
    /// Every compatible pair of every set.
    #[default]
    AllPairs,
    /// Only the pairs a merger queries while building the key configuration.
    MergeDecisions,
}

/// One training pair with its origin, before aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInstance {
    pub set: String,
    pub s: String,
    pub t: String,
    pub x: Characteristics,
    pub outcome: bool,
}

/// Aggregated counts of (context, outcome) observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmpiricalDataset {
    counts: BTreeMap<Characteristics, [u64; 2]>,
}

impl EmpiricalDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: Characteristics, outcome: bool, count: u64) {
        if count > 0 {
            self.counts.entry(x).or_default()[usize::from(outcome)] += count;
        }
    }

    pub fn from_instances<'a>(instances: impl IntoIterator<Item = &'a PairInstance>) -> Self {
        let mut data = EmpiricalDataset::new();
        for inst in instances {
            data.add(inst.x, inst.outcome, 1);
        }
        data
    }

    /// Total number of observations.
    pub fn total(&self) -> u64 {
        self.counts.values().map(|c| c[0] + c[1]).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Distinct contexts with their `[y=0, y=1]` counts.
    pub fn contexts(&self) -> impl Iterator<Item = (&Characteristics, [u64; 2])> {
        self.counts.iter().map(|(x, c)| (x, *c))
    }

    /// `(x, y, count)` triples with nonzero count.
    pub fn instances(&self) -> Vec<(Characteristics, bool, u64)> {
        let mut out = Vec::new();
        for (x, c) in &self.counts {
            for y in [false, true] {
                if c[usize::from(y)] > 0 {
                    out.push((*x, y, c[usize::from(y)]));
                }
            }
        }
        out
    }

    pub fn merge(&mut self, other: &EmpiricalDataset) {
        for (x, c) in &other.counts {
            let e = self.counts.entry(*x).or_default();
            e[0] += c[0];
            e[1] += c[1];
        }
    }
}

/// Gold configurations keyed by set id.
pub type Keys = BTreeMap<String, Configuration>;

/// Labelled pairs drawn from a keyed corpus.
pub fn build_pair_instances(
    corpus: &[CoreferenceSet],
    keys: &Keys,
    mode: DatasetMode,
    dcfg: &DistanceConfig,
) -> Result<Vec<PairInstance>> {
    let mut out = Vec::new();
    for set in corpus {
        let gold = keys.get(set.id()).ok_or_else(|| CorefError::MissingKey(set.id().to_string()))?;
        gold.validate(set).map_err(|e| CorefError::InvalidKey { set: set.id().to_string(), reason: e.to_string() })?;
        let pairs: Vec<(usize, usize, bool)> = match mode {
            DatasetMode::AllPairs => {
                set.compatible_pairs().into_iter().map(|(i, j)| (i, j, gold.same_cell(i, j))).collect()
            }
            DatasetMode::MergeDecisions => gold_decision_pairs(set, gold)?
                .into_iter()
                .map(|(s, t, y)| (set.index_of(&s).unwrap(), set.index_of(&t).unwrap(), y))
                .collect(),
        };
        for (i, j, y) in pairs {
            out.push(PairInstance {
                set: set.id().to_string(),
                s: set.template(i).id.clone(),
                t: set.template(j).id.clone(),
                x: extract_characteristics_at(set, i, j, dcfg),
                outcome: y,
            });
        }
    }
    Ok(out)
}

pub fn build_dataset(
    corpus: &[CoreferenceSet],
    keys: &Keys,
    mode: DatasetMode,
    dcfg: &DistanceConfig,
) -> Result<EmpiricalDataset> {
    let instances = build_pair_instances(corpus, keys, mode, dcfg)?;
    Ok(EmpiricalDataset::from_instances(&instances))
}
