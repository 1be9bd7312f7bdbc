//! Templates and the slot-level relations between them.
//!
//! Slot values are compared after trimming and case-folding. A slot that is
//! absent from the map is nil; nil never conflicts with anything.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{CorefError, Result};

/// Form of the referring expression a template was created from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RefForm {
    Indefinite,
    Definite,
    #[default]
    Neither,
}

impl RefForm {
    pub const ALL: [RefForm; 3] = [RefForm::Indefinite, RefForm::Definite, RefForm::Neither];
}

/// Antecedent recommendations produced upstream for a mention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MentionInfo {
    #[serde(default)]
    pub form: RefForm,
    #[serde(default, rename = "preferred", skip_serializing_if = "Option::is_none")]
    pub preferred_antecedent: Option<String>,
    #[serde(default, rename = "possible", skip_serializing_if = "Vec::is_empty")]
    pub possible_antecedents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub id: String,
    pub char_offset: u64,
    #[serde(default)]
    pub slots: BTreeMap<String, String>,
    #[serde(default)]
    pub mention: MentionInfo,
}

/// How the slot contents of an earlier template S relate to a later template T.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentRelation {
    Identical,
    /// T is strictly more general than S.
    SProperlySubsumedByT,
    /// S is strictly more general than T.
    SProperlySubsumesT,
    OtherwiseConsistent,
}

impl ContentRelation {
    pub const ALL: [ContentRelation; 4] = [
        ContentRelation::Identical,
        ContentRelation::SProperlySubsumedByT,
        ContentRelation::SProperlySubsumesT,
        ContentRelation::OtherwiseConsistent,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContentComparison {
    pub relation: ContentRelation,
    pub shared_ge2: bool,
    pub name_match: bool,
}

pub const NAME_SLOT: &str = "NAME";

pub(crate) fn fold(value: &str) -> String {
    value.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl Template {
    pub fn new(id: impl Into<String>, char_offset: u64) -> Self {
        Template { id: id.into(), char_offset, slots: BTreeMap::new(), mention: MentionInfo::default() }
    }

    pub fn with_slot(mut self, name: &str, value: &str) -> Self {
        self.slots.insert(name.to_string(), value.to_string());
        self
    }

    pub fn with_form(mut self, form: RefForm) -> Self {
        self.mention.form = form;
        self
    }

    pub fn with_preferred(mut self, id: &str) -> Self {
        self.mention.preferred_antecedent = Some(id.to_string());
        self
    }

    pub fn with_possible(mut self, id: &str) -> Self {
        self.mention.possible_antecedents.push(id.to_string());
        self
    }

    /// Non-nil slots with folded values.
    pub fn folded_slots(&self) -> BTreeMap<&str, String> {
        self.slots.iter().filter(|(_, v)| !v.trim().is_empty()).map(|(k, v)| (k.as_str(), fold(v))).collect()
    }

    pub fn slot(&self, name: &str) -> Option<&str> {
        self.slots.get(name).map(|v| v.trim()).filter(|v| !v.is_empty())
    }
}

/// True if some slot is non-nil in both templates with unequal values.
pub fn slots_conflict(s: &Template, t: &Template) -> bool {
    let sv = s.folded_slots();
    t.folded_slots().iter().any(|(name, value)| sv.get(name).is_some_and(|other| other != value))
}

/// Unordered pairs of template ids known not to corefer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exclusions(BTreeSet<(String, String)>);

impl Exclusions {
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

    pub fn insert(&mut self, a: &str, b: &str) {
        self.0.insert(Self::key(a, b));
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.0.contains(&Self::key(a, b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }
}

impl<A: AsRef<str>, B: AsRef<str>> FromIterator<(A, B)> for Exclusions {
    fn from_iter<I: IntoIterator<Item = (A, B)>>(iter: I) -> Self {
        let mut ex = Exclusions::new();
        for (a, b) in iter {
            ex.insert(a.as_ref(), b.as_ref());
        }
        ex
    }
}

/// Two templates may corefer unless explicitly excluded or their slots conflict.
pub fn compatible(s: &Template, t: &Template, exclusions: &Exclusions) -> bool {
    !exclusions.contains(&s.id, &t.id) && !slots_conflict(s, t)
}

/// Compare the contents of an earlier template `s` with a later template `t`.
pub fn content_relation(s: &Template, t: &Template) -> ContentComparison {
    let sv = s.folded_slots();
    let tv = t.folded_slots();

    let shared = sv.iter().filter(|(name, value)| tv.get(*name) == Some(*value)).count();
    let t_within_s = shared == tv.len();
    let s_within_t = shared == sv.len();

    let relation = match (t_within_s, s_within_t) {
        (true, true) => ContentRelation::Identical,
        (true, false) => ContentRelation::SProperlySubsumedByT,
        (false, true) => ContentRelation::SProperlySubsumesT,
        (false, false) => ContentRelation::OtherwiseConsistent,
    };

    let name_match = match (sv.get(NAME_SLOT), tv.get(NAME_SLOT)) {
        (Some(a), Some(b)) => a == b && a.split_whitespace().count() >= 2,
        _ => false,
    };

    ContentComparison { relation, shared_ge2: shared >= 2, name_match }
}

/// Merge two compatible templates into one carrying the union of their slots.
///
/// Position and mention information come from the later template; the id is
/// `later&earlier`.
pub fn unify(s: &Template, t: &Template) -> Result<Template> {
    if slots_conflict(s, t) {
        return Err(CorefError::IncompatibleTemplates(s.id.clone(), t.id.clone()));
    }
    let (earlier, later) = if t.char_offset >= s.char_offset { (s, t) } else { (t, s) };
    let mut slots = earlier.slots.clone();
    for (name, value) in &later.slots {
        if !value.trim().is_empty() {
            slots.insert(name.clone(), value.clone());
        }
    }
    Ok(Template {
        id: format!("{}&{}", later.id, earlier.id),
        char_offset: later.char_offset,
        slots,
        mention: later.mention.clone(),
    })
}
