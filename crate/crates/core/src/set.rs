//! Coreference sets, configurations over them, and distributions over
//! configurations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{CorefError, Result};
use crate::template::{slots_conflict, Exclusions, Template};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// An ordered group of templates that may corefer, with the pairs known not to.
///
/// Templates are kept in text order. Exclusions always include every pair of
/// templates whose slots conflict.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreferenceSet {
    id: String,
    templates: Vec<Template>,
    exclusions: Exclusions,
    index: BTreeMap<String, usize>,
    compat: Vec<Vec<bool>>,
}

impl CoreferenceSet {
    pub fn new<A, B>(
        id: impl Into<String>,
        mut templates: Vec<Template>,
        explicit_exclusions: impl IntoIterator<Item = (A, B)>,
    ) -> Result<Self>
    where
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let id = id.into();
        if templates.len() < 2 {
            return Err(CorefError::validation(&id, "a coreference set needs at least two templates"));
        }
        // stable: ties keep input order
        templates.sort_by_key(|t| t.char_offset);

        let mut index = BTreeMap::new();
        for (i, t) in templates.iter().enumerate() {
            if t.id.is_empty() {
                return Err(CorefError::validation(&id, "template with empty id"));
            }
            if t.id.contains('&') {
                return Err(CorefError::validation(&id, format!("template id {} contains '&'", t.id)));
            }
            if index.insert(t.id.clone(), i).is_some() {
                return Err(CorefError::validation(&id, format!("duplicate template id {}", t.id)));
            }
            if let Some((name, _)) = t.slots.iter().find(|(_, v)| v.trim().is_empty()) {
                return Err(CorefError::validation(
                    &id,
                    format!("template {} has an empty value for slot {name}", t.id),
                ));
            }
        }

        for (i, t) in templates.iter().enumerate() {
            let precedes = |other: &str, what: &str| -> Result<()> {
                match index.get(other) {
                    Some(&j) if j < i => Ok(()),
                    Some(_) => Err(CorefError::validation(
                        &id,
                        format!("{what} {other} of template {} does not precede it", t.id),
                    )),
                    None => Err(CorefError::validation(
                        &id,
                        format!("{what} {other} of template {} is not in the set", t.id),
                    )),
                }
            };
            if let Some(p) = &t.mention.preferred_antecedent {
                precedes(p, "preferred antecedent")?;
                if t.mention.possible_antecedents.contains(p) {
                    return Err(CorefError::validation(
                        &id,
                        format!("preferred antecedent {p} of {} is also listed as possible", t.id),
                    ));
                }
            }
            for p in &t.mention.possible_antecedents {
                precedes(p, "possible antecedent")?;
            }
        }

        let mut exclusions = Exclusions::new();
        for (a, b) in explicit_exclusions {
            let (a, b) = (a.as_ref(), b.as_ref());
            if !index.contains_key(a) || !index.contains_key(b) {
                return Err(CorefError::validation(&id, format!("exclusion ({a}, {b}) names an unknown template")));
            }
            if a == b {
                return Err(CorefError::validation(&id, format!("template {a} excluded from itself")));
            }
            exclusions.insert(a, b);
        }
        let n = templates.len();
        for i in 0..n {
            for j in i + 1..n {
                if slots_conflict(&templates[i], &templates[j]) {
                    exclusions.insert(&templates[i].id, &templates[j].id);
                }
            }
        }

        let compat = (0..n)
            .map(|i| (0..n).map(|j| i == j || !exclusions.contains(&templates[i].id, &templates[j].id)).collect())
            .collect();

        Ok(CoreferenceSet { id, templates, exclusions, index, compat })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn template(&self, i: usize) -> &Template {
        &self.templates[i]
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn exclusions(&self) -> &Exclusions {
        &self.exclusions
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.templates.iter().map(|t| t.id.as_str()).collect()
    }

    /// Compatibility of the templates at positions `i` and `j`.
    pub fn compatible(&self, i: usize, j: usize) -> bool {
        self.compat[i][j]
    }

    /// Excluded pairs as `(i, j)` positions with `i < j`.
    pub fn excluded_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| !self.compat[i][j]).collect()
    }

    /// Compatible pairs as `(earlier, later)` positions.
    pub fn compatible_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| self.compat[i][j]).collect()
    }
}

/// A partition of a coreference set into cells of mutually coreferring templates.
///
/// Cells hold template positions; each cell is sorted and cells are ordered by
/// their smallest member, so equal partitions compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    cells: Vec<Vec<usize>>,
}

impl Configuration {
    pub fn from_cells(mut cells: Vec<Vec<usize>>) -> Self {
        for cell in &mut cells {
            cell.sort_unstable();
        }
        cells.retain(|c| !c.is_empty());
        cells.sort();
        Configuration { cells }
    }

    /// Build from a restricted-growth labelling: `labels[i]` is the cell of template `i`.
    pub fn from_labels(labels: &[usize]) -> Self {
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut cells = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            cells[l].push(i);
        }
        Configuration::from_cells(cells)
    }

    pub fn from_ids<S: AsRef<str>>(set: &CoreferenceSet, cells: &[Vec<S>]) -> Result<Self> {
        let mut out = Vec::with_capacity(cells.len());
        for cell in cells {
            let mut c = Vec::with_capacity(cell.len());
            for id in cell {
                let id = id.as_ref();
                let i = set
                    .index_of(id)
                    .ok_or_else(|| CorefError::invalid_config(set.id(), format!("unknown template {id}")))?;
                c.push(i);
            }
            if c.is_empty() {
                return Err(CorefError::invalid_config(set.id(), "empty cell"));
            }
            out.push(c);
        }
        let config = Configuration::from_cells(out);
        config.validate(set)?;
        Ok(config)
    }

    /// Every template in its own cell.
    pub fn singletons(n: usize) -> Self {
        Configuration { cells: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn labels(&self) -> Vec<usize> {
        let n = self.cells.iter().map(|c| c.len()).sum();
        let mut labels = vec![0; n];
        for (l, cell) in self.cells.iter().enumerate() {
            for &i in cell {
                if i < n {
                    labels[i] = l;
                }
            }
        }
        labels
    }

    pub fn cell_of(&self, i: usize) -> Option<&[usize]> {
        self.cells.iter().find(|c| c.contains(&i)).map(|c| c.as_slice())
    }

    pub fn same_cell(&self, i: usize, j: usize) -> bool {
        self.cell_of(i).is_some_and(|c| c.contains(&j))
    }

    pub fn validate(&self, set: &CoreferenceSet) -> Result<()> {
        let n = set.len();
        let mut seen = vec![false; n];
        for cell in &self.cells {
            if cell.is_empty() {
                return Err(CorefError::invalid_config(set.id(), "empty cell"));
            }
            for &i in cell {
                if i >= n {
                    return Err(CorefError::invalid_config(set.id(), format!("template position {i} out of range")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(CorefError::invalid_config(
                        set.id(),
                        format!("template {} appears in more than one cell", set.template(i).id),
                    ));
                }
            }
            for (a, &i) in cell.iter().enumerate() {
                for &j in &cell[a + 1..] {
                    if !set.compatible(i, j) {
                        return Err(CorefError::invalid_config(
                            set.id(),
                            format!("cell co-locates excluded pair ({}, {})", set.template(i).id, set.template(j).id),
                        ));
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(CorefError::invalid_config(
                set.id(),
                format!("template {} is not covered", set.template(i).id),
            ));
        }
        Ok(())
    }

    pub fn to_ids(&self, set: &CoreferenceSet) -> Vec<Vec<String>> {
        self.cells.iter().map(|c| c.iter().map(|&i| set.template(i).id.clone()).collect()).collect()
    }

    pub fn display<'a>(&'a self, set: &'a CoreferenceSet) -> DisplayConfiguration<'a> {
        DisplayConfiguration { config: self, set }
    }
}

pub struct DisplayConfiguration<'a> {
    config: &'a Configuration,
    set: &'a CoreferenceSet,
}

impl fmt::Display for DisplayConfiguration<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, cell) in self.config.cells.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            f.write_str("(")?;
            for (m, &i) in cell.iter().enumerate() {
                if m > 0 {
                    f.write_str(" ")?;
                }
                f.write_str(&self.set.template(i).id)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A normalized probability distribution over configurations of one set.
///
/// `unlisted` counts valid configurations that were pruned during inference
/// and carry no listed mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    entries: Vec<(Configuration, f64)>,
    unlisted: u64,
}

impl Distribution {
    pub fn new(entries: Vec<(Configuration, f64)>) -> Result<Self> {
        Self::with_unlisted(entries, 0)
    }

    pub fn with_unlisted(entries: Vec<(Configuration, f64)>, unlisted: u64) -> Result<Self> {
        if entries.is_empty() {
            return Err(CorefError::InvalidDistribution("no configurations".into()));
        }
        let mut total = 0.0;
        for (_, p) in &entries {
            if !p.is_finite() || *p < 0.0 || *p > 1.0 + MASS_TOLERANCE {
                return Err(CorefError::InvalidProbability(*p));
            }
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(CorefError::InvalidDistribution(format!("total mass {total}")));
        }
        let distinct: BTreeSet<&Configuration> = entries.iter().map(|(c, _)| c).collect();
        if distinct.len() != entries.len() {
            return Err(CorefError::InvalidDistribution("repeated configuration".into()));
        }
        Ok(Distribution { entries, unlisted })
    }

    /// Normalize natural-log weights; `-inf` marks a zero score.
    pub fn from_log_weights(set: &CoreferenceSet, weights: Vec<(Configuration, f64)>, unlisted: u64) -> Result<Self> {
        let max = weights.iter().map(|(_, w)| *w).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(CorefError::AllZero { set: set.id().to_string(), pairs: String::new() });
        }
        let total: f64 = weights.iter().map(|(_, w)| (w - max).exp()).sum();
        let log_z = max + total.ln();
        let entries = weights.into_iter().map(|(c, w)| (c, (w - log_z).exp())).collect();
        Self::with_unlisted(entries, unlisted)
    }

    /// Point mass on a single configuration.
    pub fn point(config: Configuration) -> Self {
        Distribution { entries: vec![(config, 1.0)], unlisted: 0 }
    }

    pub fn entries(&self) -> &[(Configuration, f64)] {
        &self.entries
    }

    pub fn unlisted(&self) -> u64 {
        self.unlisted
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, config: &Configuration) -> f64 {
        self.entries.iter().find(|(c, _)| c == config).map_or(0.0, |(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// The configuration with strictly the highest probability, if unique.
    pub fn unique_argmax(&self) -> Option<&Configuration> {
        unique_argmax(self.entries.iter().map(|(c, p)| (c, *p)))
    }

    /// Entries ordered by decreasing probability, then canonical cell order.
    pub fn sorted(&self) -> Vec<(Configuration, f64)> {
        let mut out = self.entries.clone();
        sort_entries(&mut out);
        out
    }

    /// Check normalization and that every configuration is valid for `set`.
    pub fn validate(&self, set: &CoreferenceSet) -> Result<()> {
        let total = self.total();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(CorefError::InvalidDistribution(format!("total mass {total}")));
        }
        for (c, _) in &self.entries {
            c.validate(set)?;
        }
        Ok(())
    }
}

pub(crate) fn sort_entries(entries: &mut [(Configuration, f64)]) {
    entries.sort_by(|(ca, pa), (cb, pb)| pb.total_cmp(pa).then_with(|| ca.cmp(cb)));
}

pub(crate) fn unique_argmax<'a>(entries: impl Iterator<Item = (&'a Configuration, f64)>) -> Option<&'a Configuration> {
    let mut best: Option<(&Configuration, f64)> = None;
    let mut tied = false;
    for (c, p) in entries {
        match best {
            Some((_, bp)) if p == bp => tied = true,
            Some((_, bp)) if p < bp => {}
            _ => {
                best = Some((c, p));
                tied = false;
            }
        }
    }
    if tied {
        None
    } else {
        best.map(|(c, _)| c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::kinston_set;
    use crate::template::Template;

    #[test]
    fn kinston_exclusions_come_from_slot_conflicts() {
        let set = kinston_set();
        assert_eq!(set.excluded_pairs(), vec![(0, 2), (1, 2)]);
        assert!(set.exclusions().contains("C", "A"));
        assert!(set.exclusions().contains("B", "C"));
        assert_eq!(set.exclusions().len(), 2);
    }

    #[test]
    fn templates_are_ordered_by_offset_with_stable_ties() {
        let t = vec![Template::new("Z", 10), Template::new("X", 5), Template::new("Y", 5)];
        let set = CoreferenceSet::new("s", t, Vec::<(&str, &str)>::new()).unwrap();
        assert_eq!(set.ids(), vec!["X", "Y", "Z"]);
    }

    #[test]
    fn rejects_malformed_sets() {
        let none: Vec<(&str, &str)> = vec![];
        assert!(CoreferenceSet::new("s", vec![Template::new("A", 0)], none.clone()).is_err());
        assert!(CoreferenceSet::new("s", vec![Template::new("A", 0), Template::new("A", 1)], none.clone()).is_err());
        let bad_ante = vec![Template::new("A", 0).with_preferred("B"), Template::new("B", 1)];
        assert!(CoreferenceSet::new("s", bad_ante, none.clone()).is_err());
        let both = vec![Template::new("A", 0), Template::new("B", 1).with_preferred("A").with_possible("A")];
        assert!(CoreferenceSet::new("s", both, none.clone()).is_err());
        let empty_slot = vec![Template::new("A", 0).with_slot("TYPE", "  "), Template::new("B", 1)];
        assert!(CoreferenceSet::new("s", empty_slot, none).is_err());
        let unknown = vec![Template::new("A", 0), Template::new("B", 1)];
        assert!(CoreferenceSet::new("s", unknown, vec![("A", "Q")]).is_err());
    }

    #[test]
    fn configuration_validation() {
        let set = kinston_set();
        let gold = Configuration::from_ids(&set, &[vec!["A", "B", "D"], vec!["C"]]).unwrap();
        assert_eq!(gold.cells(), &[vec![0, 1, 3], vec![2]]);
        assert_eq!(gold.display(&set).to_string(), "(A B D) (C)");
        assert!(Configuration::from_ids(&set, &[vec!["A", "C"], vec!["B", "D"]]).is_err());
        assert!(Configuration::from_ids(&set, &[vec!["A", "B"], vec!["C"]]).is_err());
        assert!(Configuration::from_ids(&set, &[vec!["A", "B", "D"], vec!["C", "D"]]).is_err());
        assert_eq!(Configuration::from_labels(&gold.labels()), gold);
    }

    #[test]
    fn distribution_checks_mass() {
        let set = kinston_set();
        let c1 = Configuration::from_labels(&[0, 0, 1, 0]);
        let c7 = Configuration::singletons(4);
        assert!(Distribution::new(vec![(c1.clone(), 0.5), (c7.clone(), 0.4)]).is_err());
        let d = Distribution::new(vec![(c1.clone(), 0.6), (c7.clone(), 0.4)]).unwrap();
        d.validate(&set).unwrap();
        assert_eq!(d.unique_argmax(), Some(&c1));
        let tie = Distribution::new(vec![(c1, 0.5), (c7, 0.5)]).unwrap();
        assert_eq!(tie.unique_argmax(), None);
        let bad = Distribution::new(vec![(Configuration::from_labels(&[0, 0, 0, 0]), 1.0)]).unwrap();
        assert!(bad.validate(&set).is_err());
    }
}
