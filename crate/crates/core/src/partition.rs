//! Enumeration of the configurations a set admits under its exclusions, and
//! pruning/smoothing of the distributions built over them.
//!
//! Configurations are generated as restricted-growth strings over templates
//! in text order: template `t` joins one of the cells opened by earlier
//! templates or opens the next one. A branch is cut as soon as it places an
//! excluded pair in the same cell.

use serde::{Deserialize, Serialize};

use crate::error::{CorefError, Result};
use crate::set::{sort_entries, unique_argmax, Configuration, CoreferenceSet, Distribution};
use crate::template::Exclusions;

pub const DEFAULT_ENUMERATION_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    pub enabled: bool,
    /// Partial configurations scoring below `floor` times the best complete
    /// score seen so far are abandoned.
    pub floor: f64,
    /// Largest set enumerated exhaustively when pruning is disabled.
    pub cap: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig { enabled: false, floor: 1e-9, cap: DEFAULT_ENUMERATION_CAP }
    }
}

/// Pairwise compatibility over positions `0..n`.
struct Compat {
    n: usize,
    ok: Vec<Vec<bool>>,
}

impl Compat {
    fn from_set(set: &CoreferenceSet) -> Self {
        let n = set.len();
        Compat { n, ok: (0..n).map(|i| (0..n).map(|j| set.compatible(i, j)).collect()).collect() }
    }

    fn from_ids(ids: &[&str], exclusions: &Exclusions) -> Self {
        let n = ids.len();
        Compat {
            n,
            ok: (0..n).map(|i| (0..n).map(|j| i == j || !exclusions.contains(ids[i], ids[j])).collect()).collect(),
        }
    }

    /// Can template `t` join the cell labelled `label` in the prefix?
    fn fits(&self, labels: &[usize], t: usize, label: usize) -> bool {
        labels.iter().enumerate().all(|(i, &l)| l != label || self.ok[i][t])
    }
}

fn walk(compat: &Compat, labels: &mut Vec<usize>, cells: usize, visit: &mut dyn FnMut(&[usize])) {
    let t = labels.len();
    if t == compat.n {
        visit(labels);
        return;
    }
    for label in 0..=cells {
        if label < cells && !compat.fits(labels, t, label) {
            continue;
        }
        labels.push(label);
        walk(compat, labels, cells.max(label + 1), visit);
        labels.pop();
    }
}

fn count_from(compat: &Compat, labels: &mut Vec<usize>, cells: usize) -> u64 {
    let t = labels.len();
    if t == compat.n {
        return 1;
    }
    let mut total = 0;
    for label in 0..=cells {
        if label < cells && !compat.fits(labels, t, label) {
            continue;
        }
        labels.push(label);
        total += count_from(compat, labels, cells.max(label + 1));
        labels.pop();
    }
    total
}

fn enumerate_compat(compat: &Compat) -> Vec<Configuration> {
    let mut out = Vec::new();
    walk(compat, &mut Vec::with_capacity(compat.n), 0, &mut |labels| out.push(Configuration::from_labels(labels)));
    out
}

/// All partitions of `ids` that keep every excluded pair apart, in
/// restricted-growth order. `cap` bounds the number of ids accepted.
pub fn enumerate_configurations(
    ids: &[&str],
    exclusions: &Exclusions,
    cap: Option<usize>,
) -> Result<Vec<Configuration>> {
    if let Some(cap) = cap.filter(|&c| ids.len() > c) {
        return Err(CorefError::SetTooLarge { n: ids.len(), cap });
    }
    Ok(enumerate_compat(&Compat::from_ids(ids, exclusions)))
}

/// Every valid configuration of `set`.
pub fn set_configurations(set: &CoreferenceSet, cap: Option<usize>) -> Result<Vec<Configuration>> {
    if let Some(cap) = cap.filter(|&c| set.len() > c) {
        return Err(CorefError::SetTooLarge { n: set.len(), cap });
    }
    Ok(enumerate_compat(&Compat::from_set(set)))
}

/// Number of valid configurations, counted without materializing them.
pub fn count_configurations(ids: &[&str], exclusions: &Exclusions) -> u64 {
    count_from(&Compat::from_ids(ids, exclusions), &mut Vec::new(), 0)
}

pub fn count_set_configurations(set: &CoreferenceSet) -> u64 {
    count_from(&Compat::from_set(set), &mut Vec::new(), 0)
}

/// A score built one template at a time, in text order.
///
/// `log_factor` is the natural-log factor for placing template `t` into cell
/// `label`, given the labels of all earlier templates. Factors must be
/// probabilities (log ≤ 0) for pruning to be sound.
pub trait IncrementalScore {
    fn log_factor(&self, labels: &[usize], t: usize, label: usize) -> f64;
}

/// Valid configurations with their unnormalized log scores, plus the number of
/// valid configurations abandoned by pruning.
pub fn enumerate_scored(
    set: &CoreferenceSet,
    scorer: &dyn IncrementalScore,
    prune: &PruneConfig,
) -> Result<(Vec<(Configuration, f64)>, u64)> {
    if !prune.enabled && set.len() > prune.cap {
        return Err(CorefError::SetTooLarge { n: set.len(), cap: prune.cap });
    }
    let compat = Compat::from_set(set);
    let mut search = Search {
        compat: &compat,
        scorer,
        log_floor: if prune.enabled { prune.floor.ln() } else { f64::NEG_INFINITY },
        pruning: prune.enabled,
        best: f64::NEG_INFINITY,
        out: Vec::new(),
        abandoned: 0,
    };
    search.run(&mut Vec::with_capacity(set.len()), 0, 0.0);
    let Search { mut out, abandoned, best, .. } = search;
    if prune.enabled {
        // the threshold rose during the search; drop early finds that ended up below it
        let threshold = best + prune.floor.ln();
        let before = out.len() as u64;
        out.retain(|(_, s)| *s >= threshold);
        let dropped = before - out.len() as u64;
        return Ok((out, abandoned + dropped));
    }
    Ok((out, abandoned))
}

struct Search<'a> {
    compat: &'a Compat,
    scorer: &'a dyn IncrementalScore,
    log_floor: f64,
    pruning: bool,
    best: f64,
    out: Vec<(Configuration, f64)>,
    abandoned: u64,
}

impl Search<'_> {
    fn run(&mut self, labels: &mut Vec<usize>, cells: usize, score: f64) {
        let t = labels.len();
        if t == self.compat.n {
            self.best = self.best.max(score);
            self.out.push((Configuration::from_labels(labels), score));
            return;
        }
        for label in 0..=cells {
            if label < cells && !self.compat.fits(labels, t, label) {
                continue;
            }
            let next = score + self.scorer.log_factor(labels, t, label);
            let next_cells = cells.max(label + 1);
            labels.push(label);
            if self.pruning && (next == f64::NEG_INFINITY || next < self.best + self.log_floor) {
                self.abandoned += count_from(self.compat, labels, next_cells);
            } else {
                self.run(labels, next_cells, next);
            }
            labels.pop();
        }
    }
}

/// A distribution reported as its non-negligible configurations plus a single
/// pooled remainder shared uniformly by everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedDistribution {
    pub kept: Vec<(Configuration, f64)>,
    pub remainder_mass: f64,
    pub remainder_count: u64,
}

impl SmoothedDistribution {
    /// Probability assigned to each configuration in the remainder.
    pub fn remainder_each(&self) -> f64 {
        if self.remainder_count == 0 {
            0.0
        } else {
            self.remainder_mass / self.remainder_count as f64
        }
    }

    pub fn probability(&self, config: &Configuration) -> f64 {
        match self.kept.iter().find(|(c, _)| c == config) {
            Some((_, p)) => *p,
            None => self.remainder_each(),
        }
    }

    pub fn kept_mass(&self) -> f64 {
        self.kept.iter().map(|(_, p)| p).sum()
    }

    pub fn unique_argmax(&self) -> Option<&Configuration> {
        unique_argmax(self.kept.iter().map(|(c, p)| (c, *p)))
    }
}

impl From<&Distribution> for SmoothedDistribution {
    fn from(d: &Distribution) -> Self {
        let mut kept = d.entries().to_vec();
        sort_entries(&mut kept);
        SmoothedDistribution { kept, remainder_mass: 0.0, remainder_count: d.unlisted() }
    }
}

/// Remove configurations below `epsilon` and pool their mass.
pub fn smooth(dist: &Distribution, epsilon: f64) -> Result<SmoothedDistribution> {
    let (mut kept, dropped): (Vec<_>, Vec<_>) = dist.entries().iter().cloned().partition(|(_, p)| *p >= epsilon);
    if kept.is_empty() {
        return Err(CorefError::EverythingPruned { epsilon });
    }
    sort_entries(&mut kept);
    Ok(SmoothedDistribution {
        kept,
        remainder_mass: dropped.iter().map(|(_, p)| p).sum(),
        remainder_count: dropped.len() as u64 + dist.unlisted(),
    })
}
