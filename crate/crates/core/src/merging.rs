//! Configuration probabilities from the sequence of merge decisions a
//! template merger makes while building them.
//!
//! Templates are visited in text order. Each new template is offered to the
//! existing cells, most recently extended cell first, until one accepts it;
//! if none does it opens a new cell. Whether a cell accepts is judged by the
//! pairwise probability between the new template and the cell's most recent
//! member.

use crate::error::{CorefError, Result};
use crate::pairs::{PairMatrix, PairTable};
use crate::partition::{enumerate_scored, IncrementalScore, PruneConfig};
use crate::set::{Configuration, CoreferenceSet, Distribution};

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub new_template: String,
    /// Members of the queried cell in text order.
    pub candidate_cell: Vec<String>,
    /// The cell member with the latest position.
    pub queried_member: String,
    pub answer: bool,
    /// Factor contributed to the configuration score, once pair probabilities are known.
    pub probability_used: Option<f64>,
}

/// One query on positions: `t` asks the cell whose members are `cell`.
#[derive(Debug, Clone)]
struct Query {
    t: usize,
    cell: Vec<usize>,
    answer: bool,
}

impl Query {
    fn queried(&self) -> usize {
        *self.cell.last().expect("cells are non-empty")
    }

    /// Factor for this decision: the yes branch is unavailable if any member of
    /// the cell is incompatible with `t`, and an incompatible queried member
    /// makes "no" certain.
    fn factor(&self, set: &CoreferenceSet, pairs: &PairMatrix) -> f64 {
        let q = self.queried();
        if !set.compatible(q, self.t) {
            return if self.answer { 0.0 } else { 1.0 };
        }
        let p = pairs.get(q, self.t);
        if self.answer {
            if self.cell.iter().all(|&m| set.compatible(m, self.t)) {
                p
            } else {
                0.0
            }
        } else {
            1.0 - p
        }
    }
}

/// Queries made when template `t` is placed into cell `label`, given the
/// labels of all earlier templates.
fn queries_for(labels: &[usize], t: usize, label: usize) -> Vec<Query> {
    let n_cells = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut cells: Vec<(usize, Vec<usize>)> =
        (0..n_cells).map(|l| (l, (0..t).filter(|&i| labels[i] == l).collect())).collect();
    // most recent member first; positions are distinct so the order is total
    cells.sort_by_key(|(_, members)| std::cmp::Reverse(*members.last().expect("labels are restricted-growth")));
    let mut out = Vec::new();
    for (l, members) in cells {
        let yes = l == label;
        out.push(Query { t, cell: members, answer: yes });
        if yes {
            break;
        }
    }
    out
}

fn all_queries(config: &Configuration) -> Vec<Query> {
    let labels = config.labels();
    (0..labels.len()).flat_map(|t| queries_for(&labels[..t], t, labels[t])).collect()
}

fn to_decision(set: &CoreferenceSet, q: &Query, probability_used: Option<f64>) -> Decision {
    Decision {
        new_template: set.template(q.t).id.clone(),
        candidate_cell: q.cell.iter().map(|&i| set.template(i).id.clone()).collect(),
        queried_member: set.template(q.queried()).id.clone(),
        answer: q.answer,
        probability_used,
    }
}

/// The merge decisions that derive `config`.
pub fn decision_path(config: &Configuration, set: &CoreferenceSet) -> Result<Vec<Decision>> {
    config.validate(set)?;
    Ok(all_queries(config).iter().map(|q| to_decision(set, q, None)).collect())
}

/// The decisions that derive `config`, each with the factor it contributes.
pub fn scored_decision_path(config: &Configuration, set: &CoreferenceSet, pairs: &PairTable) -> Result<Vec<Decision>> {
    config.validate(set)?;
    let matrix = pairs.matrix(set)?;
    Ok(all_queries(config).iter().map(|q| to_decision(set, q, Some(q.factor(set, &matrix)))).collect())
}

struct DecisionScore<'a> {
    set: &'a CoreferenceSet,
    pairs: &'a PairMatrix,
}

impl IncrementalScore for DecisionScore<'_> {
    fn log_factor(&self, labels: &[usize], t: usize, label: usize) -> f64 {
        queries_for(labels, t, label).iter().map(|q| q.factor(self.set, self.pairs).ln()).sum()
    }
}

/// Every valid configuration with its product of decision factors, before
/// normalization.
pub fn unnormalized_scores(pairs: &PairTable, set: &CoreferenceSet) -> Result<Vec<(Configuration, f64)>> {
    let matrix = pairs.matrix(set)?;
    let scorer = DecisionScore { set, pairs: &matrix };
    let (scored, _) = enumerate_scored(set, &scorer, &PruneConfig::default())?;
    Ok(scored.into_iter().map(|(c, s)| (c, s.exp())).collect())
}

pub fn merging_distribution(pairs: &PairTable, set: &CoreferenceSet) -> Result<Distribution> {
    merging_distribution_pruned(pairs, set, &PruneConfig::default())
}

pub fn merging_distribution_pruned(
    pairs: &PairTable,
    set: &CoreferenceSet,
    prune: &PruneConfig,
) -> Result<Distribution> {
    let matrix = pairs.matrix(set)?;
    let scorer = DecisionScore { set, pairs: &matrix };
    let (scored, abandoned) = enumerate_scored(set, &scorer, prune)?;
    Distribution::from_log_weights(set, scored, abandoned).map_err(|e| match e {
        CorefError::AllZero { set: s, .. } => {
            CorefError::AllZero { set: s, pairs: crate::evidential::certain_pairs(set, &matrix) }
        }
        other => other,
    })
}

/// The (S, T, coreferent) pairs a merger queries while deriving `gold`.
/// Queries whose members are incompatible carry no probability and are skipped.
pub fn gold_decision_pairs(set: &CoreferenceSet, gold: &Configuration) -> Result<Vec<(String, String, bool)>> {
    gold.validate(set)?;
    Ok(all_queries(gold)
        .iter()
        .filter(|q| set.compatible(q.queried(), q.t))
        .map(|q| (set.template(q.queried()).id.clone(), set.template(q.t).id.clone(), q.answer))
        .collect())
}
