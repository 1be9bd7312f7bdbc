//! Distribution and evaluation reports, as JSON and as plain-text tables.
//!
//! Infinite cross-entropies are written as `null` in JSON; the affected sets
//! are also listed under `hard_failures`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::InferenceModel;
use crate::error::Result;
use crate::eval::{set_cross_entropy, Report};
use crate::features::Keys;
use crate::partition::SmoothedDistribution;
use crate::set::CoreferenceSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationEntry {
    pub cells: Vec<Vec<String>>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetDistribution {
    pub set: String,
    pub configurations: Vec<ConfigurationEntry>,
    pub remainder_mass: f64,
    pub remainder_count: u64,
    pub remainder_each: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_bits: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top1: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sets: usize,
    pub avg_bits: f64,
    pub top1_count: usize,
    pub hard_failures: Vec<String>,
}

impl From<&Report> for Summary {
    fn from(r: &Report) -> Self {
        Summary {
            sets: r.sets(),
            avg_bits: r.avg_bits,
            top1_count: r.top1_count,
            hard_failures: r.hard_failures.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub model: InferenceModel,
    pub epsilon: f64,
    pub sets: Vec<SetDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

impl InferenceReport {
    /// Per-set distributions, scored against `keys` when given.
    pub fn build(
        corpus: &[CoreferenceSet],
        dists: &[SmoothedDistribution],
        model: InferenceModel,
        epsilon: f64,
        keys: Option<&Keys>,
    ) -> Result<Self> {
        let summary = match keys {
            Some(k) => Some(Summary::from(&crate::eval::corpus_evaluate(corpus.iter().zip(dists), k)?)),
            None => None,
        };
        let sets = corpus
            .iter()
            .zip(dists)
            .map(|(set, d)| {
                let gold = keys.and_then(|k| k.get(set.id()));
                let gold_bits = gold.map(|g| set_cross_entropy(d, set, g)).transpose()?;
                Ok(SetDistribution {
                    set: set.id().to_string(),
                    configurations: d
                        .kept
                        .iter()
                        .map(|(c, p)| ConfigurationEntry { cells: c.to_ids(set), probability: *p })
                        .collect(),
                    remainder_mass: d.remainder_mass,
                    remainder_count: d.remainder_count,
                    remainder_each: d.remainder_each(),
                    gold_bits,
                    top1: gold.map(|g| d.unique_argmax() == Some(g)),
                })
            })
            .collect::<Result<_>>()?;
        Ok(InferenceReport { model, epsilon, sets, summary })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sets {
            let _ = writeln!(out, "set {} ({})", s.set, self.model);
            for c in &s.configurations {
                let _ = writeln!(out, "  {:.4}  {}", c.probability, cells_text(&c.cells));
            }
            if s.remainder_count > 0 {
                let _ = writeln!(
                    out,
                    "  remainder {:.4} over {} ({:.4} each)",
                    s.remainder_mass, s.remainder_count, s.remainder_each
                );
            }
            if let Some(bits) = s.gold_bits {
                let _ = writeln!(out, "  key: {bits:.3} bits{}", if s.top1 == Some(true) { ", top" } else { "" });
            }
        }
        if let Some(sum) = &self.summary {
            let _ = writeln!(
                out,
                "{}: {:.3} bits average over {} sets, key on top in {}",
                self.model, sum.avg_bits, sum.sets, sum.top1_count
            );
        }
        out
    }
}

fn cells_text(cells: &[Vec<String>]) -> String {
    cells.iter().map(|c| format!("({})", c.join(" "))).collect::<Vec<_>>().join(" ")
}

fn model_label(m: InferenceModel) -> &'static str {
    match m {
        InferenceModel::Uniform => "Uniform",
        InferenceModel::Greedy => "Greedy",
        InferenceModel::Merging => "Merging Decision",
        InferenceModel::Evidential => "Evidential",
    }
}

/// Average cross-entropy and top-1 counts per model and test fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub epsilon: f64,
    pub rows: Vec<EvalRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: InferenceModel,
    pub folds: Vec<Summary>,
}

impl EvalTable {
    /// `folds[k]` holds each model's report on test fold `k`.
    pub fn new(folds: &[Vec<(InferenceModel, Report)>], epsilon: f64) -> Self {
        let mut models: Vec<InferenceModel> = Vec::new();
        for (m, _) in folds.iter().flatten() {
            if !models.contains(m) {
                models.push(*m);
            }
        }
        let rows = models
            .into_iter()
            .map(|m| EvalRow {
                model: m,
                folds: folds
                    .iter()
                    .filter_map(|f| f.iter().find(|(x, _)| *x == m).map(|(_, r)| Summary::from(r)))
                    .collect(),
            })
            .collect();
        EvalTable { epsilon, rows }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let n_folds = self.rows.iter().map(|r| r.folds.len()).max().unwrap_or(0);
        let mut out = String::new();
        let _ = write!(out, "{:<18}", "Model");
        for k in 0..n_folds {
            let _ = write!(out, "{:>16}", format!("Test {}", k + 1));
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<18}", model_label(row.model));
            for f in &row.folds {
                let _ = write!(out, "{:>16}", format!("{:.2} ({})", f.avg_bits, f.top1_count));
            }
            out.push('\n');
        }
        out
    }
}
