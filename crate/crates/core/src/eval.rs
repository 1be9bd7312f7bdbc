//! Cross-entropy and top-1 evaluation against keyed configurations.

use serde::{Deserialize, Serialize};

use crate::error::{CorefError, Result};
use crate::features::Keys;
use crate::partition::SmoothedDistribution;
use crate::set::{Configuration, CoreferenceSet, Distribution};

/// Anything that assigns a probability to every configuration of a set.
pub trait ConfigurationProbability {
    fn probability_of(&self, config: &Configuration) -> f64;
    fn argmax(&self) -> Option<&Configuration>;
}

impl ConfigurationProbability for Distribution {
    fn probability_of(&self, config: &Configuration) -> f64 {
        self.probability(config)
    }

    fn argmax(&self) -> Option<&Configuration> {
        self.unique_argmax()
    }
}

impl ConfigurationProbability for SmoothedDistribution {
    fn probability_of(&self, config: &Configuration) -> f64 {
        self.probability(config)
    }

    fn argmax(&self) -> Option<&Configuration> {
        self.unique_argmax()
    }
}

/// `-log2 p(gold)`; infinite when the model rules the key out.
pub fn set_cross_entropy<D: ConfigurationProbability + ?Sized>(
    dist: &D,
    set: &CoreferenceSet,
    gold: &Configuration,
) -> Result<f64> {
    gold.validate(set)?;
    let p = dist.probability_of(gold);
    Ok(if p > 0.0 { -p.log2() } else { f64::INFINITY })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub set: String,
    pub bits: f64,
    pub top1: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub avg_bits: f64,
    pub top1_count: usize,
    /// Sets whose key got probability zero.
    pub hard_failures: Vec<String>,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn sets(&self) -> usize {
        self.rows.len()
    }
}

/// Score each set's distribution against its key and average per set.
pub fn corpus_evaluate<'a, D, I>(scored: I, keys: &Keys) -> Result<Report>
where
    D: ConfigurationProbability + 'a,
    I: IntoIterator<Item = (&'a CoreferenceSet, &'a D)>,
{
    let mut rows = Vec::new();
    for (set, dist) in scored {
        let gold = keys.get(set.id()).ok_or_else(|| CorefError::MissingKey(set.id().to_string()))?;
        let bits = set_cross_entropy(dist, set, gold)?;
        rows.push(Row { set: set.id().to_string(), bits, top1: dist.argmax() == Some(gold) });
    }
    let avg_bits = if rows.is_empty() { 0.0 } else { rows.iter().map(|r| r.bits).sum::<f64>() / rows.len() as f64 };
    Ok(Report {
        avg_bits,
        top1_count: rows.iter().filter(|r| r.top1).count(),
        hard_failures: rows.iter().filter(|r| r.bits.is_infinite()).map(|r| r.set.clone()).collect(),
        rows,
    })
}
