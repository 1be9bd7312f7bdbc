//! Evidential combination of pairwise probabilities.
//!
//! Each pairwise probability becomes a mass function over two subsets of the
//! configuration space (pair co-celled / pair apart). Combining all of them
//! with Dempster's rule leaves mass only on single configurations, and that
//! mass equals the normalized product of the pairwise factors, which is what
//! [`evidential_distribution`] computes directly.

use std::collections::BTreeMap;

use crate::error::{CorefError, Result};
use crate::pairs::{PairMatrix, PairTable};
use crate::partition::{enumerate_scored, IncrementalScore, PruneConfig};
use crate::set::{Configuration, CoreferenceSet, Distribution, MASS_TOLERANCE};

/// A subset of an enumerated configuration list, as a bitset over indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConfigSubset {
    words: Vec<u64>,
}

impl ConfigSubset {
    pub fn empty(universe: usize) -> Self {
        ConfigSubset { words: vec![0; universe.div_ceil(64)] }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = Self::empty(universe);
        for i in 0..universe {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(universe);
        for i in indices {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn intersect(&self, other: &ConfigSubset) -> ConfigSubset {
        ConfigSubset { words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.words.len() * 64).filter(|&i| self.contains(i))
    }
}

/// Belief mass over subsets of a fixed configuration list.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    universe: usize,
    focal: BTreeMap<ConfigSubset, f64>,
}

impl MassFunction {
    pub fn new(universe: usize, focal: impl IntoIterator<Item = (ConfigSubset, f64)>) -> Result<Self> {
        let mut map: BTreeMap<ConfigSubset, f64> = BTreeMap::new();
        for (set, m) in focal {
            if !(0.0..=1.0 + MASS_TOLERANCE).contains(&m) {
                return Err(CorefError::InvalidProbability(m));
            }
            if m == 0.0 {
                continue;
            }
            if set.is_empty() {
                return Err(CorefError::InvalidDistribution("mass on the empty set".into()));
            }
            *map.entry(set).or_default() += m;
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(CorefError::InvalidDistribution(format!("mass sums to {total}")));
        }
        Ok(MassFunction { universe, focal: map })
    }

    /// All mass on the whole configuration space.
    pub fn vacuous(universe: usize) -> Self {
        MassFunction { universe, focal: [(ConfigSubset::full(universe), 1.0)].into_iter().collect() }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn focal(&self) -> impl Iterator<Item = (&ConfigSubset, f64)> {
        self.focal.iter().map(|(s, m)| (s, *m))
    }

    pub fn mass(&self, subset: &ConfigSubset) -> f64 {
        self.focal.get(subset).copied().unwrap_or(0.0)
    }

    /// Mass on each single configuration.
    pub fn singleton_masses(&self) -> Vec<f64> {
        (0..self.universe).map(|i| self.mass(&ConfigSubset::from_indices(self.universe, [i]))).collect()
    }
}

/// Mass `p` on the configurations co-celling S and T, `1 - p` on the rest.
pub fn pair_mass(set: &CoreferenceSet, s: &str, t: &str, p: f64, configs: &[Configuration]) -> Result<MassFunction> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CorefError::InvalidProbability(p));
    }
    if configs.is_empty() {
        return Err(CorefError::InvalidDistribution("empty configuration list".into()));
    }
    let unknown = |id: &str| CorefError::validation(set.id(), format!("unknown template {id}"));
    let si = set.index_of(s).ok_or_else(|| unknown(s))?;
    let ti = set.index_of(t).ok_or_else(|| unknown(t))?;
    let n = configs.len();
    let together = ConfigSubset::from_indices(n, (0..n).filter(|&k| configs[k].same_cell(si, ti)));
    let apart = ConfigSubset::from_indices(n, (0..n).filter(|&k| !configs[k].same_cell(si, ti)));
    let infeasible = || CorefError::InfeasibleBelief { s: s.to_string(), t: t.to_string(), p };
    if together.is_empty() && p > 0.0 {
        return Err(infeasible());
    }
    if apart.is_empty() && p < 1.0 {
        return Err(infeasible());
    }
    MassFunction::new(n, [(together, p), (apart, 1.0 - p)])
}

/// Dempster's rule of combination. Returns the combined mass and the conflict.
pub fn dempster_combine(m1: &MassFunction, m2: &MassFunction) -> Result<(MassFunction, f64)> {
    if m1.universe != m2.universe {
        return Err(CorefError::InvalidDistribution("mass functions over different universes".into()));
    }
    let mut combined: BTreeMap<ConfigSubset, f64> = BTreeMap::new();
    let mut conflict = 0.0;
    let mut agreement = 0.0;
    for (a, ma) in &m1.focal {
        for (b, mb) in &m2.focal {
            let w = ma * mb;
            let meet = a.intersect(b);
            if meet.is_empty() {
                conflict += w;
            } else {
                agreement += w;
                *combined.entry(meet).or_default() += w;
            }
        }
    }
    if agreement <= 0.0 {
        return Err(CorefError::TotalConflict);
    }
    for m in combined.values_mut() {
        *m /= agreement;
    }
    Ok((MassFunction { universe: m1.universe, focal: combined }, conflict))
}

/// Combine every compatible pair's mass function in turn. Returns the final
/// mass and the conflict of each combination step.
pub fn combine_pairs(
    pairs: &PairTable,
    set: &CoreferenceSet,
    configs: &[Configuration],
) -> Result<(MassFunction, Vec<f64>)> {
    let matrix = pairs.matrix(set)?;
    let mut acc = MassFunction::vacuous(configs.len());
    let mut conflicts = Vec::new();
    for (i, j) in set.compatible_pairs() {
        let m = pair_mass(set, &set.template(i).id, &set.template(j).id, matrix.get(i, j), configs)?;
        let (next, k) = dempster_combine(&acc, &m)?;
        acc = next;
        conflicts.push(k);
    }
    Ok((acc, conflicts))
}

struct ProductScore<'a> {
    set: &'a CoreferenceSet,
    pairs: &'a PairMatrix,
}

impl IncrementalScore for ProductScore<'_> {
    fn log_factor(&self, labels: &[usize], t: usize, label: usize) -> f64 {
        labels
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.set.compatible(i, t))
            .map(|(i, &l)| {
                let p = self.pairs.get(i, t);
                if l == label {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .sum()
    }
}

/// Normalized product of pairwise factors over the valid configurations.
pub fn evidential_distribution(pairs: &PairTable, set: &CoreferenceSet) -> Result<Distribution> {
    evidential_distribution_pruned(pairs, set, &PruneConfig::default())
}

pub fn evidential_distribution_pruned(
    pairs: &PairTable,
    set: &CoreferenceSet,
    prune: &PruneConfig,
) -> Result<Distribution> {
    let matrix = pairs.matrix(set)?;
    let scorer = ProductScore { set, pairs: &matrix };
    let (scored, abandoned) = enumerate_scored(set, &scorer, prune)?;
    Distribution::from_log_weights(set, scored, abandoned).map_err(|e| match e {
        CorefError::AllZero { set: s, .. } => CorefError::AllZero { set: s, pairs: certain_pairs(set, &matrix) },
        other => other,
    })
}

/// Compatible pairs with probability exactly 0 or 1, which can zero out scores.
pub(crate) fn certain_pairs(set: &CoreferenceSet, matrix: &PairMatrix) -> String {
    set.compatible_pairs()
        .into_iter()
        .filter(|&(i, j)| matrix.get(i, j) == 0.0 || matrix.get(i, j) == 1.0)
        .map(|(i, j)| format!("({}, {})={}", set.template(i).id, set.template(j).id, matrix.get(i, j)))
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{kinston_pairs, kinston_set};
    use crate::partition::set_configurations;
    use crate::template::Template;
    use approx::assert_abs_diff_eq;

    /// Independent product oracle: loop over configurations and pairs directly.
    fn product_oracle(pairs: &PairTable, set: &CoreferenceSet) -> Vec<f64> {
        let configs = set_configurations(set, None).unwrap();
        let scores: Vec<f64> = configs
            .iter()
            .map(|c| {
                let mut s = 1.0;
                for (a, b, p) in pairs.iter() {
                    let (i, j) = (set.index_of(a).unwrap(), set.index_of(b).unwrap());
                    s *= if c.same_cell(i, j) { p } else { 1.0 - p };
                }
                s
            })
            .collect();
        let z: f64 = scores.iter().sum();
        scores.iter().map(|s| s / z).collect()
    }

    #[test]
    fn kinston_distribution() {
        let set = kinston_set();
        let dist = evidential_distribution(&kinston_pairs(), &set).unwrap();
        dist.validate(&set).unwrap();
        let got: Vec<f64> = dist.entries().iter().map(|(_, p)| *p).collect();
        let expected = [0.383, 0.126, 0.123, 0.062, 0.184, 0.061, 0.061];
        for (g, e) in got.iter().zip(expected) {
            assert_abs_diff_eq!(*g, e, epsilon = 0.0015);
        }
        for (g, o) in got.iter().zip(product_oracle(&kinston_pairs(), &set)) {
            assert_abs_diff_eq!(*g, o, epsilon = 1e-12);
        }
    }

    #[test]
    fn coreference_of_c_and_d_is_damped() {
        let set = kinston_set();
        let dist = evidential_distribution(&kinston_pairs(), &set).unwrap();
        let (c, d) = (set.index_of("C").unwrap(), set.index_of("D").unwrap());
        let together: f64 = dist.entries().iter().filter(|(cfg, _)| cfg.same_cell(c, d)).map(|(_, p)| p).sum();
        assert_abs_diff_eq!(together, 0.187, epsilon = 5e-4);
        assert!(together < 0.504);
    }

    #[test]
    fn two_templates_reproduce_the_pair() {
        let set =
            CoreferenceSet::new("two", vec![Template::new("S", 0), Template::new("T", 10)], Vec::<(&str, &str)>::new())
                .unwrap();
        let mut pairs = PairTable::new();
        pairs.insert("S", "T", 0.37);
        let dist = evidential_distribution(&pairs, &set).unwrap();
        assert_abs_diff_eq!(dist.entries()[0].1, 0.37, epsilon = 1e-15);
        assert_abs_diff_eq!(dist.entries()[1].1, 0.63, epsilon = 1e-15);
    }

    #[test]
    fn pair_mass_over_kinston() {
        let set = kinston_set();
        let configs = set_configurations(&set, None).unwrap();
        let m = pair_mass(&set, "A", "B", 0.671, &configs).unwrap();
        assert_eq!(m.mass(&ConfigSubset::from_indices(7, [0, 1, 2])), 0.671);
        assert_abs_diff_eq!(m.mass(&ConfigSubset::from_indices(7, [3, 4, 5, 6])), 0.329, epsilon = 1e-15);

        let certain = pair_mass(&set, "A", "B", 1.0, &configs).unwrap();
        assert_eq!(certain.focal().count(), 1);

        assert!(matches!(pair_mass(&set, "A", "C", 0.2, &configs), Err(CorefError::InfeasibleBelief { .. })));
        assert!(pair_mass(&set, "A", "C", 0.0, &configs).is_ok());
    }

    #[test]
    fn even_pair_on_two_templates() {
        let set =
            CoreferenceSet::new("two", vec![Template::new("S", 0), Template::new("T", 10)], Vec::<(&str, &str)>::new())
                .unwrap();
        let configs = set_configurations(&set, None).unwrap();
        let m = pair_mass(&set, "S", "T", 0.5, &configs).unwrap();
        assert_eq!(m.singleton_masses(), vec![0.5, 0.5]);
    }

    #[test]
    fn vacuous_mass_is_neutral() {
        let set = kinston_set();
        let configs = set_configurations(&set, None).unwrap();
        let m = pair_mass(&set, "B", "D", 0.752, &configs).unwrap();
        let (out, k) = dempster_combine(&m, &MassFunction::vacuous(7)).unwrap();
        assert_eq!(k, 0.0);
        assert_eq!(out, m);
    }

    #[test]
    fn disjoint_certainties_conflict_totally() {
        let m1 = MassFunction::new(7, [(ConfigSubset::from_indices(7, [0]), 1.0)]).unwrap();
        let m2 = MassFunction::new(7, [(ConfigSubset::from_indices(7, [1]), 1.0)]).unwrap();
        assert!(matches!(dempster_combine(&m1, &m2), Err(CorefError::TotalConflict)));
    }

    #[test]
    fn iterated_combination_matches_product() {
        let set = kinston_set();
        let configs = set_configurations(&set, None).unwrap();
        let (mass, conflicts) = combine_pairs(&kinston_pairs(), &set, &configs).unwrap();
        let dist = evidential_distribution(&kinston_pairs(), &set).unwrap();
        for (m, (_, p)) in mass.singleton_masses().iter().zip(dist.entries()) {
            assert_abs_diff_eq!(*m, *p, epsilon = 1e-12);
        }
        assert!(conflicts.iter().any(|k| *k > 0.0));
        let total: f64 = mass.singleton_masses().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn combination_is_commutative() {
        let set = kinston_set();
        let configs = set_configurations(&set, None).unwrap();
        let a = pair_mass(&set, "A", "D", 0.505, &configs).unwrap();
        let b = pair_mass(&set, "C", "D", 0.504, &configs).unwrap();
        let (ab, kab) = dempster_combine(&a, &b).unwrap();
        let (ba, kba) = dempster_combine(&b, &a).unwrap();
        assert_abs_diff_eq!(kab, kba, epsilon = 1e-15);
        for (s, m) in ab.focal() {
            assert_abs_diff_eq!(m, ba.mass(s), epsilon = 1e-12);
        }
        // A-D and C-D together forces A and C into one cell
        assert_abs_diff_eq!(kab, 0.505 * 0.504, epsilon = 1e-12);
    }

    #[test]
    fn certain_contradiction_is_all_zero() {
        let set = kinston_set();
        let mut pairs = kinston_pairs();
        pairs.insert("A", "D", 1.0);
        pairs.insert("C", "D", 1.0);
        match evidential_distribution(&pairs, &set) {
            Err(CorefError::AllZero { pairs, .. }) => assert!(pairs.contains("(C, D)")),
            other => panic!("expected AllZero, got {other:?}"),
        }
    }

    #[test]
    fn permuting_ids_permutes_the_distribution() {
        let set = kinston_set();
        let renamed: Vec<Template> = set
            .templates()
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.id = format!("x{}", t.id);
                if let Some(p) = &mut t.mention.preferred_antecedent {
                    *p = format!("x{p}");
                }
                for p in &mut t.mention.possible_antecedents {
                    *p = format!("x{p}");
                }
                t
            })
            .collect();
        let other = CoreferenceSet::new("renamed", renamed, Vec::<(&str, &str)>::new()).unwrap();
        let mut pairs = PairTable::new();
        for (a, b, p) in kinston_pairs().iter() {
            pairs.insert(&format!("x{a}"), &format!("x{b}"), p);
        }
        let d1 = evidential_distribution(&kinston_pairs(), &set).unwrap();
        let d2 = evidential_distribution(&pairs, &other).unwrap();
        for ((c1, p1), (c2, p2)) in d1.entries().iter().zip(d2.entries()) {
            let renamed: Vec<Vec<String>> =
                c1.to_ids(&set).into_iter().map(|cell| cell.iter().map(|id| format!("x{id}")).collect()).collect();
            assert_eq!(renamed, c2.to_ids(&other));
            assert_eq!(p1, p2);
        }
    }
}
