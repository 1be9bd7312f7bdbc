//! Seeded synthetic keyed corpora.
//!
//! Each set samples a gold partition into entities, then emits one template
//! per mention. With probability `fidelity` an entity has its own distinctive
//! record and a mention carries informative cues (full content on first
//! mention, a definite form and a preferred antecedent on later ones); otherwise
//! everything is drawn independently of the partition.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CorefError, Result};
use crate::features::Keys;
use crate::partition::DEFAULT_ENUMERATION_CAP;
use crate::set::{Configuration, CoreferenceSet};
use crate::template::{RefForm, Template};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub sets: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Distinct values per content slot.
    pub slot_vocabulary: usize,
    /// Probability that a mention refers back to an existing entity.
    pub coref_rate: f64,
    /// Probability that an entity or mention carries cues about the partition.
    pub fidelity: f64,
    /// Probability that an informative cue is replaced by a random one.
    pub noise: f64,
    /// Probability of an explicit exclusion between mentions of different
    /// entities, scaled by `fidelity`.
    pub exclusion_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sets: 200,
            min_size: 2,
            max_size: 6,
            slot_vocabulary: 6,
            coref_rate: 0.5,
            fidelity: 0.8,
            noise: 0.15,
            exclusion_rate: 0.05,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(CorefError::Config(m.to_string()));
        if self.min_size < 2 || self.min_size > self.max_size {
            return err("synthetic set sizes need 2 <= min_size <= max_size");
        }
        if self.max_size > DEFAULT_ENUMERATION_CAP {
            return err("synthetic max_size exceeds the enumeration cap");
        }
        if self.slot_vocabulary == 0 {
            return err("slot_vocabulary must be positive");
        }
        for (name, p) in [
            ("coref_rate", self.coref_rate),
            ("fidelity", self.fidelity),
            ("noise", self.noise),
            ("exclusion_rate", self.exclusion_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CorefError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

const CONTENT_SLOTS: [&str; 4] = ["TYPE", "LOCATION", "NUMBER", "NAME"];

type Record = Vec<(&'static str, String)>;

fn random_record(rng: &mut ChaCha8Rng, vocab: usize, tag: &str) -> Record {
    let mut r: Record = vec![("FACILITY", "DEPOT".to_string())];
    for slot in &CONTENT_SLOTS[..3] {
        r.push((slot, format!("{}{}", slot.to_lowercase(), rng.gen_range(0..vocab))));
    }
    r.push(("NAME", format!("depot {tag}")));
    r
}

fn random_form(rng: &mut ChaCha8Rng) -> RefForm {
    *RefForm::ALL.choose(rng).expect("non-empty")
}

/// Generate `cfg.sets` keyed sets; identical seeds give identical corpora.
pub fn generate_synthetic_corpus(cfg: &SynthConfig, seed: u64) -> Result<(Vec<CoreferenceSet>, Keys)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::with_capacity(cfg.sets);
    let mut keys = Keys::new();
    for k in 0..cfg.sets {
        let id = format!("syn{k:04}");
        let (set, gold) = generate_set(cfg, &id, &mut rng)?;
        keys.insert(id, gold);
        corpus.push(set);
    }
    Ok((corpus, keys))
}

fn generate_set(cfg: &SynthConfig, id: &str, rng: &mut ChaCha8Rng) -> Result<(CoreferenceSet, Configuration)> {
    let n = rng.gen_range(cfg.min_size..=cfg.max_size);
    let base = random_record(rng, cfg.slot_vocabulary, &format!("{id} main"));
    let mut records: Vec<Record> = Vec::new();
    let mut labels: Vec<usize> = Vec::with_capacity(n);
    let mut templates: Vec<Template> = Vec::with_capacity(n);
    let mut offset: u64 = rng.gen_range(0..100);

    for t in 0..n {
        let entity = if t == 0 || rng.gen::<f64>() >= cfg.coref_rate {
            let record = if rng.gen::<f64>() < cfg.fidelity {
                random_record(rng, cfg.slot_vocabulary, &format!("{id} e{}", records.len()))
            } else {
                base.clone()
            };
            records.push(record);
            records.len() - 1
        } else {
            rng.gen_range(0..records.len())
        };
        let first = !labels.contains(&entity);
        let previous = (0..t).rev().find(|&i| labels[i] == entity);
        labels.push(entity);

        let record = &records[entity];
        let informative = rng.gen::<f64>() < cfg.fidelity;
        let mut tpl = Template::new(format!("T{t}"), offset);
        offset += rng.gen_range(10..=600);

        let reveal = if informative && first {
            1.0
        } else if informative {
            0.4
        } else {
            0.6
        };
        for (slot, value) in record {
            if *slot == "FACILITY" || rng.gen::<f64>() < reveal {
                tpl = tpl.with_slot(slot, value);
            }
        }

        let mut form = if !informative {
            random_form(rng)
        } else if first {
            if rng.gen::<bool>() {
                RefForm::Indefinite
            } else {
                RefForm::Neither
            }
        } else {
            RefForm::Definite
        };
        if informative && rng.gen::<f64>() < cfg.noise {
            form = random_form(rng);
        }
        tpl = tpl.with_form(form);

        let random_earlier =
            |rng: &mut ChaCha8Rng| if t > 0 && rng.gen::<bool>() { Some(rng.gen_range(0..t)) } else { None };
        let mut preferred = if informative { previous } else { random_earlier(rng) };
        if informative && rng.gen::<f64>() < cfg.noise {
            preferred = random_earlier(rng);
        }
        if let Some(p) = preferred {
            tpl = tpl.with_preferred(&format!("T{p}"));
        }
        if t > 1 && rng.gen::<f64>() < 0.3 {
            let q = rng.gen_range(0..t);
            if Some(q) != preferred {
                tpl = tpl.with_possible(&format!("T{q}"));
            }
        }
        templates.push(tpl);
    }

    let mut exclusions = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] != labels[j] && rng.gen::<f64>() < cfg.exclusion_rate * cfg.fidelity {
                exclusions.push((format!("T{i}"), format!("T{j}")));
            }
        }
    }
    let set = CoreferenceSet::new(id, templates, exclusions)?;
    Ok((set, Configuration::from_labels(&labels)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_corpus() {
        let cfg = SynthConfig { sets: 30, ..SynthConfig::default() };
        let (a, ka) = generate_synthetic_corpus(&cfg, 7).unwrap();
        let (b, kb) = generate_synthetic_corpus(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(ka, kb);
        let (c, _) = generate_synthetic_corpus(&cfg, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn keys_are_valid_for_their_sets() {
        for fidelity in [0.0, 0.5, 1.0] {
            let cfg = SynthConfig { sets: 100, fidelity, exclusion_rate: 0.5, ..SynthConfig::default() };
            let (corpus, keys) = generate_synthetic_corpus(&cfg, 3).unwrap();
            for set in &corpus {
                assert!((cfg.min_size..=cfg.max_size).contains(&set.len()));
                keys[set.id()].validate(set).unwrap();
            }
        }
    }

    #[test]
    fn zero_fidelity_has_no_conflicts() {
        let cfg = SynthConfig { sets: 50, fidelity: 0.0, ..SynthConfig::default() };
        let (corpus, _) = generate_synthetic_corpus(&cfg, 11).unwrap();
        assert!(corpus.iter().all(|s| s.excluded_pairs().is_empty()));
    }

    #[test]
    fn bad_config_is_rejected() {
        let bad = SynthConfig { min_size: 1, ..SynthConfig::default() };
        assert!(generate_synthetic_corpus(&bad, 0).is_err());
        let bad = SynthConfig { noise: 2.0, ..SynthConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SynthConfig { max_size: 40, ..SynthConfig::default() };
        assert!(bad.validate().is_err());
    }
}
