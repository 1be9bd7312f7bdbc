//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS or FAIL line.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coref_core::baselines::{greedy_configuration, greedy_distribution, uniform_distribution, PkTable};
use coref_core::config::{InferenceModel, RunConfig};
use coref_core::evidential::{combine_pairs, evidential_distribution};
use coref_core::features::{
    build_dataset, AntecedentStatus, Characteristics, DistanceClass, DistanceConfig, EmpiricalDataset, Feature,
    Predicate,
};
use coref_core::fixtures::{kinston_pairs, kinston_set};
use coref_core::maxent::{
    constraint_residuals, data_cross_entropy, iis_fit, select_and_train, MaxentModel, TrainConfig,
};
use coref_core::merging::{merging_distribution, unnormalized_scores};
use coref_core::pairs::PairTable;
use coref_core::partition::{count_configurations, enumerate_configurations, set_configurations, smooth};
use coref_core::pipeline::{self, PairSource};
use coref_core::set::{Configuration, CoreferenceSet, Distribution};
use coref_core::synth::{generate_synthetic_corpus, SynthConfig};
use coref_core::template::{ContentRelation, Exclusions, RefForm, Template};

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> std::result::Result<(), String> {
    check((got - want).abs() <= tol, format!("{name}: got {got:.6}, want {want} +/- {tol}"))
}

fn open_set(id: &str, n: usize, exclusions: &[(usize, usize)]) -> CoreferenceSet {
    let t = (0..n).map(|i| Template::new(format!("T{i}"), i as u64 * 10)).collect();
    let ex: Vec<(String, String)> = exclusions.iter().map(|&(a, b)| (format!("T{a}"), format!("T{b}"))).collect();
    CoreferenceSet::new(id, t, ex).expect("valid set")
}

fn random_set(rng: &mut ChaCha8Rng, id: &str, n: usize, exclusion_rate: f64) -> CoreferenceSet {
    let mut ex = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(exclusion_rate) {
                ex.push((i, j));
            }
        }
    }
    open_set(id, n, &ex)
}

fn random_pairs(rng: &mut ChaCha8Rng, set: &CoreferenceSet) -> PairTable {
    let mut table = PairTable::new();
    for (i, j) in set.compatible_pairs() {
        table.insert(&set.template(i).id, &set.template(j).id, rng.gen_range(0.01..0.99));
    }
    table
}

/// Every partition of `0..n`, built by inserting each element into an existing
/// block or a new one.
fn all_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut parts: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for e in 0..n {
        let mut next = Vec::new();
        for p in &parts {
            for b in 0..p.len() {
                let mut q = p.clone();
                q[b].push(e);
                next.push(q);
            }
            let mut q = p.clone();
            q.push(vec![e]);
            next.push(q);
        }
        parts = next;
    }
    parts
}

fn canonical(mut cells: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for c in &mut cells {
        c.sort_unstable();
    }
    cells.sort();
    cells
}

/// Product of p over co-celled pairs and 1 - p over split pairs, normalized.
fn product_oracle(set: &CoreferenceSet, pairs: &PairTable, configs: &[Configuration]) -> Vec<f64> {
    let raw: Vec<f64> = configs
        .iter()
        .map(|c| {
            set.compatible_pairs()
                .iter()
                .map(|&(i, j)| {
                    let p = pairs.get(&set.template(i).id, &set.template(j).id).unwrap();
                    if c.same_cell(i, j) {
                        p
                    } else {
                        1.0 - p
                    }
                })
                .product()
        })
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

fn kinston_evidential() -> Outcome {
    let start = Instant::now();
    let set = kinston_set();
    let pairs = kinston_pairs();
    let dist = evidential_distribution(&pairs, &set).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let configs: Vec<_> = dist.entries().iter().map(|(c, _)| c.clone()).collect();
    let oracle = product_oracle(&set, &pairs, &configs);
    // printed values for configurations 1, 3, 4, 6 and 7; 2 and 5 are checked
    // against the product oracle because the printed pair is transposed
    let printed = [Some(0.383), None, Some(0.123), Some(0.062), None, Some(0.061), Some(0.061)];
    check(dist.len() == 7, format!("{} configurations", dist.len()))?;
    for (k, ((_, p), want)) in dist.entries().iter().zip(printed).enumerate() {
        let want = want.unwrap_or(oracle[k]);
        close(&format!("configuration {}", k + 1), *p, want, 0.0015)?;
    }
    close("configuration 2", dist.entries()[1].1, 0.126, 0.0015)?;
    close("configuration 5", dist.entries()[4].1, 0.184, 0.0015)?;
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    let shown: Vec<String> = dist.entries().iter().map(|(_, p)| format!("{p:.3}")).collect();
    Ok(format!("[{}] in {elapsed:?}", shown.join(", ")))
}

fn kinston_merging() -> Outcome {
    let start = Instant::now();
    let dist = merging_distribution(&kinston_pairs(), &kinston_set()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let want = [0.250, 0.338, 0.083, 0.020, 0.123, 0.166, 0.020];
    check(dist.len() == 7, format!("{} configurations", dist.len()))?;
    for (k, ((_, p), w)) in dist.entries().iter().zip(want).enumerate() {
        close(&format!("configuration {}", k + 1), *p, w, 0.0015)?;
    }
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    let shown: Vec<String> = dist.entries().iter().map(|(_, p)| format!("{p:.3}")).collect();
    Ok(format!("[{}] in {elapsed:?}", shown.join(", ")))
}

fn dempster_matches_product() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = rng.gen_range(2..=5);
        let set = random_set(&mut rng, &format!("d{k}"), n, 0.2);
        let pairs = random_pairs(&mut rng, &set);
        let configs = set_configurations(&set, None).map_err(|e| e.to_string())?;
        let (mass, _) = combine_pairs(&pairs, &set, &configs).map_err(|e| e.to_string())?;
        let dist = evidential_distribution(&pairs, &set).map_err(|e| e.to_string())?;
        let oracle = product_oracle(&set, &pairs, &configs);
        for ((m, (_, p)), o) in mass.singleton_masses().iter().zip(dist.entries()).zip(&oracle) {
            worst = worst.max((m - p).abs()).max((m - o).abs());
        }
    }
    check(worst <= 1e-9, format!("largest difference {worst:e}"))?;
    Ok(format!("200 instances, largest difference {worst:.1e}"))
}

fn merging_normalizes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = rng.gen_range(2..=6);
        let set = open_set(&format!("m{k}"), n, &[]);
        let pairs = random_pairs(&mut rng, &set);
        let scores = unnormalized_scores(&pairs, &set).map_err(|e| e.to_string())?;
        let total: f64 = scores.iter().map(|(_, s)| s).sum();
        worst = worst.max((total - 1.0).abs());
    }
    check(worst <= 1e-9, format!("largest deviation {worst:e}"))?;
    Ok(format!("200 instances, largest deviation {worst:.1e}"))
}

fn enumeration_is_exact() -> Outcome {
    let ids = ["A", "B", "C", "D"];
    let counts: Vec<u64> = [vec![], vec![("A", "C")], vec![("A", "C"), ("B", "C")]]
        .iter()
        .map(|ex| count_configurations(&ids, &ex.iter().copied().collect::<Exclusions>()))
        .collect();
    check(counts == [15, 10, 7], format!("counts {counts:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = 0;
    for n in 1..=8 {
        let partitions = all_partitions(n);
        let names: Vec<String> = (0..n).map(|i| format!("T{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        for _ in 0..50 {
            let rate = rng.gen_range(0.0..0.5);
            let mut ex = Exclusions::new();
            let mut banned = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(rate) {
                        ex.insert(&names[i], &names[j]);
                        banned.push((i, j));
                    }
                }
            }
            let want: BTreeSet<_> = partitions
                .iter()
                .filter(|p| p.iter().all(|cell| banned.iter().all(|(i, j)| !(cell.contains(i) && cell.contains(j)))))
                .map(|p| canonical(p.clone()))
                .collect();
            let got_list = enumerate_configurations(&refs, &ex, None).map_err(|e| e.to_string())?;
            let got: BTreeSet<_> = got_list.iter().map(|c| canonical(c.cells().to_vec())).collect();
            check(got_list.len() == got.len(), format!("n={n}: duplicate configurations"))?;
            check(got == want, format!("n={n}: {} listed, {} valid", got.len(), want.len()))?;
            check(count_configurations(&refs, &ex) == want.len() as u64, format!("n={n}: count differs"))?;
            cases += 1;
        }
    }
    Ok(format!("counts 15/10/7, {cases} random exclusion sets with n <= 8 match brute force"))
}

fn random_characteristics(rng: &mut ChaCha8Rng) -> Characteristics {
    Characteristics {
        content_relation: ContentRelation::ALL[rng.gen_range(0..4)],
        shared_ge2: rng.gen_bool(0.5),
        name_match: rng.gen_bool(0.3),
        ref_form: RefForm::ALL[rng.gen_range(0..3)],
        antecedent_status: AntecedentStatus::ALL[rng.gen_range(0..4)],
        distance_class: DistanceClass::ALL[rng.gen_range(0..5)],
    }
}

fn maxent_fit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut datasets = Vec::new();
    for _ in 0..20 {
        let mut data = EmpiricalDataset::new();
        let bias: f64 = rng.gen_range(0.2..0.8);
        for _ in 0..rng.gen_range(20..80) {
            let x = random_characteristics(&mut rng);
            let y = rng.gen_bool(if x.shared_ge2 { bias } else { 1.0 - bias });
            data.add(x, y, rng.gen_range(1..4));
        }
        datasets.push(data);
    }
    let synth = SynthConfig { sets: 120, noise: 0.2, ..SynthConfig::default() };
    for seed in 0..3 {
        let (corpus, keys) = generate_synthetic_corpus(&synth, seed).map_err(|e| e.to_string())?;
        let cfg = RunConfig::default();
        datasets
            .push(build_dataset(&corpus, &keys, cfg.dataset_mode, &cfg.distance_config()).map_err(|e| e.to_string())?);
    }
    for data in &datasets {
        let trained =
            select_and_train(data, DistanceConfig::default(), &TrainConfig::default()).map_err(|e| e.to_string())?;
        for r in constraint_residuals(&trained.model, data) {
            worst = worst.max(r);
        }
    }
    check(worst <= 1e-6, format!("largest residual {worst:e}"))?;

    // a single feature firing on 1000 definite pairs, 671 of them coreferent
    let x = |form| Characteristics {
        content_relation: ContentRelation::Identical,
        shared_ge2: true,
        name_match: false,
        ref_form: form,
        antecedent_status: AntecedentStatus::NotApplicable,
        distance_class: DistanceClass::Close,
    };
    let mut data = EmpiricalDataset::new();
    data.add(x(RefForm::Definite), true, 671);
    data.add(x(RefForm::Definite), false, 329);
    let f = Feature::new(Predicate::RefForm(RefForm::Definite), true);
    let mut model = MaxentModel::new(vec![f], vec![0.0], DistanceConfig::default()).map_err(|e| e.to_string())?;
    iis_fit(&mut model, &data, 1e-9, 100_000).map_err(|e| e.to_string())?;
    let lambda = model.lambdas()[0];
    close("lambda", lambda, (0.671f64 / 0.329).ln(), 1e-4)?;
    close("p(1|definite)", model.predict(&x(RefForm::Definite)), 0.671, 1e-6)?;
    let h = data_cross_entropy(&model, &data);
    close("cross-entropy", h, 0.9149, 1e-3)?;
    Ok(format!(
        "{} datasets, largest residual {worst:.1e}; lambda {lambda:.5}, cross-entropy {h:.5} bits",
        datasets.len()
    ))
}

fn greedy_baseline() -> Outcome {
    let set = kinston_set();
    let g = greedy_configuration(&set);
    let shown = g.display(&set).to_string();
    check(shown == "(A B) (C D)", format!("greedy picked {shown}"))?;
    let ten = open_set("ten", 4, &[(0, 3)]);
    let pk = PkTable::new(0.571, 0.652, 0.344).map_err(|e| e.to_string())?;
    let dist = greedy_distribution(&ten, &pk).map_err(|e| e.to_string())?;
    check(dist.len() == 10, format!("{} configurations", dist.len()))?;
    let pick = greedy_configuration(&ten);
    close("greedy pick", dist.probability(&pick), 0.344, 1e-4)?;
    for (c, p) in dist.entries() {
        if *c != pick {
            close("other configuration", *p, 0.0729, 1e-4)?;
        }
    }
    Ok(format!("Kinston {shown}; 0.344 and 9 x {:.4}", (1.0 - 0.344) / 9.0))
}

struct EndToEnd {
    summary: String,
    dists: Vec<Distribution>,
}

fn end_to_end() -> std::result::Result<EndToEnd, String> {
    let start = Instant::now();
    let cfg = RunConfig {
        seed: 3,
        synth: SynthConfig { sets: 300, fidelity: 0.8, noise: 0.2, ..SynthConfig::default() },
        ..RunConfig::default()
    };
    let (corpus, keys) = generate_synthetic_corpus(&cfg.synth, cfg.seed).map_err(|e| e.to_string())?;
    let (train_sets, test_sets) = pipeline::split_corpus(&corpus, cfg.train_fraction, cfg.seed);
    let trained = pipeline::train(&train_sets, &keys, &cfg).map_err(|e| e.to_string())?;
    let source = PairSource::Model(&trained.saved);
    let results = pipeline::evaluate_models(&test_sets, &keys, &InferenceModel::ALL, Some(source), None, &cfg)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let bits = |m: InferenceModel| results.iter().find(|(x, _)| *x == m).map(|(_, r)| r.avg_bits).unwrap();
    let (u, g, md, ev) = (
        bits(InferenceModel::Uniform),
        bits(InferenceModel::Greedy),
        bits(InferenceModel::Merging),
        bits(InferenceModel::Evidential),
    );
    let train_ce = trained.saved.training_cross_entropy.unwrap_or(f64::INFINITY);
    let held_out =
        build_dataset(&test_sets, &keys, cfg.dataset_mode, &cfg.distance_config()).map_err(|e| e.to_string())?;
    let test_ce = data_cross_entropy(&trained.saved.model, &held_out);
    let summary = format!(
        "{} sets, {} held out: evidential {ev:.3}, merging {md:.3}, greedy {g:.3}, uniform {u:.3} bits; \
         pairwise {train_ce:.3} train / {test_ce:.3} held out; {elapsed:?}",
        corpus.len(),
        test_sets.len()
    );
    check(corpus.len() >= 200, format!("only {} sets", corpus.len()))?;
    check(ev < g && md < g, format!("trained models not below greedy: {summary}"))?;
    check(g < u, format!("greedy not below uniform: {summary}"))?;
    check(train_ce < 1.0 && test_ce < 1.0, format!("pairwise cross-entropy too high: {summary}"))?;
    check(elapsed < Duration::from_secs(60), format!("too slow: {summary}"))?;

    let mut dists = Vec::new();
    for set in &test_sets {
        let pairs = source.pairs_for(set).map_err(|e| e.to_string())?;
        for m in InferenceModel::ALL {
            let pk = trained.saved.pk.as_ref();
            dists.push(pipeline::infer_set(set, m, Some(&pairs), pk, &cfg.prune).map_err(|e| e.to_string())?);
        }
    }
    Ok(EndToEnd { summary, dists })
}

fn smoothing_conserves(evaluated: &[Distribution]) -> Outcome {
    let set = kinston_set();
    let mut dists = evaluated.to_vec();
    dists.push(evidential_distribution(&kinston_pairs(), &set).map_err(|e| e.to_string())?);
    dists.push(merging_distribution(&kinston_pairs(), &set).map_err(|e| e.to_string())?);
    dists.push(uniform_distribution(&set).map_err(|e| e.to_string())?);
    let mut worst: f64 = 0.0;
    for d in &dists {
        for eps in [0.0, 0.01, 0.1] {
            let s = pipeline::smooth_lowering(d, eps);
            worst = worst.max((s.kept_mass() + s.remainder_mass - 1.0).abs());
            let listed = s.kept.len() as u64 + s.remainder_count;
            check(listed == d.len() as u64 + d.unlisted(), "configurations lost while smoothing")?;
        }
    }
    check(worst <= 1e-9, format!("mass off by {worst:e}"))?;
    let k = smooth(&dists[dists.len() - 3], 0.1).map_err(|e| e.to_string())?;
    close("remainder", k.remainder_mass, 0.184, 5e-4)?;
    check(k.remainder_count == 3, format!("remainder over {}", k.remainder_count))?;
    Ok(format!(
        "{} distributions x 3 thresholds, mass off by at most {worst:.1e}; Kinston remainder {:.4} over 3",
        dists.len(),
        k.remainder_mass
    ))
}

fn run_cli(dir: &Path, args: &[&str]) -> std::result::Result<(), String> {
    let out =
        Command::new(env!("CARGO_BIN_EXE_coref")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    check(out.status.success(), format!("coref {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
}

fn determinism() -> Outcome {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = dir.path();
        run_cli(
            d,
            &[
                "synth",
                "--seed",
                "11",
                "--sets",
                "80",
                "--noise",
                "0.2",
                "--out-corpus",
                "c.jsonl",
                "--out-keys",
                "k.jsonl",
            ],
        )?;
        run_cli(d, &["train", "--corpus", "c.jsonl", "--keys", "k.jsonl", "--out", "m.json"])?;
        run_cli(
            d,
            &["infer", "--corpus", "c.jsonl", "--model-file", "m.json", "--keys", "k.jsonl", "--out", "r.json"],
        )?;
        run_cli(
            d,
            &["eval", "--seed", "11", "--corpus", "c.jsonl", "--keys", "k.jsonl", "--folds", "3", "--out", "e.json"],
        )?;
        let files: Vec<Vec<u8>> = ["c.jsonl", "k.jsonl", "m.json", "r.json", "e.json"]
            .iter()
            .map(|f| std::fs::read(d.join(f)).map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        outputs.push(files);
    }
    let sizes: Vec<usize> = outputs[0].iter().map(Vec::len).collect();
    check(outputs[0] == outputs[1], "outputs differ between identical runs")?;
    check(sizes.iter().all(|s| *s > 0), "empty output file")?;
    Ok(format!("corpus, keys, model, inference and evaluation files identical ({sizes:?} bytes)"))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
        Err(why) => {
            failed += 1;
            println!("FAIL {n:>2} {name}: {why}");
        }
    };
    report(1, "evidential distribution on the depot example", kinston_evidential());
    report(2, "merging-decision distribution on the depot example", kinston_merging());
    report(3, "Dempster combination equals the normalized product", dempster_matches_product());
    report(4, "merging-decision scores sum to one without exclusions", merging_normalizes());
    report(5, "constrained partition enumeration", enumeration_is_exact());
    report(6, "IIS constraints and the one-feature closed form", maxent_fit());
    report(7, "greedy baseline", greedy_baseline());
    let e2e = end_to_end();
    let dists = e2e.as_ref().map(|e| e.dists.clone()).unwrap_or_default();
    report(8, "synthetic end-to-end ordering", e2e.map(|e| e.summary));
    report(9, "smoothing conserves mass", smoothing_conserves(&dists));
    report(10, "determinism", determinism());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
