use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coref_core::config::{InferenceModel, RunConfig};
use coref_core::features::{build_pair_instances, DatasetMode, EmpiricalDataset};
use coref_core::io::{self, SavedModel};
use coref_core::maxent::select_and_train;
use coref_core::pipeline::{self, PairSource};
use coref_core::report::{EvalTable, InferenceReport};
use coref_core::synth::generate_synthetic_corpus;
use coref_core::{baselines, CorefError, Result};

#[derive(Parser)]
#[command(name = "coref", version, about = "Probability distributions over template coreference configurations")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override the configuration file, which overrides the defaults.
#[derive(Args)]
struct Overrides {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Smoothing threshold
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Inference model: evidential, merging, greedy or uniform
    #[arg(long = "model", visible_alias = "inference", global = true)]
    inference: Option<InferenceModel>,
    /// Training pairs: all_pairs or merge_decisions
    #[arg(long, global = true)]
    mode: Option<DatasetMode>,
    /// Four increasing distance class bounds, comma separated
    #[arg(long, global = true, value_delimiter = ',', num_args = 4)]
    distance_thresholds: Option<Vec<u64>>,
    #[arg(long, global = true)]
    gain_threshold: Option<f64>,
    #[arg(long, global = true)]
    max_features: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Enable score-based pruning during enumeration
    #[arg(long, global = true)]
    prune: bool,
    #[arg(long, global = true)]
    prune_floor: Option<f64>,
    #[arg(long, global = true)]
    cap: Option<usize>,
    #[arg(long, global = true)]
    train_fraction: Option<f64>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.inference {
            cfg.inference = v;
        }
        if let Some(v) = self.mode {
            cfg.dataset_mode = v;
        }
        if let Some(v) = &self.distance_thresholds {
            cfg.distance_thresholds =
                v.as_slice().try_into().map_err(|_| CorefError::Config("need four distance thresholds".into()))?;
        }
        if let Some(v) = self.gain_threshold {
            cfg.train.gain_threshold = v;
        }
        if let Some(v) = self.max_features {
            cfg.train.max_features = v;
        }
        if let Some(v) = self.tol {
            cfg.train.tol = v;
        }
        if let Some(v) = self.max_iters {
            cfg.train.max_iters = v;
        }
        if self.prune {
            cfg.prune.enabled = true;
        }
        if let Some(v) = self.prune_floor {
            cfg.prune.floor = v;
        }
        if let Some(v) = self.cap {
            cfg.prune.cap = v;
        }
        if let Some(v) = self.train_fraction {
            cfg.train_fraction = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Dump the labelled training pairs of a keyed corpus
    Features {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select features and fit the pairwise model
    Train {
        /// Pairs written by `features`
        #[arg(long, conflicts_with_all = ["corpus", "keys"], required_unless_present = "corpus")]
        dataset: Option<PathBuf>,
        #[arg(long, requires = "keys")]
        corpus: Option<PathBuf>,
        #[arg(long, requires = "corpus")]
        keys: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report the distribution over configurations of each set
    Infer {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, conflicts_with = "pairs")]
        model_file: Option<PathBuf>,
        /// Fixed pairwise probabilities used instead of a model
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Score the distributions against these keys
        #[arg(long)]
        keys: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-entropy and top-1 counts of all four models
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        keys: PathBuf,
        /// Evaluate this model on the whole corpus instead of training
        #[arg(long)]
        model_file: Option<PathBuf>,
        /// Cross-validation folds; 1 splits once by the training fraction
        #[arg(long, default_value_t = 1)]
        folds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy or uniform distributions
    Baseline {
        #[arg(long)]
        corpus: PathBuf,
        /// Keys used to estimate the greedy confidence table
        #[arg(long)]
        keys: Option<PathBuf>,
        /// Model file carrying a greedy confidence table
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded synthetic keyed corpus
    Synth {
        #[arg(long)]
        out_corpus: PathBuf,
        #[arg(long)]
        out_keys: PathBuf,
        #[arg(long)]
        sets: Option<usize>,
        #[arg(long)]
        fidelity: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        coref_rate: Option<f64>,
        #[arg(long)]
        min_size: Option<usize>,
        #[arg(long)]
        max_size: Option<usize>,
    },
}

fn emit(out: Option<&Path>, json: &str, text: &str) -> Result<()> {
    if let Some(p) = out {
        io::write_file(p, json)?;
    }
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = cli.overrides.resolve()?;
    match cli.command {
        Command::Features { corpus, keys, out } => {
            let sets = io::load_corpus(&corpus)?;
            let keys = io::load_keys(&keys, &sets)?;
            let instances = build_pair_instances(&sets, &keys, cfg.dataset_mode, &cfg.distance_config())?;
            let text = io::dataset_to_string(&instances);
            match out {
                Some(p) => io::write_file(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Train { dataset, corpus, keys, out } => {
            let (saved, steps) = match (dataset, corpus, keys) {
                (Some(d), _, _) => {
                    let data = EmpiricalDataset::from_instances(&io::load_dataset(&d)?);
                    let trained = select_and_train(&data, cfg.distance_config(), &cfg.train)?;
                    let saved = SavedModel {
                        model: trained.model,
                        dataset_mode: cfg.dataset_mode,
                        pk: None,
                        training_cross_entropy: Some(trained.cross_entropy),
                    };
                    (saved, trained.steps)
                }
                (None, Some(c), Some(k)) => {
                    let sets = io::load_corpus(&c)?;
                    let keys = io::load_keys(&k, &sets)?;
                    let t = pipeline::train(&sets, &keys, &cfg)?;
                    (t.saved, t.steps)
                }
                _ => return Err(CorefError::Config("train needs --dataset or --corpus with --keys".into())),
            };
            for (step, (f, lambda)) in steps.iter().zip(saved.model.weights()) {
                println!("{f:<40} gain {:.5}  lambda {lambda:+.6}  cross-entropy {:.4}", step.gain, step.cross_entropy);
            }
            println!("training cross-entropy {:.4} bits", saved.training_cross_entropy.unwrap_or(1.0));
            saved.save(&out)?;
        }
        Command::Infer { corpus, model_file, pairs, keys, out } => {
            let sets = io::load_corpus(&corpus)?;
            let keys = keys.map(|k| io::load_keys(&k, &sets)).transpose()?;
            let saved = model_file.map(|m| SavedModel::load(&m)).transpose()?;
            let fixed = pairs.map(|p| io::load_pairs(&p)).transpose()?;
            let source = match (&saved, &fixed) {
                (Some(m), _) => Some(PairSource::Model(m)),
                (None, Some(f)) => Some(PairSource::Fixed(f)),
                (None, None) => None,
            };
            let dists = pipeline::infer_corpus(&sets, cfg.inference, source, None, &cfg)?;
            let report = InferenceReport::build(&sets, &dists, cfg.inference, cfg.epsilon, keys.as_ref())?;
            emit(out.as_deref(), &report.to_json(), &report.to_text())?;
        }
        Command::Eval { corpus, keys, model_file, folds, out } => {
            let sets = io::load_corpus(&corpus)?;
            let keys = io::load_keys(&keys, &sets)?;
            let results = match model_file {
                Some(m) => {
                    let saved = SavedModel::load(&m)?;
                    let models: Vec<InferenceModel> = InferenceModel::ALL
                        .into_iter()
                        .filter(|m| *m != InferenceModel::Greedy || saved.pk.is_some())
                        .collect();
                    if saved.pk.is_none() {
                        log::warn!("{} has no greedy confidence table; skipping the greedy model", m.display());
                    }
                    vec![pipeline::evaluate_models(&sets, &keys, &models, Some(PairSource::Model(&saved)), None, &cfg)?]
                }
                None => pipeline::cross_validate(&sets, &keys, folds, &cfg)?,
            };
            let table = EvalTable::new(&results, cfg.epsilon);
            emit(out.as_deref(), &table.to_json(), &table.to_text())?;
        }
        Command::Baseline { corpus, keys, model_file, out } => {
            let sets = io::load_corpus(&corpus)?;
            let keys = keys.map(|k| io::load_keys(&k, &sets)).transpose()?;
            if !matches!(cfg.inference, InferenceModel::Greedy | InferenceModel::Uniform) {
                cfg.inference = InferenceModel::Greedy;
            }
            let pk = match (&model_file, &keys) {
                (Some(m), _) => SavedModel::load(m)?.pk,
                (None, Some(k)) => Some(baselines::estimate_pk(&sets, k)?),
                (None, None) => None,
            };
            let dists = pipeline::infer_corpus(&sets, cfg.inference, None, pk.as_ref(), &cfg)?;
            let report = InferenceReport::build(&sets, &dists, cfg.inference, cfg.epsilon, keys.as_ref())?;
            emit(out.as_deref(), &report.to_json(), &report.to_text())?;
        }
        Command::Synth { out_corpus, out_keys, sets, fidelity, noise, coref_rate, min_size, max_size } => {
            let g = &mut cfg.synth;
            g.sets = sets.unwrap_or(g.sets);
            g.fidelity = fidelity.unwrap_or(g.fidelity);
            g.noise = noise.unwrap_or(g.noise);
            g.coref_rate = coref_rate.unwrap_or(g.coref_rate);
            g.min_size = min_size.unwrap_or(g.min_size);
            g.max_size = max_size.unwrap_or(g.max_size);
            let (corpus, keys) = generate_synthetic_corpus(g, cfg.seed)?;
            io::save_corpus(&out_corpus, &corpus)?;
            io::save_keys(&out_keys, &keys, &corpus)?;
            println!("wrote {} sets", corpus.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
