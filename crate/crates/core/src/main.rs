use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use csc_curriculum::corpus::{inject_errors, parse_confusion_set, parse_corpus, ConfusionSet, Corpus, CorpusFormat};
use csc_curriculum::curriculum::{
    arrange_annealing, arrange_random_stages, arrange_shuffled_baseline, arrange_sorted_only, read_manifest,
    write_manifest, ArrangementPolicy, CurriculumManifest,
};
use csc_curriculum::difficulty::{read_difficulties, score_corpus, write_difficulties, Scorer, ScoringPolicy};
use csc_curriculum::embed::{EmbeddingProvider, FileEmbeddings, HashedEmbedder};
use csc_curriculum::experiment::{Experiment, ExperimentConfig, ExperimentError, ProviderSpec};
use csc_curriculum::metrics::{evaluate_both, write_reports};
use csc_curriculum::model::{train_passes, CorrectorModel};
use csc_curriculum::synth::{SynthParams, SyntheticLanguage};

/// Curriculum learning toolkit for spell-checking training data.
#[derive(Parser)]
#[command(name = "cscl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every training sample's difficulty.
    Score(Common),
    /// Arrange scored samples into a curriculum manifest.
    Arrange {
        #[command(flatten)]
        common: Common,
        /// Difficulty file from `score`; computed from the training corpus when absent.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Train a corrector along a curriculum, and evaluate it if a test corpus is given.
    Train {
        #[command(flatten)]
        common: Common,
        /// Manifest from `arrange`; built from the config when absent.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Evaluate a saved model on the test corpus.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run every ablation mode over every seed.
    Ablate(Common),
    /// Contextual annealing for several values of k.
    SweepK {
        #[command(flatten)]
        common: Common,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', required = true)]
        k_values: Vec<usize>,
    },
    /// Corrupt a clean corpus by confusion-set substitution.
    Inject {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        confusion: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate clean synthetic train/test corpora and a confusion set.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2000)]
        train_size: usize,
        #[arg(long, default_value_t = 500)]
        test_size: usize,
        #[arg(long, default_value_t = 50)]
        vocab: usize,
        #[arg(long, default_value_t = 200)]
        confusion_entries: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Flags mirroring `ExperimentConfig`; each overrides the config file.
#[derive(Args, Default)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// Use vectors from an embedding file instead of the hashed embedder.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// contextual | char_similarity
    #[arg(long)]
    scoring: Option<ScoringPolicy>,
    /// annealing | sorted_only | random_stages | shuffled_baseline
    #[arg(long)]
    policy: Option<ArrangementPolicy>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    passes: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.into())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl Common {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = read(path)?;
                ExperimentConfig::from_toml(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.train {
            cfg.train = Some(p.clone());
        }
        if let Some(p) = &self.test {
            cfg.test = Some(p.clone());
        }
        if let Some(p) = &self.confusion {
            cfg.confusion = Some(p.clone());
        }
        if let Some(p) = &self.embeddings {
            cfg.provider = ProviderSpec::File { path: p.clone() };
        } else if self.window.is_some() || self.dim.is_some() {
            let (w0, d0) = match cfg.provider {
                ProviderSpec::Hashed { window, dim } => (window, dim),
                ProviderSpec::File { .. } => {
                    let ProviderSpec::Hashed { window, dim } = ProviderSpec::default() else { unreachable!() };
                    (window, dim)
                }
            };
            cfg.provider = ProviderSpec::Hashed { window: self.window.unwrap_or(w0), dim: self.dim.unwrap_or(d0) };
        }
        if let Some(s) = self.scoring {
            cfg.scoring = s;
        }
        if let Some(p) = self.policy {
            cfg.policy = p;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(p) = self.passes {
            cfg.passes = p;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> CliResult<String> {
    if !path.exists() {
        return Err(usage(format!("{} does not exist", path.display())));
    }
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Data)
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn corpus_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_corpus(path: &Path) -> CliResult<Corpus> {
    let text = read(path)?;
    parse_corpus(&corpus_name(path), &text, CorpusFormat::IdSrcTgt)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(CliError::Data)
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    path.as_deref().ok_or_else(|| usage(format!("a {what} path is required")))
}

fn load_confusion(cfg: &ExperimentConfig) -> CliResult<ConfusionSet> {
    let text = read(required(&cfg.confusion, "confusion set")?)?;
    parse_confusion_set(&text).context("parsing confusion set").map_err(CliError::Data)
}

fn load_provider(cfg: &ExperimentConfig) -> CliResult<Box<dyn EmbeddingProvider>> {
    match &cfg.provider {
        ProviderSpec::Hashed { window, dim } => Ok(Box::new(
            HashedEmbedder::new(*window, *dim).map_err(|e| usage(e.to_string()))?,
        )),
        ProviderSpec::File { path } => {
            let text = read(path)?;
            Ok(Box::new(FileEmbeddings::parse(&text).context("parsing embeddings")?))
        }
    }
}

/// Records the resolved config next to the outputs.
fn save_config(cfg: &ExperimentConfig) -> CliResult<()> {
    write(&cfg.out_dir.join("resolved-config.toml"), &cfg.to_toml())
}

fn cmd_score(common: &Common) -> CliResult<()> {
    let cfg = common.resolve()?;
    let train = load_corpus(required(&cfg.train, "training corpus")?)?;
    let records = match cfg.scoring {
        ScoringPolicy::Contextual => {
            let provider = load_provider(&cfg)?;
            score_corpus(&train, Scorer::Contextual(provider.as_ref())).map_err(|e| anyhow!(e))?
        }
        ScoringPolicy::CharSimilarity => {
            let confusion = load_confusion(&cfg)?;
            score_corpus(&train, Scorer::CharSimilarity(&confusion)).map_err(|e| anyhow!(e))?
        }
    };
    save_config(&cfg)?;
    write(&cfg.out_dir.join("scores.tsv"), &write_difficulties(&records))
}

fn build_manifest(cfg: &ExperimentConfig, train: &Corpus, scores: Option<&Path>) -> CliResult<CurriculumManifest> {
    let seed = cfg.seeds[0];
    let records = match (cfg.policy, scores) {
        (ArrangementPolicy::Annealing | ArrangementPolicy::SortedOnly, Some(path)) => {
            Some(read_difficulties(&read(path)?).context("parsing difficulty file")?)
        }
        (ArrangementPolicy::Annealing | ArrangementPolicy::SortedOnly, None) => {
            let records = match cfg.scoring {
                ScoringPolicy::Contextual => {
                    let provider = load_provider(cfg)?;
                    score_corpus(train, Scorer::Contextual(provider.as_ref()))
                }
                ScoringPolicy::CharSimilarity => {
                    score_corpus(train, Scorer::CharSimilarity(&load_confusion(cfg)?))
                }
            };
            Some(records.map_err(|e| anyhow!(e))?)
        }
        _ => None,
    };
    let ids = train.ids();
    let manifest = match cfg.policy {
        ArrangementPolicy::Annealing => arrange_annealing(records.as_deref().unwrap_or_default(), cfg.k, seed),
        ArrangementPolicy::SortedOnly => arrange_sorted_only(records.as_deref().unwrap_or_default(), seed),
        ArrangementPolicy::RandomStages => arrange_random_stages(&ids, cfg.k, seed),
        ArrangementPolicy::ShuffledBaseline => arrange_shuffled_baseline(&ids, seed),
    }
    .map_err(ExperimentError::from)?;
    Ok(manifest.named(train.name()))
}

fn cmd_arrange(common: &Common, scores: Option<&Path>) -> CliResult<()> {
    let cfg = common.resolve()?;
    let train = load_corpus(required(&cfg.train, "training corpus")?)?;
    let manifest = build_manifest(&cfg, &train, scores)?;
    save_config(&cfg)?;
    write(&cfg.out_dir.join("manifest.jsonl"), &write_manifest(&manifest))
}

fn evaluate_to_file(cfg: &ExperimentConfig, model: &CorrectorModel) -> CliResult<()> {
    let test = load_corpus(required(&cfg.test, "test corpus")?)?;
    if test.is_empty() {
        return Err(usage("test corpus is empty"));
    }
    let predictions = model.predict_corpus(&test);
    let (det, cor) = evaluate_both(&predictions, &test).map_err(ExperimentError::from)?;
    let report = write_reports(&[&det, &cor]);
    print!("{report}");
    write(&cfg.out_dir.join("report.tsv"), &report)
}

fn cmd_train(common: &Common, manifest: Option<&Path>) -> CliResult<()> {
    let cfg = common.resolve()?;
    let train = load_corpus(required(&cfg.train, "training corpus")?)?;
    let confusion = load_confusion(&cfg)?;
    let manifest = match manifest {
        Some(path) => read_manifest(&read(path)?).context("parsing manifest")?,
        None => build_manifest(&cfg, &train, None)?,
    };
    let model = train_passes(&manifest, &train, &confusion, cfg.passes).map_err(|e| anyhow!(e))?;
    save_config(&cfg)?;
    write(&cfg.out_dir.join("model.tsv"), &model.to_tsv())?;
    if cfg.test.is_some() {
        evaluate_to_file(&cfg, &model)?;
    }
    Ok(())
}

fn cmd_evaluate(common: &Common, model: &Path) -> CliResult<()> {
    let cfg = common.resolve()?;
    let confusion = load_confusion(&cfg)?;
    let model = CorrectorModel::from_tsv(&read(model)?, confusion).context("parsing model")?;
    save_config(&cfg)?;
    evaluate_to_file(&cfg, &model)
}

struct Loaded {
    cfg: ExperimentConfig,
    train: Corpus,
    test: Corpus,
    confusion: ConfusionSet,
    provider: Box<dyn EmbeddingProvider>,
}

fn load_all(common: &Common) -> CliResult<Loaded> {
    let cfg = common.resolve()?;
    let train = load_corpus(required(&cfg.train, "training corpus")?)?;
    let test = load_corpus(required(&cfg.test, "test corpus")?)?;
    let confusion = load_confusion(&cfg)?;
    let provider = load_provider(&cfg)?;
    Ok(Loaded { cfg, train, test, confusion, provider })
}

fn cmd_ablate(common: &Common) -> CliResult<()> {
    let l = load_all(common)?;
    let exp = Experiment::new(&l.train, &l.test, &l.confusion, l.provider.as_ref()).with_passes(l.cfg.passes);
    let table = exp.ablate(l.cfg.k, &l.cfg.seeds)?.to_tsv();
    print!("{table}");
    save_config(&l.cfg)?;
    write(&l.cfg.out_dir.join("ablation.tsv"), &table)
}

fn cmd_sweep_k(common: &Common, k_values: &[usize]) -> CliResult<()> {
    let l = load_all(common)?;
    let exp = Experiment::new(&l.train, &l.test, &l.confusion, l.provider.as_ref()).with_passes(l.cfg.passes);
    let table = exp.sweep_k(k_values, &l.cfg.seeds)?.to_tsv();
    print!("{table}");
    save_config(&l.cfg)?;
    write(&l.cfg.out_dir.join("sweep_k.tsv"), &table)
}

fn cmd_inject(input: &Path, confusion: &Path, rate: f64, seed: u64, output: &Path) -> CliResult<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(usage(format!("rate must lie in [0, 1], got {rate}")));
    }
    let corpus = load_corpus(input)?;
    let confusion = parse_confusion_set(&read(confusion)?).context("parsing confusion set")?;
    write(output, &inject_errors(&corpus, &confusion, rate, seed).to_tsv())
}

fn cmd_synth(out_dir: &Path, train: usize, test: usize, vocab: usize, entries: usize, seed: u64) -> CliResult<()> {
    if vocab < 2 {
        return Err(usage("vocabulary needs at least two characters"));
    }
    let params = SynthParams { vocab_size: vocab, confusion_entries: entries, ..SynthParams::default() };
    let lang = SyntheticLanguage::new(&params, seed);
    write(&out_dir.join("train_clean.tsv"), &lang.sentences("train", "train-", train, seed.wrapping_add(1)).to_tsv())?;
    write(&out_dir.join("test_clean.tsv"), &lang.sentences("test", "test-", test, seed.wrapping_add(2)).to_tsv())?;
    write(&out_dir.join("confusion.tsv"), &lang.confusion().to_tsv())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Score(common) => cmd_score(&common),
        Command::Arrange { common, scores } => cmd_arrange(&common, scores.as_deref()),
        Command::Train { common, manifest } => cmd_train(&common, manifest.as_deref()),
        Command::Evaluate { common, model } => cmd_evaluate(&common, &model),
        Command::Ablate(common) => cmd_ablate(&common),
        Command::SweepK { common, k_values } => cmd_sweep_k(&common, &k_values),
        Command::Inject { input, confusion, rate, seed, output } => cmd_inject(&input, &confusion, rate, seed, &output),
        Command::Synth { out_dir, train_size, test_size, vocab, confusion_entries, seed } => {
            cmd_synth(&out_dir, train_size, test_size, vocab, confusion_entries, seed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
