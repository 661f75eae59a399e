//! Experiment configuration and multi-run drivers (ablation, k sweep).

use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ConfusionSet, Corpus, CorpusError};
use crate::curriculum::{
    arrange_annealing, arrange_random_stages, arrange_shuffled_baseline, arrange_sorted_only, ArrangementPolicy,
    CurriculumError, CurriculumManifest,
};
use crate::difficulty::{score_corpus, DifficultyError, DifficultyRecord, Scorer, ScoringPolicy};
use crate::embed::{EmbedError, EmbeddingProvider, DEFAULT_DIM, DEFAULT_WINDOW};
use crate::metrics::{evaluate_both, EvalReport, MetricsError};
use crate::model::{train_passes, ModelError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Difficulty(#[from] DifficultyError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ExperimentError {
    /// Whether the failure stems from how the run was requested rather than
    /// from the data.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            ExperimentError::Usage(_)
                | ExperimentError::Curriculum(
                    CurriculumError::KTooLarge { .. } | CurriculumError::ZeroK | CurriculumError::EmptyInput
                )
                | ExperimentError::Metrics(MetricsError::IdMismatch(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderSpec {
    Hashed { window: usize, dim: usize },
    File { path: PathBuf },
}

impl Default for ProviderSpec {
    fn default() -> Self {
        ProviderSpec::Hashed { window: DEFAULT_WINDOW, dim: DEFAULT_DIM }
    }
}

fn default_scoring() -> ScoringPolicy {
    ScoringPolicy::Contextual
}

fn default_policy() -> ArrangementPolicy {
    ArrangementPolicy::Annealing
}

fn default_k() -> usize {
    4
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_passes() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Declarative description of a run. Loaded from TOML, then overridden by
/// command-line flags; the resolved copy is written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub confusion: Option<PathBuf>,
    #[serde(default)]
    pub provider: ProviderSpec,
    #[serde(default = "default_scoring")]
    pub scoring: ScoringPolicy,
    #[serde(default = "default_policy")]
    pub policy: ArrangementPolicy,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Repetitions of the whole curriculum during training.
    #[serde(default = "default_passes")]
    pub passes: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            confusion: None,
            provider: ProviderSpec::default(),
            scoring: default_scoring(),
            policy: default_policy(),
            k: default_k(),
            seeds: default_seeds(),
            passes: default_passes(),
            out_dir: default_out_dir(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.k == 0 {
            return Err(ExperimentError::Usage("k must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::Usage("at least one seed is required".into()));
        }
        if self.passes == 0 {
            return Err(ExperimentError::Usage("passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// The five training orders compared in an ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AblationMode {
    ShuffledBaseline,
    SortedOnly,
    RandomStages,
    CharSimilarity,
    Contextual,
}

impl AblationMode {
    pub const ALL: [AblationMode; 5] = [
        AblationMode::ShuffledBaseline,
        AblationMode::SortedOnly,
        AblationMode::RandomStages,
        AblationMode::CharSimilarity,
        AblationMode::Contextual,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            AblationMode::ShuffledBaseline => "shuffled_baseline",
            AblationMode::SortedOnly => "sorted_only",
            AblationMode::RandomStages => "random_stages",
            AblationMode::CharSimilarity => "char_similarity_annealing",
            AblationMode::Contextual => "contextual_annealing",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub mode: AblationMode,
    pub k: usize,
    pub seed: u64,
    pub detection: EvalReport,
    pub correction: EvalReport,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub mode: AblationMode,
    pub runs: Vec<RunResult>,
}

impl AblationRow {
    fn mean_of(&self, f: impl Fn(&RunResult) -> f64) -> f64 {
        mean_sd(&self.runs.iter().map(f).collect::<Vec<_>>()).0
    }

    pub fn correction_f1(&self) -> (f64, f64) {
        mean_sd(&self.runs.iter().map(|r| r.correction.f1).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub k: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "mode\truns\tdet_f1_mean\tcor_acc_mean\tcor_precision_mean\tcor_recall_mean\tcor_f1_mean\tcor_f1_sd\tdelta\n",
        );
        let base = self.rows.first().map_or(0.0, |r| r.correction_f1().0);
        for row in &self.rows {
            let (f1, sd) = row.correction_f1();
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:+.4}",
                row.mode,
                row.runs.len(),
                row.mean_of(|r| r.detection.f1),
                row.mean_of(|r| r.correction.accuracy),
                row.mean_of(|r| r.correction.precision),
                row.mean_of(|r| r.correction.recall),
                f1,
                sd,
                f1 - base
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub runs: Vec<RunResult>,
}

impl SweepRow {
    pub fn correction_f1(&self) -> (f64, f64) {
        mean_sd(&self.runs.iter().map(|r| r.correction.f1).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("k\truns\tcor_f1_mean\tcor_f1_sd\tdet_f1_mean\n");
        for row in &self.rows {
            let (f1, sd) = row.correction_f1();
            let det = mean_sd(&row.runs.iter().map(|r| r.detection.f1).collect::<Vec<_>>()).0;
            let _ = writeln!(out, "{}\t{}\t{f1:.4}\t{sd:.4}\t{det:.4}", row.k, row.runs.len());
        }
        out
    }
}

/// Loaded inputs for training/evaluation runs. Difficulty scores are computed
/// on first use and shared by all runs.
pub struct Experiment<'a> {
    train: &'a Corpus,
    test: &'a Corpus,
    confusion: &'a ConfusionSet,
    provider: &'a dyn EmbeddingProvider,
    passes: usize,
    contextual: OnceLock<Result<Vec<DifficultyRecord>, DifficultyError>>,
    char_similarity: OnceLock<Vec<DifficultyRecord>>,
}

impl<'a> Experiment<'a> {
    pub fn new(
        train: &'a Corpus,
        test: &'a Corpus,
        confusion: &'a ConfusionSet,
        provider: &'a dyn EmbeddingProvider,
    ) -> Self {
        Self {
            train,
            test,
            confusion,
            provider,
            passes: 1,
            contextual: OnceLock::new(),
            char_similarity: OnceLock::new(),
        }
    }

    pub fn with_passes(mut self, passes: usize) -> Self {
        self.passes = passes.max(1);
        self
    }

    pub fn scores(&self, policy: ScoringPolicy) -> Result<&[DifficultyRecord], ExperimentError> {
        match policy {
            ScoringPolicy::Contextual => self
                .contextual
                .get_or_init(|| score_corpus(self.train, Scorer::Contextual(self.provider)))
                .as_deref()
                .map_err(|e| ExperimentError::Difficulty(e.clone())),
            ScoringPolicy::CharSimilarity => Ok(self.char_similarity.get_or_init(|| {
                score_corpus(self.train, Scorer::CharSimilarity(self.confusion)).expect("char similarity is total")
            })),
        }
    }

    pub fn manifest(&self, mode: AblationMode, k: usize, seed: u64) -> Result<CurriculumManifest, ExperimentError> {
        let ids = || self.train.ids();
        let m = match mode {
            AblationMode::ShuffledBaseline => arrange_shuffled_baseline(&ids(), seed)?,
            AblationMode::SortedOnly => arrange_sorted_only(self.scores(ScoringPolicy::Contextual)?, seed)?,
            AblationMode::RandomStages => arrange_random_stages(&ids(), k, seed)?,
            AblationMode::CharSimilarity => arrange_annealing(self.scores(ScoringPolicy::CharSimilarity)?, k, seed)?,
            AblationMode::Contextual => arrange_annealing(self.scores(ScoringPolicy::Contextual)?, k, seed)?,
        };
        Ok(m.named(self.train.name()))
    }

    /// Manifest for an explicit arrangement policy and scoring policy.
    pub fn manifest_for(
        &self,
        policy: ArrangementPolicy,
        scoring: ScoringPolicy,
        k: usize,
        seed: u64,
    ) -> Result<CurriculumManifest, ExperimentError> {
        let m = match policy {
            ArrangementPolicy::Annealing => arrange_annealing(self.scores(scoring)?, k, seed)?,
            ArrangementPolicy::SortedOnly => arrange_sorted_only(self.scores(scoring)?, seed)?,
            ArrangementPolicy::RandomStages => arrange_random_stages(&self.train.ids(), k, seed)?,
            ArrangementPolicy::ShuffledBaseline => arrange_shuffled_baseline(&self.train.ids(), seed)?,
        };
        Ok(m.named(self.train.name()))
    }

    pub fn evaluate_manifest(&self, manifest: &CurriculumManifest) -> Result<(EvalReport, EvalReport), ExperimentError> {
        if self.test.is_empty() {
            return Err(ExperimentError::Usage("test corpus is empty".into()));
        }
        let model = train_passes(manifest, self.train, self.confusion, self.passes)?;
        Ok(evaluate_both(&model.predict_corpus(self.test), self.test)?)
    }

    pub fn run(&self, mode: AblationMode, k: usize, seed: u64) -> Result<RunResult, ExperimentError> {
        let manifest = self.manifest(mode, k, seed)?;
        let (detection, correction) = self.evaluate_manifest(&manifest)?;
        Ok(RunResult { mode, k, seed, detection, correction })
    }

    fn run_grid(&self, jobs: &[(AblationMode, usize, u64)]) -> Result<Vec<RunResult>, ExperimentError> {
        if jobs.iter().any(|(m, _, _)| matches!(m, AblationMode::SortedOnly | AblationMode::Contextual)) {
            self.scores(ScoringPolicy::Contextual)?;
        }
        jobs.par_iter().map(|&(mode, k, seed)| self.run(mode, k, seed)).collect()
    }

    /// Every ablation mode over every seed; the baseline row comes first.
    pub fn ablate(&self, k: usize, seeds: &[u64]) -> Result<AblationTable, ExperimentError> {
        if seeds.is_empty() {
            return Err(ExperimentError::Usage("at least one seed is required".into()));
        }
        let jobs: Vec<_> = AblationMode::ALL
            .iter()
            .flat_map(|&m| seeds.iter().map(move |&s| (m, k, s)))
            .collect();
        let mut results = self.run_grid(&jobs)?.into_iter();
        let rows = AblationMode::ALL
            .iter()
            .map(|&mode| AblationRow { mode, runs: results.by_ref().take(seeds.len()).collect() })
            .collect();
        Ok(AblationTable { k, rows })
    }

    /// Contextual annealing for each `k`, averaged over seeds.
    pub fn sweep_k(&self, k_values: &[usize], seeds: &[u64]) -> Result<SweepTable, ExperimentError> {
        if k_values.is_empty() || seeds.is_empty() {
            return Err(ExperimentError::Usage("k values and seeds must be non-empty".into()));
        }
        let mut sorted = k_values.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ExperimentError::Usage("duplicate k values".into()));
        }
        let jobs: Vec<_> = k_values
            .iter()
            .flat_map(|&k| seeds.iter().map(move |&s| (AblationMode::Contextual, k, s)))
            .collect();
        let mut results = self.run_grid(&jobs)?.into_iter();
        let rows = k_values
            .iter()
            .map(|&k| SweepRow { k, runs: results.by_ref().take(seeds.len()).collect() })
            .collect();
        Ok(SweepTable { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd_values() {
        assert_eq!(mean_sd(&[]), (0.0, 0.0));
        assert_eq!(mean_sd(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_defaults_and_round_trip() {
        let cfg = ExperimentConfig::from_toml("train = \"a.tsv\"\nseeds = [1, 2]\n[provider]\nkind = \"hashed\"\nwindow = 1\ndim = 16\n").unwrap();
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.provider, ProviderSpec::Hashed { window: 1, dim: 16 });
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
        let bad = ExperimentConfig { seeds: vec![], ..ExperimentConfig::default() };
        assert!(bad.validate().unwrap_err().is_usage());
    }
}
