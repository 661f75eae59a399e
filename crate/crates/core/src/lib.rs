//! Curriculum learning for spell-checking training data.
//!
//! Samples are scored by how similar the wrong and the correct character look
//! in context ([`difficulty`]), arranged into an easy-to-hard staged
//! curriculum ([`curriculum`]), used to train a small confusion-set corrector
//! ([`model`]), and evaluated at sentence level ([`metrics`]).

pub mod corpus;
pub mod curriculum;
pub mod difficulty;
pub mod embed;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synth;

pub use corpus::{parse_confusion_set, parse_corpus, ConfusionSet, Corpus, CorpusFormat, Sample};
pub use curriculum::{ArrangementPolicy, CurriculumManifest};
pub use difficulty::{DifficultyRecord, ScoringPolicy};
pub use embed::{ContextualEmbedding, EmbeddingProvider, FileEmbeddings, HashedEmbedder, Side};
pub use experiment::{AblationMode, Experiment, ExperimentConfig, ExperimentError, ProviderSpec};
pub use metrics::{EvalLevel, EvalReport};
pub use model::{CorrectorModel, Prediction};
