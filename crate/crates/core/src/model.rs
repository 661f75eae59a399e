//! Confusion-candidate averaged perceptron corrector.
//!
//! At every position the observed character competes against its confusion
//! candidates. Each candidate is scored with a linear model over features of
//! the candidate and its observed neighbours (two to each side). Training
//! walks a curriculum stage by stage, one pass per stage, and the final model
//! uses weights averaged over every training step.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{ConfusionSet, Corpus, Sample};
use crate::curriculum::CurriculumManifest;

pub const FEATURE_SCHEMA_VERSION: u32 = 1;
/// Observed characters on each side that feed the features.
pub const CONTEXT_WINDOW: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("manifest references unknown sample `{0}`")]
    UnknownSampleId(String),
    #[error("line {0}: malformed model line")]
    MalformedLine(usize),
    #[error("model header missing or unsupported")]
    BadHeader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Context {
    Bos,
    Eos,
    Char(char),
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Bos => f.write_str("<s>"),
            Context::Eos => f.write_str("</s>"),
            Context::Char(c) => write!(f, "{c}"),
        }
    }
}

impl Context {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "<s>" => Some(Context::Bos),
            "</s>" => Some(Context::Eos),
            _ => {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Some(Context::Char(c)),
                    _ => None,
                }
            }
        }
    }
}

/// Feature keys. All but `Keep` are conditioned on the candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Cand(char),
    Left(Context, char),
    Right(Context, char),
    Left2(Context, char),
    Right2(Context, char),
    Keep,
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Cand(c) => write!(f, "C|{c}"),
            Feature::Left(x, c) => write!(f, "L|{x}|{c}"),
            Feature::Right(x, c) => write!(f, "R|{x}|{c}"),
            Feature::Left2(x, c) => write!(f, "LL|{x}|{c}"),
            Feature::Right2(x, c) => write!(f, "RR|{x}|{c}"),
            Feature::Keep => f.write_str("KEEP"),
        }
    }
}

impl Feature {
    /// Inverse of `Display`. The candidate is always the last character, so
    /// keys stay parseable even when a context character is `|`.
    pub fn parse(key: &str) -> Option<Self> {
        if key == "KEEP" {
            return Some(Feature::Keep);
        }
        let (kind, rest) = key.split_once('|')?;
        let cand = rest.chars().next_back()?;
        let head = &rest[..rest.len() - cand.len_utf8()];
        if kind == "C" {
            return head.is_empty().then_some(Feature::Cand(cand));
        }
        let ctx = Context::parse(head.strip_suffix('|')?)?;
        match kind {
            "L" => Some(Feature::Left(ctx, cand)),
            "R" => Some(Feature::Right(ctx, cand)),
            "LL" => Some(Feature::Left2(ctx, cand)),
            "RR" => Some(Feature::Right2(ctx, cand)),
            _ => None,
        }
    }
}

/// The observed character followed by its confusables in code-point order.
pub fn candidate_set(source: &[char], j: usize, confusion: &ConfusionSet) -> Vec<char> {
    let observed = source[j];
    std::iter::once(observed).chain(confusion.candidates(observed).iter().copied()).collect()
}

fn context_at(sequence: &[char], p: isize) -> Context {
    if p < 0 {
        Context::Bos
    } else if p as usize >= sequence.len() {
        Context::Eos
    } else {
        Context::Char(sequence[p as usize])
    }
}

fn featurize_into(sequence: &[char], j: usize, candidate: char, out: &mut Vec<Feature>) {
    out.clear();
    let j = j as isize;
    out.push(Feature::Cand(candidate));
    out.push(Feature::Left(context_at(sequence, j - 1), candidate));
    out.push(Feature::Right(context_at(sequence, j + 1), candidate));
    out.push(Feature::Left2(context_at(sequence, j - 2), candidate));
    out.push(Feature::Right2(context_at(sequence, j + 2), candidate));
    if candidate == sequence[j as usize] {
        out.push(Feature::Keep);
    }
}

/// Feature keys for proposing `candidate` at position `j` of the observed
/// `sequence`.
pub fn featurize(sequence: &[char], j: usize, candidate: char) -> Vec<Feature> {
    let mut out = Vec::with_capacity(6);
    featurize_into(sequence, j, candidate, &mut out);
    out
}

fn score_with(weights: &HashMap<Feature, f64>, feats: &[Feature]) -> f64 {
    feats.iter().map(|f| weights.get(f).copied().unwrap_or(0.0)).sum()
}

/// Index of the best candidate; the first maximum wins, so ties go to the
/// observed character and then to code-point order.
fn argmax(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in scores.enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, Default)]
struct WeightCell {
    current: f64,
    /// Sum of this weight over steps `1..=stamp`.
    total: f64,
    stamp: u64,
}

/// Online training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    confusion: ConfusionSet,
    cells: HashMap<Feature, WeightCell>,
    steps: u64,
    scratch: Vec<Feature>,
}

impl Trainer {
    pub fn new(confusion: ConfusionSet) -> Self {
        Self { confusion, cells: HashMap::new(), steps: 0, scratch: Vec::with_capacity(6) }
    }

    /// Number of training steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn current_score(&mut self, seq: &[char], j: usize, cand: char) -> f64 {
        featurize_into(seq, j, cand, &mut self.scratch);
        self.scratch.iter().map(|f| self.cells.get(f).map_or(0.0, |c| c.current)).sum()
    }

    fn bump(&mut self, feature: Feature, delta: f64) {
        let prev_step = self.steps;
        let cell = self.cells.entry(feature).or_default();
        cell.total += (prev_step - cell.stamp) as f64 * cell.current;
        cell.stamp = prev_step;
        cell.current += delta;
    }

    /// One perceptron step at position `j`.
    ///
    /// Positions where the gold character is not among the candidates, or
    /// where there is only one candidate, are not training instances and
    /// return `None`. Otherwise returns whether the weights changed.
    pub fn train_position(&mut self, sample: &Sample, j: usize) -> Option<bool> {
        let seq = sample.source();
        let gold = sample.target()[j];
        let cands = candidate_set(seq, j, &self.confusion);
        if cands.len() < 2 || !cands.contains(&gold) {
            return None;
        }
        let scores: Vec<f64> = cands.iter().map(|&c| self.current_score(seq, j, c)).collect();
        let guess = cands[argmax(scores.into_iter())];
        let updated = guess != gold;
        if updated {
            for f in featurize(seq, j, gold) {
                self.bump(f, 1.0);
            }
            for f in featurize(seq, j, guess) {
                self.bump(f, -1.0);
            }
        }
        self.steps += 1;
        Some(updated)
    }

    /// Train on every position of `sample`; returns the number of updates.
    pub fn train_sample(&mut self, sample: &Sample) -> usize {
        (0..sample.len()).filter(|&j| self.train_position(sample, j) == Some(true)).count()
    }

    pub fn current_weights(&self) -> HashMap<Feature, f64> {
        self.cells.iter().map(|(f, c)| (*f, c.current)).collect()
    }

    /// Mean of the weight vector over all steps so far (zero before any step).
    pub fn averaged_weights(&self) -> HashMap<Feature, f64> {
        if self.steps == 0 {
            return self.cells.keys().map(|f| (*f, 0.0)).collect();
        }
        let t = self.steps;
        self.cells
            .iter()
            .map(|(f, c)| (*f, (c.total + (t - c.stamp) as f64 * c.current) / t as f64))
            .collect()
    }

    pub fn into_model(self) -> CorrectorModel {
        CorrectorModel {
            weights: self.current_weights(),
            averaged: self.averaged_weights(),
            updates_seen: self.steps,
            confusion: self.confusion,
            window: CONTEXT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub sample_id: String,
    pub predicted: Vec<char>,
    pub detected_positions: Vec<usize>,
}

impl Prediction {
    pub fn predicted_string(&self) -> String {
        self.predicted.iter().collect()
    }
}

/// A trained corrector; prediction uses the averaged weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorModel {
    weights: HashMap<Feature, f64>,
    averaged: HashMap<Feature, f64>,
    updates_seen: u64,
    confusion: ConfusionSet,
    window: usize,
}

impl CorrectorModel {
    /// An untrained model.
    pub fn empty(confusion: ConfusionSet) -> Self {
        Trainer::new(confusion).into_model()
    }

    pub fn weights(&self) -> &HashMap<Feature, f64> {
        &self.weights
    }

    pub fn averaged_weights(&self) -> &HashMap<Feature, f64> {
        &self.averaged
    }

    pub fn updates_seen(&self) -> u64 {
        self.updates_seen
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn confusion(&self) -> &ConfusionSet {
        &self.confusion
    }

    pub fn predict(&self, sample: &Sample) -> Prediction {
        let seq = sample.source();
        let mut scratch = Vec::with_capacity(6);
        let predicted: Vec<char> = (0..seq.len())
            .map(|j| {
                let cands = candidate_set(seq, j, &self.confusion);
                if cands.len() == 1 {
                    return cands[0];
                }
                let best = argmax(cands.iter().map(|&c| {
                    featurize_into(seq, j, c, &mut scratch);
                    score_with(&self.averaged, &scratch)
                }));
                cands[best]
            })
            .collect();
        let detected_positions = (0..seq.len()).filter(|&j| predicted[j] != seq[j]).collect();
        Prediction { sample_id: sample.id().to_string(), predicted, detected_positions }
    }

    pub fn predict_corpus(&self, corpus: &Corpus) -> Vec<Prediction> {
        corpus.samples().iter().map(|s| self.predict(s)).collect()
    }

    /// `feature_key<TAB>averaged_weight` sorted by key, after a header line.
    /// Zero weights are omitted.
    pub fn to_tsv(&self) -> String {
        let sorted: BTreeMap<String, f64> = self
            .averaged
            .iter()
            .filter(|(_, w)| **w != 0.0)
            .map(|(f, w)| (f.to_string(), *w))
            .collect();
        let mut out = format!(
            "#corrector\twindow={}\tschema={}\tsteps={}\n",
            self.window, FEATURE_SCHEMA_VERSION, self.updates_seen
        );
        for (key, w) in sorted {
            let _ = writeln!(out, "{key}\t{w:?}");
        }
        out
    }

    /// Load a model file. Loaded models carry only averaged weights, which
    /// also stand in for the raw weights.
    pub fn from_tsv(text: &str, confusion: ConfusionSet) -> Result<Self, ModelError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(ModelError::BadHeader)?;
        let fields: Vec<&str> = header.split('\t').collect();
        let mut window = None;
        let mut schema = None;
        let mut steps = None;
        if fields.first() != Some(&"#corrector") {
            return Err(ModelError::BadHeader);
        }
        for field in &fields[1..] {
            match field.split_once('=') {
                Some(("window", v)) => window = v.parse::<usize>().ok(),
                Some(("schema", v)) => schema = v.parse::<u32>().ok(),
                Some(("steps", v)) => steps = v.parse::<u64>().ok(),
                _ => return Err(ModelError::BadHeader),
            }
        }
        if schema != Some(FEATURE_SCHEMA_VERSION) || window != Some(CONTEXT_WINDOW) {
            return Err(ModelError::BadHeader);
        }
        let mut averaged = HashMap::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = ModelError::MalformedLine(i + 2);
            let Some((key, w)) = line.rsplit_once('\t') else {
                return Err(bad);
            };
            let feature = Feature::parse(key).ok_or_else(|| bad.clone())?;
            let w: f64 = w.parse().map_err(|_| bad.clone())?;
            averaged.insert(feature, w);
        }
        Ok(Self {
            weights: averaged.clone(),
            averaged,
            updates_seen: steps.ok_or(ModelError::BadHeader)?,
            confusion,
            window: CONTEXT_WINDOW,
        })
    }
}

fn resolve_stages<'c>(manifest: &CurriculumManifest, corpus: &'c Corpus) -> Result<Vec<Vec<&'c Sample>>, ModelError> {
    manifest
        .stages
        .iter()
        .map(|stage| {
            stage
                .iter()
                .map(|id| corpus.get(id).ok_or_else(|| ModelError::UnknownSampleId(id.clone())))
                .collect()
        })
        .collect()
}

fn run_curriculum(trainer: &mut Trainer, stages: &[Vec<&Sample>]) -> usize {
    stages.iter().flatten().map(|s| trainer.train_sample(s)).sum()
}

/// Train through the manifest's stages in order, one pass per stage.
pub fn train(
    manifest: &CurriculumManifest,
    corpus: &Corpus,
    confusion: &ConfusionSet,
) -> Result<CorrectorModel, ModelError> {
    train_passes(manifest, corpus, confusion, 1)
}

/// Like [`train`], repeating the whole curriculum `passes` times.
pub fn train_passes(
    manifest: &CurriculumManifest,
    corpus: &Corpus,
    confusion: &ConfusionSet,
    passes: usize,
) -> Result<CorrectorModel, ModelError> {
    let stages = resolve_stages(manifest, corpus)?;
    let mut trainer = Trainer::new(confusion.clone());
    for _ in 0..passes {
        run_curriculum(&mut trainer, &stages);
    }
    Ok(trainer.into_model())
}

/// Repeat the curriculum until a whole pass makes no mistakes, or until
/// `max_passes`. Returns the model and the number of passes run.
pub fn train_to_convergence(
    manifest: &CurriculumManifest,
    corpus: &Corpus,
    confusion: &ConfusionSet,
    max_passes: usize,
) -> Result<(CorrectorModel, usize), ModelError> {
    let stages = resolve_stages(manifest, corpus)?;
    let mut trainer = Trainer::new(confusion.clone());
    let mut passes = 0;
    while passes < max_passes {
        passes += 1;
        if run_curriculum(&mut trainer, &stages) == 0 {
            break;
        }
    }
    Ok((trainer.into_model(), passes))
}
