//! Parallel spell-checking corpora and confusion sets.
//!
//! A corpus file is UTF-8 TSV with one `id<TAB>source<TAB>target` sample
//! per line and no header. Errors are substitution-only, so source and
//! target must have the same number of characters.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::rng::StageRng;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: source and target differ in length")]
    LengthMismatch { line: usize },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("line {0}: malformed line")]
    MalformedLine(usize),
}

/// Supported corpus layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// `id<TAB>source<TAB>target`
    #[default]
    IdSrcTgt,
}

/// Indices where `source` and `target` differ, ascending.
pub fn derive_error_positions(source: &[char], target: &[char]) -> Result<Vec<usize>, CorpusError> {
    if source.len() != target.len() {
        return Err(CorpusError::LengthMismatch { line: 0 });
    }
    Ok(source
        .iter()
        .zip(target)
        .enumerate()
        .filter_map(|(j, (s, t))| (s != t).then_some(j))
        .collect())
}

/// A (wrong, correct) sentence pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    id: String,
    source: Vec<char>,
    target: Vec<char>,
    error_positions: Vec<usize>,
}

impl Sample {
    pub fn new(id: impl Into<String>, source: &str, target: &str) -> Result<Self, CorpusError> {
        Self::from_chars(id, source.chars().collect(), target.chars().collect())
    }

    pub fn from_chars(
        id: impl Into<String>,
        source: Vec<char>,
        target: Vec<char>,
    ) -> Result<Self, CorpusError> {
        let error_positions = derive_error_positions(&source, &target)?;
        Ok(Self {
            id: id.into(),
            source,
            target,
            error_positions,
        })
    }

    /// A sample with no errors.
    pub fn clean(id: impl Into<String>, text: &str) -> Self {
        let chars: Vec<char> = text.chars().collect();
        Self {
            id: id.into(),
            source: chars.clone(),
            target: chars,
            error_positions: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn source(&self) -> &[char] {
        &self.source
    }

    pub fn target(&self) -> &[char] {
        &self.target
    }

    pub fn error_positions(&self) -> &[usize] {
        &self.error_positions
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn source_string(&self) -> String {
        self.source.iter().collect()
    }

    pub fn target_string(&self) -> String {
        self.target.iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    name: String,
    samples: Vec<Sample>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            samples,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.index.get(id).map(|&i| &self.samples[i])
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    pub fn char_count(&self) -> usize {
        self.samples.iter().map(Sample::len).sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let _ = writeln!(out, "{}\t{}\t{}", s.id, s.source_string(), s.target_string());
        }
        out
    }
}

/// Parse a corpus document. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn parse_corpus(name: &str, text: &str, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let CorpusFormat::IdSrcTgt = format;
    let mut samples = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(source), Some(target), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(CorpusError::MalformedLine(line_no));
        };
        if id.is_empty() {
            return Err(CorpusError::MalformedLine(line_no));
        }
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateId(id.to_string()));
        }
        let sample = Sample::new(id, source, target)
            .map_err(|_| CorpusError::LengthMismatch { line: line_no })?;
        samples.push(sample);
    }
    Corpus::new(name, samples)
}

/// Map from a character to the characters it is commonly confused with.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionSet {
    entries: BTreeMap<char, BTreeSet<char>>,
}

static EMPTY: BTreeSet<char> = BTreeSet::new();

impl ConfusionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `candidate` as a confusable of `head`. Self-entries are ignored.
    pub fn insert(&mut self, head: char, candidate: char) {
        if head != candidate {
            self.entries.entry(head).or_default().insert(candidate);
        }
    }

    /// Confusables of `c` in code-point order; empty when `c` is unknown.
    pub fn candidates(&self, c: char) -> &BTreeSet<char> {
        self.entries.get(&c).unwrap_or(&EMPTY)
    }

    pub fn contains(&self, head: char, candidate: char) -> bool {
        self.candidates(head).contains(&candidate)
    }

    pub fn heads(&self) -> impl Iterator<Item = char> + '_ {
        self.entries.keys().copied()
    }

    /// Number of (head, candidate) pairs.
    pub fn pair_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_count() == 0
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (head, cands) in &self.entries {
            if cands.is_empty() {
                continue;
            }
            let joined: String = cands.iter().collect();
            let _ = writeln!(out, "{head}\t{joined}");
        }
        out
    }
}

/// Parse `head<TAB>candidates` lines. Duplicate heads are merged.
pub fn parse_confusion_set(text: &str) -> Result<ConfusionSet, CorpusError> {
    let mut set = ConfusionSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let Some((head, cands)) = line.split_once('\t') else {
            return Err(CorpusError::MalformedLine(i + 1));
        };
        let mut head_chars = head.chars();
        let (Some(h), None) = (head_chars.next(), head_chars.next()) else {
            return Err(CorpusError::MalformedLine(i + 1));
        };
        if cands.contains('\t') {
            return Err(CorpusError::MalformedLine(i + 1));
        }
        set.entries.entry(h).or_default();
        for c in cands.chars() {
            set.insert(h, c);
        }
    }
    Ok(set)
}

/// Corrupt correct sentences by confusion-set substitution.
///
/// Every character of each sample's target with a non-empty confusion entry
/// is replaced with probability `rate` by a uniformly chosen confusable.
/// Draws come from `StageRng::new(seed, 0)` in corpus order: one unit draw per
/// eligible character, then one index draw for each replacement. `rate` is
/// clamped to `[0, 1]`; NaN counts as 0.
pub fn inject_errors(corpus: &Corpus, confusion: &ConfusionSet, rate: f64, seed: u64) -> Corpus {
    let rate = if rate.is_nan() { 0.0 } else { rate.clamp(0.0, 1.0) };
    let mut rng = StageRng::new(seed, 0);
    let samples = corpus
        .samples
        .iter()
        .map(|s| {
            let target = s.target.clone();
            let source: Vec<char> = target
                .iter()
                .map(|&c| {
                    let cands = confusion.candidates(c);
                    if cands.is_empty() || rng.unit() >= rate {
                        return c;
                    }
                    let pick = rng.below(cands.len() as u64) as usize;
                    *cands.iter().nth(pick).expect("index within candidate set")
                })
                .collect();
            Sample::from_chars(s.id.clone(), source, target).expect("substitution keeps length")
        })
        .collect();
    Corpus::new(corpus.name.clone(), samples).expect("ids already unique")
}
