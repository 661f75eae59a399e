//! Curriculum arrangement.
//!
//! The annealing arrangement sorts samples by ascending difficulty (ties by
//! id), cuts the sorted list into `k` contiguous subsets `S_1..S_k`, and cuts
//! each subset again into `k` contiguous parts. Stage `i` (for `i <= k`) takes
//! part `i` of every subset, so each stage mixes easy and hard strata while
//! difficulty still rises stage over stage. Stage `k + 1` replays the full
//! set. Every stage is shuffled with its own `(seed, stage)` stream.
//!
//! When a list does not divide evenly, the earlier pieces get one extra
//! element each.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::difficulty::DifficultyRecord;
use crate::rng::shuffle_with;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CurriculumError {
    #[error("k = {k} exceeds the number of samples ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no samples to arrange")]
    EmptyInput,
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrangementPolicy {
    Annealing,
    SortedOnly,
    RandomStages,
    ShuffledBaseline,
}

impl ArrangementPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            ArrangementPolicy::Annealing => "annealing",
            ArrangementPolicy::SortedOnly => "sorted_only",
            ArrangementPolicy::RandomStages => "random_stages",
            ArrangementPolicy::ShuffledBaseline => "shuffled_baseline",
        }
    }
}

impl fmt::Display for ArrangementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArrangementPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "annealing" => Ok(ArrangementPolicy::Annealing),
            "sorted_only" => Ok(ArrangementPolicy::SortedOnly),
            "random_stages" => Ok(ArrangementPolicy::RandomStages),
            "shuffled_baseline" => Ok(ArrangementPolicy::ShuffledBaseline),
            _ => Err(format!("unknown arrangement policy `{s}`")),
        }
    }
}

/// Ordered training stages plus the metadata needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurriculumManifest {
    pub policy: ArrangementPolicy,
    pub k: usize,
    pub seed: u64,
    pub corpus: String,
    pub stages: Vec<Vec<String>>,
}

impl CurriculumManifest {
    pub fn named(mut self, corpus: impl Into<String>) -> Self {
        self.corpus = corpus.into();
        self
    }

    /// Number of distinct sample ids across all stages.
    pub fn sample_count(&self) -> usize {
        self.stages.iter().flatten().collect::<HashSet<_>>().len()
    }
}

/// Sizes of `parts` contiguous pieces of a list of `n`, front-loaded.
pub fn balanced_sizes(n: usize, parts: usize) -> Vec<usize> {
    let (base, extra) = (n / parts, n % parts);
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Split a slice into `parts` contiguous pieces with [`balanced_sizes`].
pub fn balanced_split<T>(items: &[T], parts: usize) -> Vec<&[T]> {
    let mut rest = items;
    balanced_sizes(items.len(), parts)
        .into_iter()
        .map(|size| {
            let (head, tail) = rest.split_at(size);
            rest = tail;
            head
        })
        .collect()
}

fn check_unique<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<(), CurriculumError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CurriculumError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

fn check_k(k: usize, n: usize) -> Result<(), CurriculumError> {
    if n == 0 {
        return Err(CurriculumError::EmptyInput);
    }
    if k == 0 {
        return Err(CurriculumError::ZeroK);
    }
    if k > n {
        return Err(CurriculumError::KTooLarge { k, n });
    }
    Ok(())
}

/// Records sorted by ascending score, ties broken by id.
pub fn sort_by_difficulty(records: &[DifficultyRecord]) -> Vec<&DifficultyRecord> {
    let mut sorted: Vec<&DifficultyRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.sample_id.cmp(&b.sample_id)));
    sorted
}

/// The annealing strata before any shuffling: `strata[j][i]` holds the ids of
/// part `i` of subset `j` (both 0-based).
pub fn annealing_strata(records: &[DifficultyRecord], k: usize) -> Result<Vec<Vec<Vec<String>>>, CurriculumError> {
    check_k(k, records.len())?;
    check_unique(records.iter().map(|r| r.sample_id.as_str()))?;
    let sorted: Vec<String> = sort_by_difficulty(records).into_iter().map(|r| r.sample_id.clone()).collect();
    Ok(balanced_split(&sorted, k)
        .into_iter()
        .map(|subset| balanced_split(subset, k).into_iter().map(<[String]>::to_vec).collect())
        .collect())
}

/// Stages `1..=k` of the annealing arrangement, unshuffled.
pub fn annealing_stages_unshuffled(
    records: &[DifficultyRecord],
    k: usize,
) -> Result<Vec<Vec<String>>, CurriculumError> {
    let strata = annealing_strata(records, k)?;
    Ok((0..k)
        .map(|i| strata.iter().flat_map(|subset| subset[i].iter().cloned()).collect())
        .collect())
}

pub fn arrange_annealing(
    records: &[DifficultyRecord],
    k: usize,
    seed: u64,
) -> Result<CurriculumManifest, CurriculumError> {
    let mut stages = annealing_stages_unshuffled(records, k)?;
    for (i, stage) in stages.iter_mut().enumerate() {
        shuffle_with(stage, seed, i as u64 + 1);
    }
    let mut all: Vec<String> = sort_by_difficulty(records).into_iter().map(|r| r.sample_id.clone()).collect();
    shuffle_with(&mut all, seed, k as u64 + 1);
    stages.push(all);
    Ok(CurriculumManifest {
        policy: ArrangementPolicy::Annealing,
        k,
        seed,
        corpus: String::new(),
        stages,
    })
}

/// One unshuffled stage in ascending difficulty.
pub fn arrange_sorted_only(records: &[DifficultyRecord], seed: u64) -> Result<CurriculumManifest, CurriculumError> {
    if records.is_empty() {
        return Err(CurriculumError::EmptyInput);
    }
    check_unique(records.iter().map(|r| r.sample_id.as_str()))?;
    let stage = sort_by_difficulty(records).into_iter().map(|r| r.sample_id.clone()).collect();
    Ok(CurriculumManifest {
        policy: ArrangementPolicy::SortedOnly,
        k: 1,
        seed,
        corpus: String::new(),
        stages: vec![stage],
    })
}

/// `k` stages of randomly chosen samples, then the full set.
pub fn arrange_random_stages(ids: &[String], k: usize, seed: u64) -> Result<CurriculumManifest, CurriculumError> {
    check_k(k, ids.len())?;
    check_unique(ids.iter().map(String::as_str))?;
    let mut shuffled = ids.to_vec();
    shuffle_with(&mut shuffled, seed, 0);
    let mut stages: Vec<Vec<String>> = balanced_split(&shuffled, k).into_iter().map(<[String]>::to_vec).collect();
    let mut all = ids.to_vec();
    shuffle_with(&mut all, seed, k as u64 + 1);
    stages.push(all);
    Ok(CurriculumManifest {
        policy: ArrangementPolicy::RandomStages,
        k,
        seed,
        corpus: String::new(),
        stages,
    })
}

pub fn arrange_shuffled_baseline(ids: &[String], seed: u64) -> Result<CurriculumManifest, CurriculumError> {
    if ids.is_empty() {
        return Err(CurriculumError::EmptyInput);
    }
    check_unique(ids.iter().map(String::as_str))?;
    let mut all = ids.to_vec();
    shuffle_with(&mut all, seed, 0);
    Ok(CurriculumManifest {
        policy: ArrangementPolicy::ShuffledBaseline,
        k: 1,
        seed,
        corpus: String::new(),
        stages: vec![all],
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    policy: ArrangementPolicy,
    k: usize,
    seed: u64,
    corpus: String,
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageLine {
    stage: usize,
    ids: Vec<String>,
}

/// JSON-lines manifest: a metadata line, then one line per stage in
/// training order.
pub fn write_manifest(manifest: &CurriculumManifest) -> String {
    let header = HeaderLine {
        policy: manifest.policy,
        k: manifest.k,
        seed: manifest.seed,
        corpus: manifest.corpus.clone(),
        n: manifest.sample_count(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (i, ids) in manifest.stages.iter().enumerate() {
        let line = StageLine { stage: i + 1, ids: ids.clone() };
        out.push_str(&serde_json::to_string(&line).expect("stage serializes"));
        out.push('\n');
    }
    out
}

pub fn read_manifest(text: &str) -> Result<CurriculumManifest, CurriculumError> {
    let bad = |msg: String| CurriculumError::MalformedManifest(msg);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: HeaderLine = serde_json::from_str(lines.next().ok_or_else(|| bad("empty document".into()))?)
        .map_err(|e| bad(format!("header: {e}")))?;
    if header.k == 0 {
        return Err(bad("k must be positive".into()));
    }

    let mut stages = Vec::new();
    for line in lines {
        let stage: StageLine = serde_json::from_str(line).map_err(|e| bad(format!("stage line: {e}")))?;
        if stage.stage != stages.len() + 1 {
            return Err(bad(format!("expected stage {}, found {}", stages.len() + 1, stage.stage)));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = stage.ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(bad(format!("stage {} repeats id `{dup}`", stage.stage)));
        }
        stages.push(stage.ids);
    }

    let expected_stages = match header.policy {
        ArrangementPolicy::Annealing | ArrangementPolicy::RandomStages => header.k + 1,
        ArrangementPolicy::SortedOnly | ArrangementPolicy::ShuffledBaseline => 1,
    };
    if stages.len() != expected_stages {
        return Err(bad(format!("{} policy needs {expected_stages} stages, found {}", header.policy, stages.len())));
    }
    let manifest = CurriculumManifest {
        policy: header.policy,
        k: header.k,
        seed: header.seed,
        corpus: header.corpus,
        stages,
    };
    if manifest.sample_count() != header.n {
        return Err(bad(format!("header declares {} samples, stages hold {}", header.n, manifest.sample_count())));
    }
    Ok(manifest)
}
