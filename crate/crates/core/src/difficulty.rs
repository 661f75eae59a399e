//! Per-sample difficulty scores.
//!
//! The contextual score of a sample is the sum, over its error positions, of
//! the cosine similarity between the wrong and the correct sentence's
//! contextual vectors at that position. More errors, and errors whose wrong
//! character reads like the right one in context, make a sample harder.
//!
//! The character-similarity scorer counts error positions whose
//! (wrong, correct) pair is listed in the confusion set, in either direction.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ConfusionSet, Corpus, Sample};
use crate::embed::{ContextualEmbedding, EmbedError, EmbeddingProvider, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DifficultyError {
    #[error("zero-norm vector")]
    ZeroNormVector,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding shape does not match sample `{0}`")]
    ShapeMismatch(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("line {0}: malformed difficulty line")]
    MalformedLine(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringPolicy {
    Contextual,
    CharSimilarity,
}

impl fmt::Display for ScoringPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringPolicy::Contextual => "contextual",
            ScoringPolicy::CharSimilarity => "char_similarity",
        })
    }
}

impl FromStr for ScoringPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "contextual" => Ok(ScoringPolicy::Contextual),
            "char_similarity" | "char-similarity" => Ok(ScoringPolicy::CharSimilarity),
            other => Err(format!("unknown scoring policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyRecord {
    pub sample_id: String,
    pub score: f64,
    pub policy: ScoringPolicy,
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, DifficultyError> {
    if u.len() != v.len() {
        return Err(DifficultyError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(DifficultyError::ZeroNormVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Sum of error-position cosines between source and target embeddings.
///
/// A zero-norm vector at an error position contributes 0 and is logged.
pub fn score_contextual(
    sample: &Sample,
    src: &ContextualEmbedding,
    tgt: &ContextualEmbedding,
) -> Result<DifficultyRecord, DifficultyError> {
    let shape_ok = src.len() == sample.len()
        && tgt.len() == sample.len()
        && src.dim == tgt.dim
        && src.vectors.iter().chain(&tgt.vectors).all(|v| v.len() == src.dim);
    if !shape_ok {
        return Err(DifficultyError::ShapeMismatch(sample.id().to_string()));
    }
    let mut score = 0.0;
    for &j in sample.error_positions() {
        match cosine(&src.vectors[j], &tgt.vectors[j]) {
            Ok(c) => score += c,
            Err(DifficultyError::ZeroNormVector) => {
                log::warn!("sample {}: zero-norm embedding at position {j}, similarity taken as 0", sample.id());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(DifficultyRecord {
        sample_id: sample.id().to_string(),
        score,
        policy: ScoringPolicy::Contextual,
    })
}

pub fn score_char_similarity(sample: &Sample, confusion: &ConfusionSet) -> DifficultyRecord {
    let (src, tgt) = (sample.source(), sample.target());
    let hits = sample
        .error_positions()
        .iter()
        .filter(|&&j| confusion.contains(src[j], tgt[j]) || confusion.contains(tgt[j], src[j]))
        .count();
    DifficultyRecord {
        sample_id: sample.id().to_string(),
        score: hits as f64,
        policy: ScoringPolicy::CharSimilarity,
    }
}

/// What a corpus is scored with.
#[derive(Clone, Copy)]
pub enum Scorer<'a> {
    Contextual(&'a dyn EmbeddingProvider),
    CharSimilarity(&'a ConfusionSet),
}

impl Scorer<'_> {
    pub fn policy(&self) -> ScoringPolicy {
        match self {
            Scorer::Contextual(_) => ScoringPolicy::Contextual,
            Scorer::CharSimilarity(_) => ScoringPolicy::CharSimilarity,
        }
    }
}

/// One record per sample, in corpus order.
pub fn score_corpus(corpus: &Corpus, scorer: Scorer<'_>) -> Result<Vec<DifficultyRecord>, DifficultyError> {
    corpus
        .samples()
        .par_iter()
        .map(|s| match scorer {
            Scorer::Contextual(provider) => {
                let src = provider.embed(s, Side::Source)?;
                let tgt = provider.embed(s, Side::Target)?;
                score_contextual(s, &src, &tgt)
            }
            Scorer::CharSimilarity(confusion) => Ok(score_char_similarity(s, confusion)),
        })
        .collect()
}

/// `sample_id<TAB>score<TAB>policy`, scores at 9 decimal places.
pub fn write_difficulties(records: &[DifficultyRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "{}\t{:.9}\t{}", r.sample_id, r.score, r.policy);
    }
    out
}

pub fn read_difficulties(text: &str) -> Result<Vec<DifficultyRecord>, DifficultyError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let bad = || DifficultyError::MalformedLine(i + 1);
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, score, policy] = fields[..] else {
            return Err(bad());
        };
        let score: f64 = score.parse().map_err(|_| bad())?;
        if !score.is_finite() || id.is_empty() {
            return Err(bad());
        }
        out.push(DifficultyRecord {
            sample_id: id.to_string(),
            score,
            policy: policy.parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), 0.70710678, epsilon = 1e-8);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap_err(), DifficultyError::ZeroNormVector);
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(DifficultyError::DimensionMismatch(1, 2))));
    }

    #[test]
    fn cosine_is_clamped() {
        let u = [0.1, 0.2, 0.3];
        let c = cosine(&u, &u).unwrap();
        assert!(c <= 1.0);
        let neg = [-0.1, -0.2, -0.3];
        assert!(cosine(&u, &neg).unwrap() >= -1.0);
    }

    fn emb(id: &str, side: Side, vectors: Vec<Vec<f64>>) -> ContextualEmbedding {
        ContextualEmbedding { sample_id: id.into(), side, dim: vectors[0].len(), vectors }
    }

    #[test]
    fn clean_sample_scores_zero() {
        let s = Sample::clean("a", "AB");
        let e = emb("a", Side::Source, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let r = score_contextual(&s, &e, &e).unwrap();
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn zero_norm_contributes_nothing() {
        let s = Sample::new("a", "AX", "BY").unwrap();
        let src = emb("a", Side::Source, vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let tgt = emb("a", Side::Target, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(score_contextual(&s, &src, &tgt).unwrap().score, 1.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let s = Sample::new("a", "AXZ", "BYZ").unwrap();
        let e = emb("a", Side::Source, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(score_contextual(&s, &e, &e), Err(DifficultyError::ShapeMismatch(_))));
    }

    #[test]
    fn char_similarity_indicator_sum() {
        let mut conf = ConfusionSet::new();
        conf.insert('戴', '带');
        conf.insert('在', '再');
        assert_eq!(score_char_similarity(&Sample::clean("a", "他戴着"), &conf).score, 0.0);
        let one = Sample::new("b", "他带着", "他戴着").unwrap();
        assert_eq!(score_char_similarity(&one, &conf).score, 1.0);
        // 带→戴 listed under the correct char, 再→在 under the wrong one, 日→月 absent.
        let three = Sample::new("c", "带再日", "戴在月").unwrap();
        assert_eq!(score_char_similarity(&three, &conf).score, 2.0);
    }

    #[test]
    fn difficulty_file_round_trip() {
        let records = vec![
            DifficultyRecord { sample_id: "a".into(), score: 1.25, policy: ScoringPolicy::Contextual },
            DifficultyRecord { sample_id: "b".into(), score: -0.5, policy: ScoringPolicy::CharSimilarity },
        ];
        let text = write_difficulties(&records);
        assert_eq!(text, "a\t1.250000000\tcontextual\nb\t-0.500000000\tchar_similarity\n");
        assert_eq!(read_difficulties(&text).unwrap(), records);
        assert!(read_difficulties("a\tx\tcontextual\n").is_err());
        assert!(read_difficulties("a\t1\tother\n").is_err());
    }
}
