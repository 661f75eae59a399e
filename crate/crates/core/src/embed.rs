//! Per-position contextual representations of character sequences.
//!
//! Two providers are available: [`HashedEmbedder`], a deterministic
//! feature-hashing encoder over a symmetric character window, and
//! [`FileEmbeddings`], which serves vectors produced by an external encoder
//! through the embedding file format:
//!
//! ```text
//! dim=<d>
//! sample_id<TAB>source|target<TAB>position<TAB>v1,v2,...,vd
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Corpus, Sample};

pub const DEFAULT_WINDOW: usize = 2;
pub const DEFAULT_DIM: usize = 64;

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("line {line}: expected {expected} components, found {found}")]
    DimMismatch { line: usize, expected: usize, found: usize },
    #[error("missing position {position} for {sample_id}/{side}")]
    MissingPosition { sample_id: String, side: Side, position: usize },
    #[error("line {0}: malformed line")]
    MalformedLine(usize),
    #[error("no embedding for {sample_id}/{side}")]
    MissingEmbedding { sample_id: String, side: Side },
    #[error("embedding for {sample_id}/{side} has {found} positions, sequence has {expected}")]
    LengthMismatch { sample_id: String, side: Side, expected: usize, found: usize },
    #[error("invalid hashed embedder parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Source,
    Target,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Source => "source",
            Side::Target => "target",
        })
    }
}

impl FromStr for Side {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "source" => Ok(Side::Source),
            "target" => Ok(Side::Target),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEmbedding {
    pub sample_id: String,
    pub side: Side,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl ContextualEmbedding {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub type EmbeddingMap = BTreeMap<(String, Side), ContextualEmbedding>;

/// Anything able to produce contextual vectors for one side of a sample.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn is_deterministic(&self) -> bool {
        true
    }

    fn embed(&self, sample: &Sample, side: Side) -> Result<ContextualEmbedding, EmbedError>;
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Hash key of a (character, offset) context feature: the character's UTF-8
/// bytes followed by the offset as one signed byte.
fn feature_hash(c: char, offset: i8) -> u64 {
    let mut buf = [0u8; 5];
    let n = c.encode_utf8(&mut buf[..4]).len();
    buf[n] = offset as u8;
    fnv1a64(&buf[..=n])
}

/// Feature-hashed contextual vectors, one per position.
///
/// Position `j` accumulates a signed unit at `hash % dim` for every in-bounds
/// neighbour `j + o`, `o` in `-window..=window`; the sign is negative when
/// bit 63 of the hash is set. Vectors are left unnormalized.
pub fn hashed_embed(sequence: &[char], window: usize, dim: usize) -> Vec<Vec<f64>> {
    let w = window as isize;
    let n = sequence.len() as isize;
    (0..n)
        .map(|j| {
            let mut v = vec![0.0f64; dim];
            for o in -w..=w {
                let p = j + o;
                if p < 0 || p >= n {
                    continue;
                }
                let h = feature_hash(sequence[p as usize], o as i8);
                let idx = (h % dim as u64) as usize;
                v[idx] += if h >> 63 == 0 { 1.0 } else { -1.0 };
            }
            v
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedder {
    window: usize,
    dim: usize,
}

impl HashedEmbedder {
    pub fn new(window: usize, dim: usize) -> Result<Self, EmbedError> {
        if dim < 2 {
            return Err(EmbedError::InvalidParameters(format!("dim must be at least 2, got {dim}")));
        }
        if window > i8::MAX as usize {
            return Err(EmbedError::InvalidParameters(format!(
                "window must fit in a signed byte, got {window}"
            )));
        }
        Ok(Self { window, dim })
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW, dim: DEFAULT_DIM }
    }
}

impl EmbeddingProvider for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sample: &Sample, side: Side) -> Result<ContextualEmbedding, EmbedError> {
        let seq = match side {
            Side::Source => sample.source(),
            Side::Target => sample.target(),
        };
        Ok(ContextualEmbedding {
            sample_id: sample.id().to_string(),
            side,
            dim: self.dim,
            vectors: hashed_embed(seq, self.window, self.dim),
        })
    }
}

/// Vectors loaded from an embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileEmbeddings {
    dim: usize,
    map: EmbeddingMap,
}

impl FileEmbeddings {
    pub fn parse(text: &str) -> Result<Self, EmbedError> {
        let map = load_embeddings(text)?;
        let dim = parse_header(text)?;
        Ok(Self { dim, map })
    }

    pub fn map(&self) -> &EmbeddingMap {
        &self.map
    }
}

impl EmbeddingProvider for FileEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sample: &Sample, side: Side) -> Result<ContextualEmbedding, EmbedError> {
        let emb = self
            .map
            .get(&(sample.id().to_string(), side))
            .ok_or_else(|| EmbedError::MissingEmbedding { sample_id: sample.id().to_string(), side })?;
        if emb.len() != sample.len() {
            return Err(EmbedError::LengthMismatch {
                sample_id: sample.id().to_string(),
                side,
                expected: sample.len(),
                found: emb.len(),
            });
        }
        Ok(emb.clone())
    }
}

fn parse_header(text: &str) -> Result<usize, EmbedError> {
    let first = text.lines().next().ok_or(EmbedError::MalformedLine(1))?;
    first
        .trim_end_matches('\r')
        .strip_prefix("dim=")
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&d| d > 0)
        .ok_or(EmbedError::MalformedLine(1))
}

/// Parse an embedding document into per-(sample, side) embeddings.
///
/// Lines may come in any order, but every group must cover positions
/// `0..len` exactly once.
pub fn load_embeddings(text: &str) -> Result<EmbeddingMap, EmbedError> {
    let dim = parse_header(text)?;
    let mut groups: HashMap<(String, Side), BTreeMap<usize, Vec<f64>>> = HashMap::new();
    for (i, raw) in text.lines().enumerate().skip(1) {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, side, pos, values] = fields[..] else {
            return Err(EmbedError::MalformedLine(line_no));
        };
        let side: Side = side.parse().map_err(|_| EmbedError::MalformedLine(line_no))?;
        let pos: usize = pos.parse().map_err(|_| EmbedError::MalformedLine(line_no))?;
        let vector = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| EmbedError::MalformedLine(line_no))?;
        if vector.len() != dim {
            return Err(EmbedError::DimMismatch { line: line_no, expected: dim, found: vector.len() });
        }
        let group = groups.entry((id.to_string(), side)).or_default();
        if group.insert(pos, vector).is_some() {
            return Err(EmbedError::MalformedLine(line_no));
        }
    }

    let mut out = EmbeddingMap::new();
    for ((sample_id, side), positions) in groups {
        let mut vectors = Vec::with_capacity(positions.len());
        for (expected, (pos, v)) in positions.into_iter().enumerate() {
            if pos != expected {
                return Err(EmbedError::MissingPosition { sample_id, side, position: expected });
            }
            vectors.push(v);
        }
        out.insert(
            (sample_id.clone(), side),
            ContextualEmbedding { sample_id, side, dim, vectors },
        );
    }
    Ok(out)
}

/// Serialize embeddings in the file format; floats use shortest round-trip
/// decimal.
pub fn write_embeddings(dim: usize, embeddings: &EmbeddingMap) -> String {
    let mut out = format!("dim={dim}\n");
    for ((id, side), emb) in embeddings {
        for (j, v) in emb.vectors.iter().enumerate() {
            let values: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "{id}\t{side}\t{j}\t{}", values.join(","));
        }
    }
    out
}

/// Embed both sides of every sample.
pub fn embed_corpus(corpus: &Corpus, provider: &dyn EmbeddingProvider) -> Result<EmbeddingMap, EmbedError> {
    let pairs = corpus
        .samples()
        .par_iter()
        .map(|s| Ok((provider.embed(s, Side::Source)?, provider.embed(s, Side::Target)?)))
        .collect::<Result<Vec<_>, EmbedError>>()?;
    let mut out = EmbeddingMap::new();
    for (src, tgt) in pairs {
        out.insert((src.sample_id.clone(), Side::Source), src);
        out.insert((tgt.sample_id.clone(), Side::Target), tgt);
    }
    Ok(out)
}
