//! Synthetic clean corpora for desk-scale experiments.
//!
//! A [`SyntheticLanguage`] is a small vocabulary of CJK characters, a
//! first-order Markov chain over it in which every character has a handful of
//! allowed successors, and a symmetric confusion set. Context is therefore
//! informative about which character belongs at a position, which is what a
//! corrector needs to undo injected confusions.

use crate::corpus::{ConfusionSet, Corpus, Sample};
use crate::rng::StageRng;

const VOCAB_BASE: u32 = 0x4e00;
const VOCAB_STRIDE: u32 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub vocab_size: usize,
    /// Directed (head, candidate) entries in the confusion set; rounded down
    /// to an even number since every pair is listed both ways.
    pub confusion_entries: usize,
    pub successors: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { vocab_size: 50, confusion_entries: 200, successors: 3, min_len: 8, max_len: 16 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticLanguage {
    vocab: Vec<char>,
    successors: Vec<Vec<usize>>,
    confusion: ConfusionSet,
    min_len: usize,
    max_len: usize,
}

fn distinct_sample(rng: &mut StageRng, n: usize, count: usize, exclude: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).filter(|&i| i != exclude).collect();
    let count = count.min(pool.len());
    for i in 0..count {
        let j = i + rng.below((pool.len() - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool.sort_unstable();
    pool
}

impl SyntheticLanguage {
    pub fn new(params: &SynthParams, seed: u64) -> Self {
        assert!(params.vocab_size >= 2, "vocabulary needs at least two characters");
        assert!(params.min_len >= 1 && params.min_len <= params.max_len, "bad length range");
        let n = params.vocab_size;
        let vocab: Vec<char> = (0..n as u32)
            .map(|i| char::from_u32(VOCAB_BASE + i * VOCAB_STRIDE).expect("CJK block"))
            .collect();

        let mut rng = StageRng::new(seed, 0);
        let successors = (0..n)
            .map(|i| distinct_sample(&mut rng, n, params.successors.max(1), i))
            .collect();

        let max_pairs = n * (n - 1) / 2;
        let pairs = (params.confusion_entries / 2).min(max_pairs);
        let mut confusion = ConfusionSet::new();
        let mut rng = StageRng::new(seed, 1);
        let mut made = 0;
        while made < pairs {
            let a = vocab[rng.below(n as u64) as usize];
            let b = vocab[rng.below(n as u64) as usize];
            if a == b || confusion.contains(a, b) {
                continue;
            }
            confusion.insert(a, b);
            confusion.insert(b, a);
            made += 1;
        }

        Self { vocab, successors, confusion, min_len: params.min_len, max_len: params.max_len }
    }

    pub fn vocab(&self) -> &[char] {
        &self.vocab
    }

    pub fn confusion(&self) -> &ConfusionSet {
        &self.confusion
    }

    /// `count` clean sentences with ids `{prefix}{index}`.
    pub fn sentences(&self, name: &str, prefix: &str, count: usize, seed: u64) -> Corpus {
        let mut rng = StageRng::new(seed, 2);
        let span = (self.max_len - self.min_len + 1) as u64;
        let samples = (0..count)
            .map(|i| {
                let len = self.min_len + rng.below(span) as usize;
                let mut cur = rng.below(self.vocab.len() as u64) as usize;
                let mut text = String::with_capacity(len * 3);
                for _ in 0..len {
                    text.push(self.vocab[cur]);
                    let next = &self.successors[cur];
                    cur = next[rng.below(next.len() as u64) as usize];
                }
                Sample::clean(format!("{prefix}{i}"), &text)
            })
            .collect();
        Corpus::new(name, samples).expect("generated ids are unique")
    }
}
