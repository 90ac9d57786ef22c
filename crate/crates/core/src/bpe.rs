//! Byte-level BPE: incremental merge learning and rank-ordered encoding.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::corpus::ScaledSubset;
use crate::error::{Error, Result};
use crate::model::{Algorithm, Pair, Provenance, TokenId, TokenizerModel, BYTE_TOKENS};
use crate::pretok::{pretokenize, PreTokenizerSpec};

/// Stop once the best remaining pair occurs fewer times than this.
pub const MIN_PAIR_COUNT: u64 = 2;

/// Trains a BPE model on the lines of `subset`.
pub fn train_bpe(
    subset: &ScaledSubset,
    vocab_size: usize,
    pretok: PreTokenizerSpec,
) -> Result<TokenizerModel> {
    train_bpe_from_lines(subset.lines(), vocab_size, pretok, subset.provenance())
}

pub fn train_bpe_from_lines<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    vocab_size: usize,
    pretok: PreTokenizerSpec,
    provenance: Provenance,
) -> Result<TokenizerModel> {
    if vocab_size <= BYTE_TOKENS {
        return Err(Error::VocabTooSmall(vocab_size));
    }
    let words = count_spans(lines, &pretok)?;
    let mut learner = MergeLearner::new(Vec::new(), byte_words(words));
    learner.run(vocab_size);
    TokenizerModel::from_merges(Algorithm::Bpe, learner.into_merges(), pretok, 0, provenance)
}

/// Counts distinct pre-token spans. Lines never join, so no span crosses a line break.
pub(crate) fn count_spans<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    pretok: &PreTokenizerSpec,
) -> Result<Vec<(&'a str, u64)>> {
    let mut counts: HashMap<&'a str, u64> = HashMap::new();
    for line in lines {
        for span in pretokenize(line, pretok) {
            *counts.entry(span).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut words: Vec<_> = counts.into_iter().collect();
    words.sort_unstable();
    Ok(words)
}

pub(crate) fn byte_words(words: Vec<(&str, u64)>) -> Vec<Word> {
    words
        .into_iter()
        .map(|(s, count)| Word {
            symbols: s.bytes().map(TokenId::from).collect(),
            count,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct Word {
    pub symbols: Vec<TokenId>,
    pub count: u64,
}

impl Word {
    /// Replaces non-overlapping occurrences of `pair`, scanning left to right.
    fn merge(&mut self, pair: Pair, new_id: TokenId) -> bool {
        let mut out = Vec::with_capacity(self.symbols.len());
        let mut i = 0;
        let mut changed = false;
        while i < self.symbols.len() {
            if i + 1 < self.symbols.len() && (self.symbols[i], self.symbols[i + 1]) == pair {
                out.push(new_id);
                i += 2;
                changed = true;
            } else {
                out.push(self.symbols[i]);
                i += 1;
            }
        }
        if changed {
            self.symbols = out;
        }
        changed
    }
}

/// Heap entry ordered by count, then by smaller concatenated bytes, then smaller ids.
#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    bytes: Vec<u8>,
    pair: Pair,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.bytes.cmp(&self.bytes))
            .then_with(|| other.pair.cmp(&self.pair))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy merge learner over weighted symbol sequences.
///
/// Pair counts are maintained incrementally; heap entries may be stale and are
/// revalidated on pop. Counts of pairs not involving a freshly created token can
/// only fall, so every stale entry over-estimates and the first valid pop is the
/// true maximum.
pub(crate) struct MergeLearner {
    vocab: Vec<Vec<u8>>,
    merges: Vec<Pair>,
    words: Vec<Word>,
    pair_counts: HashMap<Pair, u64>,
    locations: HashMap<Pair, Vec<u32>>,
    heap: BinaryHeap<Candidate>,
    /// Byte strings already in the vocabulary; a pair that would recreate one
    /// under a different parent split is never merged.
    known: HashSet<Vec<u8>>,
}

impl MergeLearner {
    /// `merges` are already-learned merges (their tokens are rebuilt from bytes);
    /// `words` must be expressed in that vocabulary.
    pub fn new(merges: Vec<Pair>, words: Vec<Word>) -> Self {
        let mut vocab = crate::model::byte_vocab();
        for &(l, r) in &merges {
            let joined = [vocab[l as usize].as_slice(), vocab[r as usize].as_slice()].concat();
            vocab.push(joined);
        }
        let mut pair_counts: HashMap<Pair, u64> = HashMap::new();
        let mut locations: HashMap<Pair, Vec<u32>> = HashMap::new();
        for (idx, word) in words.iter().enumerate() {
            for w in word.symbols.windows(2) {
                let pair = (w[0], w[1]);
                *pair_counts.entry(pair).or_default() += word.count;
                let locs = locations.entry(pair).or_default();
                if locs.last() != Some(&(idx as u32)) {
                    locs.push(idx as u32);
                }
            }
        }
        let known = vocab.iter().cloned().collect();
        let mut learner = Self {
            known,
            vocab,
            merges,
            words,
            pair_counts,
            locations,
            heap: BinaryHeap::new(),
        };
        let initial: Vec<Candidate> = learner
            .pair_counts
            .iter()
            .map(|(&pair, &count)| learner.candidate(pair, count))
            .collect();
        learner.heap = BinaryHeap::from(initial);
        learner
    }

    fn candidate(&self, pair: Pair, count: u64) -> Candidate {
        let bytes = [
            self.vocab[pair.0 as usize].as_slice(),
            self.vocab[pair.1 as usize].as_slice(),
        ]
        .concat();
        Candidate { count, bytes, pair }
    }

    /// Learns merges until the vocabulary reaches `vocab_size` or no pair occurs
    /// at least [`MIN_PAIR_COUNT`] times.
    pub fn run(&mut self, vocab_size: usize) {
        while self.vocab.len() < vocab_size {
            let Some(best) = self.pop_best() else { break };
            self.apply(best);
        }
    }

    fn pop_best(&mut self) -> Option<Pair> {
        while let Some(top) = self.heap.pop() {
            let current = self.pair_counts.get(&top.pair).copied().unwrap_or(0);
            if current != top.count {
                if current > 0 {
                    self.heap.push(Candidate {
                        count: current,
                        ..top
                    });
                }
                continue;
            }
            if current < MIN_PAIR_COUNT {
                return None;
            }
            if self.known.contains(&top.bytes) {
                continue;
            }
            return Some(top.pair);
        }
        None
    }

    fn apply(&mut self, pair: Pair) {
        let new_id = self.vocab.len() as TokenId;
        let joined = [
            self.vocab[pair.0 as usize].as_slice(),
            self.vocab[pair.1 as usize].as_slice(),
        ]
        .concat();
        self.known.insert(joined.clone());
        self.vocab.push(joined);
        self.merges.push(pair);

        let mut word_ids = self.locations.remove(&pair).unwrap_or_default();
        word_ids.sort_unstable();
        word_ids.dedup();

        let mut grown: Vec<Pair> = Vec::new();
        for idx in word_ids {
            let word = &mut self.words[idx as usize];
            let before = word.symbols.clone();
            if !word.merge(pair, new_id) {
                continue;
            }
            let count = word.count;
            for w in before.windows(2) {
                let p = (w[0], w[1]);
                if let Some(c) = self.pair_counts.get_mut(&p) {
                    *c -= count;
                    if *c == 0 {
                        self.pair_counts.remove(&p);
                    }
                }
            }
            for w in word.symbols.windows(2) {
                let p = (w[0], w[1]);
                *self.pair_counts.entry(p).or_default() += count;
                if p.0 == new_id || p.1 == new_id {
                    grown.push(p);
                    let locs = self.locations.entry(p).or_default();
                    if locs.last() != Some(&idx) {
                        locs.push(idx);
                    }
                }
            }
        }
        self.pair_counts.remove(&pair);
        grown.sort_unstable();
        grown.dedup();
        for p in grown {
            if let Some(&count) = self.pair_counts.get(&p) {
                let cand = self.candidate(p, count);
                self.heap.push(cand);
            }
        }
    }

    pub fn into_merges(self) -> Vec<Pair> {
        self.merges
    }
}

/// Applies merges to byte sequences in rank order, lowest rank and leftmost first.
#[derive(Debug, Clone)]
pub struct MergeEncoder {
    ranks: HashMap<Pair, u32>,
    pretok: PreTokenizerSpec,
}

impl MergeEncoder {
    pub fn new(model: &TokenizerModel) -> Result<Self> {
        if !model.algorithm().uses_merges() {
            return Err(Error::WrongAlgorithm {
                expected: "bpe or superbpe",
                actual: model.algorithm().to_string(),
            });
        }
        Ok(Self::from_merges(model.merges(), *model.pretokenizer()))
    }

    pub(crate) fn from_merges(merges: &[Pair], pretok: PreTokenizerSpec) -> Self {
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(rank, &pair)| (pair, rank as u32))
            .collect();
        Self { ranks, pretok }
    }

    pub fn pretokenizer(&self) -> &PreTokenizerSpec {
        &self.pretok
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(text.len() / 2);
        for span in pretokenize(text, &self.pretok) {
            out.extend(self.encode_span(span.as_bytes()));
        }
        out
    }

    /// Encodes a single pre-token without further splitting.
    pub fn encode_span(&self, bytes: &[u8]) -> Vec<TokenId> {
        let mut symbols: Vec<TokenId> = bytes.iter().map(|&b| TokenId::from(b)).collect();
        if symbols.len() < 2 || self.ranks.is_empty() {
            return symbols;
        }
        let n = symbols.len();
        // Doubly linked list over positions; `usize::MAX` marks the ends.
        let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
        let mut next: Vec<usize> = (1..=n).collect();
        next[n - 1] = usize::MAX;
        let mut alive = vec![true; n];
        let mut heap: BinaryHeap<Reverse<(u32, usize)>> = BinaryHeap::new();
        for i in 0..n - 1 {
            if let Some(&rank) = self.ranks.get(&(symbols[i], symbols[i + 1])) {
                heap.push(Reverse((rank, i)));
            }
        }
        while let Some(Reverse((rank, i))) = heap.pop() {
            if !alive[i] {
                continue;
            }
            let j = next[i];
            if j == usize::MAX || self.ranks.get(&(symbols[i], symbols[j])) != Some(&rank) {
                continue;
            }
            symbols[i] = (BYTE_TOKENS as u32) + rank;
            alive[j] = false;
            let k = next[j];
            next[i] = k;
            if k != usize::MAX {
                prev[k] = i;
                if let Some(&r) = self.ranks.get(&(symbols[i], symbols[k])) {
                    heap.push(Reverse((r, i)));
                }
            }
            let p = prev[i];
            if p != usize::MAX {
                if let Some(&r) = self.ranks.get(&(symbols[p], symbols[i])) {
                    heap.push(Reverse((r, p)));
                }
            }
        }
        let mut out = Vec::new();
        let mut i = 0;
        while i != usize::MAX {
            out.push(symbols[i]);
            i = next[i];
        }
        out
    }
}

/// Encodes `text` with a BPE or SuperBPE model.
pub fn encode(model: &TokenizerModel, text: &str) -> Result<Vec<TokenId>> {
    Ok(MergeEncoder::new(model)?.encode(text))
}
