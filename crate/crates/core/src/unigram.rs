//! Unigram language-model tokenizer: frequent-substring seeding, hard-EM
//! re-estimation with likelihood-based pruning, and Viterbi segmentation.
//!
//! Expected counts come from the single best (Viterbi) segmentation of each
//! pre-token rather than from forward-backward marginals.

use std::collections::HashMap;

use crate::bpe::count_spans;
use crate::corpus::ScaledSubset;
use crate::error::{Error, Result};
use crate::model::{byte_vocab, Provenance, TokenId, TokenizerModel, BYTE_TOKENS};
use crate::pretok::{pretokenize, PreTokenizerSpec};

/// Pseudo-count that keeps unused byte tokens reachable.
const BYTE_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnigramTrainConfig {
    pub vocab_size: usize,
    /// Seed vocabulary size as a multiple of `vocab_size`.
    pub seed_multiplier: f64,
    /// Fraction of removable tokens pruned per round.
    pub prune_fraction: f64,
    pub max_token_chars: usize,
    pub em_rounds_per_prune: usize,
}

impl UnigramTrainConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            seed_multiplier: 4.0,
            prune_fraction: 0.25,
            max_token_chars: 16,
            em_rounds_per_prune: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= BYTE_TOKENS {
            return Err(Error::VocabTooSmall(self.vocab_size));
        }
        if self.seed_multiplier.is_nan() || self.seed_multiplier <= 1.0 {
            return Err(Error::InvalidConfig("seed_multiplier must exceed 1".into()));
        }
        if !(self.prune_fraction > 0.0 && self.prune_fraction < 1.0) {
            return Err(Error::InvalidConfig("prune_fraction must lie in (0, 1)".into()));
        }
        if self.max_token_chars < 2 {
            return Err(Error::InvalidConfig("max_token_chars must be at least 2".into()));
        }
        if self.em_rounds_per_prune == 0 {
            return Err(Error::InvalidConfig("em_rounds_per_prune must be at least 1".into()));
        }
        Ok(())
    }
}

/// Training-corpus log-likelihood after every EM step, one vector per phase
/// (a phase being the EM rounds between two pruning steps).
#[derive(Debug, Clone, Default)]
pub struct UnigramTrace {
    pub phases: Vec<Vec<f64>>,
}

pub fn train_unigram(
    subset: &ScaledSubset,
    cfg: &UnigramTrainConfig,
    pretok: PreTokenizerSpec,
) -> Result<TokenizerModel> {
    train_unigram_from_lines(subset.lines(), cfg, pretok, subset.provenance())
}

pub fn train_unigram_from_lines<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    cfg: &UnigramTrainConfig,
    pretok: PreTokenizerSpec,
    provenance: Provenance,
) -> Result<TokenizerModel> {
    train_unigram_traced(lines, cfg, pretok, provenance).map(|(m, _)| m)
}

pub fn train_unigram_traced<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    cfg: &UnigramTrainConfig,
    pretok: PreTokenizerSpec,
    provenance: Provenance,
) -> Result<(TokenizerModel, UnigramTrace)> {
    cfg.validate()?;
    let words = count_spans(lines, &pretok)?;
    let mut trainer = Trainer::seed(&words, cfg);
    let mut trace = UnigramTrace::default();
    loop {
        let phase = trainer.em_phase(&words, cfg.em_rounds_per_prune);
        trace.phases.push(phase);
        if !trainer.prune(cfg) {
            break;
        }
    }
    let model = trainer.finish(pretok, provenance)?;
    Ok((model, trace))
}

struct Trainer {
    tokens: Vec<Vec<u8>>,
    trie: Trie,
    alive: Vec<bool>,
    /// Counts from the latest segmentation (or seed frequencies before the first).
    counts: Vec<f64>,
    logp: Vec<f64>,
}

impl Trainer {
    fn seed(words: &[(&str, u64)], cfg: &UnigramTrainConfig) -> Self {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        let mut byte_freq = [0u64; 256];
        for &(word, count) in words {
            for b in word.bytes() {
                byte_freq[b as usize] += count;
            }
            let bounds: Vec<usize> = word
                .char_indices()
                .map(|(i, _)| i)
                .chain(std::iter::once(word.len()))
                .collect();
            let nchars = bounds.len() - 1;
            for i in 0..nchars {
                for j in i + 1..=nchars.min(i + cfg.max_token_chars) {
                    let sub = &word[bounds[i]..bounds[j]];
                    if sub.len() >= 2 {
                        *freq.entry(sub).or_default() += count;
                    }
                }
            }
        }
        let mut ranked: Vec<(u64, &str)> = freq
            .into_iter()
            .filter(|&(_, f)| f >= 2)
            .map(|(s, f)| (f * s.chars().count() as u64, s))
            .collect();
        ranked.sort_unstable_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let seed_size = (cfg.seed_multiplier * cfg.vocab_size as f64).ceil() as usize;
        ranked.truncate(seed_size.saturating_sub(BYTE_TOKENS));

        let mut tokens = byte_vocab();
        let mut counts: Vec<f64> = byte_freq.iter().map(|&f| f as f64).collect();
        for &(score, s) in &ranked {
            tokens.push(s.as_bytes().to_vec());
            counts.push((score / s.chars().count() as u64) as f64);
        }
        let trie = Trie::build(&tokens);
        let alive = vec![true; tokens.len()];
        let mut t = Self {
            tokens,
            trie,
            alive,
            logp: Vec::new(),
            counts,
        };
        t.logp = t.floored_logp();
        t
    }

    /// Normalized log-probabilities from `counts`, with a pseudo-count for every
    /// unused byte so any string stays segmentable.
    fn floored_logp(&self) -> Vec<f64> {
        let adjusted: Vec<f64> = self
            .counts
            .iter()
            .enumerate()
            .map(|(id, &c)| match (self.alive[id], id < BYTE_TOKENS) {
                (false, _) => 0.0,
                (true, true) if c == 0.0 => BYTE_FLOOR,
                _ => c,
            })
            .collect();
        normalize(&adjusted)
    }

    /// Hard-EM rounds; returns the likelihood under each successive parameter set.
    fn em_phase(&mut self, words: &[(&str, u64)], rounds: usize) -> Vec<f64> {
        self.logp = self.floored_logp();
        let mut trace = Vec::with_capacity(rounds + 1);
        for _ in 0..rounds {
            let (ll, counts) = self.expected_counts(words);
            trace.push(ll);
            self.counts = counts;
            self.logp = normalize(&self.counts);
        }
        let (ll, counts) = self.expected_counts(words);
        trace.push(ll);
        self.counts = counts;
        trace
    }

    fn expected_counts(&self, words: &[(&str, u64)]) -> (f64, Vec<f64>) {
        let mut counts = vec![0.0; self.tokens.len()];
        let mut ll = 0.0;
        for &(word, c) in words {
            let (score, ids) = viterbi(&self.trie, &self.logp, word.as_bytes())
                .expect("byte fallback keeps every word segmentable");
            ll += c as f64 * score;
            for id in ids {
                counts[id as usize] += c as f64;
            }
        }
        (ll, counts)
    }

    /// Removes the cheapest tokens; returns false once the target size is reached.
    fn prune(&mut self, cfg: &UnigramTrainConfig) -> bool {
        let removable: Vec<usize> = (BYTE_TOKENS..self.tokens.len())
            .filter(|&id| self.alive[id])
            .collect();
        let alive_total = BYTE_TOKENS + removable.len();
        if alive_total <= cfg.vocab_size {
            return false;
        }
        let logp = self.floored_logp();
        let mut scored: Vec<(f64, usize)> = removable
            .iter()
            .map(|&id| {
                let count = self.counts[id];
                if count == 0.0 {
                    return (0.0, id);
                }
                let mut without = logp.clone();
                without[id] = f64::NEG_INFINITY;
                let alt = viterbi(&self.trie, &without, &self.tokens[id])
                    .map(|(s, _)| s)
                    .unwrap_or(f64::NEG_INFINITY);
                (count * (logp[id] - alt), id)
            })
            .collect();
        scored.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| self.tokens[a.1].cmp(&self.tokens[b.1]))
        });
        let quota = ((cfg.prune_fraction * removable.len() as f64).floor() as usize)
            .max(1)
            .min(alive_total - cfg.vocab_size);
        for &(_, id) in scored.iter().take(quota) {
            self.alive[id] = false;
            self.counts[id] = 0.0;
        }
        true
    }

    fn finish(self, pretok: PreTokenizerSpec, provenance: Provenance) -> Result<TokenizerModel> {
        let mut kept: Vec<usize> = (BYTE_TOKENS..self.tokens.len())
            .filter(|&id| self.alive[id] && self.counts[id] > 0.0)
            .collect();
        kept.sort_by(|&a, &b| {
            self.counts[b]
                .total_cmp(&self.counts[a])
                .then_with(|| self.tokens[a].cmp(&self.tokens[b]))
        });
        let order: Vec<usize> = (0..BYTE_TOKENS).chain(kept).collect();
        let raw: Vec<f64> = order
            .iter()
            .map(|&id| {
                let c = self.counts[id];
                if c == 0.0 {
                    BYTE_FLOOR
                } else {
                    c
                }
            })
            .collect();
        let scores = normalize(&raw);
        let vocab = order.iter().map(|&id| self.tokens[id].clone()).collect();
        TokenizerModel::unigram(vocab, scores, pretok, provenance)
    }
}

fn normalize(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    counts
        .iter()
        .map(|&c| {
            if c > 0.0 {
                (c / total).ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Byte trie over token strings.
#[derive(Debug, Clone)]
pub(crate) struct Trie {
    nodes: Vec<TrieNode>,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: Vec<(u8, u32)>,
    token: Option<TokenId>,
}

impl Trie {
    pub(crate) fn build(tokens: &[Vec<u8>]) -> Self {
        let mut nodes = vec![TrieNode::default()];
        for (id, bytes) in tokens.iter().enumerate() {
            let mut node = 0usize;
            for &b in bytes {
                node = match nodes[node].children.iter().find(|(k, _)| *k == b) {
                    Some(&(_, child)) => child as usize,
                    None => {
                        nodes.push(TrieNode::default());
                        let child = nodes.len() - 1;
                        nodes[node].children.push((b, child as u32));
                        child
                    }
                };
            }
            nodes[node].token = Some(id as TokenId);
        }
        for n in &mut nodes {
            n.children.sort_unstable();
        }
        Self { nodes }
    }

    /// Calls `f(token, byte_len)` for every token that is a prefix of `bytes`.
    fn prefixes(&self, bytes: &[u8], mut f: impl FnMut(TokenId, usize)) {
        let mut node = 0usize;
        for (i, b) in bytes.iter().enumerate() {
            let children = &self.nodes[node].children;
            match children.binary_search_by_key(b, |&(k, _)| k) {
                Ok(pos) => node = children[pos].1 as usize,
                Err(_) => return,
            }
            if let Some(tok) = self.nodes[node].token {
                f(tok, i + 1);
            }
        }
    }
}

/// Best-scoring segmentation of `bytes`; ties prefer fewer tokens, then a
/// longer token further left. Tokens with a non-finite score are unusable.
pub(crate) fn viterbi(trie: &Trie, scores: &[f64], bytes: &[u8]) -> Option<(f64, Vec<TokenId>)> {
    let n = bytes.len();
    // best[i] = (score, tokens, first token, its length) for the suffix starting at i
    let mut best: Vec<Option<(f64, usize, TokenId, usize)>> = vec![None; n + 1];
    best[n] = Some((0.0, 0, 0, 0));
    for i in (0..n).rev() {
        let mut cur: Option<(f64, usize, TokenId, usize)> = None;
        trie.prefixes(&bytes[i..], |tok, len| {
            let s = scores[tok as usize];
            if !s.is_finite() {
                return;
            }
            let Some((rest, rest_n, _, _)) = best[i + len] else { return };
            let cand = (s + rest, rest_n + 1, tok, len);
            let better = match cur {
                None => true,
                Some(c) => {
                    cand.0 > c.0
                        || (cand.0 == c.0 && (cand.1 < c.1 || (cand.1 == c.1 && cand.3 > c.3)))
                }
            };
            if better {
                cur = Some(cand);
            }
        });
        best[i] = cur;
    }
    let (score, ntok, _, _) = best[0]?;
    let mut ids = Vec::with_capacity(ntok);
    let mut i = 0;
    while i < n {
        let (_, _, tok, len) = best[i].expect("reachable position");
        ids.push(tok);
        i += len;
    }
    Some((score, ids))
}

/// Compiled Viterbi segmenter for a unigram model.
#[derive(Debug, Clone)]
pub struct ViterbiEncoder {
    trie: Trie,
    scores: Vec<f64>,
    pretok: PreTokenizerSpec,
}

impl ViterbiEncoder {
    pub fn new(model: &TokenizerModel) -> Result<Self> {
        if model.algorithm() != crate::model::Algorithm::Unigram {
            return Err(Error::WrongAlgorithm {
                expected: "unigram",
                actual: model.algorithm().to_string(),
            });
        }
        Ok(Self {
            trie: Trie::build(model.vocab()),
            scores: model.scores().to_vec(),
            pretok: *model.pretokenizer(),
        })
    }

    pub fn pretokenizer(&self) -> &PreTokenizerSpec {
        &self.pretok
    }

    pub fn encode_span(&self, bytes: &[u8]) -> Vec<TokenId> {
        viterbi(&self.trie, &self.scores, bytes)
            .expect("byte tokens cover every input")
            .1
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        pretokenize(text, &self.pretok)
            .into_iter()
            .flat_map(|span| self.encode_span(span.as_bytes()))
            .collect()
    }

    /// Sum of token log-probabilities of a segmentation.
    pub fn score(&self, ids: &[TokenId]) -> f64 {
        ids.iter().map(|&id| self.scores[id as usize]).sum()
    }
}

/// Maximum-probability segmentation of `text` under a unigram model.
pub fn viterbi_encode(model: &TokenizerModel, text: &str) -> Result<Vec<TokenId>> {
    Ok(ViterbiEncoder::new(model)?.encode(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> TokenizerModel {
        let mut vocab = byte_vocab();
        vocab.push(b"ab".to_vec());
        let mut scores = vec![-3.0; 256];
        scores.push(-1.0);
        TokenizerModel::unigram(vocab, scores, PreTokenizerSpec::whitespace(), Provenance::default())
            .unwrap()
    }

    #[test]
    fn prefers_whole_token() {
        let m = toy_model();
        assert_eq!(viterbi_encode(&m, "ab").unwrap(), vec![256]);
        assert_eq!(viterbi_encode(&m, "ba").unwrap(), vec![b'b' as u32, b'a' as u32]);
    }

    #[test]
    fn ties_prefer_fewer_then_longer_left() {
        let mut vocab = byte_vocab();
        for t in [&b"ab"[..], b"bc", b"abc"] {
            vocab.push(t.to_vec());
        }
        // "abc" alone ties with "ab"+"c" on score but uses fewer tokens
        let mut scores = vec![-1.0; 256];
        scores.extend([-1.0, -1.0, -2.0]);
        let m = TokenizerModel::unigram(vocab, scores, PreTokenizerSpec::none(), Provenance::default())
            .unwrap();
        assert_eq!(viterbi_encode(&m, "abc").unwrap(), vec![258]);
        // "ab"+"c" and "a"+"bc" tie on score and count; the longer left token wins
        let mut vocab = byte_vocab();
        vocab.push(b"ab".to_vec());
        vocab.push(b"bc".to_vec());
        let mut scores = vec![-1.0; 256];
        scores.extend([-1.0, -1.0]);
        let m = TokenizerModel::unigram(vocab, scores, PreTokenizerSpec::none(), Provenance::default())
            .unwrap();
        assert_eq!(viterbi_encode(&m, "abc").unwrap(), vec![256, b'c' as u32]);
    }

    #[test]
    fn wrong_algorithm_rejected() {
        let bpe = crate::bpe::train_bpe_from_lines(["aa aa"], 258, PreTokenizerSpec::whitespace(), Provenance::default()).unwrap();
        assert!(matches!(viterbi_encode(&bpe, "a"), Err(Error::WrongAlgorithm { .. })));
    }

    #[test]
    fn degenerate_corpus_keeps_bytes_only() {
        let m = train_unigram_from_lines(["a"], &UnigramTrainConfig::new(300), PreTokenizerSpec::whitespace(), Provenance::default()).unwrap();
        assert_eq!(m.vocab_size(), 256);
        assert!(m.scores().iter().all(|s| s.is_finite()));
    }

    #[test]
    fn config_validation() {
        let mut cfg = UnigramTrainConfig::new(256);
        assert!(matches!(cfg.validate(), Err(Error::VocabTooSmall(256))));
        cfg.vocab_size = 300;
        cfg.prune_fraction = 1.0;
        assert!(cfg.validate().is_err());
        cfg.prune_fraction = 0.25;
        cfg.seed_multiplier = 1.0;
        assert!(cfg.validate().is_err());
        assert!(matches!(
            train_unigram_from_lines(Vec::<&str>::new(), &UnigramTrainConfig::new(300), PreTokenizerSpec::whitespace(), Provenance::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn em_likelihood_never_drops_within_a_phase() {
        let lines = [
            "the cat sat on the mat with the hat",
            "a cat and a hat and a mat",
            "that is the thing that matters",
            "mathematics is the art of giving the same name to different things",
        ];
        let corpus: Vec<&str> = lines.iter().cycle().take(40).copied().collect();
        let mut cfg = UnigramTrainConfig::new(280);
        cfg.em_rounds_per_prune = 4;
        let (model, trace) = train_unigram_traced(corpus.iter().copied(), &cfg, PreTokenizerSpec::whitespace(), Provenance::default()).unwrap();
        assert!(trace.phases.len() > 1);
        for phase in &trace.phases {
            for w in phase.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{phase:?}");
            }
        }
        assert!(model.vocab_size() <= 280);
        let enc = ViterbiEncoder::new(&model).unwrap();
        for line in lines {
            assert_eq!(model.decode(&enc.encode(line)).unwrap(), line);
        }
    }

    #[test]
    fn bytes_survive_pruning() {
        let corpus = ["abcabc abcabc xyz xyz", "hello hello"];
        let m = train_unigram_from_lines(corpus, &UnigramTrainConfig::new(258), PreTokenizerSpec::whitespace(), Provenance::default()).unwrap();
        for b in 0..=255u8 {
            assert_eq!(m.token_bytes(b as u32), Some(&[b][..]));
        }
        assert!(m.vocab_size() <= 258);
    }

    #[test]
    fn repeated_abab_keeps_the_whole_word() {
        // [ab, ab] and [abab] both reach probability 1 per word if the other
        // token is dropped; one token per word wins once byte mass is reserved
        let corpus = vec!["abab"; 20];
        let m = train_unigram_from_lines(corpus, &UnigramTrainConfig::new(258), PreTokenizerSpec::whitespace(), Provenance::default()).unwrap();
        let extra: Vec<&[u8]> = (256..m.vocab_size() as u32).filter_map(|id| m.token_bytes(id)).collect();
        assert_eq!(extra, vec![&b"abab"[..]]);
        assert_eq!(viterbi_encode(&m, "abab").unwrap().len(), 1);
    }
}
