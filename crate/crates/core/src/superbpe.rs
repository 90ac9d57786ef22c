//! Two-phase superword BPE.
//!
//! Phase one is plain whitespace-bounded BPE up to the transition point. Phase
//! two re-reads every line as a single span, segments it with the phase-one
//! merges and keeps merging, so tokens may span several words.

use std::collections::HashMap;

use crate::bpe::{self, MergeEncoder, MergeLearner, Word};
use crate::corpus::ScaledSubset;
use crate::error::{Error, Result};
use crate::model::{Algorithm, Provenance, TokenId, TokenizerModel, BYTE_TOKENS};
use crate::pretok::{PreTokenizerMode, PreTokenizerSpec};

pub const DEFAULT_TRANSITION_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperBpeConfig {
    pub vocab_size: usize,
    pub transition_fraction: f64,
    pub base_pretok: PreTokenizerSpec,
}

impl SuperBpeConfig {
    pub fn new(vocab_size: usize, transition_fraction: f64) -> Self {
        Self {
            vocab_size,
            transition_fraction,
            base_pretok: PreTokenizerSpec::whitespace(),
        }
    }

    pub fn transition_point(&self) -> usize {
        (self.transition_fraction * self.vocab_size as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size <= BYTE_TOKENS {
            return Err(Error::VocabTooSmall(self.vocab_size));
        }
        if !(self.transition_fraction > 0.0 && self.transition_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "transition fraction {} outside (0, 1)",
                self.transition_fraction
            )));
        }
        if self.base_pretok.mode != PreTokenizerMode::Whitespace {
            return Err(Error::InvalidConfig("phase one needs whitespace pre-tokenization".into()));
        }
        let t = self.transition_point();
        if t <= BYTE_TOKENS {
            return Err(Error::TransitionTooSmall(t));
        }
        Ok(())
    }
}

pub fn train_superbpe(subset: &ScaledSubset, cfg: &SuperBpeConfig) -> Result<TokenizerModel> {
    train_superbpe_from_lines(subset.lines(), cfg, subset.provenance())
}

pub fn train_superbpe_from_lines<'a>(
    lines: impl IntoIterator<Item = &'a str> + Clone,
    cfg: &SuperBpeConfig,
    provenance: Provenance,
) -> Result<TokenizerModel> {
    cfg.validate()?;
    let phase_one = bpe::train_bpe_from_lines(
        lines.clone(),
        cfg.transition_point(),
        cfg.base_pretok,
        provenance.clone(),
    )?;
    let transition_point = phase_one.vocab_size();
    let merges = phase_one.merges().to_vec();

    let segmenter = MergeEncoder::from_merges(&merges, PreTokenizerSpec::none());
    let mut line_counts: HashMap<&str, u64> = HashMap::new();
    for line in lines {
        if !line.is_empty() {
            *line_counts.entry(line).or_default() += 1;
        }
    }
    let mut unique: Vec<(&str, u64)> = line_counts.into_iter().collect();
    unique.sort_unstable();
    let words: Vec<Word> = unique
        .into_iter()
        .map(|(line, count)| Word {
            symbols: segmenter.encode_span(line.as_bytes()),
            count,
        })
        .collect();

    let mut learner = MergeLearner::new(merges, words);
    learner.run(cfg.vocab_size);
    TokenizerModel::from_merges(
        Algorithm::SuperBpe,
        learner.into_merges(),
        PreTokenizerSpec::none(),
        transition_point,
        provenance,
    )
}

/// True when no whitespace byte follows a non-whitespace byte inside the token,
/// i.e. the token does not straddle a word boundary.
pub fn is_within_word(bytes: &[u8]) -> bool {
    let text = String::from_utf8_lossy(bytes);
    let mut seen_word = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if seen_word {
                return false;
            }
        } else {
            seen_word = true;
        }
    }
    true
}

/// Merge ids learned after the transition point.
pub fn phase_two_tokens(model: &TokenizerModel) -> impl Iterator<Item = TokenId> + '_ {
    let start = model.transition_point().max(BYTE_TOKENS);
    (start..model.vocab_size()).map(|id| id as TokenId)
}
