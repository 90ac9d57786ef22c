use std::collections::HashMap;

use rayon::prelude::*;

use crate::bpe::MergeEncoder;
use crate::model::{TokenId, TokenizerModel};
use crate::pretok::{pretokenize, PreTokenizerSpec};
use crate::unigram::ViterbiEncoder;

const BATCH_CHUNK: usize = 256;

/// Compiled encoding state for any trained model.
#[derive(Debug, Clone)]
pub enum Encoder {
    Merge(MergeEncoder),
    Viterbi(ViterbiEncoder),
}

impl Encoder {
    pub fn new(model: &TokenizerModel) -> Self {
        if model.algorithm().uses_merges() {
            Encoder::Merge(MergeEncoder::new(model).expect("merge-based model"))
        } else {
            Encoder::Viterbi(ViterbiEncoder::new(model).expect("unigram model"))
        }
    }

    fn pretok(&self) -> &PreTokenizerSpec {
        match self {
            Encoder::Merge(m) => m.pretokenizer(),
            Encoder::Viterbi(v) => v.pretokenizer(),
        }
    }

    pub fn encode_span(&self, span: &[u8]) -> Vec<TokenId> {
        match self {
            Encoder::Merge(m) => m.encode_span(span),
            Encoder::Viterbi(v) => v.encode_span(span),
        }
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        for span in pretokenize(text, self.pretok()) {
            out.extend(self.encode_span(span.as_bytes()));
        }
        out
    }

    fn encode_cached<'a>(
        &self,
        text: &'a str,
        cache: &mut HashMap<&'a str, Vec<TokenId>>,
        out: &mut Vec<TokenId>,
    ) {
        for span in pretokenize(text, self.pretok()) {
            let ids = cache
                .entry(span)
                .or_insert_with(|| self.encode_span(span.as_bytes()));
            out.extend_from_slice(ids);
        }
    }

    /// Encodes many lines in parallel, memoizing repeated pre-tokens.
    pub fn encode_batch<'a>(&self, lines: impl IntoIterator<Item = &'a str>) -> Vec<Vec<TokenId>> {
        let lines: Vec<&str> = lines.into_iter().collect();
        lines
            .par_chunks(BATCH_CHUNK)
            .flat_map_iter(|chunk| {
                let mut cache = HashMap::new();
                chunk
                    .iter()
                    .map(|line| {
                        let mut out = Vec::new();
                        self.encode_cached(line, &mut cache, &mut out);
                        out
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Total token count over `lines`.
    pub fn count_tokens<'a>(&self, lines: impl IntoIterator<Item = &'a str>) -> u64 {
        self.encode_batch(lines).iter().map(|ids| ids.len() as u64).sum()
    }
}
