//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;

/// Whitespace pre-tokenization written from the rule, not from the library:
/// a whitespace run starts a new span, and when the run ends in U+0020 before a
/// non-whitespace character, that space moves to the following span.
pub fn oracle_spans(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            let start = i;
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            if !cur.is_empty() {
                spans.push(std::mem::take(&mut cur));
            }
            let run: String = chars[start..i].iter().collect();
            if i < chars.len() && chars[i - 1] == ' ' {
                let head: String = chars[start..i - 1].iter().collect();
                if !head.is_empty() {
                    spans.push(head);
                }
                cur.push(' ');
            } else {
                spans.push(run);
            }
        } else {
            cur.push(chars[i]);
            i += 1;
        }
    }
    if !cur.is_empty() {
        spans.push(cur);
    }
    spans
}

/// BPE by full recount after every merge. Ties: count, then smaller
/// concatenated bytes, then smaller (left, right) ids. Stops below count 2 and
/// never creates a byte string that is already a token.
pub fn naive_bpe(lines: &[String], vocab_size: usize) -> Vec<(u32, u32)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for l in lines {
        for s in oracle_spans(l) {
            *counts.entry(s).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<u32>, u64)> =
        counts.into_iter().map(|(w, c)| (w.bytes().map(u32::from).collect(), c)).collect();
    let mut vocab: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut merges = Vec::new();
    while vocab.len() < vocab_size {
        let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
        for (w, c) in &words {
            for p in w.windows(2) {
                *pairs.entry((p[0], p[1])).or_default() += c;
            }
        }
        let joined = |p: &(u32, u32)| [vocab[p.0 as usize].clone(), vocab[p.1 as usize].clone()].concat();
        let best = pairs
            .iter()
            .filter(|(p, &c)| c >= 2 && !vocab.contains(&joined(p)))
            .max_by(|(pa, ca), (pb, cb)| {
                ca.cmp(cb)
                    .then_with(|| joined(pb).cmp(&joined(pa)))
                    .then_with(|| pb.cmp(pa))
            })
            .map(|(p, _)| *p);
        let Some(best) = best else { break };
        let id = vocab.len() as u32;
        vocab.push(joined(&best));
        merges.push(best);
        for (w, _) in &mut words {
            let mut out = Vec::with_capacity(w.len());
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && (w[i], w[i + 1]) == best {
                    out.push(id);
                    i += 2;
                } else {
                    out.push(w[i]);
                    i += 1;
                }
            }
            *w = out;
        }
    }
    merges
}

/// Maximum total score over every segmentation of `text` into vocabulary
/// entries, by exhaustive recursion.
pub fn brute_best_score(vocab: &[Vec<u8>], scores: &[f64], text: &[u8]) -> f64 {
    fn go(vocab: &[Vec<u8>], scores: &[f64], rest: &[u8]) -> f64 {
        if rest.is_empty() {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for (tok, &s) in vocab.iter().zip(scores) {
            if rest.starts_with(tok) {
                let v = s + go(vocab, scores, &rest[tok.len()..]);
                if v > best {
                    best = v;
                }
            }
        }
        best
    }
    go(vocab, scores, text)
}

/// Random text over a few small alphabets and spaces.
pub fn random_text(rng: &mut impl Rng, max_chars: usize, alphabet: &[char]) -> String {
    let n = rng.gen_range(0..=max_chars);
    (0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

/// Any valid scalar value, biased towards a mix of scripts and whitespace.
pub fn random_char(rng: &mut impl Rng) -> char {
    const POOLS: [(u32, u32); 8] = [
        (0x20, 0x7e),
        (0xa0, 0x24f),
        (0x400, 0x4ff),
        (0x600, 0x6ff),
        (0x900, 0x97f),
        (0x4e00, 0x4fff),
        (0x1f300, 0x1f5ff),
        (0x2000, 0x200a),
    ];
    if rng.gen_bool(0.05) {
        loop {
            if let Some(c) = char::from_u32(rng.gen_range(0..0x110000)) {
                return c;
            }
        }
    }
    let (lo, hi) = POOLS[rng.gen_range(0..POOLS.len())];
    char::from_u32(rng.gen_range(lo..=hi)).unwrap_or(' ')
}

use std::path::Path;

use montok_core::pipeline::{ExperimentManifest, LanguageEntry};
use montok_core::synth::{write_corpora, SynthLanguage};

/// Writes synthetic corpora for `langs` under `dir` and returns a manifest
/// over them (first language is the reference).
pub fn synthetic_manifest(
    dir: &Path,
    langs: &[SynthLanguage],
    corpus_bytes: usize,
    eval_lines: usize,
    vocab_grid: Vec<usize>,
) -> ExperimentManifest {
    let files = write_corpora(&dir.join("data"), langs, 11, corpus_bytes, eval_lines).unwrap();
    let entries = files
        .into_iter()
        .map(|f| LanguageEntry {
            tag: f.tag,
            corpus_paths: vec![f.train],
            eval_path: f.eval,
            phoneme_count: None,
        })
        .collect();
    let mut m = ExperimentManifest::new(entries, &langs[0].tag);
    m.train_bytes = corpus_bytes as u64;
    m.vocab_grid = vocab_grid;
    m.output_dir = dir.join("out");
    m
}

/// Every file under `root`, relative path to contents, sorted.
pub fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
