//! Language-tagged corpora, byte-budgeted subsets, parallel encoding ratios and
//! evaluation-set contamination screening.

use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::model::{Provenance, TokenId, TokenizerModel};

/// Checks the `xxx_yyyy` shape (ISO 639-3 + ISO 15924, lowercase).
pub fn validate_language_tag(tag: &str) -> Result<()> {
    let ok = tag.len() == 8
        && tag.as_bytes()[3] == b'_'
        && tag[..3].bytes().all(|b| b.is_ascii_lowercase())
        && tag[4..].bytes().all(|b| b.is_ascii_lowercase());
    if ok {
        Ok(())
    } else {
        Err(Error::BadLanguageTag(tag.to_string()))
    }
}

/// Converts `\r\n` and lone `\r` to `\n`.
fn normalize_newlines(text: &str) -> String {
    if !text.contains('\r') {
        return text.to_string();
    }
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Byte ranges of the lines of `text`, excluding the terminating `\n`.
fn line_ranges(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            out.push(start..i);
            start = i + 1;
        }
    }
    if start < text.len() {
        out.push(start..text.len());
    }
    out
}

/// A language-tagged text corpus held in memory after newline normalization.
#[derive(Debug, Clone)]
pub struct CorpusHandle {
    language_tag: String,
    source_paths: Vec<PathBuf>,
    text: Arc<str>,
    lines: Arc<[Range<usize>]>,
}

impl CorpusHandle {
    pub fn from_text(language_tag: &str, text: &str) -> Result<Self> {
        validate_language_tag(language_tag)?;
        let text = normalize_newlines(text);
        let lines = line_ranges(&text);
        Ok(Self {
            language_tag: language_tag.to_string(),
            source_paths: Vec::new(),
            text: Arc::from(text),
            lines: lines.into(),
        })
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn source_paths(&self) -> &[PathBuf] {
        &self.source_paths
    }

    pub fn total_bytes(&self) -> u64 {
        self.text.len() as u64
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn line(&self, idx: usize) -> &str {
        &self.text[self.lines[idx].clone()]
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> + Clone + '_ {
        self.lines.iter().map(move |r| &self.text[r.clone()])
    }

    /// Bytes a line occupies in the corpus, including its newline if present.
    fn stored_len(&self, idx: usize) -> u64 {
        let r = &self.lines[idx];
        let newline = usize::from(r.end < self.text.len());
        (r.len() + newline) as u64
    }
}

/// Reads and concatenates `paths` in order.
///
/// Files are joined with a newline when a file does not already end in one.
pub fn ingest_corpus<P: AsRef<Path>>(paths: &[P], language_tag: &str) -> Result<CorpusHandle> {
    validate_language_tag(language_tag)?;
    if paths.is_empty() {
        return Err(Error::MissingFile("no corpus files given".into()));
    }
    let mut text = String::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        let decoded = String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
            path: path.to_path_buf(),
            offset: e.utf8_error().valid_up_to(),
        })?;
        if !text.is_empty() && !text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(&decoded);
    }
    let mut handle = CorpusHandle::from_text(language_tag, &text)?;
    handle.source_paths = paths.iter().map(|p| p.as_ref().to_path_buf()).collect();
    Ok(handle)
}

/// Loads a file of one segment per line, e.g. an evaluation set.
pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    let text = String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })?;
    let text = normalize_newlines(&text);
    Ok(line_ranges(&text).into_iter().map(|r| text[r].to_string()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    None,
    BytePremium,
}

impl Scaling {
    pub fn as_str(self) -> &'static str {
        match self {
            Scaling::None => "none",
            Scaling::BytePremium => "byte_premium",
        }
    }
}

impl std::fmt::Display for Scaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Contiguous whole lines of a corpus, selected by a byte budget.
#[derive(Debug, Clone)]
pub struct ScaledSubset {
    parent: CorpusHandle,
    requested_bytes: u64,
    actual_bytes: u64,
    scaling: Scaling,
    byte_premium_used: f64,
    seed: u64,
    exhausted: bool,
    ranges: Vec<Range<usize>>,
}

impl ScaledSubset {
    pub fn parent(&self) -> &CorpusHandle {
        &self.parent
    }
    pub fn requested_bytes(&self) -> u64 {
        self.requested_bytes
    }
    pub fn actual_bytes(&self) -> u64 {
        self.actual_bytes
    }
    pub fn scaling(&self) -> Scaling {
        self.scaling
    }
    pub fn byte_premium_used(&self) -> f64 {
        self.byte_premium_used
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    /// True when the whole corpus was taken before the budget was met.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// Byte budget after premium scaling.
    pub fn budget(&self) -> u64 {
        budget(self.requested_bytes, self.scaling, self.byte_premium_used)
    }

    pub fn line_count(&self) -> usize {
        self.ranges.iter().map(|r| r.len()).sum()
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> + Clone + '_ {
        self.ranges
            .iter()
            .flat_map(|r| r.clone())
            .map(move |i| self.parent.line(i))
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            language_tag: self.parent.language_tag.clone(),
            training_bytes: self.actual_bytes,
            seed: self.seed,
        }
    }
}

fn budget(requested: u64, scaling: Scaling, premium: f64) -> u64 {
    match scaling {
        Scaling::None => requested,
        Scaling::BytePremium => (requested as f64 * premium).round() as u64,
    }
}

/// Takes whole lines in corpus order, wrapping around, from a seeded start line
/// until the budget is met. The line that crosses the budget is included.
pub fn sample_bytes(
    corpus: &CorpusHandle,
    requested_bytes: u64,
    scaling: Scaling,
    byte_premium: f64,
    seed: u64,
) -> Result<ScaledSubset> {
    if requested_bytes == 0 {
        return Err(Error::InvalidConfig("requested_bytes must be at least 1".into()));
    }
    let premium = match scaling {
        Scaling::None => 1.0,
        Scaling::BytePremium => {
            if !(byte_premium.is_finite() && byte_premium > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "byte premium must be positive, got {byte_premium}"
                )));
            }
            byte_premium
        }
    };
    let n = corpus.line_count();
    if n == 0 || corpus.total_bytes() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let target = budget(requested_bytes, scaling, premium);
    let start = ChaCha8Rng::seed_from_u64(seed).gen_range(0..n);

    let mut taken = 0u64;
    let mut count = 0usize;
    while count < n && taken < target {
        taken += corpus.stored_len((start + count) % n);
        count += 1;
    }
    let exhausted = count == n && taken < target;
    let end = start + count;
    let mut ranges = Vec::with_capacity(2);
    ranges.push(start..end.min(n));
    if end > n {
        ranges.push(0..end - n);
    }
    Ok(ScaledSubset {
        parent: corpus.clone(),
        requested_bytes,
        actual_bytes: taken,
        scaling,
        byte_premium_used: premium,
        seed,
        exhausted,
        ranges,
    })
}

/// Two line-aligned corpora; `lang_b` is the reference side.
#[derive(Debug, Clone)]
pub struct ParallelPair {
    lang_a: CorpusHandle,
    lang_b: CorpusHandle,
}

impl ParallelPair {
    pub fn new(lang_a: CorpusHandle, lang_b: CorpusHandle) -> Result<Self> {
        if lang_a.line_count() != lang_b.line_count() {
            return Err(Error::LengthMismatch(lang_a.line_count(), lang_b.line_count()));
        }
        Ok(Self { lang_a, lang_b })
    }

    pub fn load(
        path_a: impl AsRef<Path>,
        tag_a: &str,
        path_b: impl AsRef<Path>,
        tag_b: &str,
    ) -> Result<Self> {
        Self::new(
            ingest_corpus(&[path_a], tag_a)?,
            ingest_corpus(&[path_b], tag_b)?,
        )
    }

    pub fn sentence_count(&self) -> usize {
        self.lang_a.line_count()
    }

    pub fn lang_a(&self) -> &CorpusHandle {
        &self.lang_a
    }

    pub fn lang_b(&self) -> &CorpusHandle {
        &self.lang_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingRatios {
    pub byte_premium: f64,
    pub length_ratio: f64,
    pub byte_coefficient: f64,
}

/// Byte, character and bytes-per-character ratios of `lang_a` over `lang_b`.
/// Newlines are not counted.
pub fn encoding_ratios(pair: &ParallelPair) -> Result<EncodingRatios> {
    let a: Vec<&str> = pair.lang_a.lines().collect();
    let b: Vec<&str> = pair.lang_b.lines().collect();
    encoding_ratios_of(&a, &b)
}

pub fn encoding_ratios_of<S: AsRef<str>>(lang: &[S], reference: &[S]) -> Result<EncodingRatios> {
    let count = |lines: &[S]| {
        lines.iter().fold((0u64, 0u64), |(b, c), l| {
            let l = l.as_ref();
            (b + l.len() as u64, c + l.chars().count() as u64)
        })
    };
    let (bytes_a, chars_a) = count(lang);
    let (bytes_b, chars_b) = count(reference);
    if bytes_a == 0 {
        return Err(Error::EmptyCorpus);
    }
    if bytes_b == 0 {
        return Err(Error::ZeroReference);
    }
    let byte_premium = bytes_a as f64 / bytes_b as f64;
    let length_ratio = chars_a as f64 / chars_b as f64;
    Ok(EncodingRatios {
        byte_premium,
        length_ratio,
        byte_coefficient: byte_premium / length_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub language_tag: String,
    pub eval_examples: usize,
    pub matched_examples: usize,
    pub total_occurrences: u64,
    pub prefix_len: usize,
}

/// Counts how often the first `prefix_len` tokens of each evaluation example
/// occur in the tokenized training corpus.
pub fn contamination_scan<S: AsRef<str>>(
    train: &CorpusHandle,
    eval_examples: &[S],
    model: &TokenizerModel,
    prefix_len: usize,
) -> Result<ContaminationReport> {
    if prefix_len == 0 {
        return Err(Error::InvalidConfig("prefix_len must be at least 1".into()));
    }
    let encoder = Encoder::new(model);
    let stream: Vec<TokenId> = encoder.encode_batch(train.lines()).into_iter().flatten().collect();
    let prefixes: Vec<Vec<TokenId>> = encoder
        .encode_batch(eval_examples.iter().map(AsRef::as_ref))
        .into_iter()
        .map(|mut ids| {
            ids.truncate(prefix_len);
            ids
        })
        .collect();
    let hits = count_occurrences(&stream, &prefixes);
    Ok(ContaminationReport {
        language_tag: train.language_tag().to_string(),
        eval_examples: eval_examples.len(),
        matched_examples: hits.iter().filter(|&&h| h > 0).count(),
        total_occurrences: hits.iter().sum(),
        prefix_len,
    })
}

/// Occurrence count of every pattern inside `stream`, one window pass per
/// distinct pattern length. Empty patterns never match.
fn count_occurrences(stream: &[TokenId], patterns: &[Vec<TokenId>]) -> Vec<u64> {
    let mut by_len: HashMap<usize, HashMap<&[TokenId], u64>> = HashMap::new();
    for p in patterns.iter().filter(|p| !p.is_empty()) {
        by_len.entry(p.len()).or_default().insert(p.as_slice(), 0);
    }
    for (&len, table) in by_len.iter_mut() {
        for window in stream.windows(len) {
            if let Some(c) = table.get_mut(window) {
                *c += 1;
            }
        }
    }
    patterns
        .iter()
        .map(|p| {
            by_len
                .get(&p.len())
                .and_then(|t| t.get(p.as_slice()))
                .copied()
                .unwrap_or(0)
        })
        .collect()
}

impl ContaminationReport {
    pub const CSV_HEADER: &'static str =
        "language_tag,eval_examples,matched_examples,total_occurrences,prefix_len";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.language_tag,
            self.eval_examples,
            self.matched_examples,
            self.total_occurrences,
            self.prefix_len
        )
    }
}
