//! Compression and predictor metrics.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{validate_language_tag, EncodingRatios};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::model::{Algorithm, TokenId, TokenizerModel};

/// Total number of tokens the model produces over `eval_lines`.
pub fn corpus_token_count<S: AsRef<str>>(model: &TokenizerModel, eval_lines: &[S]) -> u64 {
    Encoder::new(model).count_tokens(eval_lines.iter().map(AsRef::as_ref))
}

pub fn token_premium(ctc_lang: u64, ctc_ref: u64) -> Result<f64> {
    if ctc_ref == 0 {
        return Err(Error::ZeroReference);
    }
    Ok(ctc_lang as f64 / ctc_ref as f64)
}

/// Characters in a token; invalid UTF-8 pieces count one per replacement.
pub fn token_chars(bytes: &[u8]) -> usize {
    String::from_utf8_lossy(bytes).chars().count()
}

/// Mean characters per vocabulary entry.
pub fn mean_token_length_vocab(model: &TokenizerModel) -> Result<f64> {
    let vocab = model.vocab();
    if vocab.is_empty() {
        return Err(Error::EmptyVocab);
    }
    let chars: usize = vocab.iter().map(|t| token_chars(t)).sum();
    Ok(chars as f64 / vocab.len() as f64)
}

/// Evaluation characters per token produced on `eval_lines`.
pub fn mean_token_length_corpus<S: AsRef<str>>(model: &TokenizerModel, eval_lines: &[S]) -> Result<f64> {
    let ctc = corpus_token_count(model, eval_lines);
    if ctc == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(char_total(eval_lines) as f64 / ctc as f64)
}

pub fn char_total<S: AsRef<str>>(lines: &[S]) -> u64 {
    lines.iter().map(|l| l.as_ref().chars().count() as u64).sum()
}

pub fn distinct_tokens<'a>(encoder: &Encoder, lines: impl IntoIterator<Item = &'a str>) -> HashSet<TokenId> {
    encoder.encode_batch(lines).into_iter().flatten().collect()
}

/// Token types used on both sides, divided by the vocabulary size.
pub fn data_similarity<S: AsRef<str>, T: AsRef<str>>(
    model: &TokenizerModel,
    train_lines: &[S],
    eval_lines: &[T],
) -> f64 {
    let encoder = Encoder::new(model);
    let train = distinct_tokens(&encoder, train_lines.iter().map(AsRef::as_ref));
    let eval = distinct_tokens(&encoder, eval_lines.iter().map(AsRef::as_ref));
    overlap_fraction(&train, &eval, model.vocab_size())
}

pub fn overlap_fraction(a: &HashSet<TokenId>, b: &HashSet<TokenId>, vocab_size: usize) -> f64 {
    a.intersection(b).count() as f64 / vocab_size as f64
}

/// Share of characters that are Unicode whitespace. Line breaks between
/// entries are not part of the text.
pub fn proportion_whitespace<S: AsRef<str>>(eval_lines: &[S]) -> Result<f64> {
    let (mut ws, mut total) = (0u64, 0u64);
    for line in eval_lines {
        for ch in line.as_ref().chars() {
            total += 1;
            ws += u64::from(ch.is_whitespace());
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(ws as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharStats {
    pub unigrams_unique: usize,
    pub unigram_entropy: f64,
    pub bigram_entropy: f64,
}

fn entropy_bits<K>(counts: &HashMap<K, u64>) -> f64 {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    // summed in a fixed order so the result does not depend on hash seeds
    let mut values: Vec<u64> = counts.values().copied().collect();
    values.sort_unstable();
    let h: f64 = values
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Character unigram and bigram statistics. Bigrams never span two lines;
/// with `exclude_whitespace` whitespace characters are dropped first.
pub fn char_stats<S: AsRef<str>>(lines: &[S], exclude_whitespace: bool) -> Result<CharStats> {
    let mut uni: HashMap<char, u64> = HashMap::new();
    let mut bi: HashMap<(char, char), u64> = HashMap::new();
    for line in lines {
        let mut prev: Option<char> = None;
        for ch in line.as_ref().chars() {
            if exclude_whitespace && ch.is_whitespace() {
                continue;
            }
            *uni.entry(ch).or_default() += 1;
            if let Some(p) = prev {
                *bi.entry((p, ch)).or_default() += 1;
            }
            prev = Some(ch);
        }
    }
    if uni.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(CharStats {
        unigrams_unique: uni.len(),
        unigram_entropy: entropy_bits(&uni),
        bigram_entropy: entropy_bits(&bi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptGroup {
    Latin,
    Cyrillic,
    Arabic,
    Other,
}

impl ScriptGroup {
    pub const ALL: [ScriptGroup; 4] = [
        ScriptGroup::Latin,
        ScriptGroup::Cyrillic,
        ScriptGroup::Arabic,
        ScriptGroup::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScriptGroup::Latin => "latin",
            ScriptGroup::Cyrillic => "cyrillic",
            ScriptGroup::Arabic => "arabic",
            ScriptGroup::Other => "other",
        }
    }
}

pub fn script_group(language_tag: &str) -> Result<ScriptGroup> {
    validate_language_tag(language_tag)?;
    Ok(match &language_tag[4..] {
        "latn" => ScriptGroup::Latin,
        "cyrl" => ScriptGroup::Cyrillic,
        "arab" => ScriptGroup::Arabic,
        _ => ScriptGroup::Other,
    })
}

/// One evaluated (language, tokenizer) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub language_tag: String,
    pub tokenizer_id: String,
    pub algorithm: Algorithm,
    pub vocab_size: usize,
    pub ctc: u64,
    pub token_premium: f64,
    pub mean_token_len_vocab: f64,
    pub mean_token_len_corpus: f64,
    #[serde(rename = "data_sim")]
    pub data_similarity: f64,
    pub proportion_whitespace: f64,
}

/// Measurements of one model that do not depend on the reference language.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeasurement {
    pub ctc: u64,
    pub mean_token_len_vocab: f64,
    pub mean_token_len_corpus: f64,
    pub data_similarity: f64,
    pub proportion_whitespace: f64,
}

pub fn measure_cell<S: AsRef<str>, T: AsRef<str>>(
    model: &TokenizerModel,
    train_lines: &[S],
    eval_lines: &[T],
) -> Result<CellMeasurement> {
    let encoder = Encoder::new(model);
    let eval_ids = encoder.encode_batch(eval_lines.iter().map(AsRef::as_ref));
    let ctc: u64 = eval_ids.iter().map(|ids| ids.len() as u64).sum();
    if ctc == 0 {
        return Err(Error::EmptyCorpus);
    }
    let eval_set: HashSet<TokenId> = eval_ids.into_iter().flatten().collect();
    let train_set = distinct_tokens(&encoder, train_lines.iter().map(AsRef::as_ref));
    Ok(CellMeasurement {
        ctc,
        mean_token_len_vocab: mean_token_length_vocab(model)?,
        mean_token_len_corpus: char_total(eval_lines) as f64 / ctc as f64,
        data_similarity: overlap_fraction(&train_set, &eval_set, model.vocab_size()),
        proportion_whitespace: proportion_whitespace(eval_lines)?,
    })
}

/// Per-language predictor values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub language_tag: String,
    pub byte_premium: f64,
    pub length_ratio: f64,
    pub byte_coefficient: f64,
    pub unigrams_unique: usize,
    pub unigram_entropy_nospace: f64,
    pub bigram_entropy_nospace: f64,
    pub n_phonemes: Option<u32>,
    pub script_group: ScriptGroup,
}

impl LanguageProfile {
    pub fn build<S: AsRef<str>>(
        language_tag: &str,
        ratios: &EncodingRatios,
        train_lines: &[S],
        n_phonemes: Option<u32>,
    ) -> Result<Self> {
        let stats = char_stats(train_lines, true)?;
        Ok(Self {
            language_tag: language_tag.to_string(),
            byte_premium: ratios.byte_premium,
            length_ratio: ratios.length_ratio,
            byte_coefficient: ratios.byte_coefficient,
            unigrams_unique: stats.unigrams_unique,
            unigram_entropy_nospace: stats.unigram_entropy,
            bigram_entropy_nospace: stats.bigram_entropy,
            n_phonemes,
            script_group: script_group(language_tag)?,
        })
    }
}

/// Reads a two-column `language_tag,count` phoneme table (header optional).
pub fn load_phoneme_table(path: impl AsRef<Path>) -> Result<HashMap<String, u32>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let (Some(tag), Some(count)) = (record.get(0), record.get(1)) else {
            return Err(Error::InvalidConfig(format!("phoneme table row {} needs two columns", i + 1)));
        };
        match count.parse::<u32>() {
            Ok(n) => {
                validate_language_tag(tag)?;
                out.insert(tag.to_string(), n);
            }
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::InvalidConfig(format!("bad phoneme count {count:?} for {tag}")))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Provenance;
    use crate::pretok::PreTokenizerSpec;

    fn bytes_only() -> TokenizerModel {
        TokenizerModel::from_merges(Algorithm::Bpe, vec![], PreTokenizerSpec::whitespace(), 0, Provenance::default()).unwrap()
    }

    fn ab() -> TokenizerModel {
        TokenizerModel::from_merges(Algorithm::Bpe, vec![(97, 98)], PreTokenizerSpec::whitespace(), 0, Provenance::default()).unwrap()
    }

    #[test]
    fn ctc_examples() {
        let eval = ["héllo wörld", "日本"];
        let bytes: usize = eval.iter().map(|s| s.len()).sum();
        assert_eq!(corpus_token_count(&bytes_only(), &eval), bytes as u64);
        assert_eq!(corpus_token_count(&bytes_only(), &[] as &[&str]), 0);
        assert_eq!(corpus_token_count(&ab(), &["abab"]), 2);
    }

    #[test]
    fn premium_examples() {
        assert_eq!(token_premium(120_000, 60_000).unwrap(), 2.0);
        assert_eq!(token_premium(777, 777).unwrap(), 1.0);
        assert!(matches!(token_premium(5, 0), Err(Error::ZeroReference)));
    }

    #[test]
    fn mean_lengths() {
        assert_eq!(mean_token_length_vocab(&bytes_only()).unwrap(), 1.0);
        assert_eq!(mean_token_length_vocab(&ab()).unwrap(), (256.0 + 2.0) / 257.0);
        assert_eq!(mean_token_length_corpus(&ab(), &["abab"]).unwrap(), 2.0);
        assert_eq!(token_chars(&[0xe6]), 1);
        assert_eq!(token_chars("日".as_bytes()), 1);
    }

    #[test]
    fn whitespace_share() {
        assert_eq!(proportion_whitespace(&["a b"]).unwrap(), 1.0 / 3.0);
        assert_eq!(proportion_whitespace(&["你好"]).unwrap(), 0.0);
        assert!(proportion_whitespace(&["a b c d"]).unwrap() > proportion_whitespace(&["abcd"]).unwrap());
        assert!(proportion_whitespace(&[""]).is_err());
    }

    #[test]
    fn entropy_examples() {
        let s = char_stats(&["abcd"], false).unwrap();
        assert_eq!(s.unigrams_unique, 4);
        assert!((s.unigram_entropy - 2.0).abs() < 1e-12);
        assert_eq!(char_stats(&["aaaa"], false).unwrap().unigram_entropy, 0.0);
        let expected = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
        assert!((char_stats(&["abab"], false).unwrap().bigram_entropy - expected).abs() < 1e-12);
        // bigrams do not cross lines, whitespace dropped when asked
        let s = char_stats(&["a b", "ba"], true).unwrap();
        assert_eq!(s.unigrams_unique, 2);
        assert!((s.bigram_entropy - 1.0).abs() < 1e-12);
        assert!(char_stats(&["   "], true).is_err());
    }

    #[test]
    fn scripts() {
        assert_eq!(script_group("eng_latn").unwrap(), ScriptGroup::Latin);
        assert_eq!(script_group("rus_cyrl").unwrap(), ScriptGroup::Cyrillic);
        assert_eq!(script_group("arb_arab").unwrap(), ScriptGroup::Arabic);
        assert_eq!(script_group("jpn_jpan").unwrap(), ScriptGroup::Other);
        assert!(matches!(script_group("english"), Err(Error::BadLanguageTag(_))));
    }

    #[test]
    fn phoneme_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ph.csv");
        std::fs::write(&p, "language_tag,count\neng_latn,40\nmya_mymr,31\n").unwrap();
        let t = load_phoneme_table(&p).unwrap();
        assert_eq!(t["eng_latn"], 40);
        assert_eq!(t.len(), 2);
        std::fs::write(&p, "eng_latn,40\nmya_mymr,x\n").unwrap();
        assert!(load_phoneme_table(&p).is_err());
    }
}
