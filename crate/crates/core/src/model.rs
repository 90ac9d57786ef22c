//! The trained tokenizer artifact and its on-disk JSON form.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pretok::{PreTokenizerMode, PreTokenizerSpec};

pub type TokenId = u32;
pub type Pair = (TokenId, TokenId);

/// Number of reserved single-byte tokens (ids 0..=255).
pub const BYTE_TOKENS: usize = 256;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bpe,
    Unigram,
    #[serde(rename = "superbpe")]
    SuperBpe,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bpe => "bpe",
            Algorithm::Unigram => "unigram",
            Algorithm::SuperBpe => "superbpe",
        }
    }

    pub fn uses_merges(self) -> bool {
        !matches!(self, Algorithm::Unigram)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpe" => Ok(Algorithm::Bpe),
            "unigram" => Ok(Algorithm::Unigram),
            "superbpe" => Ok(Algorithm::SuperBpe),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub language_tag: String,
    pub training_bytes: u64,
    pub seed: u64,
}

/// An immutable trained tokenizer.
///
/// Ids `0..256` are always the single bytes `0x00..=0xff`, so every byte
/// string is encodable. Merge-based models store token `256 + r` as the
/// concatenation of the two parents named by `merges[r]`. Unigram models keep
/// one log-probability per vocabulary entry in `scores`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerModel {
    algorithm: Algorithm,
    vocab: Vec<Vec<u8>>,
    merges: Vec<Pair>,
    scores: Vec<f64>,
    pretokenizer: PreTokenizerSpec,
    transition_point: usize,
    provenance: Provenance,
    specials: Vec<String>,
}

pub(crate) fn byte_vocab() -> Vec<Vec<u8>> {
    (0..=255u8).map(|b| vec![b]).collect()
}

impl TokenizerModel {
    /// Builds a merge-based model (BPE or SuperBPE) from its merge list.
    pub fn from_merges(
        algorithm: Algorithm,
        merges: Vec<Pair>,
        pretokenizer: PreTokenizerSpec,
        transition_point: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if !algorithm.uses_merges() {
            return Err(Error::WrongAlgorithm {
                expected: "merge-based",
                actual: algorithm.to_string(),
            });
        }
        let mut vocab = byte_vocab();
        for (rank, &(l, r)) in merges.iter().enumerate() {
            let next = (BYTE_TOKENS + rank) as TokenId;
            if l >= next || r >= next {
                return Err(Error::MalformedModelFile(format!(
                    "merge {rank} refers to a token that does not exist yet"
                )));
            }
            let mut bytes = vocab[l as usize].clone();
            bytes.extend_from_slice(&vocab[r as usize]);
            vocab.push(bytes);
        }
        let model = Self {
            algorithm,
            vocab,
            merges,
            scores: Vec::new(),
            pretokenizer,
            transition_point,
            provenance,
            specials: Vec::new(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Builds a unigram model. `vocab` must start with the 256 single bytes.
    pub fn unigram(
        vocab: Vec<Vec<u8>>,
        scores: Vec<f64>,
        pretokenizer: PreTokenizerSpec,
        provenance: Provenance,
    ) -> Result<Self> {
        let model = Self {
            algorithm: Algorithm::Unigram,
            vocab,
            merges: Vec::new(),
            scores,
            pretokenizer,
            transition_point: 0,
            provenance,
            specials: Vec::new(),
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedModelFile(msg));
        if self.vocab.len() < BYTE_TOKENS {
            return bad(format!("vocabulary has only {} entries", self.vocab.len()));
        }
        for (id, bytes) in self.vocab.iter().take(BYTE_TOKENS).enumerate() {
            if bytes.as_slice() != [id as u8] {
                return bad(format!("id {id} must be the single byte {id:#04x}"));
            }
        }
        let mut seen = HashSet::with_capacity(self.vocab.len());
        for (id, bytes) in self.vocab.iter().enumerate() {
            if bytes.is_empty() {
                return bad(format!("token {id} is empty"));
            }
            if !seen.insert(bytes.as_slice()) {
                return bad(format!("duplicate token bytes at id {id}"));
            }
        }
        match self.algorithm {
            Algorithm::Unigram => {
                if !self.merges.is_empty() {
                    return bad("unigram model carries merges".into());
                }
                if self.scores.len() != self.vocab.len() {
                    return bad(format!(
                        "scores section has {} entries for {} tokens",
                        self.scores.len(),
                        self.vocab.len()
                    ));
                }
                if self.scores.iter().any(|s| !s.is_finite()) {
                    return bad("non-finite score".into());
                }
                if self.transition_point != 0 {
                    return bad("transition_point set on a unigram model".into());
                }
            }
            Algorithm::Bpe | Algorithm::SuperBpe => {
                if self.vocab.len() != BYTE_TOKENS + self.merges.len() {
                    return bad("merge count does not match vocabulary".into());
                }
                for (rank, &(l, r)) in self.merges.iter().enumerate() {
                    let id = BYTE_TOKENS + rank;
                    let (l, r) = (l as usize, r as usize);
                    if l >= id || r >= id {
                        return bad(format!("merge {rank} refers to a later token"));
                    }
                    let joined = [self.vocab[l].as_slice(), self.vocab[r].as_slice()].concat();
                    if joined != self.vocab[id] {
                        return bad(format!("token {id} is not the concatenation of its parents"));
                    }
                }
                if !self.scores.is_empty() {
                    return bad("merge-based model carries scores".into());
                }
                let is_super = self.algorithm == Algorithm::SuperBpe;
                if is_super != (self.transition_point > 0) {
                    return bad("transition_point must be set exactly for superbpe".into());
                }
                if is_super
                    && (self.transition_point < BYTE_TOKENS
                        || self.transition_point > self.vocab.len())
                {
                    return bad("transition_point outside the vocabulary".into());
                }
            }
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[Vec<u8>] {
        &self.vocab
    }

    pub fn token_bytes(&self, id: TokenId) -> Option<&[u8]> {
        self.vocab.get(id as usize).map(Vec::as_slice)
    }

    pub fn merges(&self) -> &[Pair] {
        &self.merges
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn pretokenizer(&self) -> &PreTokenizerSpec {
        &self.pretokenizer
    }

    /// Vocabulary count retained from the whitespace-bounded phase (SuperBPE), else 0.
    pub fn transition_point(&self) -> usize {
        self.transition_point
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    /// Keeps the first `vocab_size` entries of a BPE model.
    ///
    /// Greedy merge learning is prefix-stable, so this equals training the same
    /// subset directly at the smaller size.
    pub fn truncated(&self, vocab_size: usize) -> Result<Self> {
        if self.algorithm != Algorithm::Bpe {
            return Err(Error::WrongAlgorithm {
                expected: "bpe",
                actual: self.algorithm.to_string(),
            });
        }
        if vocab_size < BYTE_TOKENS + 1 {
            return Err(Error::VocabTooSmall(vocab_size));
        }
        let keep = (vocab_size - BYTE_TOKENS).min(self.merges.len());
        let mut out = self.clone();
        out.merges.truncate(keep);
        out.vocab.truncate(BYTE_TOKENS + keep);
        Ok(out)
    }

    pub fn decode_bytes(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(ids.len() * 2);
        for &id in ids {
            let bytes = self.token_bytes(id).ok_or(Error::UnknownTokenId(id))?;
            out.extend_from_slice(bytes);
        }
        Ok(out)
    }

    /// Concatenates token bytes. Ids that do not come from encoding a string
    /// may produce invalid UTF-8, which is replaced with U+FFFD.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let bytes = self.decode_bytes(ids)?;
        Ok(match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: FORMAT_VERSION,
            algorithm: self.algorithm,
            vocab: self
                .vocab
                .iter()
                .enumerate()
                .map(|(id, bytes)| VocabEntry {
                    id: id as TokenId,
                    bytes_hex: hex::encode(bytes),
                })
                .collect(),
            merges: self.merges.iter().map(|&(l, r)| [l, r]).collect(),
            scores: self
                .scores
                .iter()
                .enumerate()
                .map(|(id, &s)| (id as TokenId, s))
                .collect(),
            specials: self.specials.clone(),
            pretokenizer: self.pretokenizer,
            vocab_size: self.vocab.len(),
            transition_point: self.transition_point,
            provenance: self.provenance.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedModelFile(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(Error::MalformedModelFile(format!(
                "unsupported version {}",
                file.version
            )));
        }
        let mut vocab = Vec::with_capacity(file.vocab.len());
        for (pos, entry) in file.vocab.into_iter().enumerate() {
            if entry.id as usize != pos {
                return Err(Error::MalformedModelFile(format!(
                    "vocab entry {pos} has id {}",
                    entry.id
                )));
            }
            let bytes = hex::decode(&entry.bytes_hex).map_err(|e| {
                Error::MalformedModelFile(format!("vocab entry {pos}: {e}"))
            })?;
            vocab.push(bytes);
        }
        if vocab.len() != file.vocab_size {
            return Err(Error::MalformedModelFile(format!(
                "vocab_size {} but {} entries",
                file.vocab_size,
                vocab.len()
            )));
        }
        let scores = if file.algorithm == Algorithm::Unigram {
            if file.scores.len() != vocab.len() || file.scores.keys().copied().ne(0..vocab.len() as u32) {
                return Err(Error::MalformedModelFile(
                    "scores section must cover every token id".into(),
                ));
            }
            file.scores.into_values().collect()
        } else {
            if !file.scores.is_empty() {
                return Err(Error::MalformedModelFile("scores on a merge-based model".into()));
            }
            Vec::new()
        };
        if file.pretokenizer.mode == PreTokenizerMode::None && file.pretokenizer.attach_leading_space {
            return Err(Error::MalformedModelFile(
                "attach_leading_space is meaningless without whitespace mode".into(),
            ));
        }
        let model = Self {
            algorithm: file.algorithm,
            vocab,
            merges: file.merges.into_iter().map(|[l, r]| (l, r)).collect(),
            scores,
            pretokenizer: file.pretokenizer,
            transition_point: file.transition_point,
            provenance: file.provenance,
            specials: file.specials,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    algorithm: Algorithm,
    vocab: Vec<VocabEntry>,
    merges: Vec<[TokenId; 2]>,
    #[serde(default)]
    scores: BTreeMap<TokenId, f64>,
    #[serde(default)]
    specials: Vec<String>,
    pretokenizer: PreTokenizerSpec,
    vocab_size: usize,
    transition_point: usize,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabEntry {
    id: TokenId,
    bytes_hex: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab_model() -> TokenizerModel {
        TokenizerModel::from_merges(
            Algorithm::Bpe,
            vec![(b'a' as u32, b'b' as u32)],
            PreTokenizerSpec::none(),
            0,
            Provenance::default(),
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip() {
        let model = ab_model();
        let back = TokenizerModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.token_bytes(256), Some(&b"ab"[..]));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let model = ab_model();
        model.save(&path).unwrap();
        assert_eq!(TokenizerModel::load(&path).unwrap(), model);
    }

    #[test]
    fn truncated_file_is_malformed() {
        let json = ab_model().to_json().unwrap();
        let cut = &json[..json.len() / 2];
        assert!(matches!(
            TokenizerModel::from_json(cut),
            Err(Error::MalformedModelFile(_))
        ));
    }

    #[test]
    fn duplicate_token_bytes_rejected() {
        let mut vocab = byte_vocab();
        vocab.push(b"ab".to_vec());
        vocab.push(b"ab".to_vec());
        let err = TokenizerModel::unigram(
            vocab,
            vec![-1.0; 258],
            PreTokenizerSpec::whitespace(),
            Provenance::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MalformedModelFile(_)));
    }

    #[test]
    fn unigram_requires_scores() {
        let model = TokenizerModel::unigram(
            byte_vocab(),
            vec![-5.0; 256],
            PreTokenizerSpec::whitespace(),
            Provenance::default(),
        )
        .unwrap();
        let json = model.to_json().unwrap().replace("\"scores\":{", "\"scores\":{\"999\":1.0,");
        assert!(TokenizerModel::from_json(&json).is_err());
    }

    #[test]
    fn decode_errors_and_empty() {
        let model = ab_model();
        assert_eq!(model.decode(&[]).unwrap(), "");
        assert_eq!(model.decode(&[256, 97]).unwrap(), "aba");
        assert!(matches!(model.decode(&[257]), Err(Error::UnknownTokenId(257))));
    }
}
