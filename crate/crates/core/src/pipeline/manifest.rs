//! Experiment manifest: a JSON document describing the language x algorithm x
//! scaling x vocabulary grid.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{validate_language_tag, Scaling};
use crate::curvefit::VOCAB_STEP;
use crate::error::{Error, Result};
use crate::model::{Algorithm, BYTE_TOKENS};

pub const DEFAULT_VOCAB_GRID: [usize; 10] =
    [8192, 16384, 32768, 49152, 65536, 81920, 98304, 114688, 131072, 262_144];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageEntry {
    pub tag: String,
    pub corpus_paths: Vec<PathBuf>,
    pub eval_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phoneme_count: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationSettings {
    #[serde(default = "default_prefix_len")]
    pub prefix_len: usize,
    /// Grid vocabulary of the tokenizer used for scanning; smallest grid size if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_size: Option<usize>,
}

impl Default for ContaminationSettings {
    fn default() -> Self {
        Self {
            prefix_len: default_prefix_len(),
            vocab_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub languages: Vec<LanguageEntry>,
    #[serde(default = "default_reference")]
    pub reference_language: String,
    #[serde(default = "default_train_bytes")]
    pub train_bytes: u64,
    #[serde(default = "default_scaling")]
    pub scaling: Vec<Scaling>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_grid")]
    pub vocab_grid: Vec<usize>,
    #[serde(default = "default_fractions")]
    pub transition_fractions: Vec<f64>,
    /// Empty means: pick targets inside every language's observed CTC range.
    #[serde(default)]
    pub target_ctcs: Vec<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub retrain_planned: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phoneme_table: Option<PathBuf>,
    #[serde(default)]
    pub contamination: ContaminationSettings,
}

fn default_prefix_len() -> usize {
    10
}
fn default_reference() -> String {
    "eng_latn".to_string()
}
fn default_train_bytes() -> u64 {
    300_000_000
}
fn default_scaling() -> Vec<Scaling> {
    vec![Scaling::None]
}
fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Bpe]
}
fn default_grid() -> Vec<usize> {
    DEFAULT_VOCAB_GRID.to_vec()
}
fn default_fractions() -> Vec<f64> {
    vec![crate::superbpe::DEFAULT_TRANSITION_FRACTION]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("montok_out")
}
fn default_true() -> bool {
    true
}

fn bad(field: &str, message: impl Into<String>) -> Error {
    Error::ManifestError {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentManifest {
    /// A manifest with defaults for everything but the languages.
    pub fn new(languages: Vec<LanguageEntry>, reference_language: &str) -> Self {
        Self {
            languages,
            reference_language: reference_language.to_string(),
            train_bytes: default_train_bytes(),
            scaling: default_scaling(),
            algorithms: default_algorithms(),
            vocab_grid: default_grid(),
            transition_fractions: default_fractions(),
            target_ctcs: Vec::new(),
            seed: 0,
            output_dir: default_output_dir(),
            retrain_planned: true,
            phoneme_table: None,
            contamination: ContaminationSettings::default(),
        }
    }

    /// Parses and validates; relative paths are resolved against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: Self = serde_json::from_str(text).map_err(|e| {
            bad("document", format!("{e}"))
        })?;
        m.resolve_paths(base_dir);
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for l in &mut self.languages {
            l.corpus_paths.iter_mut().for_each(fix);
            fix(&mut l.eval_path);
        }
        fix(&mut self.output_dir);
        if let Some(p) = &mut self.phoneme_table {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(bad("languages", "at least one language is required"));
        }
        let mut seen = HashSet::new();
        for (i, l) in self.languages.iter().enumerate() {
            let field = format!("languages[{i}]");
            validate_language_tag(&l.tag).map_err(|e| bad(&format!("{field}.tag"), e.to_string()))?;
            if !seen.insert(l.tag.as_str()) {
                return Err(bad(&format!("{field}.tag"), format!("duplicate language {}", l.tag)));
            }
            if l.corpus_paths.is_empty() {
                return Err(bad(&format!("{field}.corpus_paths"), "no corpus files listed"));
            }
        }
        if !seen.contains(self.reference_language.as_str()) {
            return Err(bad(
                "reference_language",
                format!("{} is not among the languages", self.reference_language),
            ));
        }
        if self.train_bytes == 0 {
            return Err(bad("train_bytes", "must be positive"));
        }
        if self.scaling.is_empty() || has_duplicates(&self.scaling) {
            return Err(bad("scaling", "needs at least one entry and no duplicates"));
        }
        if self.algorithms.is_empty() || has_duplicates(&self.algorithms) {
            return Err(bad("algorithms", "needs at least one entry and no duplicates"));
        }
        if self.vocab_grid.is_empty() {
            return Err(bad("vocab_grid", "needs at least one size"));
        }
        for w in self.vocab_grid.windows(2) {
            if w[0] >= w[1] {
                return Err(bad("vocab_grid", "sizes must be strictly increasing"));
            }
        }
        for &v in &self.vocab_grid {
            if v % VOCAB_STEP != 0 || v <= BYTE_TOKENS {
                return Err(bad(
                    "vocab_grid",
                    format!("{v} must be a multiple of {VOCAB_STEP} above {BYTE_TOKENS}"),
                ));
            }
        }
        if self.algorithms.contains(&Algorithm::SuperBpe) {
            if self.transition_fractions.is_empty() {
                return Err(bad("transition_fractions", "superbpe needs at least one fraction"));
            }
            for &f in &self.transition_fractions {
                if !(f > 0.0 && f < 1.0) {
                    return Err(bad("transition_fractions", format!("{f} is outside (0, 1)")));
                }
            }
        }
        for w in self.target_ctcs.windows(2) {
            if w[0] >= w[1] {
                return Err(bad("target_ctcs", "targets must be strictly increasing"));
            }
        }
        if self.contamination.prefix_len == 0 {
            return Err(bad("contamination.prefix_len", "must be at least 1"));
        }
        if let Some(v) = self.contamination.vocab_size {
            if !self.vocab_grid.contains(&v) {
                return Err(bad("contamination.vocab_size", format!("{v} is not in vocab_grid")));
            }
        }
        Ok(())
    }

    pub fn language(&self, tag: &str) -> Option<&LanguageEntry> {
        self.languages.iter().find(|l| l.tag == tag)
    }
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items.iter().enumerate().any(|(i, a)| items[..i].contains(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{"languages": [{"tag": "eng_latn", "corpus_paths": ["a.txt"], "eval_path": "e.txt"}]}"#.into()
    }

    #[test]
    fn defaults_and_paths() {
        let m = ExperimentManifest::from_json(&minimal(), Path::new("/data")).unwrap();
        assert_eq!(m.vocab_grid, DEFAULT_VOCAB_GRID.to_vec());
        assert_eq!(m.reference_language, "eng_latn");
        assert_eq!(m.languages[0].corpus_paths[0], PathBuf::from("/data/a.txt"));
        assert_eq!(m.output_dir, PathBuf::from("/data/montok_out"));
        assert!(m.target_ctcs.is_empty());
    }

    fn field_of(json: &str) -> String {
        match ExperimentManifest::from_json(json, Path::new(".")) {
            Err(Error::ManifestError { field, .. }) => field,
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_fields() {
        let base = r#""languages": [{"tag": "eng_latn", "corpus_paths": ["a"], "eval_path": "e"}]"#;
        assert_eq!(field_of(&format!("{{{base}, \"vocab_grid\": [1000]}}")), "vocab_grid");
        assert_eq!(field_of(&format!("{{{base}, \"target_ctcs\": [5, 5]}}")), "target_ctcs");
        assert_eq!(field_of(&format!("{{{base}, \"reference_language\": \"fra_latn\"}}")), "reference_language");
        assert_eq!(field_of(&format!("{{{base}, \"colour\": 1}}")), "document");
        assert_eq!(
            field_of(r#"{"languages": [{"tag": "English", "corpus_paths": ["a"], "eval_path": "e"}]}"#),
            "languages[0].tag"
        );
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = ExperimentManifest::from_json("{\n\"languages\": [\n,]}", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
