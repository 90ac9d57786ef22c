//! Whitespace pre-tokenization.
//!
//! Spans returned here bound merge learning: no trained token ever crosses
//! a span boundary. `PreTokenizerMode::None` yields the whole text as a single
//! span, which is what lets superword merges form.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreTokenizerMode {
    Whitespace,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreTokenizerSpec {
    pub mode: PreTokenizerMode,
    /// Keep a single U+0020 glued to the front of the following word.
    pub attach_leading_space: bool,
}

impl PreTokenizerSpec {
    pub const fn whitespace() -> Self {
        Self {
            mode: PreTokenizerMode::Whitespace,
            attach_leading_space: true,
        }
    }

    pub const fn none() -> Self {
        Self {
            mode: PreTokenizerMode::None,
            attach_leading_space: false,
        }
    }

    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        pretokenize(text, self)
    }
}

impl Default for PreTokenizerSpec {
    fn default() -> Self {
        Self::whitespace()
    }
}

/// Splits `text` into spans whose concatenation is exactly `text`.
///
/// In whitespace mode every maximal run of Unicode whitespace and every maximal
/// run of non-whitespace becomes a span; with `attach_leading_space` the last
/// character of a whitespace run moves onto the following word when it is a
/// plain space.
pub fn pretokenize<'a>(text: &'a str, spec: &PreTokenizerSpec) -> Vec<&'a str> {
    if text.is_empty() {
        return Vec::new();
    }
    if spec.mode == PreTokenizerMode::None {
        return vec![text];
    }

    // Boundaries of maximal runs: (start, end, is_whitespace).
    let mut runs: Vec<(usize, usize, bool)> = Vec::new();
    for (i, ch) in text.char_indices() {
        let ws = ch.is_whitespace();
        match runs.last_mut() {
            Some(last) if last.2 == ws => last.1 = i + ch.len_utf8(),
            _ => runs.push((i, i + ch.len_utf8(), ws)),
        }
    }

    let mut spans = Vec::with_capacity(runs.len());
    // Start of the word span when a space was carried over.
    let mut carried: Option<usize> = None;
    for (idx, &(start, end, ws)) in runs.iter().enumerate() {
        if ws {
            let followed_by_word = idx + 1 < runs.len();
            if spec.attach_leading_space
                && followed_by_word
                && text.as_bytes()[end - 1] == b' '
            {
                if end - 1 > start {
                    spans.push(&text[start..end - 1]);
                }
                carried = Some(end - 1);
            } else {
                spans.push(&text[start..end]);
            }
        } else {
            let from = carried.take().unwrap_or(start);
            spans.push(&text[from..end]);
        }
    }
    spans
}
