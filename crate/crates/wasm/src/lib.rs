//! Browser bindings for the demo page. Every entry point takes plain strings
//! and numbers and returns a JSON document, so the page needs no glue beyond
//! `JSON.parse`.

use std::collections::BTreeMap;

use montok_core::bpe::train_bpe_from_lines;
use montok_core::curvefit::{fit_power_law, invert_for_target, VocabBounds};
use montok_core::encoder::Encoder;
use montok_core::model::{Provenance, TokenizerModel};
use montok_core::pretok::PreTokenizerSpec;
use montok_core::superbpe::{train_superbpe_from_lines, SuperBpeConfig};
use montok_core::synth::{default_languages, Renderer};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// How many pieces of the first line are echoed back for display.
const SHOWN_PIECES: usize = 200;
const CURVE_SAMPLES: usize = 48;

#[derive(Debug, Serialize)]
pub struct Tokenization {
    pub algorithm: String,
    pub vocab_size: usize,
    pub transition_point: usize,
    pub tokens: usize,
    pub bytes: usize,
    pub bytes_per_token: f64,
    pub pieces: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub bpe: Tokenization,
    pub superbpe: Tokenization,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CurvePoint {
    pub vocab_size: usize,
    pub ctc: u64,
}

#[derive(Debug, Serialize)]
pub struct FitPlan {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rmse: f64,
    pub r2: f64,
    pub target_ctc: u64,
    pub planned_vocab: usize,
    pub predicted_ctc: f64,
    pub clamped: String,
    /// (vocab, predicted CTC) pairs spanning the observed range, for plotting.
    pub curve: Vec<(f64, f64)>,
}

fn lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.is_empty()).collect()
}

fn measure(model: &TokenizerModel, text: &str) -> Tokenization {
    let enc = Encoder::new(model);
    let all = lines(text);
    let tokens: usize = all.iter().map(|l| enc.encode(l).len()).sum();
    let bytes: usize = all.iter().map(|l| l.len()).sum();
    let pieces = all
        .first()
        .map(|l| {
            enc.encode(l)
                .into_iter()
                .take(SHOWN_PIECES)
                .map(|id| String::from_utf8_lossy(model.token_bytes(id).unwrap_or_default()).into_owned())
                .collect()
        })
        .unwrap_or_default();
    Tokenization {
        algorithm: model.algorithm().to_string(),
        vocab_size: model.vocab_size(),
        transition_point: model.transition_point(),
        tokens,
        bytes,
        bytes_per_token: if tokens == 0 { 0.0 } else { bytes as f64 / tokens as f64 },
        pieces,
    }
}

/// Trains BPE and SuperBPE on `text` at the same vocabulary size and
/// tokenizes `text` with both.
pub fn compare(text: &str, vocab_size: usize, transition_fraction: f64) -> Result<Comparison, String> {
    let corpus = lines(text);
    let prov = Provenance::default();
    let bpe = train_bpe_from_lines(corpus.iter().copied(), vocab_size, PreTokenizerSpec::default(), prov.clone())
        .map_err(|e| e.to_string())?;
    let cfg = SuperBpeConfig::new(vocab_size, transition_fraction);
    let superbpe = train_superbpe_from_lines(corpus.iter().copied(), &cfg, prov).map_err(|e| e.to_string())?;
    Ok(Comparison {
        bpe: measure(&bpe, text),
        superbpe: measure(&superbpe, text),
    })
}

/// Token counts of `eval` under BPE tokenizers of each size, all cut from a
/// single run at the largest size.
pub fn curve(train: &str, eval: &str, sizes: &[usize]) -> Result<Vec<CurvePoint>, String> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let Some(&largest) = sizes.last() else {
        return Err("no vocabulary sizes given".into());
    };
    let eval = if eval.trim().is_empty() { train } else { eval };
    let full = train_bpe_from_lines(lines(train), largest, PreTokenizerSpec::default(), Provenance::default())
        .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(sizes.len());
    for v in sizes {
        let model = full.truncated(v).map_err(|e| format!("vocab {v}: {e}"))?;
        let enc = Encoder::new(&model);
        let ctc = lines(eval).iter().map(|l| enc.encode(l).len() as u64).sum();
        out.push(CurvePoint { vocab_size: v, ctc });
    }
    Ok(out)
}

/// Fits the compression curve through `points` and plans the vocabulary that
/// reaches `target`, clamped to the measured sizes.
pub fn fit_plan(points: &[CurvePoint], target: u64) -> Result<FitPlan, String> {
    let pts: Vec<(usize, f64)> = points.iter().map(|p| (p.vocab_size, p.ctc as f64)).collect();
    let fit = fit_power_law("demo", &pts).map_err(|e| e.to_string())?;
    let observed: BTreeMap<usize, f64> = pts.iter().copied().collect();
    let (lo, hi) = (*observed.keys().next().unwrap(), *observed.keys().next_back().unwrap());
    let entry = invert_for_target(&fit, target, &observed, VocabBounds { min_vocab: lo, max_vocab: hi })
        .map_err(|e| e.to_string())?;
    let (llo, lhi) = ((lo as f64).ln(), (hi as f64).ln());
    let curve = (0..CURVE_SAMPLES)
        .map(|i| {
            let v = (llo + (lhi - llo) * i as f64 / (CURVE_SAMPLES - 1) as f64).exp();
            (v, fit.predict(v))
        })
        .collect();
    Ok(FitPlan {
        a: fit.a,
        b: fit.b,
        c: fit.c,
        rmse: fit.rmse_fit,
        r2: fit.r2,
        target_ctc: target,
        planned_vocab: entry.planned_vocab,
        predicted_ctc: entry.predicted_ctc,
        clamped: entry.clamp_label(),
        curve,
    })
}

/// Synthetic text in one of the built-in languages, for trying the page
/// without pasting anything.
pub fn sample(tag: &str, bytes: usize, seed: u64) -> Result<String, String> {
    let lang = default_languages()
        .into_iter()
        .find(|l| l.tag == tag)
        .ok_or_else(|| format!("unknown language {tag}"))?;
    Ok(Renderer::new(&lang).corpus(seed, 0, bytes).join("\n"))
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = compareTokenizers)]
pub fn compare_tokenizers(text: &str, vocab_size: usize, transition_fraction: f64) -> Result<String, JsValue> {
    json(compare(text, vocab_size, transition_fraction))
}

#[wasm_bindgen(js_name = compressionCurve)]
pub fn compression_curve(train: &str, eval: &str, sizes: Vec<u32>) -> Result<String, JsValue> {
    let sizes: Vec<usize> = sizes.into_iter().map(|s| s as usize).collect();
    json(curve(train, eval, &sizes))
}

#[wasm_bindgen(js_name = fitAndPlan)]
pub fn fit_and_plan(points_json: &str, target: f64) -> Result<String, JsValue> {
    let points: Vec<CurvePoint> = serde_json::from_str(points_json).map_err(|e| JsValue::from_str(&e.to_string()))?;
    json(fit_plan(&points, target.max(0.0).round() as u64))
}

#[wasm_bindgen(js_name = sampleText)]
pub fn sample_text(tag: &str, bytes: usize, seed: u32) -> Result<String, JsValue> {
    sample(tag, bytes, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = languageTags)]
pub fn language_tags() -> Vec<String> {
    default_languages().into_iter().map(|l| l.tag).collect()
}
