mod common;

use common::{brute_best_score, naive_bpe, oracle_spans};
use montok_core::bpe::train_bpe_from_lines;
use montok_core::model::{Provenance, TokenizerModel};
use montok_core::pretok::{pretokenize, PreTokenizerSpec};
use montok_core::unigram::ViterbiEncoder;
use proptest::prelude::*;

fn corpus_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[abcé ]{0,40}", 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_spans_agree_with_library(text in "[ab \t\u{a0}\u{3000}]{0,30}") {
        let lib: Vec<String> = pretokenize(&text, &PreTokenizerSpec::whitespace()).into_iter().map(String::from).collect();
        prop_assert_eq!(lib, oracle_spans(&text));
    }

    #[test]
    fn incremental_bpe_matches_recount(lines in corpus_strategy(), extra in 1usize..60) {
        let vocab = 256 + extra;
        let model = train_bpe_from_lines(lines.iter().map(String::as_str), vocab, PreTokenizerSpec::whitespace(), Provenance::default());
        match model {
            Ok(m) => prop_assert_eq!(m.merges().to_vec(), naive_bpe(&lines, vocab)),
            Err(e) => prop_assert!(lines.iter().all(|l| l.is_empty()), "{}", e),
        }
    }

    #[test]
    fn viterbi_is_optimal(
        pieces in prop::collection::vec("[abc]{2,4}", 0..8),
        raw_scores in prop::collection::vec(-8.0f64..-0.1, 264),
        text in "[abc]{1,10}",
    ) {
        let mut vocab: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        for p in pieces {
            if !vocab.contains(&p.as_bytes().to_vec()) {
                vocab.push(p.into_bytes());
            }
        }
        let scores = raw_scores[..vocab.len()].to_vec();
        let model = TokenizerModel::unigram(vocab.clone(), scores.clone(), PreTokenizerSpec::none(), Provenance::default()).unwrap();
        let enc = ViterbiEncoder::new(&model).unwrap();
        let ids = enc.encode(&text);
        prop_assert_eq!(model.decode(&ids).unwrap(), text.clone());
        let best = brute_best_score(&vocab, &scores, text.as_bytes());
        prop_assert!((enc.score(&ids) - best).abs() < 1e-9, "{} vs {}", enc.score(&ids), best);
    }
}

#[test]
fn duplicate_byte_strings_are_never_learned() {
    // "ab"+"c" and "a"+"bc" both spell "abc"
    let lines: Vec<String> = ["abc abc bc bc bc ab ab ab ab xabc xabc"].iter().map(|s| s.to_string()).collect();
    let m = train_bpe_from_lines(lines.iter().map(String::as_str), 300, PreTokenizerSpec::whitespace(), Provenance::default()).unwrap();
    assert_eq!(m.merges().to_vec(), naive_bpe(&lines, 300));
}
