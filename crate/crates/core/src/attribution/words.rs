//! Token scores to word scores to important words.

use std::collections::HashSet;

use crate::error::Result;
use crate::text::normalized_word_tokens;
use crate::types::{AttributionResult, ImportantWords};

/// Word-level scores: the maximum over each word's tokens. Special tokens are
/// dropped; a word with no tokens gets `None`.
pub fn word_scores(attr: &AttributionResult, word_count: usize) -> Vec<Option<f64>> {
    let mut out: Vec<Option<f64>> = vec![None; word_count];
    for (score, word) in attr.scores.iter().zip(&attr.word_alignment) {
        if let Some(w) = word {
            if let Some(slot) = out.get_mut(*w) {
                *slot = Some(slot.map_or(*score, |s| s.max(*score)));
            }
        }
    }
    out
}

/// Word indices by descending score, ties to the lower index; unscored words last.
pub fn rank_words(scores: &[Option<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| match (scores[a], scores[b]) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    idx
}

/// The `n` highest-scoring distinct words of `original_text`.
///
/// Subword tokens are merged into their word (max score) and special tokens
/// are skipped, so their rank is filled by the next attributed words. Words
/// are compared case-insensitively for de-duplication and returned in the
/// surface form of their first top-ranked occurrence.
pub fn extract_important_words(
    attr: &AttributionResult,
    original_text: &str,
    n: usize,
) -> Result<ImportantWords> {
    let words = normalized_word_tokens(original_text);
    attr.validate(words.len())?;
    let scores = word_scores(attr, words.len());
    let mut seen = HashSet::new();
    let mut out = ImportantWords::default();
    for i in rank_words(&scores) {
        if out.words.len() == n {
            break;
        }
        let Some(score) = scores[i] else { break };
        if seen.insert(words[i].to_lowercase()) {
            out.words.push(words[i].clone());
            out.source_scores.push(score);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::AttributionMethod;

    fn word_attr(text: &str, scores: Vec<f64>) -> AttributionResult {
        AttributionResult::from_word_scores(
            AttributionMethod::Lime,
            &normalized_word_tokens(text),
            scores,
            "x",
        )
    }

    #[test]
    fn top_two_by_score() {
        let a = word_attr("w1 w2 w3 w4", vec![0.1, 0.9, 0.5, 0.2]);
        let iw = extract_important_words(&a, "w1 w2 w3 w4", 2).unwrap();
        assert_eq!(iw.words, vec!["w2", "w3"]);
        assert_eq!(iw.source_scores, vec![0.9, 0.5]);
    }

    #[test]
    fn subwords_merge_and_special_tokens_are_skipped() {
        let a = AttributionResult {
            method: AttributionMethod::Gradient,
            tokens: ["[CLS]", "win", "##ner", "now", "[SEP]"].map(String::from).to_vec(),
            scores: vec![5.0, 0.2, 0.8, 0.5, 4.0],
            word_alignment: vec![None, Some(0), Some(0), Some(1), None],
            target_label: "x".into(),
            notes: vec![],
        };
        let iw = extract_important_words(&a, "winner now", 2).unwrap();
        assert_eq!(iw.words, vec!["winner", "now"]);
        assert_eq!(iw.source_scores, vec![0.8, 0.5]);
    }

    #[test]
    fn n_larger_than_text_returns_all() {
        let a = word_attr("a b c", vec![0.3, 0.2, 0.1]);
        assert_eq!(extract_important_words(&a, "a b c", 10).unwrap().words.len(), 3);
    }

    #[test]
    fn duplicates_collapse_case_insensitively() {
        let a = word_attr("Good good bad", vec![0.9, 0.8, 0.1]);
        let iw = extract_important_words(&a, "Good good bad", 3).unwrap();
        assert_eq!(iw.words, vec!["Good", "bad"]);
    }

    #[test]
    fn ties_prefer_earlier_words() {
        assert_eq!(rank_words(&[Some(1.0), None, Some(2.0), Some(1.0)]), vec![2, 0, 3, 1]);
    }
}
