use super::{evaluate_masks, require_words, PerturbationMask, TextClassifier};
use crate::error::Result;
use crate::types::{AttributionMethod, AttributionResult};

/// Leave-one-out: score i is `p(target | x) − p(target | x without word i)`.
pub fn occlusion_attribute<C: TextClassifier + ?Sized>(
    text: &str,
    target_label: &str,
    classifier: &C,
) -> Result<AttributionResult> {
    let words = require_words(text)?;
    let full = classifier.prob(&words.join(" "), target_label)?;
    let masks: Vec<PerturbationMask> = (0..words.len())
        .map(|i| {
            let mut m = PerturbationMask::all(words.len());
            m.bits[i] = false;
            m
        })
        .collect();
    let dropped = evaluate_masks(classifier, &words, &masks, target_label)?;
    let scores = dropped.iter().map(|p| full - p).collect();
    Ok(AttributionResult::from_word_scores(
        AttributionMethod::Occlusion,
        &words,
        scores,
        target_label,
    ))
}
