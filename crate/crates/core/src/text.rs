//! Word tokenization shared by attribution, word alignment and textual similarity.
//!
//! A word is a maximal run of non-whitespace characters of the NFC-normalized text.

use unicode_normalization::UnicodeNormalization;

/// Splits `text` into NFC-normalized, whitespace-delimited words.
pub fn normalized_word_tokens(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    normalized.split_whitespace().map(str::to_owned).collect()
}

/// Joins the words selected by `keep` back into text with single spaces.
pub fn join_kept<S: AsRef<str>>(words: &[S], keep: impl Fn(usize) -> bool) -> String {
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if !keep(i) {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w.as_ref());
    }
    out
}
