//! Black-box feature attribution over word-deletion perturbations, and the
//! reduction of attribution scores to a list of important words.

mod lime;
mod occlusion;
mod shap;
pub mod wls;
mod words;

use rayon::prelude::*;

pub use lime::{lime_attribute, lime_surrogate, LimeConfig, LimeKernel, MaskSampling};
pub use occlusion::occlusion_attribute;
pub use shap::{exact_shapley, kernel_shap_attribute, ShapConfig};
pub use words::{extract_important_words, rank_words, word_scores};

use crate::error::{Error, Result};
use crate::gateway::{EndpointBinding, Gateway};
use crate::text::join_kept;
use crate::types::{LabelSet, Prediction};

/// Anything that maps text to a label distribution.
pub trait TextClassifier: Sync {
    fn predict(&self, text: &str) -> Result<Prediction>;

    fn prob(&self, text: &str, label: &str) -> Result<f64> {
        Ok(self.predict(text)?.prob(label))
    }
}

impl<T: TextClassifier + ?Sized> TextClassifier for &T {
    fn predict(&self, text: &str) -> Result<Prediction> {
        (**self).predict(text)
    }
}

/// A classifier backed by a gateway binding.
#[derive(Clone, Copy)]
pub struct RemoteClassifier<'a> {
    pub gateway: &'a Gateway,
    pub binding: &'a EndpointBinding,
}

impl TextClassifier for RemoteClassifier<'_> {
    fn predict(&self, text: &str) -> Result<Prediction> {
        self.gateway.classify(self.binding, text)
    }
}

/// Wraps a closure returning a probability vector in label-set order.
pub struct FnClassifier<F> {
    labels: LabelSet,
    f: F,
}

impl<F> FnClassifier<F>
where
    F: Fn(&str) -> Vec<f64> + Sync,
{
    pub fn new(labels: LabelSet, f: F) -> Self {
        FnClassifier { labels, f }
    }
}

impl<F> TextClassifier for FnClassifier<F>
where
    F: Fn(&str) -> Vec<f64> + Sync,
{
    fn predict(&self, text: &str) -> Result<Prediction> {
        Prediction::from_probabilities(&self.labels, &(self.f)(text), 1e-6)
    }
}

/// Which words of an instance survive a perturbation (`true` = kept).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PerturbationMask {
    pub bits: Vec<bool>,
}

impl PerturbationMask {
    pub fn all(len: usize) -> Self {
        PerturbationMask { bits: vec![true; len] }
    }

    /// Mask whose bit `i` is bit `i` of `code`.
    pub fn from_code(code: u64, len: usize) -> Self {
        PerturbationMask {
            bits: (0..len).map(|i| (code >> i) & 1 == 1).collect(),
        }
    }

    pub fn kept(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Deletes the masked-out words.
    pub fn apply<S: AsRef<str>>(&self, words: &[S]) -> String {
        debug_assert_eq!(words.len(), self.bits.len());
        join_kept(words, |i| self.bits[i])
    }

    pub fn as_features(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(u8::from(b))).collect()
    }
}

/// Target-label probability of every perturbed text, in mask order.
pub(crate) fn evaluate_masks<C: TextClassifier + ?Sized>(
    classifier: &C,
    words: &[String],
    masks: &[PerturbationMask],
    target_label: &str,
) -> Result<Vec<f64>> {
    masks
        .par_iter()
        .map(|m| classifier.prob(&m.apply(words), target_label))
        .collect()
}

pub(crate) fn require_words(text: &str) -> Result<Vec<String>> {
    let words = crate::text::normalized_word_tokens(text);
    if words.is_empty() {
        return Err(Error::InvalidInput("cannot attribute an empty text".into()));
    }
    Ok(words)
}
