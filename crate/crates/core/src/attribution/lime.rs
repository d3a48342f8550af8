//! LIME: a locally weighted linear surrogate fit on word-deletion samples.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::wls::weighted_ridge;
use super::{evaluate_masks, require_words, PerturbationMask, TextClassifier};
use crate::error::{Error, Result};
use crate::types::{AttributionMethod, AttributionResult};

/// How perturbation masks are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskSampling {
    /// The all-ones mask, then masks that delete a uniformly drawn number of
    /// uniformly drawn words.
    #[default]
    Random,
    /// Every one of the 2^W masks (W ≤ 20).
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LimeKernel {
    /// `sqrt(exp(-d² / width²))` over the cosine distance to the unperturbed mask.
    #[default]
    Exponential,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Defaults to `0.75 · sqrt(W)`.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
    pub sampling: MaskSampling,
    pub kernel: LimeKernel,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 500,
            kernel_width: None,
            ridge: 1e-3,
            sampling: MaskSampling::Random,
            kernel: LimeKernel::Exponential,
        }
    }
}

/// The fitted surrogate behind a LIME explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct LimeSurrogate {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub ridge: f64,
    pub n_samples: usize,
}

fn cosine_distance_to_full(mask: &PerturbationMask) -> f64 {
    let kept = mask.kept();
    if kept == 0 {
        return 1.0;
    }
    1.0 - (kept as f64 / mask.bits.len() as f64).sqrt()
}

fn draw_masks(n_words: usize, cfg: &LimeConfig, seed: u64) -> Result<Vec<PerturbationMask>> {
    match cfg.sampling {
        MaskSampling::Exhaustive => {
            if n_words > 20 {
                return Err(Error::InvalidInput(format!(
                    "exhaustive LIME sampling over {n_words} words"
                )));
            }
            Ok((0..1u64 << n_words)
                .rev()
                .map(|code| PerturbationMask::from_code(code, n_words))
                .collect())
        }
        MaskSampling::Random => {
            if cfg.n_samples < n_words + 2 {
                return Err(Error::InvalidInput(format!(
                    "LIME needs at least {} samples for {n_words} words, got {}",
                    n_words + 2,
                    cfg.n_samples
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut masks = Vec::with_capacity(cfg.n_samples);
            masks.push(PerturbationMask::all(n_words));
            while masks.len() < cfg.n_samples {
                let removed = rng.gen_range(1..=n_words);
                let mut m = PerturbationMask::all(n_words);
                for i in sample(&mut rng, n_words, removed) {
                    m.bits[i] = false;
                }
                masks.push(m);
            }
            Ok(masks)
        }
    }
}

/// Fits the surrogate for `target_label` around `text`.
pub fn lime_surrogate<C: TextClassifier + ?Sized>(
    text: &str,
    target_label: &str,
    classifier: &C,
    cfg: &LimeConfig,
    seed: u64,
) -> Result<LimeSurrogate> {
    let words = require_words(text)?;
    let masks = draw_masks(words.len(), cfg, seed)?;
    let y = evaluate_masks(classifier, &words, &masks, target_label)?;
    let width = cfg
        .kernel_width
        .unwrap_or_else(|| 0.75 * (words.len() as f64).sqrt());
    let weights: Vec<f64> = masks
        .iter()
        .map(|m| match cfg.kernel {
            LimeKernel::Uniform => 1.0,
            LimeKernel::Exponential => {
                let d = cosine_distance_to_full(m);
                (-(d * d) / (width * width)).exp().sqrt()
            }
        })
        .collect();
    let rows: Vec<Vec<f64>> = masks.iter().map(PerturbationMask::as_features).collect();
    let fit = weighted_ridge(&rows, &y, &weights, cfg.ridge)
        .ok_or_else(|| Error::InvalidInput("LIME design matrix is degenerate".into()))?;
    Ok(LimeSurrogate {
        intercept: fit.intercept,
        coefficients: fit.coefficients,
        ridge: fit.ridge,
        n_samples: masks.len(),
    })
}

/// LIME attribution: the surrogate's per-word coefficients.
pub fn lime_attribute<C: TextClassifier + ?Sized>(
    text: &str,
    target_label: &str,
    classifier: &C,
    cfg: &LimeConfig,
    seed: u64,
) -> Result<AttributionResult> {
    let words = require_words(text)?;
    let surrogate = lime_surrogate(text, target_label, classifier, cfg, seed)?;
    let mut result = AttributionResult::from_word_scores(
        AttributionMethod::Lime,
        &words,
        surrogate.coefficients,
        target_label,
    );
    if surrogate.ridge > cfg.ridge {
        result
            .notes
            .push(format!("ridge raised from {} to {}", cfg.ridge, surrogate.ridge));
    }
    Ok(result)
}
