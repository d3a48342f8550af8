//! Shapley values of word presence.
//!
//! Up to `exact_max_words` words every coalition is evaluated and the Shapley
//! formula is applied directly. Beyond that, coalitions are sampled from the
//! Shapley kernel and the Kernel SHAP regression is solved with the efficiency
//! constraint eliminated analytically.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate_masks, require_words, PerturbationMask, TextClassifier};
use crate::error::{Error, Result};
use crate::types::{AttributionMethod, AttributionResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ShapConfig {
    /// Coalitions drawn by the sampling estimator.
    pub n_samples: usize,
    pub exact_max_words: usize,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            n_samples: 2048,
            exact_max_words: 12,
        }
    }
}

/// Shapley values of the set function `value(mask code)` over `n` players.
pub fn exact_shapley(n: usize, value: &[f64]) -> Vec<f64> {
    assert_eq!(value.len(), 1 << n);
    // weight[s] = s! (n - s - 1)! / n!
    let mut weight = vec![0.0; n];
    for (s, w) in weight.iter_mut().enumerate() {
        let mut x = 1.0 / n as f64;
        // 1 / (n * C(n-1, s))
        for j in 0..s {
            x *= (j + 1) as f64 / (n - 1 - j) as f64;
        }
        *w = x;
    }
    let mut phi = vec![0.0; n];
    for code in 0..(1usize << n) {
        let size = code.count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if code & (1 << i) == 0 {
                *p += weight[size] * (value[code | (1 << i)] - value[code]);
            }
        }
    }
    phi
}

pub fn kernel_shap_attribute<C: TextClassifier + ?Sized>(
    text: &str,
    target_label: &str,
    classifier: &C,
    cfg: &ShapConfig,
    seed: u64,
) -> Result<AttributionResult> {
    let words = require_words(text)?;
    let n = words.len();
    let (scores, note) = if n <= cfg.exact_max_words {
        let masks: Vec<PerturbationMask> = (0..1u64 << n)
            .map(|code| PerturbationMask::from_code(code, n))
            .collect();
        let values = evaluate_masks(classifier, &words, &masks, target_label)?;
        (exact_shapley(n, &values), None)
    } else {
        let (phi, note) = sampled_shapley(&words, target_label, classifier, cfg, seed)?;
        (phi, note)
    };
    let mut result =
        AttributionResult::from_word_scores(AttributionMethod::Shap, &words, scores, target_label);
    result.notes.extend(note);
    Ok(result)
}

fn sampled_shapley<C: TextClassifier + ?Sized>(
    words: &[String],
    target_label: &str,
    classifier: &C,
    cfg: &ShapConfig,
    seed: u64,
) -> Result<(Vec<f64>, Option<String>)> {
    let n = words.len();
    if cfg.n_samples < n + 2 {
        return Err(Error::InvalidInput(format!(
            "Kernel SHAP needs at least {} samples for {n} words, got {}",
            n + 2,
            cfg.n_samples
        )));
    }
    // Coalition sizes 1..n-1 with probability ∝ (n-1) / (s (n-s)).
    let size_weights: Vec<f64> = (1..n).map(|s| 1.0 / (s as f64 * (n - s) as f64)).collect();
    let total: f64 = size_weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: HashMap<Vec<bool>, f64> = HashMap::new();
    let mut order: Vec<Vec<bool>> = Vec::new();
    let mut add = |bits: Vec<bool>, counts: &mut HashMap<Vec<bool>, f64>| {
        let c = counts.entry(bits.clone()).or_insert(0.0);
        if *c == 0.0 {
            order.push(bits);
        }
        *c += 1.0;
    };
    let pairs = cfg.n_samples / 2;
    for _ in 0..pairs {
        let mut u = rng.gen::<f64>() * total;
        let mut size = n - 1;
        for (i, w) in size_weights.iter().enumerate() {
            if u < *w {
                size = i + 1;
                break;
            }
            u -= w;
        }
        let mut bits = vec![false; n];
        for i in sample(&mut rng, n, size) {
            bits[i] = true;
        }
        let complement: Vec<bool> = bits.iter().map(|b| !b).collect();
        add(bits, &mut counts);
        add(complement, &mut counts);
    }

    let mut masks: Vec<PerturbationMask> =
        vec![PerturbationMask::all(n), PerturbationMask { bits: vec![false; n] }];
    masks.extend(order.iter().map(|b| PerturbationMask { bits: b.clone() }));
    let values = evaluate_masks(classifier, words, &masks, target_label)?;
    let (v_full, v_empty) = (values[0], values[1]);
    let delta = v_full - v_empty;

    // Eliminate the last player: φ_last = delta − Σ_{i<last} φ_i.
    let d = n - 1;
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for (bits, v) in order.iter().zip(&values[2..]) {
        let w = counts[bits];
        let z_last = f64::from(u8::from(bits[d]));
        let y = v - v_empty - z_last * delta;
        let x: Vec<f64> = (0..d)
            .map(|i| f64::from(u8::from(bits[i])) - z_last)
            .collect();
        for r in 0..d {
            rhs[r] += w * x[r] * y;
            for c in 0..d {
                gram[(r, c)] += w * x[r] * x[c];
            }
        }
    }
    let mut ridge = 0.0;
    let mut note = None;
    let solution = loop {
        let mut m = gram.clone();
        for j in 0..d {
            m[(j, j)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            break ch.solve(&rhs);
        }
        ridge = if ridge == 0.0 { 1e-8 } else { ridge * 10.0 };
        note = Some(format!("Kernel SHAP regression regularized with ridge {ridge}"));
        if ridge > 1e3 {
            return Err(Error::InvalidInput("Kernel SHAP regression is degenerate".into()));
        }
    };
    let mut phi: Vec<f64> = solution.iter().copied().collect();
    let last = delta - phi.iter().sum::<f64>();
    phi.push(last);
    Ok((phi, note))
}
