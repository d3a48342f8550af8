//! Attribution methods against independent oracles.

mod oracles;

use fitcf_core::attribution::{
    extract_important_words, kernel_shap_attribute, lime_attribute, lime_surrogate, occlusion_attribute, FnClassifier,
    LimeConfig, LimeKernel, MaskSampling, ShapConfig,
};
use fitcf_core::text::normalized_word_tokens;
use fitcf_core::types::{AttributionMethod, AttributionResult};
use oracles::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exhaustive() -> LimeConfig {
    LimeConfig {
        sampling: MaskSampling::Exhaustive,
        ..LimeConfig::default()
    }
}

#[test]
fn shap_matches_permutation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let n = rng.gen_range(1..=6);
        let table = random_table(&mut rng, n);
        let clf = table_box(table.clone());
        let got = kernel_shap_attribute(&box_words(n), "on", &clf, &ShapConfig::default(), 0).unwrap();
        let want = shapley_by_permutations(n, &|c| table[c as usize]);
        for (g, w) in got.scores.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
    }
}

#[test]
fn shap_of_constant_box_is_zero() {
    let clf = FnClassifier::new(binary(), |_: &str| vec![0.3, 0.7]);
    let r = kernel_shap_attribute("a b c d", "on", &clf, &ShapConfig::default(), 0).unwrap();
    assert!(r.scores.iter().all(|s| s.abs() < 1e-12));
}

#[test]
fn shap_of_additive_box_is_its_coefficients() {
    let table = linear_table(0.2, &[0.1, -0.05, 0.3]);
    let r = kernel_shap_attribute(&box_words(3), "on", &table_box(table), &ShapConfig::default(), 0).unwrap();
    for (s, c) in r.scores.iter().zip([0.1, -0.05, 0.3]) {
        assert!((s - c).abs() < 1e-12);
    }
}

#[test]
fn shap_splits_an_and_gate_evenly() {
    // on = 1 only when both words are present.
    let table = vec![0.0, 0.0, 0.0, 1.0];
    let r = kernel_shap_attribute(&box_words(2), "on", &table_box(table), &ShapConfig::default(), 0).unwrap();
    assert!((r.scores[0] - 0.5).abs() < 1e-12 && (r.scores[1] - 0.5).abs() < 1e-12);
}

#[test]
fn sampled_shap_is_close_and_efficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (b, coef) = random_linear(&mut rng, 14);
    let table = linear_table(b, &coef);
    let cfg = ShapConfig {
        n_samples: 4096,
        exact_max_words: 8,
    };
    let r = kernel_shap_attribute(&box_words(14), "on", &table_box(table.clone()), &cfg, 3).unwrap();
    let total: f64 = r.scores.iter().sum();
    assert!((total - (table[table.len() - 1] - table[0])).abs() < 1e-9);
    for (s, c) in r.scores.iter().zip(&coef) {
        assert!((s - c).abs() < 1e-6, "{s} vs {c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shap_efficiency_and_symmetry(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = random_table(&mut rng, n);
        // Make words 0 and 1 interchangeable.
        for code in 0..table.len() {
            let swapped = (code & !3) | ((code & 1) << 1) | ((code >> 1) & 1);
            if swapped < code {
                table[code] = table[swapped];
            }
        }
        let r = kernel_shap_attribute(&box_words(n), "on", &table_box(table.clone()), &ShapConfig::default(), 0).unwrap();
        let total: f64 = r.scores.iter().sum();
        prop_assert!((total - (table[table.len() - 1] - table[0])).abs() < 1e-9);
        prop_assert!((r.scores[0] - r.scores[1]).abs() < 1e-9);
    }

    #[test]
    fn lime_recovers_linear_boxes(seed in any::<u64>(), n in 2usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, coef) = random_linear(&mut rng, n);
        let clf = table_box(linear_table(b, &coef));
        let s = lime_surrogate(&box_words(n), "on", &clf, &exhaustive(), 0).unwrap();
        prop_assert!((s.intercept - b).abs() < 1e-3);
        for (got, want) in s.coefficients.iter().zip(&coef) {
            prop_assert!((got - want).abs() < 1e-3);
        }
    }
}

#[test]
fn single_word_recovery_without_ridge() {
    // With only two masks the default ridge shrinks a slope by about 0.35%.
    let clf = table_box(vec![0.1, 0.5]);
    let cfg = LimeConfig { ridge: 0.0, ..exhaustive() };
    let s = lime_surrogate("w0", "on", &clf, &cfg, 0).unwrap();
    assert!((s.coefficients[0] - 0.4).abs() < 1e-12);
    let s = lime_surrogate("w0", "on", &clf, &exhaustive(), 0).unwrap();
    assert!((s.coefficients[0] - 0.4).abs() < 2e-3);
}

#[test]
fn lime_on_constant_box_is_zero() {
    let clf = FnClassifier::new(binary(), |_: &str| vec![0.6, 0.4]);
    let r = lime_attribute("a b c d e", "on", &clf, &LimeConfig::default(), 1).unwrap();
    assert!(r.scores.iter().all(|s| s.abs() < 1e-9));
    assert_eq!(r.method, AttributionMethod::Lime);
}

#[test]
fn lime_matches_closed_form_weighted_least_squares() {
    // Eight masks over four words, uniform kernel, no ridge: β = (XᵀX)⁻¹Xᵀy.
    let table: Vec<f64> = (0..16).map(|c| 0.1 + 0.05 * (c as f64) - 0.002 * (c * c) as f64).collect();
    let clf = table_box(table.clone());
    let cfg = LimeConfig {
        sampling: MaskSampling::Exhaustive,
        kernel: LimeKernel::Uniform,
        ridge: 0.0,
        ..LimeConfig::default()
    };
    let s = lime_surrogate(&box_words(4), "on", &clf, &cfg, 0).unwrap();
    // Orthogonal ±½ design over all 16 masks: β_i is the mean difference.
    for i in 0..4 {
        let with: f64 = (0..16).filter(|c| c >> i & 1 == 1).map(|c| table[c]).sum::<f64>() / 8.0;
        let without: f64 = (0..16).filter(|c| c >> i & 1 == 0).map(|c| table[c]).sum::<f64>() / 8.0;
        assert!((s.coefficients[i] - (with - without)).abs() < 1e-12);
    }
}

#[test]
fn lime_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let table = random_table(&mut rng, 6);
    let clf = table_box(table);
    let cfg = LimeConfig {
        n_samples: 64,
        ..LimeConfig::default()
    };
    let a = lime_attribute(&box_words(6), "on", &clf, &cfg, 42).unwrap();
    let b = lime_attribute(&box_words(6), "on", &clf, &cfg, 42).unwrap();
    let c = lime_attribute(&box_words(6), "on", &clf, &cfg, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.scores, c.scores);
}

#[test]
fn occlusion_is_leave_one_out() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let table = random_table(&mut rng, 5);
    let r = occlusion_attribute(&box_words(5), "on", &table_box(table.clone())).unwrap();
    for i in 0..5 {
        assert!((r.scores[i] - (table[31] - table[31 & !(1 << i)])).abs() < 1e-12);
    }
}

#[test]
fn important_words_from_subword_tokens() {
    let a = AttributionResult {
        method: AttributionMethod::IntegratedGradients,
        tokens: ["[CLS]", "a", "win", "##ner", "is", "here", "[SEP]"].map(String::from).to_vec(),
        scores: vec![9.0, 0.1, 0.3, 0.7, -0.2, 0.4, 9.0],
        word_alignment: vec![None, Some(0), Some(1), Some(1), Some(2), Some(3), None],
        target_label: "on".into(),
        notes: vec![],
    };
    let iw = extract_important_words(&a, "a winner is here", 3).unwrap();
    assert_eq!(iw.words, vec!["winner", "here", "a"]);
    assert_eq!(iw.source_scores, vec![0.7, 0.4, 0.1]);
}

#[test]
fn important_words_come_from_the_text() {
    let text = "The movie was not good , not at all";
    let words = normalized_word_tokens(text);
    let scores: Vec<f64> = (0..words.len()).map(|i| (i as f64 * 0.37).sin()).collect();
    let a = AttributionResult::from_word_scores(AttributionMethod::Lime, &words, scores, "on");
    let iw = extract_important_words(&a, text, 5).unwrap();
    assert_eq!(iw.words.len(), 5);
    assert!(iw.words.iter().all(|w| words.contains(w)));
    assert!(iw.source_scores.windows(2).all(|p| p[0] >= p[1]));
}
