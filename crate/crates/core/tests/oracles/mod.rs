//! Reference implementations written for clarity, not speed.

#![allow(dead_code)]

use fitcf_core::attribution::FnClassifier;
use fitcf_core::types::LabelSet;
use rand::Rng;

/// Shapley values by averaging marginal contributions over all n! orderings.
pub fn shapley_by_permutations(n: usize, value: &dyn Fn(u64) -> f64) -> Vec<f64> {
    let mut phi = vec![0.0; n];
    let mut perm: Vec<usize> = (0..n).collect();
    let mut count = 0u64;
    permute(&mut perm, 0, &mut |order| {
        count += 1;
        let mut coalition = 0u64;
        for &i in order {
            let before = value(coalition);
            coalition |= 1 << i;
            phi[i] += value(coalition) - before;
        }
    });
    phi.iter().map(|p| p / count as f64).collect()
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Every permutation of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut v: Vec<usize> = (0..n).collect();
    permute(&mut v, 0, &mut |p| out.push(p.to_vec()));
    out
}

/// Textbook edit distance over the full (m+1)×(n+1) table.
pub fn levenshtein_dp<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// τ-b by counting every pair. `None` when either side is constant.
pub fn kendall_pairs(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = (a[i] - a[j]).signum() as i64 * i64::from(a[i] != a[j]);
            let db = (b[i] - b[j]).signum() as i64 * i64::from(b[i] != b[j]);
            if da == 0 {
                ties_a += 1;
            }
            if db == 0 {
                ties_b += 1;
            }
            match da * db {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * n.saturating_sub(1) / 2) as i64;
    let denom = ((n0 - ties_a) as f64 * (n0 - ties_b) as f64).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}

pub fn binary() -> LabelSet {
    LabelSet::new("box", ["on", "off"]).unwrap()
}

/// Words `w0 … w{n-1}`, and the presence code of a perturbed text over them.
pub fn box_words(n: usize) -> String {
    (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
}

pub fn presence(text: &str) -> u64 {
    text.split_whitespace()
        .map(|w| 1u64 << w[1..].parse::<u32>().unwrap())
        .fold(0, |a, b| a | b)
}

/// A black box whose "on" probability is an arbitrary table over word presence.
pub fn table_box(table: Vec<f64>) -> FnClassifier<impl Fn(&str) -> Vec<f64> + Sync> {
    FnClassifier::new(binary(), move |t: &str| {
        let p = table[presence(t) as usize];
        vec![p, 1.0 - p]
    })
}

pub fn random_table<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..1usize << n).map(|_| rng.gen_range(0.01..0.99)).collect()
}

/// `intercept + Σ coef_i · present_i`, kept inside (0, 1).
pub fn random_linear<R: Rng>(rng: &mut R, n: usize) -> (f64, Vec<f64>) {
    let coef: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.4..0.4) / n as f64).collect();
    (rng.gen_range(0.4..0.6), coef)
}

pub fn linear_table(intercept: f64, coef: &[f64]) -> Vec<f64> {
    (0..1u64 << coef.len())
        .map(|code| {
            intercept
                + coef
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| code >> i & 1 == 1)
                    .map(|(_, c)| c)
                    .sum::<f64>()
        })
        .collect()
}
