//! Kendall's τ-b in O(n log n) (Knight's merge-sort algorithm).

use crate::error::{Error, Result};

fn tie_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` ascending, returning the number of inversions removed.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's τ-b with tie correction.
///
/// Errors on length mismatch, fewer than two observations, NaN input, or
/// when either side is constant (τ undefined).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!("rank lengths differ: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Metric("Kendall's tau needs at least 2 observations".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Metric("NaN in ranking".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let sa: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
    let mut sb: Vec<f64> = idx.iter().map(|&i| b[i]).collect();

    let ties_a = tie_pairs(&sa);
    let mut ties_joint = 0u64;
    let mut run = 1u64;
    for k in 1..n {
        if sa[k] == sa[k - 1] && sb[k] == sb[k - 1] {
            run += 1;
        } else {
            ties_joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    ties_joint += run * (run - 1) / 2;

    let swaps = merge_count(&mut sb, &mut Vec::with_capacity(n));
    let ties_b = tie_pairs(&sb);

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let denom = ((n0 - ties_a) as f64 * (n0 - ties_b) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Metric("Kendall's tau undefined for a constant ranking".into()));
    }
    let numer = n0 as f64 - ties_a as f64 - ties_b as f64 + ties_joint as f64 - 2.0 * swaps as f64;
    Ok((numer / denom).clamp(-1.0, 1.0))
}
