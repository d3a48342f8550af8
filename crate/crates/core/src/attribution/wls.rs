//! Weighted ridge least squares with an unpenalized intercept.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Ridge strength actually used; larger than requested after a fallback.
    pub ridge: f64,
}

const MAX_ESCALATIONS: usize = 12;

/// Fits `y ≈ intercept + X·β` minimizing `Σ wᵢ rᵢ² + ridge·|β|²`.
///
/// When the normal equations are not positive definite the ridge strength is
/// multiplied by 10 until they are. Returns `None` only if no ridge strength
/// within the escalation budget works (e.g. all weights zero).
pub fn weighted_ridge(rows: &[Vec<f64>], y: &[f64], weights: &[f64], ridge: f64) -> Option<WeightedFit> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    assert_eq!(n, y.len());
    assert_eq!(n, weights.len());

    let mut gram = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut rhs = DVector::<f64>::zeros(d + 1);
    let mut a = vec![0.0; d + 1];
    for ((row, &yi), &wi) in rows.iter().zip(y).zip(weights) {
        a[0] = 1.0;
        a[1..].copy_from_slice(row);
        for r in 0..=d {
            if a[r] == 0.0 {
                continue;
            }
            rhs[r] += wi * a[r] * yi;
            for c in 0..=d {
                gram[(r, c)] += wi * a[r] * a[c];
            }
        }
    }

    let mut lambda = ridge.max(0.0);
    for _ in 0..=MAX_ESCALATIONS {
        let mut m = gram.clone();
        for j in 1..=d {
            m[(j, j)] += lambda;
        }
        if let Some(chol) = m.cholesky() {
            let theta = chol.solve(&rhs);
            if theta.iter().all(|t| t.is_finite()) {
                return Some(WeightedFit {
                    intercept: theta[0],
                    coefficients: theta.iter().skip(1).copied().collect(),
                    ridge: lambda,
                });
            }
        }
        lambda = if lambda == 0.0 { 1e-6 } else { lambda * 10.0 };
    }
    None
}
