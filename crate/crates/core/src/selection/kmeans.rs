use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of k-means over a set of identified vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    /// Instance ids, in input order.
    pub ids: Vec<String>,
    /// Cluster of `ids[i]`.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after every assignment step, ending with the final value.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Clustering {
    pub fn assignment(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id).map(|i| self.assignments[i])
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            // Fewer distinct points than k: take an unused index.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let pairs: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(p, centroids)).collect();
    let inertia = pairs.iter().map(|(_, d)| d).sum();
    (pairs.into_iter().map(|(j, _)| j).collect(), inertia)
}

fn means(points: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> Vec<Option<Vec<f64>>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s.into_iter().map(|x| x / c as f64).collect()))
        .collect()
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Stops when an assignment step changes nothing or after `max_iter` steps.
/// A cluster that loses all members is re-seeded at the point farthest from
/// its current centroid.
pub fn kmeans(ids: &[String], points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    let n = points.len();
    if ids.len() != n {
        return Err(Error::InvalidInput("ids and points differ in length".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k = {k} with {n} points")));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidInput("points differ in dimension".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let (mut assignments, mut inertia) = assign(points, &centroids);
    let mut trace = vec![inertia];
    let mut notes = Vec::new();
    let mut iterations = 1;

    while iterations < max_iter.max(1) {
        let updated = means(points, &assignments, k, dim);
        for (j, m) in updated.into_iter().enumerate() {
            match m {
                Some(c) => centroids[j] = c,
                None => {
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            let da = sq_dist(&points[a], &centroids[assignments[a]]);
                            let db = sq_dist(&points[b], &centroids[assignments[b]]);
                            da.total_cmp(&db).then(b.cmp(&a))
                        })
                        .expect("non-empty");
                    notes.push(format!("iteration {iterations}: cluster {j} empty, re-seeded at {}", ids[far]));
                    centroids[j] = points[far].clone();
                }
            }
        }
        let (next, next_inertia) = assign(points, &centroids);
        iterations += 1;
        trace.push(next_inertia);
        let unchanged = next == assignments;
        assignments = next;
        inertia = next_inertia;
        if unchanged {
            break;
        }
    }

    // Centroids are the means of the final assignment.
    let final_means = means(points, &assignments, k, dim);
    for (j, m) in final_means.into_iter().enumerate() {
        if let Some(c) = m {
            centroids[j] = c;
        }
    }
    let final_inertia: f64 = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    if final_inertia != inertia {
        trace.push(final_inertia);
    }

    Ok(Clustering {
        k,
        ids: ids.to_vec(),
        assignments,
        centroids,
        inertia: final_inertia,
        inertia_trace: trace,
        iterations,
        notes,
    })
}
