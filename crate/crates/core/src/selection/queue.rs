use super::kmeans::{sq_dist, Clustering};

/// A demonstration candidate with its position in its cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub id: String,
    pub cluster_id: usize,
    pub rank_in_cluster: usize,
}

/// Per-cluster members ordered by distance to the centroid, drawn round-robin.
///
/// Single consumer: every id is handed out at most once over the queue's lifetime.
#[derive(Debug, Clone)]
pub struct CandidateQueue {
    clusters: Vec<Vec<String>>,
    taken: Vec<usize>,
    cursor: usize,
}

impl CandidateQueue {
    /// Builds the queue from a clustering, leaving out `exclude` (the query).
    pub fn new(clustering: &Clustering, points: &[Vec<f64>], exclude: Option<&str>) -> Self {
        let mut clusters: Vec<Vec<(f64, &String)>> = vec![Vec::new(); clustering.k];
        for ((id, &c), p) in clustering.ids.iter().zip(&clustering.assignments).zip(points) {
            if Some(id.as_str()) == exclude {
                continue;
            }
            clusters[c].push((sq_dist(p, &clustering.centroids[c]), id));
        }
        let clusters = clusters
            .into_iter()
            .map(|mut members| {
                members.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
                members.into_iter().map(|(_, id)| id.clone()).collect()
            })
            .collect::<Vec<Vec<String>>>();
        CandidateQueue {
            taken: vec![0; clusters.len()],
            clusters,
            cursor: 0,
        }
    }

    /// Builds a queue directly from already ordered cluster member lists.
    pub fn from_sorted(clusters: Vec<Vec<String>>) -> Self {
        CandidateQueue {
            taken: vec![0; clusters.len()],
            clusters,
            cursor: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.clusters
            .iter()
            .zip(&self.taken)
            .map(|(c, t)| c.len() - t)
            .sum()
    }

    /// Up to `count` ids, one per non-exhausted cluster in turn, nearest first.
    pub fn next_candidates(&mut self, count: usize) -> Vec<Candidate> {
        let mut out = Vec::new();
        let k = self.clusters.len();
        while out.len() < count && self.remaining() > 0 {
            let c = self.cursor % k;
            self.cursor = (c + 1) % k;
            let rank = self.taken[c];
            if let Some(id) = self.clusters[c].get(rank) {
                self.taken[c] += 1;
                out.push(Candidate {
                    id: id.clone(),
                    cluster_id: c,
                    rank_in_cluster: rank,
                });
            }
        }
        out
    }
}
