//! Demonstration candidate selection: k-means over sentence embeddings and a
//! centroid-proximity queue drawn round-robin across clusters.

mod kmeans;
mod pca;
mod queue;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, Clustering};
pub use pca::project_2d;
pub use queue::{Candidate, CandidateQueue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub id: String,
    pub cluster: usize,
    pub x: f64,
    pub y: f64,
}

/// Cluster sizes, inertia trace and 2-D coordinates for scatter plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub k: usize,
    pub sizes: Vec<usize>,
    pub inertia: f64,
    pub inertia_trace: Vec<f64>,
    pub points: Vec<ProjectedPoint>,
}

impl ClusteringReport {
    pub fn new(clustering: &Clustering, points: &[Vec<f64>]) -> Self {
        let xy = project_2d(points);
        ClusteringReport {
            k: clustering.k,
            sizes: clustering.sizes(),
            inertia: clustering.inertia,
            inertia_trace: clustering.inertia_trace.clone(),
            points: clustering
                .ids
                .iter()
                .zip(&clustering.assignments)
                .zip(xy)
                .map(|((id, &cluster), [x, y])| ProjectedPoint {
                    id: id.clone(),
                    cluster,
                    x,
                    y,
                })
                .collect(),
        }
    }

    /// `id,cluster,x,y` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,cluster,x,y\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", csv_field(&p.id), p.cluster, p.x, p.y));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
