use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Engine;
use crate::error::{Error, Result};
use crate::gateway::EndpointKind;
use crate::selection::{kmeans, CandidateQueue, Clustering};
use crate::types::{Demonstration, FlipStatus, Instance};

/// Demonstrations built from the dataset plus bookkeeping on how they were found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationPool {
    pub demonstrations: Vec<Demonstration>,
    /// Number of demonstrations requested.
    pub target: usize,
    /// Candidates drawn from the queue.
    pub consumed: usize,
    pub rejected: usize,
    pub no_edit: usize,
    pub failed: usize,
    #[serde(skip)]
    pub clustering: Option<Clustering>,
    #[serde(skip)]
    pub embeddings: Vec<Vec<f64>>,
}

impl DemonstrationPool {
    pub fn shortfall(&self) -> usize {
        self.target.saturating_sub(self.demonstrations.len())
    }

    /// The first `count` demonstrations not derived from `query_id`.
    pub fn for_query(&self, query_id: &str, count: usize) -> Vec<Demonstration> {
        self.demonstrations
            .iter()
            .filter(|d| d.instance_id != query_id)
            .take(count)
            .cloned()
            .collect()
    }
}

impl Engine<'_> {
    /// Clusters the dataset, then draws candidates nearest-first round-robin
    /// over clusters, `candidates_per_round` at a time, generating a ZeroCF
    /// edit for each and keeping flip-verified pairs until `target` exist or
    /// the queue runs dry. With verification off every edited pair is kept.
    pub fn build_demonstrations(
        &self,
        dataset: &[Instance],
        exclude: Option<&str>,
        target: usize,
    ) -> Result<DemonstrationPool> {
        if target == 0 {
            return Err(Error::InvalidInput("demonstration target must be >= 1".into()));
        }
        let embedder = self.binding(EndpointKind::Embedder)?;
        let embeddings: Vec<Vec<f64>> = dataset
            .par_iter()
            .map(|i| self.gateway().embed(embedder, &i.text))
            .collect::<Result<_>>()?;
        let ids: Vec<String> = dataset.iter().map(|i| i.id.clone()).collect();
        let clustering = kmeans(
            &ids,
            &embeddings,
            self.config.num_clusters,
            self.config.seed,
            self.config.runtime.kmeans_max_iter,
        )?;
        let mut queue = CandidateQueue::new(&clustering, &embeddings, exclude);
        let by_id: std::collections::HashMap<&str, &Instance> = dataset.iter().map(|i| (i.id.as_str(), i)).collect();

        let mut pool = DemonstrationPool {
            demonstrations: Vec::new(),
            target,
            consumed: 0,
            rejected: 0,
            no_edit: 0,
            failed: 0,
            clustering: None,
            embeddings: Vec::new(),
        };
        while pool.demonstrations.len() < target {
            let batch = queue.next_candidates(self.config.candidates_per_round);
            if batch.is_empty() {
                break;
            }
            pool.consumed += batch.len();
            let records: Vec<_> = batch
                .par_iter()
                .map(|c| self.zerocf_generate(by_id[c.id.as_str()]))
                .collect();
            for (cand, rec) in batch.iter().zip(records) {
                if pool.demonstrations.len() == target {
                    break;
                }
                if !rec.succeeded() {
                    pool.failed += 1;
                    continue;
                }
                if rec.no_edit {
                    pool.no_edit += 1;
                    continue;
                }
                if self.config.flip_verification
                    && self.verify(&rec.instance.text, &rec.counterfactual_text)? != FlipStatus::Accepted
                {
                    pool.rejected += 1;
                    continue;
                }
                pool.demonstrations.push(Demonstration {
                    instance_id: cand.id.clone(),
                    original_text: rec.instance.text,
                    edited_text: rec.counterfactual_text,
                    cluster_id: cand.cluster_id,
                    rank_in_cluster: cand.rank_in_cluster,
                });
            }
        }
        if pool.demonstrations.is_empty() {
            return Err(Error::Degraded(format!(
                "no usable demonstrations after {} candidates ({} rejected, {} unedited, {} failed)",
                pool.consumed, pool.rejected, pool.no_edit, pool.failed
            )));
        }
        pool.clustering = Some(clustering);
        pool.embeddings = embeddings;
        Ok(pool)
    }
}
