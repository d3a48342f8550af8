use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{instance_seed, Engine};
use crate::attribution::TextClassifier;
use crate::error::Result;
use crate::faithfulness::{instance_faithfulness, FaithfulnessCell, FaithfulnessReport, InstanceFaithfulness};
use crate::types::{AttributionMethod, Instance};

impl Engine<'_> {
    /// Comprehensiveness, sufficiency and τ-LOO of one attribution method
    /// over `dataset`, each attribution taken w.r.t. the predicted label.
    pub fn faithfulness_rows(&self, dataset: &[Instance], method: AttributionMethod) -> Result<Vec<InstanceFaithfulness>> {
        let clf = self.classifier()?;
        let thresholds = &self.config.faithfulness.thresholds;
        dataset
            .par_iter()
            .map(|i| {
                let target = clf.predict(&i.text)?.label;
                let attr = self.attribute(&i.text, &target, method, instance_seed(self.config.seed, &i.id))?;
                instance_faithfulness(&i.id, &attr, &i.text, &clf, thresholds)
            })
            .collect()
    }

    /// The method × metric grid for every method in the faithfulness settings.
    pub fn faithfulness_report(&self, dataset: &[Instance]) -> Result<FaithfulnessReport> {
        let mut methods = BTreeMap::new();
        for &m in &self.config.faithfulness.methods {
            let rows = self.faithfulness_rows(dataset, m)?;
            methods.insert(m, FaithfulnessCell::from_instances(&rows)?);
        }
        Ok(FaithfulnessReport {
            dataset: self.labels.dataset_name().to_owned(),
            thresholds: self.config.faithfulness.thresholds.clone(),
            methods,
        })
    }
}
