//! JSON-lines dataset ingestion: one `{"id", "text", "label"?}` object per line.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Instance, LabelSet};

/// Loads instances in file order. Blank lines are skipped.
pub fn load_dataset(path: &Path, label_set: &LabelSet) -> Result<Vec<Instance>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Dataset {
            path: path.to_owned(),
            line: line_no,
            message,
        };
        let instance: Instance =
            serde_json::from_str(line).map_err(|e| bad(format!("malformed record: {e}")))?;
        if instance.text.trim().is_empty() {
            return Err(bad(format!("instance '{}' has empty text", instance.id)));
        }
        if let Some(label) = &instance.gold_label {
            if !label_set.contains(label) {
                return Err(Error::UnknownLabel {
                    label: label.clone(),
                    line: line_no,
                });
            }
        }
        if !seen.insert(instance.id.clone()) {
            return Err(bad(format!("duplicate id '{}'", instance.id)));
        }
        out.push(instance);
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset(path.to_owned()));
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut buf = Vec::new();
    for inst in instances {
        serde_json::to_writer(&mut buf, inst)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}
