//! Prompt templates with `{name}` placeholders.
//!
//! Rendering fails on any placeholder that is not supplied, and on any
//! supplied-but-unknown name, so a template edit can never silently leave a
//! slot empty.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Demonstration, LabelSet};

pub const PLACEHOLDERS: &[&str] = &[
    "dataset",
    "num_labels",
    "labels",
    "prediction",
    "important_words",
    "input_text",
    "counterpart",
    "demonstrations",
    "instance",
    "counterfactual",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Zerocf,
    Fitcf,
    FizleWords,
    FizleEdit,
    FlipJudge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub text: String,
}

impl PromptTemplate {
    pub fn new(kind: PromptKind, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        for name in placeholders(&text)? {
            if !PLACEHOLDERS.contains(&name) {
                return Err(Error::Template(format!("{kind:?} template uses unknown placeholder {{{name}}}")));
            }
        }
        Ok(PromptTemplate { kind, text })
    }

    pub fn from_file(kind: PromptKind, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(kind, strip_final_newline(&text))
    }

    pub fn render(&self, vars: &BTreeMap<&str, String>) -> Result<String> {
        let mut out = String::with_capacity(self.text.len() + 256);
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| Error::Template("unterminated placeholder".into()))?;
            let name = &rest[open + 1..open + close];
            let value = vars
                .get(name)
                .ok_or_else(|| Error::Template(format!("{:?} prompt: placeholder {{{name}}} not filled", self.kind)))?;
            out.push_str(value);
            rest = &rest[open + close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn placeholders(text: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| Error::Template("unterminated placeholder".into()))?;
        out.push(&rest[open + 1..open + close]);
        rest = &rest[open + close + 1..];
    }
    Ok(out)
}

fn strip_final_newline(s: &str) -> &str {
    s.strip_suffix("\r\n").or_else(|| s.strip_suffix('\n')).unwrap_or(s)
}

const ZEROCF: &str = include_str!("../templates/zerocf.txt");
const FITCF: &str = include_str!("../templates/fitcf.txt");
const FIZLE_WORDS: &str = include_str!("../templates/fizle_words.txt");
const FLIP_JUDGE: &str = include_str!("../templates/flip_judge.txt");

/// Every template a run uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub zerocf: PromptTemplate,
    pub fitcf: PromptTemplate,
    pub fizle_words: PromptTemplate,
    pub fizle_edit: PromptTemplate,
    pub flip_judge: PromptTemplate,
}

impl Default for PromptSet {
    fn default() -> Self {
        let t = |kind, text: &str| PromptTemplate::new(kind, strip_final_newline(text)).expect("bundled template");
        PromptSet {
            zerocf: t(PromptKind::Zerocf, ZEROCF),
            fitcf: t(PromptKind::Fitcf, FITCF),
            fizle_words: t(PromptKind::FizleWords, FIZLE_WORDS),
            fizle_edit: t(PromptKind::FizleEdit, ZEROCF),
            flip_judge: t(PromptKind::FlipJudge, FLIP_JUDGE),
        }
    }
}

/// Template file overrides, relative paths resolved by the caller.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptOverrides {
    pub zerocf: Option<std::path::PathBuf>,
    pub fitcf: Option<std::path::PathBuf>,
    pub fizle_words: Option<std::path::PathBuf>,
    pub fizle_edit: Option<std::path::PathBuf>,
    pub flip_judge: Option<std::path::PathBuf>,
}

impl PromptSet {
    pub fn with_overrides(o: &PromptOverrides, base: &Path) -> Result<Self> {
        let mut set = PromptSet::default();
        let slots: [(&Option<std::path::PathBuf>, &mut PromptTemplate); 5] = [
            (&o.zerocf, &mut set.zerocf),
            (&o.fitcf, &mut set.fitcf),
            (&o.fizle_words, &mut set.fizle_words),
            (&o.fizle_edit, &mut set.fizle_edit),
            (&o.flip_judge, &mut set.flip_judge),
        ];
        for (path, slot) in slots {
            if let Some(p) = path {
                *slot = PromptTemplate::from_file(slot.kind, &base.join(p))?;
            }
        }
        Ok(set)
    }
}

/// Renders a word list the way a Python list of strings prints: `['a', 'b']`.
pub fn python_list_repr<S: AsRef<str>>(words: &[S]) -> String {
    let items: Vec<String> = words
        .iter()
        .map(|w| {
            let w = w.as_ref();
            if w.contains('\'') && !w.contains('"') {
                format!("\"{w}\"")
            } else {
                format!("'{}'", w.replace('\\', "\\\\").replace('\'', "\\'"))
            }
        })
        .collect();
    format!("[{}]", items.join(", "))
}

/// `[original input] …` / `[edit input] …` pairs separated by blank lines,
/// followed by one more newline so a blank line precedes the query.
pub fn format_demonstrations(demos: &[Demonstration]) -> String {
    let mut out = demos
        .iter()
        .map(|d| format!("[original input] {}\n[edit input] {}", d.original_text, d.edited_text))
        .collect::<Vec<_>>()
        .join("\n\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Variables shared by every template of a run.
pub fn base_vars(labels: &LabelSet) -> BTreeMap<&'static str, String> {
    let mut v = BTreeMap::new();
    v.insert("dataset", labels.dataset_name().to_owned());
    v.insert("num_labels", labels.len().to_string());
    v.insert("labels", labels.joined());
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> LabelSet {
        LabelSet::new("SST2", ["negative", "positive"]).unwrap()
    }

    #[test]
    fn bundled_templates_parse() {
        let set = PromptSet::default();
        assert!(set.zerocf.text.starts_with("You are an excellent assistant for text\nediting."));
        assert!(set.fitcf.text.ends_with("[original input] {input_text}\n[edit input]"));
        assert!(set.flip_judge.text.ends_with("Answer 'yes' or 'no' only!"));
    }

    #[test]
    fn missing_placeholder_fails_loudly() {
        let set = PromptSet::default();
        let mut vars = base_vars(&labels());
        vars.insert("prediction", "positive".into());
        vars.insert("input_text", "x".into());
        let err = set.zerocf.render(&vars).unwrap_err();
        assert!(err.to_string().contains("{important_words}"), "{err}");
        vars.insert("important_words", "[]".into());
        let p = set.zerocf.render(&vars).unwrap();
        assert!(p.contains("2 categories:\nnegative, positive. The input"));
        assert!(p.contains("[] might be important words"));
        assert!(p.ends_with("Input: x"));
    }

    #[test]
    fn unknown_placeholders_rejected() {
        assert!(PromptTemplate::new(PromptKind::Zerocf, "hi {who}").is_err());
    }

    #[test]
    fn list_repr_matches_python() {
        assert_eq!(python_list_repr::<&str>(&[]), "[]");
        assert_eq!(python_list_repr(&["software", "apple"]), "['software', 'apple']");
        assert_eq!(python_list_repr(&["it's"]), "[\"it's\"]");
    }

    #[test]
    fn demonstrations_block_layout() {
        let d = |o: &str, e: &str| Demonstration {
            instance_id: o.into(),
            original_text: o.into(),
            edited_text: e.into(),
            cluster_id: 0,
            rank_in_cluster: 0,
        };
        assert_eq!(
            format_demonstrations(&[d("a", "b"), d("c", "d")]),
            "[original input] a\n[edit input] b\n\n[original input] c\n[edit input] d\n"
        );
    }
}
