//! Model description files.
//!
//! ```text
//! # comments start with '#'
//! DSCNN                  family
//! 49 10                  input frames T and coefficients F
//! 12                     class count, optionally followed by comma-separated labels
//! C(64,10,4,2,2)-DSC(64,3,1)-...   notation, may continue over several lines
//! ```

use std::path::Path;

use super::{parse_model_dsl, Family, ModelSpec};
use crate::error::{Error, Result};

const KEYWORD_LABELS: [&str; 12] =
    ["silence", "unknown", "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go"];

/// Labels used when a model file lists none.
pub fn default_labels(classes: usize) -> Vec<String> {
    if classes == KEYWORD_LABELS.len() {
        KEYWORD_LABELS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..classes).map(|i| format!("class{i}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub spec: ModelSpec,
    pub labels: Vec<String>,
}

impl ModelFile {
    pub fn new(spec: ModelSpec) -> Self {
        let labels = default_labels(spec.classes());
        ModelFile { spec, labels }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Format(format!("model file: missing {what} line")))
        };

        let (_, family_line) = next("family")?;
        let family: Family = family_line.parse()?;

        let (n, input_line) = next("input shape")?;
        let dims: Vec<usize> = input_line
            .split_whitespace()
            .map(|v| v.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("model file line {n}: expected 'T F'")))?;
        let [frames, coeffs] = dims[..] else {
            return Err(Error::Format(format!("model file line {n}: expected 'T F'")));
        };

        let (n, class_line) = next("class count")?;
        let (count, label_text) = match class_line.split_once(char::is_whitespace) {
            Some((c, rest)) => (c, Some(rest.trim())),
            None => (class_line, None),
        };
        let classes: usize = count
            .parse()
            .map_err(|_| Error::Format(format!("model file line {n}: bad class count '{count}'")))?;
        let labels = match label_text {
            Some(t) => {
                let labels: Vec<String> = t.split(',').map(|s| s.trim().to_string()).collect();
                if labels.len() != classes || labels.iter().any(String::is_empty) {
                    return Err(Error::Format(format!(
                        "model file line {n}: {} labels for {classes} classes",
                        labels.len()
                    )));
                }
                labels
            }
            None => default_labels(classes),
        };

        let (first, dsl_line) = next("model notation")?;
        let mut dsl = dsl_line.to_string();
        for (_, l) in lines {
            dsl.push(' ');
            dsl.push_str(l);
        }
        let spec = parse_model_dsl(&dsl, family, frames, coeffs, classes).map_err(|e| match e {
            Error::Parse { pos, msg } => Error::Parse {
                pos,
                msg: format!("{msg} (notation starting on line {first})"),
            },
            other => other,
        })?;
        Ok(ModelFile { spec, labels })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::Format(format!("{}: model file is not UTF-8", path.display())))?;
        Self::parse(text)
    }

    pub fn to_text(&self) -> String {
        let input = self.spec.input();
        let mut out = format!("{}\n{} {}\n{}", self.spec.family(), input.t, input.f, self.spec.classes());
        if self.labels != default_labels(self.spec.classes()) {
            out.push(' ');
            out.push_str(&self.labels.join(","));
        }
        out.push('\n');
        out.push_str(&self.spec.to_dsl());
        out.push('\n');
        out
    }

    pub fn label(&self, class: usize) -> &str {
        &self.labels[class]
    }
}
