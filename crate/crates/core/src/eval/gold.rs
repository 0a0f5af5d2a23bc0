//! Human-annotated interpretations, one JSON object per line.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldInterpretation {
    pub q: String,
    #[serde(default)]
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldSet {
    pub query: String,
    pub interpretations: Vec<GoldInterpretation>,
}

impl GoldSet {
    pub fn questions(&self) -> Vec<String> {
        self.interpretations.iter().map(|i| i.q.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.query.trim().is_empty() {
            return Err(Error::Invalid("gold query is empty".into()));
        }
        if self.interpretations.is_empty() {
            return Err(Error::Invalid(format!("gold set for `{}` has no interpretations", self.query)));
        }
        if self.interpretations.iter().any(|i| i.q.trim().is_empty()) {
            return Err(Error::Invalid(format!("gold set for `{}` has an empty interpretation", self.query)));
        }
        Ok(())
    }
}

/// Parses a gold file; blank lines are skipped, errors carry line numbers.
pub fn parse_gold(path: &Path, raw: &str) -> Result<Vec<GoldSet>> {
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let set: GoldSet = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        set.validate().map_err(|e| parse_err(e.to_string()))?;
        out.push(set);
    }
    Ok(out)
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<GoldSet>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gold(path, &raw)
}
