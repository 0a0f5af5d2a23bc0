//! Passages and line-delimited corpus ingestion.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A unit of retrievable evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

impl Passage {
    pub fn new(id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            text: text.into(),
        }
    }

    /// Title and text joined, as fed to embedders and prompts.
    pub fn full_text(&self) -> String {
        if self.title.is_empty() {
            self.text.clone()
        } else {
            format!("{}\n{}", self.title, self.text)
        }
    }

    /// Leading characters of the text, cut on a char boundary.
    pub fn snippet(&self, max_chars: usize) -> String {
        let mut out: String = self.text.chars().take(max_chars).collect();
        if self.text.chars().count() > max_chars {
            out.push('…');
        }
        out
    }
}

/// An ordered, id-unique collection of passages.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub name: String,
    passages: Vec<Passage>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Builds a corpus from passages, rejecting duplicate ids and empty texts.
    pub fn from_passages(name: impl Into<String>, passages: Vec<Passage>) -> Result<Self> {
        let mut corpus = Self::new(name);
        for p in passages {
            corpus.push(p)?;
        }
        Ok(corpus)
    }

    pub fn push(&mut self, passage: Passage) -> Result<usize> {
        if passage.text.trim().is_empty() {
            return Err(Error::Invalid(format!("passage `{}` has empty text", passage.id)));
        }
        if self.by_id.contains_key(&passage.id) {
            return Err(Error::Invalid(format!("duplicate passage id `{}`", passage.id)));
        }
        let index = self.passages.len();
        self.by_id.insert(passage.id.clone(), index);
        self.passages.push(passage);
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn get(&self, index: usize) -> Option<&Passage> {
        self.passages.get(index)
    }

    pub fn by_id(&self, id: &str) -> Option<&Passage> {
        self.by_id.get(id).map(|&i| &self.passages[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Passage> {
        self.passages.iter()
    }
}

/// Reads a line-delimited JSON corpus (`{"id", "title", "text"}` per line).
///
/// Blank lines are skipped. Line numbers in errors are 1-based.
pub fn ingest(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_corpus(&name, &raw, path)
}

pub(crate) fn parse_corpus(name: &str, raw: &str, path: &Path) -> Result<Corpus> {
    let mut corpus = Corpus::new(name);
    for (i, line) in raw.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let passage: Passage = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if passage.text.trim().is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: "empty `text` field".into(),
            });
        }
        if corpus.contains(&passage.id) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: passage.id,
            });
        }
        corpus.push(passage)?;
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ingests_in_file_order() {
        let f = write(
            r#"{"id":"b","title":"B","text":"second"}
{"id":"a","title":"A","text":"first"}
{"id":"c","title":"C","text":"third"}
"#,
        );
        let corpus = ingest(f.path()).unwrap();
        let ids: Vec<_> = corpus.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
        assert_eq!(corpus.index_of("a"), Some(1));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let f = write("");
        assert!(ingest(f.path()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_cites_line() {
        let f = write(
            r#"{"id":"a","title":"","text":"x"}
{"id":"a","title":"","text":"y"}
"#,
        );
        match ingest(f.path()) {
            Err(Error::DuplicateId { line, id, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(id, "a");
            }
            other => panic!("expected duplicate-id error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_record_names_line() {
        let f = write("{\"id\":\"a\",\"text\":\"x\"}\nnot json\n");
        match ingest(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn snippet_respects_char_boundaries() {
        let p = Passage::new("x", "", "héllo wörld");
        assert_eq!(p.snippet(4), "héll…");
        assert_eq!(p.snippet(40), "héllo wörld");
    }
}
