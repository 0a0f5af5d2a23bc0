//! Text-generation backends.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::templates::TemplateId;
use crate::error::{Error, Result};

/// Decoding is always greedy so that outputs are reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decode {
    #[default]
    Greedy,
}

/// A rendered prompt plus the metadata backends and the ledger need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub template_id: TemplateId,
    pub rendered_prompt: String,
    pub decode: Decode,
    /// Provenance label, also used as the ledger sort key.
    pub tag: String,
    /// Lookup keys for scripted backends, most specific first.
    pub keys: Vec<String>,
    /// The list being judged, for list-shaped prompts.
    pub items: Vec<String>,
    /// The reference list, for match prompts.
    pub reference: Vec<String>,
    pub passages_in_context: usize,
}

impl GenerationRequest {
    pub fn new(template_id: TemplateId, rendered_prompt: String) -> Self {
        Self {
            template_id,
            rendered_prompt,
            decode: Decode::Greedy,
            tag: String::new(),
            keys: Vec::new(),
            items: Vec::new(),
            reference: Vec::new(),
            passages_in_context: 0,
        }
    }

    pub fn tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn key(mut self, key: impl Into<String>) -> Self {
        self.keys.push(key.into());
        self
    }

    pub fn items(mut self, items: Vec<String>) -> Self {
        self.items = items;
        self
    }

    pub fn reference(mut self, reference: Vec<String>) -> Self {
        self.reference = reference;
        self
    }

    pub fn context(mut self, passages: usize) -> Self {
        self.passages_in_context = passages;
        self
    }
}

/// A text-generation backend. Must be callable from many threads at once.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn generate(&self, request: &GenerationRequest) -> Result<String>;
}

/// A scripted reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Text(String),
    /// Simulated transport failure.
    Error { error: String },
    /// One `Yes`/`No` line per request item, `Yes` for listed items.
    YesItems { yes_items: Vec<String> },
    /// Equivalence classes. For match prompts, one `Yes`/`No` line per item
    /// (`Yes` when some reference item is equal or in the same class); for
    /// dedup prompts, the items with later class-mates removed.
    Classes { classes: Vec<Vec<String>> },
}

fn class_of<'a>(classes: &'a [Vec<String>], item: &str) -> Option<&'a Vec<String>> {
    classes.iter().find(|c| c.iter().any(|m| m == item))
}

impl ScriptEntry {
    fn reply(&self, request: &GenerationRequest, backend: &str) -> Result<String> {
        match self {
            ScriptEntry::Text(t) => Ok(t.clone()),
            ScriptEntry::Error { error } => Err(Error::Backend {
                backend: backend.to_string(),
                message: error.clone(),
            }),
            ScriptEntry::YesItems { yes_items } => Ok(yes_no_lines(
                request.items.iter().map(|i| yes_items.contains(i)),
            )),
            ScriptEntry::Classes { classes } => match request.template_id {
                TemplateId::Dedup => {
                    let mut kept: Vec<&String> = Vec::new();
                    for item in &request.items {
                        let dup = kept.iter().any(|k| {
                            *k == item
                                || class_of(classes, item).is_some_and(|c| c.contains(k))
                        });
                        if !dup {
                            kept.push(item);
                        }
                    }
                    Ok(kept.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"))
                }
                _ => Ok(yes_no_lines(request.items.iter().map(|item| {
                    let class = class_of(classes, item);
                    request
                        .reference
                        .iter()
                        .any(|r| r == item || class.is_some_and(|c| c.contains(r)))
                }))),
            },
        }
    }
}

fn yes_no_lines(decisions: impl Iterator<Item = bool>) -> String {
    decisions
        .map(|d| if d { "Yes" } else { "No" })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Script file layout: template code → key → entry. The key `*` is the
/// per-template fallback.
pub type Script = BTreeMap<TemplateId, BTreeMap<String, ScriptEntry>>;

/// Deterministic backend answering from a script keyed on (template, key).
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    id: String,
    entries: HashMap<TemplateId, HashMap<String, ScriptEntry>>,
}

impl ScriptedBackend {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            entries: HashMap::new(),
        }
    }

    pub fn from_script(id: impl Into<String>, script: Script) -> Self {
        let mut b = Self::new(id);
        b.merge(script);
        b
    }

    pub fn load(id: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let script: Script = serde_json::from_str(&raw)?;
        Ok(Self::from_script(id, script))
    }

    pub fn merge(&mut self, script: Script) {
        for (template, entries) in script {
            self.entries.entry(template).or_default().extend(entries);
        }
    }

    pub fn with(mut self, template: TemplateId, key: impl Into<String>, entry: ScriptEntry) -> Self {
        self.insert(template, key, entry);
        self
    }

    pub fn with_text(self, template: TemplateId, key: impl Into<String>, text: impl Into<String>) -> Self {
        self.with(template, key, ScriptEntry::Text(text.into()))
    }

    pub fn insert(&mut self, template: TemplateId, key: impl Into<String>, entry: ScriptEntry) {
        self.entries.entry(template).or_default().insert(key.into(), entry);
    }

    fn lookup(&self, request: &GenerationRequest) -> Option<&ScriptEntry> {
        let table = self.entries.get(&request.template_id)?;
        request
            .keys
            .iter()
            .find_map(|k| table.get(k))
            .or_else(|| table.get("*"))
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        match self.lookup(request) {
            Some(entry) => entry.reply(request, &self.id),
            None => Err(Error::NotFound(format!(
                "no script entry for {} with keys {:?}",
                request.template_id, request.keys
            ))),
        }
    }
}

#[cfg(feature = "http")]
pub use http::HttpBackend;

#[cfg(feature = "http")]
mod http {
    use std::time::Duration;

    use serde_json::{json, Value};

    use super::{Backend, GenerationRequest};
    use crate::error::{Error, Result};

    /// JSON-over-HTTP completion endpoint.
    ///
    /// Sends `{"prompt", "max_tokens", "temperature": 0}` and reads either
    /// `{"text": ...}` or `{"choices": [{"text": ...}]}`.
    pub struct HttpBackend {
        id: String,
        url: String,
        token: Option<String>,
        max_tokens: u32,
        agent: ureq::Agent,
    }

    impl HttpBackend {
        pub fn new(
            id: impl Into<String>,
            url: impl Into<String>,
            token: Option<String>,
            max_tokens: u32,
            timeout: Duration,
        ) -> Self {
            let agent: ureq::Agent = ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .http_status_as_error(false)
                .build()
                .into();
            Self {
                id: id.into(),
                url: url.into(),
                token,
                max_tokens,
                agent,
            }
        }

        fn transport_error(&self, e: ureq::Error) -> Error {
            match e {
                ureq::Error::Timeout(_) => Error::Timeout {
                    backend: self.id.clone(),
                },
                other => Error::Backend {
                    backend: self.id.clone(),
                    message: other.to_string(),
                },
            }
        }
    }

    fn extract_text(body: &Value) -> Option<String> {
        body.get("text")
            .and_then(Value::as_str)
            .or_else(|| body.pointer("/choices/0/text").and_then(Value::as_str))
            .or_else(|| body.pointer("/choices/0/message/content").and_then(Value::as_str))
            .map(str::to_string)
    }

    impl Backend for HttpBackend {
        fn id(&self) -> &str {
            &self.id
        }

        fn generate(&self, request: &GenerationRequest) -> Result<String> {
            let body = json!({
                "prompt": request.rendered_prompt,
                "max_tokens": self.max_tokens,
                "temperature": 0,
            });
            let mut req = self.agent.post(&self.url);
            if let Some(token) = &self.token {
                req = req.header("Authorization", &format!("Bearer {token}"));
            }
            let mut resp = req.send_json(&body).map_err(|e| self.transport_error(e))?;
            let status = resp.status();
            if !status.is_success() {
                return Err(Error::Backend {
                    backend: self.id.clone(),
                    message: format!("HTTP {status}"),
                });
            }
            let value: Value = resp
                .body_mut()
                .read_json()
                .map_err(|e| self.transport_error(e))?;
            extract_text(&value).ok_or_else(|| Error::Backend {
                backend: self.id.clone(),
                message: "response has no text field".into(),
            })
        }
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn reads_common_response_shapes() {
            assert_eq!(extract_text(&json!({"text": "a"})).as_deref(), Some("a"));
            assert_eq!(
                extract_text(&json!({"choices": [{"text": "b"}]})).as_deref(),
                Some("b")
            );
            assert_eq!(
                extract_text(&json!({"choices": [{"message": {"content": "c"}}]})).as_deref(),
                Some("c")
            );
            assert_eq!(extract_text(&json!({"foo": 1})), None);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(template: TemplateId) -> GenerationRequest {
        GenerationRequest::new(template, "prompt".into())
    }

    #[test]
    fn keys_then_wildcard() {
        let b = ScriptedBackend::new("s")
            .with_text(TemplateId::Extract, "q|p1", "specific")
            .with_text(TemplateId::Extract, "p1", "by id")
            .with_text(TemplateId::Extract, "*", "null");
        let r = req(TemplateId::Extract).key("q|p1").key("p1");
        assert_eq!(b.generate(&r).unwrap(), "specific");
        let r = req(TemplateId::Extract).key("other|p1").key("p1");
        assert_eq!(b.generate(&r).unwrap(), "by id");
        let r = req(TemplateId::Extract).key("zzz");
        assert_eq!(b.generate(&r).unwrap(), "null");
        assert!(matches!(b.generate(&req(TemplateId::Verify)), Err(Error::NotFound(_))));
    }

    #[test]
    fn yes_items_and_classes() {
        let b = ScriptedBackend::new("s")
            .with(
                TemplateId::Verify,
                "*",
                ScriptEntry::YesItems {
                    yes_items: vec!["p2".into()],
                },
            )
            .with(
                TemplateId::Match,
                "*",
                ScriptEntry::Classes {
                    classes: vec![vec!["A".into(), "a".into()], vec!["B".into()]],
                },
            )
            .with(
                TemplateId::Dedup,
                "*",
                ScriptEntry::Classes {
                    classes: vec![vec!["A".into(), "a".into()]],
                },
            );
        let r = req(TemplateId::Verify).items(vec!["p1".into(), "p2".into()]);
        assert_eq!(b.generate(&r).unwrap(), "No\nYes");
        let r = req(TemplateId::Match)
            .items(vec!["a".into(), "B".into(), "C".into()])
            .reference(vec!["A".into(), "C".into()]);
        assert_eq!(b.generate(&r).unwrap(), "Yes\nNo\nYes");
        let r = req(TemplateId::Dedup).items(vec!["A".into(), "B".into(), "a".into(), "B".into()]);
        assert_eq!(b.generate(&r).unwrap(), "A\nB");
    }

    #[test]
    fn script_json_shape() {
        let raw = r#"{
            "I_E": {"p1": "Interpretation: x\nAnswer: y", "*": "null"},
            "I_V": {"*": {"yes_items": ["p1"]}},
            "I_R": {"q": {"error": "boom"}}
        }"#;
        let script: Script = serde_json::from_str(raw).unwrap();
        let b = ScriptedBackend::from_script("s", script);
        let err = b.generate(&req(TemplateId::Relax).key("q")).unwrap_err();
        assert!(err.is_retriable());
    }
}
