//! Prompt templates with `{name}` placeholders.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The prompt families used by the pipelines and the evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    /// Pseudo-interpretations from parametric knowledge only.
    #[serde(rename = "I_P")]
    Pseudo,
    /// Query relaxation for a high-recall first retrieval.
    #[serde(rename = "I_R")]
    Relax,
    /// Single-passage interpretation/answer extraction with abstention.
    #[serde(rename = "I_E")]
    Extract,
    /// Long-context generation of interpretation/answer lists.
    #[serde(rename = "I_G")]
    Generate,
    /// Judge: match a list of interpretations against a reference list.
    #[serde(rename = "I_M")]
    Match,
    /// Judge: does a passage support a question.
    #[serde(rename = "I_V")]
    Verify,
    /// Judge: near-duplicate removal.
    #[serde(rename = "I_D")]
    Dedup,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::Pseudo,
        TemplateId::Relax,
        TemplateId::Extract,
        TemplateId::Generate,
        TemplateId::Match,
        TemplateId::Verify,
        TemplateId::Dedup,
    ];

    pub fn code(self) -> &'static str {
        match self {
            TemplateId::Pseudo => "I_P",
            TemplateId::Relax => "I_R",
            TemplateId::Extract => "I_E",
            TemplateId::Generate => "I_G",
            TemplateId::Match => "I_M",
            TemplateId::Verify => "I_V",
            TemplateId::Dedup => "I_D",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown template id `{s}`")))
    }
}

const EXTRACT_BODY: &str = "Given an ambiguous query and one of the passages from retrieval results, provide a disambiguated query which can be answered by the passage.
Try to infer the user's intent with the ambiguous query and think of possible concrete, non-ambiguous rewritten questions.
If you cannot find any of them, which can be answered by the provided document, simply abstain by replying with 'null'.
You should provide at most one subquestion, the most relevant one you can think of.

Here are the rules to follow when generating the question and answer:
1. The generated question must be a disambiguation of the original ambiguous query.
2. The question should be fully answerable from information present in given passage. Even if the passage is relevant to the original ambiguous query, if it is not self-contained, abstain by responding with 'null'.
3. Make sure the question is clear and unambiguous, while clarifying the intent of the original ambiguous question.
4. Phrases like 'based on the provided context', 'according to the passage', etc., are not allowed to appear in the question. Similarly, questions such as \"What is not mentioned about something in the passage?\" are not acceptable.
5. When addressing questions tied to a specific moment, provide the clearest possible time reference. Avoid ambiguous questions such as \"Which country has won the most recent World Cup?\" since the answer varies depending on when the question is asked.
6. The answer must be specifically based on the information provided in the passage. Your prior knowledge should not intervene in answering the identified clarification question.

Input fields are:
Question: {question}
Passage: {passage}

Output fields are:
Interpretation:
Answer: ";

const MATCH_BODY: &str = "Given a list of generated disambiguated subquestions that clarify the intent of an ambiguous question, compare them with the list of predefined subquestions and determine how many have been successfully identified. You should return a binary label, Yes or No, for each subquestion indicating whether it was covered or not.

Input fields are:
Question: {question}
Generated Disambiguations: {generated}
Ground-truth Disambiguations: {ground_truth}

Output fields are:
Decisions: ";

const VERIFY_BODY: &str = "Given a question, an answer and an associated passage, decide if the passage can support the answer, providing enough evidence to reach the answer given the question.
Your answer should be either Yes or No.

Input fields are:
Question: {question}
Passage: {passage}

Output fields are:
Decision: ";

const DEDUP_BODY: &str = "Given a list of subquestions, which are derived disambiguations of an ambiguous query, remove nearly identical duplicates and leave only distinct ones.
You should provide a list of the remaining subquestions, one at a line.

Input fields are:
Ambiguous Question: {question}
List of Disambiguated Subquestions: {interpretations}

Output fields are:
List of Unique Subquestions: ";

// The three bodies below are local reconstructions, not reference prompts.
// Override them by placing I_P.txt / I_R.txt / I_G.txt in a template directory.

const PSEUDO_BODY: &str = "The following question is ambiguous: it admits several distinct, valid readings.
List every plausible interpretation as a concrete, unambiguous rewritten question, one per line.
Use only your own knowledge; no documents are provided.

Question: {question}

Interpretations:";

const RELAX_BODY: &str = "Rewrite the following question into a broad search query that would retrieve passages covering all of its possible meanings.
Keep key entities, add likely synonyms and senses, and drop constraints that narrow the meaning.
Reply with the search query only.

Question: {question}

Search query:";

const GENERATE_BODY: &str = "The following question is ambiguous. Using only the passages below, list the distinct interpretations of the question that the passages can answer, each with its answer and the ids of the supporting passages.
Use this format for every interpretation:
Interpretation: <disambiguated question>
Answer: <answer>
Passages: <comma-separated passage ids>

Question: {question}

Passages:
{passages}
";

/// A template body with validated `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    body: String,
    placeholders: Vec<String>,
}

enum Segment<'a> {
    Literal(&'a str),
    Field(&'a str),
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits a body into literal text and `{ident}` placeholders.
/// A `{` that does not open an identifier followed by `}` is literal text,
/// except `{}`, which is rejected as an unnamed placeholder.
fn segments(body: &str) -> std::result::Result<Vec<Segment<'_>>, String> {
    let mut out = Vec::new();
    let mut lit_start = 0;
    let mut i = 0;
    let bytes = body.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let rest = &body[i + 1..];
            if rest.starts_with('}') {
                return Err(format!("unnamed placeholder at byte {i}"));
            }
            let name_len = rest
                .char_indices()
                .take_while(|&(j, c)| if j == 0 { is_ident_start(c) } else { is_ident(c) })
                .count();
            if name_len > 0 && rest[name_len..].starts_with('}') {
                if lit_start < i {
                    out.push(Segment::Literal(&body[lit_start..i]));
                }
                out.push(Segment::Field(&rest[..name_len]));
                i += name_len + 2;
                lit_start = i;
                continue;
            }
        }
        i += 1;
    }
    if lit_start < body.len() {
        out.push(Segment::Literal(&body[lit_start..]));
    }
    Ok(out)
}

impl PromptTemplate {
    pub fn new(id: TemplateId, body: impl Into<String>) -> Result<Self> {
        let body = body.into();
        let segs = segments(&body).map_err(|message| Error::Template {
            template: id.to_string(),
            message,
        })?;
        let mut placeholders: Vec<String> = Vec::new();
        for s in segs {
            if let Segment::Field(name) = s {
                if !placeholders.iter().any(|p| p == name) {
                    placeholders.push(name.to_string());
                }
            }
        }
        Ok(Self {
            id,
            body,
            placeholders,
        })
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn placeholders(&self) -> &[String] {
        &self.placeholders
    }

    /// Substitutes every placeholder in a single pass; substituted values
    /// are never rescanned.
    pub fn render(&self, fields: &BTreeMap<&str, String>) -> Result<String> {
        if let Some(missing) = self.placeholders.iter().find(|p| !fields.contains_key(p.as_str())) {
            return Err(Error::MissingField(missing.clone()));
        }
        let mut out = String::with_capacity(self.body.len());
        for seg in segments(&self.body).expect("validated at construction") {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Field(name) => out.push_str(&fields[name]),
            }
        }
        Ok(out)
    }
}

/// The full set of templates, one per [`TemplateId`].
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let builtin = [
            (TemplateId::Pseudo, PSEUDO_BODY),
            (TemplateId::Relax, RELAX_BODY),
            (TemplateId::Extract, EXTRACT_BODY),
            (TemplateId::Generate, GENERATE_BODY),
            (TemplateId::Match, MATCH_BODY),
            (TemplateId::Verify, VERIFY_BODY),
            (TemplateId::Dedup, DEDUP_BODY),
        ];
        let templates = builtin
            .into_iter()
            .map(|(id, body)| (id, PromptTemplate::new(id, body).expect("builtin template")))
            .collect();
        Self { templates }
    }
}

impl TemplateSet {
    /// Built-in defaults overridden by any `<ID>.txt` file in `dir` (e.g. `I_E.txt`).
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut set = Self::default();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.txt", id.code()));
            if path.exists() {
                let body = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                set.set(PromptTemplate::new(id, body)?);
            }
        }
        Ok(set)
    }

    pub fn set(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id, template);
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }
}

/// Renders template `id` from the default set.
pub fn render(id: TemplateId, fields: &BTreeMap<&str, String>) -> Result<String> {
    TemplateSet::default().get(id).render(fields)
}
