//! Label-anchored parsing of model outputs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

const ABSTENTIONS: &[&str] = &["null", "NULL", "None"];

/// Whether `text` is exactly an abstention token after trimming whitespace,
/// quotes and backticks.
pub fn is_abstention(text: &str) -> bool {
    let t = text.trim().trim_matches(|c| matches!(c, '\'' | '"' | '`')).trim();
    ABSTENTIONS.contains(&t)
}

/// Removes leading markdown (headings, bullets, emphasis, quotes) and list numbering.
fn strip_markup(line: &str) -> &str {
    let mut s = line.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '#' | '*' | '-' | '>' | '_'));
    let digits = s.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            s = r.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '_'));
        }
    }
    s
}

/// If `line` is `<label>: value` (markup tolerated), returns the trimmed value.
fn labeled<'a>(line: &'a str, labels: &[&str]) -> Option<&'a str> {
    let s = strip_markup(line);
    for label in labels {
        if s.len() >= label.len() && s[..label.len()].eq_ignore_ascii_case(label) {
            let rest = s[label.len()..].trim_start_matches(['*', '_']);
            if let Some(value) = rest.strip_prefix(':') {
                return Some(value.trim_start_matches(['*', '_']).trim());
            }
        }
    }
    None
}

const INTERPRETATION: &[&str] = &["interpretation"];
const ANSWER: &[&str] = &["answer"];
const PASSAGES: &[&str] = &["passages", "passage", "citations", "citation", "sources"];

/// Outcome of parsing a single-passage extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub pair: Option<(String, String)>,
    /// Set when the text was neither a well-formed pair nor an abstention.
    pub warning: Option<String>,
}

/// Value of a labeled field; an empty inline value takes the next non-empty line.
fn field_value(lines: &[&str], labels: &[&str]) -> Option<String> {
    for (i, line) in lines.iter().enumerate() {
        if let Some(v) = labeled(line, labels) {
            if !v.is_empty() {
                return Some(v.to_string());
            }
            return lines[i + 1..]
                .iter()
                .map(|l| l.trim())
                .find(|l| !l.is_empty())
                .filter(|l| labeled(l, INTERPRETATION).is_none() && labeled(l, ANSWER).is_none())
                .map(str::to_string);
        }
    }
    None
}

/// Parses `Interpretation: … / Answer: …` output; abstentions yield no pair
/// and no warning.
pub fn parse_extraction(text: &str) -> Extraction {
    if is_abstention(text) {
        return Extraction {
            pair: None,
            warning: None,
        };
    }
    let lines: Vec<&str> = text.lines().collect();
    let interpretation = field_value(&lines, INTERPRETATION);
    let answer = field_value(&lines, ANSWER);
    match (interpretation, answer) {
        (Some(q), _) if is_abstention(&q) => Extraction {
            pair: None,
            warning: None,
        },
        (_, Some(a)) if is_abstention(&a) => Extraction {
            pair: None,
            warning: None,
        },
        (Some(q), Some(a)) => Extraction {
            pair: Some((q, a)),
            warning: None,
        },
        (q, a) => {
            let missing = match (q.is_some(), a.is_some()) {
                (false, false) => "interpretation and answer",
                (false, true) => "interpretation",
                _ => "answer",
            };
            Extraction {
                pair: None,
                warning: Some(format!("unparseable extraction: missing {missing}")),
            }
        }
    }
}

/// The output shape [`parse_extraction`] expects.
pub fn format_extraction(interpretation: &str, answer: &str) -> String {
    format!("Interpretation: {interpretation}\nAnswer: {answer}")
}

/// One interpretation from a long-context generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedPair {
    pub interpretation: String,
    pub answer: String,
    pub cited: Vec<String>,
}

/// Parses repeated `Interpretation / Answer / Passages` blocks. Blocks
/// missing an answer are dropped and counted in the second return value.
pub fn parse_pairs(text: &str) -> (Vec<GeneratedPair>, usize) {
    let mut out = Vec::new();
    let mut dropped = 0;
    let mut current: Option<GeneratedPair> = None;
    let mut finish = |p: Option<GeneratedPair>, out: &mut Vec<GeneratedPair>| {
        if let Some(p) = p {
            if p.answer.is_empty() || p.interpretation.is_empty() || is_abstention(&p.interpretation) {
                dropped += 1;
            } else {
                out.push(p);
            }
        }
    };
    for line in text.lines() {
        if let Some(q) = labeled(line, INTERPRETATION) {
            finish(current.take(), &mut out);
            current = Some(GeneratedPair {
                interpretation: q.to_string(),
                answer: String::new(),
                cited: Vec::new(),
            });
        } else if let Some(a) = labeled(line, ANSWER) {
            if let Some(p) = current.as_mut() {
                p.answer = a.to_string();
            }
        } else if let Some(ids) = labeled(line, PASSAGES) {
            if let Some(p) = current.as_mut() {
                p.cited = ids
                    .split([',', ';', ' '])
                    .map(|s| s.trim().trim_matches(|c| matches!(c, '[' | ']' | '(' | ')')))
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
            }
        }
    }
    finish(current.take(), &mut out);
    (out, dropped)
}

/// First `yes`/`no` word in the text, case-insensitive.
pub fn parse_yes_no(text: &str) -> Option<bool> {
    text.split(|c: char| !c.is_alphanumeric())
        .find_map(|w| match w.to_ascii_lowercase().as_str() {
            "yes" => Some(true),
            "no" => Some(false),
            _ => None,
        })
}

/// One decision per line that contains a yes/no word, in order.
pub fn parse_decisions(text: &str) -> Vec<bool> {
    text.lines().filter_map(parse_yes_no).collect()
}

/// Decisions for `ids`, read from `<id>: Yes|No` lines when present and
/// positionally otherwise. Missing decisions are `None`.
pub fn parse_keyed_decisions(text: &str, ids: &[String]) -> Vec<Option<bool>> {
    let mut keyed: HashMap<&str, bool> = HashMap::new();
    for line in text.lines() {
        let s = strip_markup(line);
        if let Some((key, rest)) = s.split_once(':') {
            let key = key.trim().trim_matches(|c| matches!(c, '[' | ']'));
            if ids.iter().any(|id| id == key) {
                if let Some(v) = parse_yes_no(rest) {
                    keyed.insert(key, v);
                }
            }
        }
    }
    if !keyed.is_empty() {
        return ids.iter().map(|id| keyed.get(id.as_str()).copied()).collect();
    }
    let positional = parse_decisions(text);
    ids.iter()
        .enumerate()
        .map(|(i, _)| positional.get(i).copied())
        .collect()
}

/// Non-empty lines with bullets and numbering removed; bare `Label:` lines
/// and a leading label prefix are dropped.
pub fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(strip_markup)
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !(l.ends_with(':') && !l[..l.len() - 1].contains('?')))
        .map(|l| {
            labeled(l, &["list of unique subquestions", "interpretations"])
                .unwrap_or(l)
                .to_string()
        })
        .filter(|l| !l.is_empty())
        .collect()
}

/// Lines formatted as a numbered list for prompts.
pub fn numbered(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}
