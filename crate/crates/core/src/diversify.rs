//! Verified diversification: one extraction attempt per retrieved passage.
//!
//! Each passage of the universe is shown to the generator alone together
//! with the ambiguous query. The generator either returns a single
//! interpretation/answer pair grounded in that passage, or abstains; an
//! abstention prunes the passage. Calls are independent and run on a
//! bounded pool of scoped threads, and results are re-sorted by universe
//! position so the outcome never depends on scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Passage};
use crate::error::{Error, Result};
use crate::llm::{fields, parse, Gateway, TemplateId};
use crate::retrieval::{Universe, UniverseKind};

pub const DEFAULT_FAN_OUT: usize = 8;

/// An (interpretation, answer, supporting passage) triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub interpretation: String,
    pub answer: String,
    pub passage_id: String,
    pub source_query: String,
    /// Position of the supporting passage in the universe.
    pub extraction_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionWarning {
    pub passage_id: String,
    pub message: String,
}

/// What happened to one passage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractOutcome {
    Pair(CandidatePair),
    Abstained,
    /// Unparseable output or a failed call; treated as an abstention.
    Failed(String),
}

impl ExtractOutcome {
    pub fn pair(self) -> Option<CandidatePair> {
        match self {
            ExtractOutcome::Pair(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiversificationResult {
    pub pairs: Vec<CandidatePair>,
    pub abstained: Vec<String>,
    pub warnings: Vec<ExtractionWarning>,
}

/// Asks the generator for at most one grounded pair from `passage`.
pub fn extract_pair(q: &str, passage: &Passage, extraction_index: usize, gateway: &Gateway) -> ExtractOutcome {
    let request = match gateway.request(
        TemplateId::Extract,
        &fields([("question", q.to_string()), ("passage", passage.full_text())]),
    ) {
        Ok(r) => r
            .tag(format!("extract|{q}|{}", passage.id))
            .key(format!("{q}|{}", passage.id))
            .key(passage.id.clone())
            .context(1),
        Err(e) => return ExtractOutcome::Failed(e.to_string()),
    };
    let response = match gateway.complete(&request) {
        Ok(r) => r,
        Err(e) => return ExtractOutcome::Failed(format!("generation failed: {e}")),
    };
    let parsed = parse::parse_extraction(&response.text);
    match (parsed.pair, parsed.warning) {
        (Some((interpretation, answer)), _) => ExtractOutcome::Pair(CandidatePair {
            interpretation,
            answer,
            passage_id: passage.id.clone(),
            source_query: q.to_string(),
            extraction_index,
        }),
        (None, Some(w)) => ExtractOutcome::Failed(w),
        (None, None) => ExtractOutcome::Abstained,
    }
}

/// Runs [`extract_pair`] once per universe entry with at most `fan_out`
/// concurrent calls.
pub fn diversify(
    q: &str,
    universe: &Universe,
    corpus: &Corpus,
    gateway: &Gateway,
    fan_out: usize,
) -> Result<DiversificationResult> {
    if universe.kind != UniverseKind::Query {
        return Err(Error::Invalid(format!(
            "diversification expects a query universe, got {:?}",
            universe.kind
        )));
    }
    let passages = universe
        .entries
        .iter()
        .map(|e| {
            corpus
                .by_id(&e.id)
                .ok_or_else(|| Error::NotFound(format!("passage `{}` not in corpus", e.id)))
        })
        .collect::<Result<Vec<_>>>()?;

    let next = AtomicUsize::new(0);
    let outcomes: Mutex<Vec<(usize, ExtractOutcome)>> = Mutex::new(Vec::with_capacity(passages.len()));
    let workers = fan_out.max(1).min(passages.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(passage) = passages.get(i) else { break };
                let outcome = extract_pair(q, passage, i, gateway);
                outcomes.lock().expect("worker panicked").push((i, outcome));
            });
        }
    });

    let mut outcomes = outcomes.into_inner().expect("worker panicked");
    outcomes.sort_by_key(|(i, _)| *i);
    let mut result = DiversificationResult::default();
    for (i, outcome) in outcomes {
        let id = passages[i].id.clone();
        match outcome {
            ExtractOutcome::Pair(p) => result.pairs.push(p),
            ExtractOutcome::Abstained => result.abstained.push(id),
            ExtractOutcome::Failed(message) => {
                gateway.ledger().warn(format!("extraction on `{id}`: {message}"));
                result.warnings.push(ExtractionWarning {
                    passage_id: id.clone(),
                    message,
                });
                result.abstained.push(id);
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Backend, GenerationRequest, ScriptEntry, ScriptedBackend};
    use crate::retrieval::ScoredPassage;
    use std::sync::Arc;

    fn hp_corpus() -> Corpus {
        Corpus::from_passages(
            "hp",
            vec![
                Passage::new("p1", "HP Inc.", "HP Inc., formerly Hewlett-Packard, is an American technology company."),
                Passage::new("p2", "HP products", "HP sells laptops, desktops and printers."),
                Passage::new("p3", "Horsepower", "Horsepower (hp) is a unit of measurement of power."),
            ],
        )
        .unwrap()
    }

    fn query_universe(ids: &[&str]) -> Universe {
        Universe {
            query: "What is HP".into(),
            entries: ids
                .iter()
                .enumerate()
                .map(|(i, id)| ScoredPassage {
                    id: id.to_string(),
                    index: i,
                    score: 1.0 - i as f64 * 0.1,
                })
                .collect(),
            k: ids.len(),
            kind: UniverseKind::Query,
        }
    }

    fn hp_gateway() -> Gateway {
        Gateway::new(Arc::new(
            ScriptedBackend::new("s")
                .with_text(
                    TemplateId::Extract,
                    "p1",
                    "Interpretation: What is HP, the company?\nAnswer: Hewlett-Packard, a technology company",
                )
                .with_text(TemplateId::Extract, "p2", "null")
                .with(
                    TemplateId::Extract,
                    "p3",
                    ScriptEntry::Error {
                        error: "gateway down".into(),
                    },
                ),
        ))
    }

    #[test]
    fn grounded_pair_from_defining_passage() {
        let c = hp_corpus();
        let gw = hp_gateway();
        let pair = extract_pair("What is HP", c.by_id("p1").unwrap(), 0, &gw).pair().unwrap();
        assert_eq!(pair.interpretation, "What is HP, the company?");
        assert_eq!(pair.answer, "Hewlett-Packard, a technology company");
        assert_eq!(pair.passage_id, "p1");
    }

    #[test]
    fn product_listing_is_pruned() {
        let c = hp_corpus();
        let out = extract_pair("What is HP", c.by_id("p2").unwrap(), 1, &hp_gateway());
        assert_eq!(out, ExtractOutcome::Abstained);
    }

    #[test]
    fn hard_failure_is_isolated() {
        let c = hp_corpus();
        let gw = hp_gateway();
        let r = diversify("What is HP", &query_universe(&["p1", "p2", "p3"]), &c, &gw, 8).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.abstained, ["p2", "p3"]);
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.warnings[0].passage_id, "p3");
    }

    #[test]
    fn empty_universe() {
        let r = diversify("q", &query_universe(&[]), &hp_corpus(), &hp_gateway(), 8).unwrap();
        assert_eq!(r, DiversificationResult::default());
    }

    #[test]
    fn rejects_non_query_universe() {
        let mut u = query_universe(&["p1"]);
        u.kind = UniverseKind::Pseudo;
        assert!(diversify("q", &u, &hp_corpus(), &hp_gateway(), 8).is_err());
    }

    /// Records prompts and answers for a fixed subset of passages.
    struct Recorder {
        answerable: Vec<String>,
        prompts: Mutex<Vec<(String, String)>>,
    }

    impl Backend for Recorder {
        fn id(&self) -> &str {
            "recorder"
        }
        fn generate(&self, request: &GenerationRequest) -> Result<String> {
            let id = request.keys[1].clone();
            self.prompts
                .lock()
                .unwrap()
                .push((id.clone(), request.rendered_prompt.clone()));
            if self.answerable.contains(&id) {
                Ok(format!("Interpretation: about {id}?\nAnswer: {id}"))
            } else {
                Ok("null".into())
            }
        }
    }

    fn twenty() -> Corpus {
        Corpus::from_passages(
            "twenty",
            (0..20)
                .map(|i| Passage::new(format!("d{i}"), "", format!("unique body text marker{i}x")))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn twenty_passages_twelve_answerable() {
        let corpus = twenty();
        let answerable: Vec<String> = (0..20).filter(|i| i % 5 < 3).map(|i| format!("d{i}")).collect();
        // Expected count from the script itself.
        let expected = answerable.len();
        assert_eq!(expected, 12);
        let backend = Arc::new(Recorder {
            answerable: answerable.clone(),
            prompts: Mutex::new(Vec::new()),
        });
        let gw = Gateway::new(backend.clone());
        let ids: Vec<String> = (0..20).map(|i| format!("d{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let r = diversify("q", &query_universe(&refs), &corpus, &gw, 4).unwrap();

        assert_eq!(r.pairs.len(), 12);
        assert_eq!(r.abstained.len(), 8);
        assert!(r.pairs.windows(2).all(|w| w[0].extraction_index < w[1].extraction_index));

        let summary = gw.ledger().summary();
        assert_eq!(summary.template(TemplateId::Extract).calls, 20);
        assert_eq!(summary.template(TemplateId::Extract).max_context, 1);

        // Each prompt carries exactly its own passage.
        for (id, prompt) in backend.prompts.lock().unwrap().iter() {
            for other in corpus.iter() {
                let present = prompt.contains(&other.text);
                assert_eq!(present, other.id == *id, "prompt for {id} vs {}", other.id);
            }
        }
    }

    #[test]
    fn schedule_does_not_change_result() {
        let corpus = twenty();
        let answerable: Vec<String> = (0..20).step_by(3).map(|i| format!("d{i}")).collect();
        let ids: Vec<String> = (0..20).map(|i| format!("d{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let run = |fan_out| {
            let gw = Gateway::new(Arc::new(Recorder {
                answerable: answerable.clone(),
                prompts: Mutex::new(Vec::new()),
            }));
            diversify("q", &query_universe(&refs), &corpus, &gw, fan_out).unwrap()
        };
        let serial = run(1);
        for fan_out in [2, 3, 8, 32] {
            assert_eq!(run(fan_out), serial);
        }
        assert_eq!(serial.pairs.len() + serial.abstained.len(), 20);
    }
}
