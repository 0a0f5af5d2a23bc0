//! Reference methods for comparison: diversify-then-verify (DtV), its
//! unverified ablation, and single-call retrieval-augmented clarification
//! (RAC).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::consolidate::{ClarificationItem, ClarificationSet, Source};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::llm::{fields, parse, Gateway, TemplateId};
use crate::retrieval::{rank_order, RetrievalConfig, Retriever, ScoredPassage, Universe, UniverseKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Passages retrieved per pseudo-interpretation.
    pub per_interpretation_k: usize,
    /// Keep only the best `final_k` passages of the union; `None` keeps all.
    pub final_k: Option<usize>,
    /// Backend used for verification; the generator when unset.
    pub verifier_backend: Option<String>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            per_interpretation_k: 5,
            final_k: Some(5),
            verifier_backend: None,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_interpretation_k == 0 || self.final_k == Some(0) {
            return Err(Error::Config("baseline k values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoInterpretationSet {
    pub source_query: String,
    pub items: Vec<String>,
}

/// Interpretations from parametric knowledge alone: one call, no passages.
pub fn dtv_pseudo_interpret(q: &str, gateway: &Gateway) -> Result<PseudoInterpretationSet> {
    if q.trim().is_empty() {
        return Err(Error::Invalid("query is empty".into()));
    }
    let request = gateway
        .request(TemplateId::Pseudo, &fields([("question", q.to_string())]))?
        .tag(format!("pseudo|{q}"))
        .key(q)
        .context(0);
    let text = match gateway.complete(&request) {
        Ok(r) => r.text,
        Err(e) => {
            gateway.ledger().warn(format!("pseudo-interpretation failed for `{q}`: {e}"));
            String::new()
        }
    };
    let mut items: Vec<String> = Vec::new();
    for item in parse::parse_list(&text) {
        if !parse::is_abstention(&item) && !items.contains(&item) {
            items.push(item);
        }
    }
    if items.is_empty() {
        gateway.ledger().warn(format!("no pseudo-interpretations for `{q}`"));
    }
    Ok(PseudoInterpretationSet {
        source_query: q.to_string(),
        items,
    })
}

/// Union of per-interpretation retrievals, keeping each passage's best
/// score, optionally pruned to `final_k`. One retriever call per item.
pub fn dtv_build_universe(
    pseudo: &PseudoInterpretationSet,
    config: &BaselineConfig,
    retrieval: &RetrievalConfig,
    retriever: &Retriever,
    gateway: &Gateway,
) -> Result<Universe> {
    config.validate()?;
    let k = config.per_interpretation_k;
    let per_query = RetrievalConfig {
        k_first: retrieval.k_first.max(k),
        k_final: k,
        rerank_enabled: retrieval.rerank_enabled,
    };
    let mut best: HashMap<String, ScoredPassage> = HashMap::new();
    for item in &pseudo.items {
        let hits = retriever.search(item, &per_query, UniverseKind::Pseudo, gateway.ledger())?;
        for e in hits.entries {
            match best.get_mut(&e.id) {
                Some(b) if b.score >= e.score => {}
                Some(b) => b.score = e.score,
                None => {
                    best.insert(e.id.clone(), e);
                }
            }
        }
    }
    let mut entries: Vec<ScoredPassage> = best.into_values().collect();
    entries.sort_by(rank_order);
    if let Some(final_k) = config.final_k {
        entries.truncate(final_k);
    }
    Ok(Universe {
        query: pseudo.source_query.clone(),
        k: config.final_k.unwrap_or(entries.len()),
        entries,
        kind: UniverseKind::Pseudo,
    })
}

fn passage_blocks(universe: &Universe, corpus: &Corpus) -> String {
    universe
        .passages(corpus)
        .iter()
        .map(|p| format!("[{}] {}", p.id, p.full_text()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

const BATCH_INSTRUCTION: &str = "Decide for each passage separately and reply with one line per passage in the form `<passage id>: Yes` or `<passage id>: No`.";

/// Keeps passages that support at least one pseudo-interpretation. One
/// verifier call per interpretation, each carrying the whole universe.
pub fn dtv_verify(
    pseudo: &PseudoInterpretationSet,
    universe: &Universe,
    corpus: &Corpus,
    verifier: &Gateway,
) -> Result<Universe> {
    let ids = universe.ids();
    let mut keep = vec![false; ids.len()];
    if !ids.is_empty() {
        let blocks = format!("\n{}\n\n{BATCH_INSTRUCTION}", passage_blocks(universe, corpus));
        for item in &pseudo.items {
            let request = verifier
                .request(
                    TemplateId::Verify,
                    &fields([("question", item.clone()), ("passage", blocks.clone())]),
                )?
                .tag(format!("dtv-verify|{}|{item}", pseudo.source_query))
                .key(format!("batch|{item}"))
                .key(item.clone())
                .items(ids.clone())
                .context(ids.len());
            match verifier.complete(&request) {
                Ok(r) => {
                    let decisions = parse::parse_keyed_decisions(&r.text, &ids);
                    if decisions.iter().any(Option::is_none) {
                        verifier
                            .ledger()
                            .warn(format!("verifier gave no decision for some passages of `{item}`"));
                    }
                    for (k, d) in keep.iter_mut().zip(decisions) {
                        *k |= d == Some(true);
                    }
                }
                Err(e) => verifier
                    .ledger()
                    .warn(format!("verification of `{item}` failed ({e}); batch treated as unverified")),
            }
        }
    }
    Ok(Universe {
        query: universe.query.clone(),
        entries: universe
            .entries
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(e, _)| e.clone())
            .collect(),
        k: universe.k,
        kind: UniverseKind::Verified,
    })
}

/// One long-context generation over `universe`, parsed into items. Each item
/// cites the best-scored passage it names that is in the universe.
fn generate(q: &str, universe: &Universe, corpus: &Corpus, gateway: &Gateway, source: Source) -> Result<ClarificationSet> {
    if universe.is_empty() {
        return Ok(ClarificationSet::empty(q, source));
    }
    let request = gateway
        .request(
            TemplateId::Generate,
            &fields([
                ("question", q.to_string()),
                ("passages", passage_blocks(universe, corpus)),
            ]),
        )?
        .tag(format!("{source}|{q}"))
        .key(format!("{source}|{q}"))
        .key(q)
        .context(universe.len());
    let text = match gateway.complete(&request) {
        Ok(r) => r.text,
        Err(e) => {
            let mut set = ClarificationSet::empty(q, source);
            set.warnings.push(format!("generation failed: {e}"));
            gateway.ledger().warn(format!("{source} generation failed for `{q}`: {e}"));
            return Ok(set);
        }
    };
    let (pairs, dropped) = parse::parse_pairs(&text);
    let items = pairs
        .into_iter()
        .map(|p| {
            // Universe entries are in rank order.
            let cited = universe
                .entries
                .iter()
                .find(|e| p.cited.contains(&e.id))
                .map(|e| e.id.clone());
            ClarificationItem::new(p.interpretation, p.answer, cited)
        })
        .collect();
    let mut set = ClarificationSet::new(q, source, items);
    if dropped > 0 {
        set.warnings.push(format!("{dropped} unparseable interpretation block(s) dropped"));
    }
    if set.is_empty() && !parse::is_abstention(text.trim()) && !text.trim().is_empty() {
        set.warnings.push("generation output could not be parsed".into());
        gateway.ledger().warn(format!("{source} output for `{q}` could not be parsed"));
    }
    Ok(set)
}

pub fn dtv_answer(q: &str, verified: &Universe, corpus: &Corpus, gateway: &Gateway, source: Source) -> Result<ClarificationSet> {
    generate(q, verified, corpus, gateway, source)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtvMode {
    Full,
    NoVerification,
}

/// Intermediate products of a DtV run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtvRun {
    pub pseudo: PseudoInterpretationSet,
    pub universe: Universe,
    pub verified: Option<Universe>,
    pub clarifications: ClarificationSet,
}

pub fn dtv_pipeline(
    q: &str,
    config: &BaselineConfig,
    retrieval: &RetrievalConfig,
    mode: DtvMode,
    retriever: &Retriever,
    generator: &Gateway,
    verifier: &Gateway,
) -> Result<DtvRun> {
    let pseudo = dtv_pseudo_interpret(q, generator)?;
    let universe = dtv_build_universe(&pseudo, config, retrieval, retriever, generator)?;
    let (verified, source) = match mode {
        DtvMode::Full => (
            Some(dtv_verify(&pseudo, &universe, &retriever.corpus, verifier)?),
            Source::Dtv,
        ),
        DtvMode::NoVerification => (None, Source::DtvNoverify),
    };
    let context = verified.as_ref().unwrap_or(&universe);
    let clarifications = dtv_answer(q, context, &retriever.corpus, generator, source)?;
    Ok(DtvRun {
        pseudo,
        universe,
        verified,
        clarifications,
    })
}

/// Single generation over the query universe.
pub fn rac(q: &str, universe: &Universe, corpus: &Corpus, gateway: &Gateway) -> Result<ClarificationSet> {
    if universe.kind != UniverseKind::Query {
        return Err(Error::Invalid(format!(
            "RAC expects a query universe, got {:?}",
            universe.kind
        )));
    }
    generate(q, universe, corpus, gateway, Source::Rac)
}
