//! Ungrounded and grounded precision/recall, the grounded gold set,
//! deduplicated counts and the relevance/answerability breakdown.

use serde::{Deserialize, Serialize};

use super::bleu::bleu_match;
use super::gold::GoldSet;
use super::judge::Judge;
use super::Rate;
use crate::consolidate::ClarificationSet;
use crate::corpus::Corpus;
use crate::diversify::CandidatePair;
use crate::retrieval::Universe;

/// How interpretations are compared for the ungrounded metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Matcher {
    /// One I_M call per direction.
    #[default]
    Judge,
    /// Sentence BLEU above `tau`, prediction as candidate.
    Bleu { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ungrounded {
    pub precision: Rate,
    pub recall: Rate,
}

fn bleu_cover(queried: &[String], against: &[String], tau: f64, queried_is_candidate: bool) -> Vec<bool> {
    queried
        .iter()
        .map(|x| {
            against.iter().any(|y| {
                if queried_is_candidate {
                    bleu_match(x, y, tau)
                } else {
                    bleu_match(y, x, tau)
                }
            })
        })
        .collect()
}

/// Precision over predictions and recall over gold, without grounding.
pub fn ungrounded_metrics(q: &str, predicted: &[String], gold: &[String], matcher: Matcher, judge: &Judge) -> Ungrounded {
    let (p_hits, r_hits) = match matcher {
        Matcher::Judge => (judge.match_set(q, predicted, gold), judge.match_set(q, gold, predicted)),
        Matcher::Bleu { tau } => (
            bleu_cover(predicted, gold, tau, true),
            bleu_cover(gold, predicted, tau, false),
        ),
    };
    Ungrounded {
        precision: Rate::mean(&p_hits),
        recall: Rate::mean(&r_hits),
    }
}

/// Whether `question` is supported by the cited passage, or by any passage
/// of `fallback` when nothing is cited.
pub fn supported(
    question: &str,
    passage_id: Option<&str>,
    fallback: &Universe,
    corpus: &Corpus,
    judge: &Judge,
) -> bool {
    match passage_id {
        Some(id) => match corpus.by_id(id) {
            Some(p) => judge.verify(question, p),
            None => {
                judge.ledger().warn(format!("cited passage `{id}` is not in the corpus"));
                false
            }
        },
        None => first_support(question, fallback, corpus, judge).is_some(),
    }
}

/// The best-ranked passage of `universe` that verifies `question`.
fn first_support(question: &str, universe: &Universe, corpus: &Corpus, judge: &Judge) -> Option<String> {
    universe
        .passages(corpus)
        .into_iter()
        .find(|p| judge.verify(question, p))
        .map(|p| p.id.clone())
}

/// Fraction of predicted items whose passage verifies their interpretation.
pub fn grounded_precision(predictions: &ClarificationSet, fallback: &Universe, corpus: &Corpus, judge: &Judge) -> Rate {
    let hits: Vec<bool> = predictions
        .items
        .iter()
        .map(|i| supported(&i.interpretation, i.passage_id.as_deref(), fallback, corpus, judge))
        .collect();
    Rate::mean(&hits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Gold,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedItem {
    pub interpretation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_id: Option<String>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedGold {
    pub query: String,
    pub items: Vec<GroundedItem>,
}

impl GroundedGold {
    pub fn interpretations(&self) -> Vec<String> {
        self.items.iter().map(|i| i.interpretation.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Verified gold items, then verified predictions that match nothing
/// already in the set. Gold items without a passage may be supported by any
/// passage of `fallback`. Predictions are visited in lexicographic order so
/// the result does not depend on the prediction order.
pub fn build_grounded_gold(
    predictions: &ClarificationSet,
    gold: &GoldSet,
    fallback: &Universe,
    corpus: &Corpus,
    judge: &Judge,
) -> GroundedGold {
    let q = gold.query.as_str();
    let mut items: Vec<GroundedItem> = Vec::new();
    for g in &gold.interpretations {
        let support = match g.passage_id.as_deref() {
            Some(id) => supported(&g.q, Some(id), fallback, corpus, judge).then(|| id.to_string()),
            None => first_support(&g.q, fallback, corpus, judge),
        };
        if let Some(id) = support {
            if !items.iter().any(|i| i.interpretation == g.q) {
                items.push(GroundedItem {
                    interpretation: g.q.clone(),
                    passage_id: Some(id),
                    origin: Origin::Gold,
                });
            }
        }
    }
    let mut preds: Vec<_> = predictions.items.iter().collect();
    preds.sort_by(|a, b| (&a.interpretation, &a.passage_id).cmp(&(&b.interpretation, &b.passage_id)));
    for p in preds {
        if !supported(&p.interpretation, p.passage_id.as_deref(), fallback, corpus, judge) {
            continue;
        }
        let current: Vec<String> = items.iter().map(|i| i.interpretation.clone()).collect();
        let known = current.contains(&p.interpretation)
            || judge.match_set(q, std::slice::from_ref(&p.interpretation), &current)[0];
        if !known {
            items.push(GroundedItem {
                interpretation: p.interpretation.clone(),
                passage_id: p.passage_id.clone(),
                origin: Origin::Prediction,
            });
        }
    }
    GroundedGold {
        query: q.to_string(),
        items,
    }
}

/// Fraction of Q̄ covered by some prediction that both matches the item and
/// cites a passage verifying it. One match call per prediction.
pub fn grounded_recall(
    grounded: &GroundedGold,
    predictions: &ClarificationSet,
    fallback: &Universe,
    corpus: &Corpus,
    judge: &Judge,
) -> Rate {
    if grounded.is_empty() {
        return Rate::degenerate(1.0);
    }
    let targets = grounded.interpretations();
    let mut covered = vec![false; targets.len()];
    for p in &predictions.items {
        let matches = judge.match_set(&grounded.query, &targets, std::slice::from_ref(&p.interpretation));
        for (i, m) in matches.into_iter().enumerate() {
            if m && !covered[i] {
                covered[i] = supported(&targets[i], p.passage_id.as_deref(), fallback, corpus, judge);
            }
        }
    }
    Rate::mean(&covered)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sufficiency {
    pub unique_count: usize,
    pub gold_unique: usize,
    pub sufficient: bool,
}

/// Unique predicted interpretations after judge dedup, and whether there are
/// at least as many as unique gold interpretations.
pub fn dedup_and_sufficiency(q: &str, predicted: &[String], gold: &GoldSet, judge: &Judge) -> Sufficiency {
    let unique_count = judge.dedup(q, predicted, "predictions").len();
    let gold_unique = judge.dedup(q, &gold.questions(), "gold").len();
    Sufficiency {
        unique_count,
        gold_unique,
        sufficient: unique_count > 0 && unique_count >= gold_unique,
    }
}

/// Relevance × answerability counts over candidate pairs, with answer
/// correctness tallied inside the relevant and answerable cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Quadrants {
    pub relevant_answerable: usize,
    pub relevant_unanswerable: usize,
    pub irrelevant_answerable: usize,
    pub irrelevant_unanswerable: usize,
    pub unknown: usize,
    pub correct: usize,
    /// `correct / relevant_answerable`; `None` when that cell is empty.
    pub correct_rate: Option<f64>,
}

/// Judges each pair three ways: relevance of q̂ to q (I_M, key
/// `relevance|q`), answerability of q̂ by p̂ (I_V) and, for relevant and
/// answerable pairs, support for the answer (I_V, key `correct|q̂|p̂`).
/// A failed relevance or answerability call puts the pair in `unknown`.
pub fn error_quadrants(q: &str, pairs: &[CandidatePair], corpus: &Corpus, judge: &Judge) -> Quadrants {
    let mut out = Quadrants::default();
    let reference = [q.to_string()];
    for pair in pairs {
        let Some(passage) = corpus.by_id(&pair.passage_id) else {
            judge.ledger().warn(format!("pair cites unknown passage `{}`", pair.passage_id));
            out.unknown += 1;
            continue;
        };
        let relevant = judge.match_raw(
            q,
            std::slice::from_ref(&pair.interpretation),
            &reference,
            &[format!("relevance|{q}")],
        )[0];
        let answerable = judge.verify_raw(&pair.interpretation, passage, "answerable", &[]);
        match (relevant, answerable) {
            (Some(true), Some(true)) => {
                out.relevant_answerable += 1;
                let claim = format!("{}\nAnswer: {}", pair.interpretation, pair.answer);
                let key = format!("correct|{}|{}", pair.interpretation, pair.passage_id);
                if judge.verify_raw(&claim, passage, "correct", &[key]) == Some(true) {
                    out.correct += 1;
                }
            }
            (Some(true), Some(false)) => out.relevant_unanswerable += 1,
            (Some(false), Some(true)) => out.irrelevant_answerable += 1,
            (Some(false), Some(false)) => out.irrelevant_unanswerable += 1,
            _ => out.unknown += 1,
        }
    }
    out.correct_rate =
        (out.relevant_answerable > 0).then(|| out.correct as f64 / out.relevant_answerable as f64);
    out
}
