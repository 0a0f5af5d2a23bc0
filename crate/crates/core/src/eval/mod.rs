//! Evaluation: ungrounded and grounded metrics, sufficiency, error
//! quadrants and report rendering.
//!
//! Every judge verdict goes through [`Judge`], which logs a
//! [`JudgeDecision`] per item so the metric arithmetic can be recomputed
//! from the raw table.

pub mod bleu;
mod gold;
mod judge;
mod metrics;
mod report;

use serde::{Deserialize, Serialize};

pub use gold::{load_gold, parse_gold, GoldInterpretation, GoldSet};
pub use judge::{Judge, JudgeDecision};
pub use metrics::{
    build_grounded_gold, dedup_and_sufficiency, error_quadrants, grounded_precision, grounded_recall,
    supported, ungrounded_metrics, GroundedGold, GroundedItem, Matcher, Origin, Quadrants, Sufficiency, Ungrounded,
};
pub use report::{render_table, Aggregate, EvalReport, QueryMetrics, QueryReport};

use crate::consolidate::ClarificationSet;
use crate::corpus::Corpus;
use crate::diversify::CandidatePair;
use crate::error::{Error, Result};
use crate::retrieval::Universe;

fn is_false(b: &bool) -> bool {
    !*b
}

/// A value in [0, 1]. `degenerate` marks a value fixed by convention
/// because its denominator was empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub degenerate: bool,
}

impl Rate {
    pub fn new(value: f64) -> Self {
        Self { value, degenerate: false }
    }

    pub fn degenerate(value: f64) -> Self {
        Self { value, degenerate: true }
    }

    /// Fraction of `true`; an empty slice gives a degenerate 0.
    pub fn mean(hits: &[bool]) -> Self {
        if hits.is_empty() {
            return Self::degenerate(0.0);
        }
        Self::new(hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64)
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0. Works on any
/// common scale (fractions or percentages).
pub fn g_f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub matcher: Matcher,
    /// Tabulate relevance × answerability for methods that expose pairs.
    pub quadrants: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            matcher: Matcher::Judge,
            quadrants: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if let Matcher::Bleu { tau } = self.matcher {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::Config(format!("BLEU threshold must be in (0, 1), got {tau}")));
            }
        }
        Ok(())
    }
}

/// All metrics for one query. `fallback` is the universe searched for
/// support when an item cites no passage.
pub fn evaluate_query(
    predictions: &ClarificationSet,
    gold: &GoldSet,
    fallback: &Universe,
    pairs: Option<&[CandidatePair]>,
    corpus: &Corpus,
    judge: &Judge,
    config: &EvalConfig,
) -> QueryMetrics {
    let q = gold.query.as_str();
    let predicted = predictions.interpretations();
    let ungrounded = ungrounded_metrics(q, &predicted, &gold.questions(), config.matcher, judge);
    let sufficiency = dedup_and_sufficiency(q, &predicted, gold, judge);
    let g_precision = grounded_precision(predictions, fallback, corpus, judge);
    let grounded = build_grounded_gold(predictions, gold, fallback, corpus, judge);
    let g_recall = grounded_recall(&grounded, predictions, fallback, corpus, judge);
    let quadrants = match pairs {
        Some(pairs) if config.quadrants => Some(error_quadrants(q, pairs, corpus, judge)),
        _ => None,
    };
    QueryMetrics {
        n_interpretations: predictions.len(),
        unique_count: sufficiency.unique_count,
        gold_unique: sufficiency.gold_unique,
        sufficient: sufficiency.sufficient,
        precision: ungrounded.precision,
        recall: ungrounded.recall,
        g_precision,
        g_recall,
        g_f1: g_f1(g_precision.value, g_recall.value),
        grounded_gold: grounded,
        quadrants,
    }
}
