//! Per-query and aggregate results, and their table rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{GroundedGold, Quadrants};
use super::{g_f1, Rate};
use crate::ledger::LedgerSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub n_interpretations: usize,
    pub unique_count: usize,
    pub gold_unique: usize,
    pub sufficient: bool,
    pub precision: Rate,
    pub recall: Rate,
    pub g_precision: Rate,
    pub g_recall: Rate,
    pub g_f1: f64,
    pub grounded_gold: GroundedGold,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrants: Option<Quadrants>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<QueryMetrics>,
    /// Set when the method or the evaluation failed for this query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Cost of running the method.
    pub cost: LedgerSummary,
    /// Cost of judging it.
    pub judge_cost: LedgerSummary,
}

/// Means over queries that produced metrics. `g_f1` is the harmonic mean of
/// the mean grounded precision and recall.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub queries: usize,
    pub failed: usize,
    pub n_interpretations: f64,
    pub sufficient: f64,
    pub precision: f64,
    pub recall: f64,
    pub g_precision: f64,
    pub g_recall: f64,
    pub g_f1: f64,
    pub cost: LedgerSummary,
    pub judge_cost: LedgerSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub queries: Vec<QueryReport>,
    pub aggregate: Aggregate,
}

impl EvalReport {
    pub fn new(method: impl Into<String>, queries: Vec<QueryReport>) -> Self {
        let aggregate = aggregate(&queries);
        Self {
            method: method.into(),
            queries,
            aggregate,
        }
    }
}

fn aggregate(queries: &[QueryReport]) -> Aggregate {
    let mut agg = Aggregate {
        queries: queries.len(),
        ..Default::default()
    };
    let scored: Vec<&QueryMetrics> = queries.iter().filter_map(|q| q.metrics.as_ref()).collect();
    agg.failed = queries.len() - scored.len();
    for q in queries {
        agg.cost.merge(&q.cost);
        agg.judge_cost.merge(&q.judge_cost);
    }
    if scored.is_empty() {
        return agg;
    }
    let n = scored.len() as f64;
    let mean = |f: &dyn Fn(&QueryMetrics) -> f64| scored.iter().map(|m| f(m)).sum::<f64>() / n;
    agg.n_interpretations = mean(&|m| m.n_interpretations as f64);
    agg.sufficient = mean(&|m| if m.sufficient { 1.0 } else { 0.0 });
    agg.precision = mean(&|m| m.precision.value);
    agg.recall = mean(&|m| m.recall.value);
    agg.g_precision = mean(&|m| m.g_precision.value);
    agg.g_recall = mean(&|m| m.g_recall.value);
    agg.g_f1 = g_f1(agg.g_precision, agg.g_recall);
    agg
}

/// Markdown table with one row per report; rates as percentages.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    out.push_str("| Method | Queries | \\|Q̂\\| | Sufficient% | Recall | G-Precision | G-Recall | G-F1 |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in reports {
        let a = &r.aggregate;
        let _ = writeln!(
            out,
            "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |",
            r.method,
            a.queries - a.failed,
            a.n_interpretations,
            a.sufficient * 100.0,
            a.recall * 100.0,
            a.g_precision * 100.0,
            a.g_recall * 100.0,
            a.g_f1 * 100.0,
        );
    }
    out
}
