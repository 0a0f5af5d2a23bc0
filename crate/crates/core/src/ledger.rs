//! Per-run accounting of retriever and LLM calls.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::llm::TemplateId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "message")]
pub enum CallOutcome {
    Ok,
    Failed(String),
}

/// One LLM attempt. A request retried twice contributes three records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmCallRecord {
    pub template: TemplateId,
    pub tag: String,
    pub attempt: u32,
    pub passages_in_context: usize,
    pub tokens_estimate: usize,
    pub outcome: CallOutcome,
}

/// Append-only call ledger, safe to share across worker threads.
#[derive(Debug, Default)]
pub struct CostLedger {
    retriever_calls: AtomicUsize,
    llm_calls: Mutex<Vec<LlmCallRecord>>,
    warnings: Mutex<Vec<String>>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_retrieval(&self) {
        self.retriever_calls.fetch_add(1, Ordering::SeqCst);
    }

    pub fn record_llm(&self, record: LlmCallRecord) {
        self.llm_calls.lock().expect("ledger poisoned").push(record);
    }

    pub fn warn(&self, message: impl Into<String>) {
        let message = message.into();
        log::warn!("{message}");
        self.warnings.lock().expect("ledger poisoned").push(message);
    }

    pub fn retriever_calls(&self) -> usize {
        self.retriever_calls.load(Ordering::SeqCst)
    }

    pub fn llm_call_count(&self) -> usize {
        self.llm_calls.lock().expect("ledger poisoned").len()
    }

    /// Records in a schedule-independent order (template, tag, attempt).
    pub fn snapshot(&self) -> LedgerSnapshot {
        let mut llm_calls = self.llm_calls.lock().expect("ledger poisoned").clone();
        llm_calls.sort_by(|a, b| {
            (a.template, &a.tag, a.attempt).cmp(&(b.template, &b.tag, b.attempt))
        });
        let mut warnings = self.warnings.lock().expect("ledger poisoned").clone();
        warnings.sort();
        LedgerSnapshot {
            retriever_calls: self.retriever_calls(),
            llm_calls,
            warnings,
        }
    }

    pub fn summary(&self) -> LedgerSummary {
        summarize_ledger(&self.snapshot())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub retriever_calls: usize,
    pub llm_calls: Vec<LlmCallRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateStats {
    pub calls: usize,
    pub total_context: usize,
    pub max_context: usize,
}

/// Aggregate call shape, in the units of passages per call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub retriever_calls: usize,
    pub llm_calls: usize,
    pub failed_llm_calls: usize,
    pub total_passage_context: usize,
    pub max_context: usize,
    pub tokens_estimate: usize,
    pub by_template: BTreeMap<TemplateId, TemplateStats>,
}

impl LedgerSummary {
    pub fn template(&self, id: TemplateId) -> TemplateStats {
        self.by_template.get(&id).copied().unwrap_or_default()
    }

    /// Element-wise sum, used for aggregating per-query ledgers.
    pub fn merge(&mut self, other: &LedgerSummary) {
        self.retriever_calls += other.retriever_calls;
        self.llm_calls += other.llm_calls;
        self.failed_llm_calls += other.failed_llm_calls;
        self.total_passage_context += other.total_passage_context;
        self.max_context = self.max_context.max(other.max_context);
        self.tokens_estimate += other.tokens_estimate;
        for (id, s) in &other.by_template {
            let e = self.by_template.entry(*id).or_default();
            e.calls += s.calls;
            e.total_context += s.total_context;
            e.max_context = e.max_context.max(s.max_context);
        }
    }
}

pub fn summarize_ledger(snapshot: &LedgerSnapshot) -> LedgerSummary {
    let mut summary = LedgerSummary {
        retriever_calls: snapshot.retriever_calls,
        ..Default::default()
    };
    for call in &snapshot.llm_calls {
        summary.llm_calls += 1;
        if matches!(call.outcome, CallOutcome::Failed(_)) {
            summary.failed_llm_calls += 1;
        }
        summary.total_passage_context += call.passages_in_context;
        summary.max_context = summary.max_context.max(call.passages_in_context);
        summary.tokens_estimate += call.tokens_estimate;
        let s = summary.by_template.entry(call.template).or_default();
        s.calls += 1;
        s.total_context += call.passages_in_context;
        s.max_context = s.max_context.max(call.passages_in_context);
    }
    summary
}
