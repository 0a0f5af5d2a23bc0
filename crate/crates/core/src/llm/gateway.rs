use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::backend::{Backend, GenerationRequest};
use super::templates::{TemplateId, TemplateSet};
use crate::error::Result;
use crate::ledger::{CallOutcome, CostLedger, LlmCallRecord};
use crate::text::estimate_tokens;

pub const DEFAULT_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub input_tokens_estimate: usize,
    pub backend_id: String,
    #[serde(skip)]
    pub latency: Duration,
}

/// Renders templates, calls a backend with bounded retries, and records
/// every attempt in a [`CostLedger`].
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn Backend>,
    templates: Arc<TemplateSet>,
    retries: u32,
    ledger: Arc<CostLedger>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.id())
            .field("retries", &self.retries)
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self {
            backend,
            templates: Arc::new(TemplateSet::default()),
            retries: DEFAULT_RETRIES,
            ledger: Arc::new(CostLedger::new()),
        }
    }

    pub fn with_templates(mut self, templates: Arc<TemplateSet>) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    /// A gateway sharing this backend but recording into `ledger`.
    pub fn with_ledger(&self, ledger: Arc<CostLedger>) -> Self {
        Self {
            ledger,
            ..self.clone()
        }
    }

    pub fn ledger(&self) -> &Arc<CostLedger> {
        &self.ledger
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Renders `template` into a request with no routing metadata yet.
    pub fn request(&self, template: TemplateId, fields: &BTreeMap<&str, String>) -> Result<GenerationRequest> {
        let prompt = self.templates.get(template).render(fields)?;
        Ok(GenerationRequest::new(template, prompt))
    }

    /// Calls the backend, retrying retriable failures up to the configured
    /// bound. Every attempt is appended to the ledger.
    pub fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse> {
        let tokens = estimate_tokens(&request.rendered_prompt);
        let mut attempt = 0;
        loop {
            let started = Instant::now();
            let result = self.backend.generate(request);
            let outcome = match &result {
                Ok(_) => CallOutcome::Ok,
                Err(e) => CallOutcome::Failed(e.to_string()),
            };
            self.ledger.record_llm(LlmCallRecord {
                template: request.template_id,
                tag: request.tag.clone(),
                attempt,
                passages_in_context: request.passages_in_context,
                tokens_estimate: tokens,
                outcome,
            });
            match result {
                Ok(text) => {
                    return Ok(GenerationResponse {
                        text,
                        input_tokens_estimate: tokens,
                        backend_id: self.backend.id().to_string(),
                        latency: started.elapsed(),
                    })
                }
                Err(e) if e.is_retriable() && attempt < self.retries => {
                    log::debug!("retrying {} ({}): {e}", request.template_id, request.tag);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Builds a field map from `(name, value)` pairs.
pub fn fields<const N: usize>(pairs: [(&'static str, String); N]) -> BTreeMap<&'static str, String> {
    pairs.into_iter().collect()
}
