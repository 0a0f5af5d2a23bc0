//! LLM judge wrapper: renders judge prompts, parses verdicts, logs every
//! decision and answers repeated questions from a cache.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Passage;
use crate::ledger::CostLedger;
use crate::llm::{fields, parse, Gateway, GenerationRequest, TemplateId};

/// One verdict about one item. `verdict` is `None` when the call failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeDecision {
    pub prompt_id: TemplateId,
    /// The item being judged (a question, or a list member).
    pub subject: String,
    /// What it was judged against: a passage id or the reference list.
    pub against: String,
    pub fingerprint: String,
    pub verdict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug)]
pub struct Judge {
    gateway: Gateway,
    decisions: Mutex<Vec<JudgeDecision>>,
    cache: Mutex<HashMap<String, Vec<Option<bool>>>>,
}

fn fingerprint(request: &GenerationRequest) -> String {
    let mut h = Sha256::new();
    h.update(request.template_id.code().as_bytes());
    for part in [&request.rendered_prompt]
        .into_iter()
        .chain(&request.keys)
        .chain(&request.items)
        .chain(&request.reference)
    {
        h.update([0u8]);
        h.update(part.as_bytes());
    }
    let digest: [u8; 32] = h.finalize().into();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl Judge {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            decisions: Mutex::new(Vec::new()),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn ledger(&self) -> &CostLedger {
        self.gateway.ledger()
    }

    /// Every decision made so far, in call order.
    pub fn decisions(&self) -> Vec<JudgeDecision> {
        self.decisions.lock().expect("judge poisoned").clone()
    }

    fn warn(&self, message: String) -> Option<String> {
        self.gateway.ledger().warn(message.clone());
        Some(message)
    }

    /// Runs `request` and parses one verdict per `subjects` entry. The parse
    /// closure returns the verdicts and an optional warning.
    fn decide(
        &self,
        request: GenerationRequest,
        subjects: &[String],
        against: &str,
        parse_fn: impl Fn(&str) -> (Vec<bool>, Option<String>),
    ) -> Vec<Option<bool>> {
        let fp = fingerprint(&request);
        if let Some(hit) = self.cache.lock().expect("judge poisoned").get(&fp) {
            return hit.clone();
        }
        let (verdicts, warning) = match self.gateway.complete(&request) {
            Ok(r) => {
                let (v, w) = parse_fn(&r.text);
                (v.into_iter().map(Some).collect::<Vec<_>>(), w.and_then(|w| self.warn(w)))
            }
            Err(e) => (
                vec![None; subjects.len()],
                self.warn(format!("{} judge call failed ({}): {e}", request.template_id, request.tag)),
            ),
        };
        {
            let mut log = self.decisions.lock().expect("judge poisoned");
            for (s, v) in subjects.iter().zip(&verdicts) {
                log.push(JudgeDecision {
                    prompt_id: request.template_id,
                    subject: s.clone(),
                    against: against.to_string(),
                    fingerprint: fp.clone(),
                    verdict: *v,
                    warning: warning.clone(),
                });
            }
        }
        self.cache
            .lock()
            .expect("judge poisoned")
            .insert(fp, verdicts.clone());
        verdicts
    }

    fn single_verdict(text: &str) -> (Vec<bool>, Option<String>) {
        match parse::parse_yes_no(text) {
            Some(v) => (vec![v], None),
            None => (vec![false], Some(format!("unparseable judge verdict `{}`", text.trim()))),
        }
    }

    /// Whether `passage` supports `question`; `None` if the call failed.
    /// `keys` are extra scripted lookup keys tried before the defaults.
    pub fn verify_raw(&self, question: &str, passage: &Passage, tag: &str, keys: &[String]) -> Option<bool> {
        let request = match self.gateway.request(
            TemplateId::Verify,
            &fields([("question", question.to_string()), ("passage", passage.full_text())]),
        ) {
            Ok(r) => r,
            Err(e) => {
                self.warn(format!("verify prompt failed to render: {e}"));
                return None;
            }
        };
        let mut request = request.tag(format!("{tag}|{question}|{}", passage.id));
        for k in keys {
            request = request.key(k.clone());
        }
        let request = request
            .key(format!("{question}|{}", passage.id))
            .key(question)
            .items(vec![passage.id.clone()])
            .context(1);
        self.decide(request, &[question.to_string()], &passage.id, Self::single_verdict)[0]
    }

    /// V(q̂, p̂): does the passage support the question. Failures and
    /// unparseable replies count as `false`.
    pub fn verify(&self, question: &str, passage: &Passage) -> bool {
        self.verify_raw(question, passage, "verify", &[]) == Some(true)
    }

    /// For each `queried` item, whether it is covered by `against`. One call;
    /// missing verdicts are padded with `false`. `None` entries mark a
    /// failed call.
    pub fn match_raw(&self, q: &str, queried: &[String], against: &[String], keys: &[String]) -> Vec<Option<bool>> {
        if queried.is_empty() {
            return Vec::new();
        }
        if against.is_empty() {
            return vec![Some(false); queried.len()];
        }
        let request = match self.gateway.request(
            TemplateId::Match,
            &fields([
                ("question", q.to_string()),
                ("generated", parse::numbered(against)),
                ("ground_truth", parse::numbered(queried)),
            ]),
        ) {
            Ok(r) => r,
            Err(e) => {
                self.warn(format!("match prompt failed to render: {e}"));
                return vec![None; queried.len()];
            }
        };
        let mut request = request.tag(format!("match|{q}|{}", queried.join(" ; ")));
        for k in keys {
            request = request.key(k.clone());
        }
        let request = request
            .key(q)
            .items(queried.to_vec())
            .reference(against.to_vec());
        let n = queried.len();
        let against_label = against.join(" ; ");
        self.decide(request, queried, &against_label, |text| {
            let mut v = parse::parse_decisions(text);
            let warning = (v.len() != n).then(|| {
                format!("match judge returned {} verdicts for {n} items", v.len())
            });
            v.resize(n, false);
            (v, warning)
        })
    }

    /// Coverage of each `queried` item by the `against` list.
    pub fn match_set(&self, q: &str, queried: &[String], against: &[String]) -> Vec<bool> {
        self.match_raw(q, queried, against, &[])
            .into_iter()
            .map(|v| v == Some(true))
            .collect()
    }

    /// Near-duplicate removal. Falls back to exact-string dedup when the
    /// reply is empty, fails, or lists more lines than it was given.
    pub fn dedup(&self, q: &str, items: &[String], label: &str) -> Vec<String> {
        let exact = || {
            let mut out: Vec<String> = Vec::new();
            for i in items {
                if !out.contains(i) {
                    out.push(i.clone());
                }
            }
            out
        };
        if items.len() < 2 {
            return exact();
        }
        let reply = self
            .gateway
            .request(
                TemplateId::Dedup,
                &fields([("question", q.to_string()), ("interpretations", parse::numbered(items))]),
            )
            .and_then(|r| {
                let r = r.tag(format!("dedup|{q}|{label}")).key(q).items(items.to_vec());
                self.gateway.complete(&r)
            });
        match reply {
            Ok(r) => {
                let kept = parse::parse_list(&r.text);
                if kept.is_empty() || kept.len() > items.len() {
                    self.warn(format!("dedup output for `{q}` unusable; exact-string dedup used"));
                    exact()
                } else {
                    kept
                }
            }
            Err(e) => {
                self.warn(format!("dedup call for `{q}` failed ({e}); exact-string dedup used"));
                exact()
            }
        }
    }
}
