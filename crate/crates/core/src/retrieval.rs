//! Exact cosine retrieval, reranking, and high-recall universe construction.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Passage};
use crate::embed::{cosine, dot, embed, Embedder};
use crate::error::{Error, Result};
use crate::ledger::CostLedger;
use crate::llm::{fields, parse, Gateway, TemplateId};

const INDEX_FORMAT: &str = "disambig-flat-index";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPassage {
    pub id: String,
    /// Ingestion index in the corpus.
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UniverseKind {
    /// Single relaxed-query retrieval.
    #[serde(rename = "U_q")]
    Query,
    /// Union of per-pseudo-interpretation retrievals.
    #[serde(rename = "U_pseudo")]
    Pseudo,
    /// Verified subset of a pseudo universe.
    #[serde(rename = "U_verified")]
    Verified,
}

/// Retrieved passages sorted by non-increasing score, ids unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub query: String,
    pub entries: Vec<ScoredPassage>,
    pub k: usize,
    pub kind: UniverseKind,
}

impl Universe {
    pub fn empty(query: impl Into<String>, k: usize, kind: UniverseKind) -> Self {
        Self {
            query: query.into(),
            entries: Vec::new(),
            k,
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    pub fn score_of(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.score)
    }

    /// Resolves entries against `corpus`, skipping ids it does not contain.
    pub fn passages<'c>(&self, corpus: &'c Corpus) -> Vec<&'c Passage> {
        self.entries.iter().filter_map(|e| corpus.by_id(&e.id)).collect()
    }
}

/// Orders by score descending, then ingestion index ascending.
pub(crate) fn rank_order(a: &ScoredPassage, b: &ScoredPassage) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then(a.index.cmp(&b.index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k_first: usize,
    pub k_final: usize,
    pub rerank_enabled: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k_first: 100,
            k_final: 20,
            rerank_enabled: true,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_final == 0 || self.k_final > self.k_first {
            return Err(Error::Config(format!(
                "retrieval requires 1 <= k_final ({}) <= k_first ({})",
                self.k_final, self.k_first
            )));
        }
        Ok(())
    }
}

/// Flat (exact) cosine index over unit vectors, in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    format: String,
    version: u32,
    pub fingerprint: String,
    pub dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl VectorIndex {
    /// Embeds every passage (title + text) with `embedder`.
    pub fn build(corpus: &Corpus, embedder: &dyn Embedder) -> Result<Self> {
        let vectors = corpus
            .iter()
            .map(|p| embed(&p.full_text(), embedder).map(|v| v.into_inner()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            fingerprint: embedder.fingerprint(),
            dim: embedder.dim(),
            ids: corpus.iter().map(|p| p.id.clone()).collect(),
            vectors,
        })
    }

    /// Index over precomputed vectors (normalized here).
    pub fn from_vectors(fingerprint: impl Into<String>, ids: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(Error::Invalid("ids and vectors differ in length".into()));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        let vectors = vectors
            .into_iter()
            .map(|v| {
                if v.len() != dim {
                    return Err(Error::Config("inconsistent vector dimensions".into()));
                }
                crate::embed::EmbeddingVector::normalized(v).map(|e| e.into_inner())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            fingerprint: fingerprint.into(),
            dim,
            ids,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        &self.vectors[index]
    }

    /// Exact top-k by cosine (dot product of unit vectors); ties go to the
    /// lower ingestion index. `k` larger than the index returns everything.
    pub fn top_k(&self, query: &[f64], k: usize) -> Vec<ScoredPassage> {
        let mut scored: Vec<ScoredPassage> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| ScoredPassage {
                id: self.ids[i].clone(),
                index: i,
                score: dot(query, v),
            })
            .collect();
        let k = k.min(scored.len());
        if k == 0 {
            return Vec::new();
        }
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank_order);
            scored.truncate(k);
        }
        scored.sort_by(rank_order);
        scored
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw = serde_json::to_string(self)?;
        fs::write(path, raw).map_err(|e| Error::io(path, e))
    }

    /// Loads a sidecar index, refusing one built by a different provider.
    pub fn load(path: impl AsRef<Path>, embedder: &dyn Embedder) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let index: VectorIndex = serde_json::from_str(&raw)?;
        if index.format != INDEX_FORMAT || index.version != INDEX_VERSION {
            return Err(Error::Config(format!(
                "unsupported index format {} v{}",
                index.format, index.version
            )));
        }
        if index.fingerprint != embedder.fingerprint() {
            return Err(Error::Fingerprint {
                index: index.fingerprint,
                provider: embedder.fingerprint(),
            });
        }
        if index.vectors.iter().any(|v| v.len() != index.dim) {
            return Err(Error::Config("index vectors disagree with declared dim".into()));
        }
        Ok(index)
    }

    /// Checks that the index covers exactly `corpus`, in order.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        let same = self.ids.len() == corpus.len()
            && self.ids.iter().zip(corpus.iter()).all(|(a, p)| *a == p.id);
        if same {
            Ok(())
        } else {
            Err(Error::Config("index does not match corpus ids".into()))
        }
    }
}

/// Second-phase relevance scorer.
pub trait Reranker: Send + Sync {
    fn id(&self) -> &str;

    fn score(&self, query: &str, passage: &Passage) -> Result<f64>;
}

/// Reranks by cosine under a (typically stronger) embedding provider.
pub struct EmbeddingReranker {
    embedder: Arc<dyn Embedder>,
}

impl EmbeddingReranker {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self { embedder }
    }
}

impl Reranker for EmbeddingReranker {
    fn id(&self) -> &str {
        "embedding"
    }

    fn score(&self, query: &str, passage: &Passage) -> Result<f64> {
        let q = embed(query, self.embedder.as_ref())?;
        let p = embed(&passage.full_text(), self.embedder.as_ref())?;
        Ok(cosine(q.as_slice(), p.as_slice()))
    }
}

/// Fixed scores per passage id; unknown ids fail.
#[derive(Debug, Clone, Default)]
pub struct ScriptedReranker {
    pub scores: HashMap<String, f64>,
}

impl ScriptedReranker {
    pub fn new(scores: impl IntoIterator<Item = (String, f64)>) -> Self {
        Self {
            scores: scores.into_iter().collect(),
        }
    }
}

impl Reranker for ScriptedReranker {
    fn id(&self) -> &str {
        "scripted"
    }

    fn score(&self, _query: &str, passage: &Passage) -> Result<f64> {
        self.scores.get(&passage.id).copied().ok_or_else(|| Error::Backend {
            backend: "scripted-reranker".into(),
            message: format!("no score for `{}`", passage.id),
        })
    }
}

/// Re-scores `candidates` and keeps the best `k_final`. Without a reranker
/// the first `k_final` entries pass through; on reranker failure the
/// first-phase order is kept and a warning recorded.
pub fn rerank(
    query: &str,
    candidates: &Universe,
    k_final: usize,
    reranker: Option<&dyn Reranker>,
    corpus: &Corpus,
    ledger: &CostLedger,
) -> Universe {
    let mut out = candidates.clone();
    out.k = k_final;
    let Some(reranker) = reranker else {
        out.entries.truncate(k_final);
        return out;
    };
    let rescored: Result<Vec<(usize, ScoredPassage)>> = candidates
        .entries
        .iter()
        .enumerate()
        .map(|(pos, e)| {
            let passage = corpus
                .by_id(&e.id)
                .ok_or_else(|| Error::NotFound(format!("passage `{}`", e.id)))?;
            let score = reranker.score(query, passage)?;
            if !score.is_finite() {
                return Err(Error::Invalid(format!("non-finite rerank score for `{}`", e.id)));
            }
            Ok((pos, ScoredPassage { score, ..e.clone() }))
        })
        .collect();
    match rescored {
        Ok(mut scored) => {
            scored.sort_by(|(pa, a), (pb, b)| b.score.total_cmp(&a.score).then(pa.cmp(pb)));
            out.entries = scored.into_iter().take(k_final).map(|(_, e)| e).collect();
        }
        Err(e) => {
            ledger.warn(format!(
                "reranker `{}` failed ({e}); keeping first-phase order",
                reranker.id()
            ));
            out.entries.truncate(k_final);
        }
    }
    out
}

/// Asks the generator for a broader reformulation of `q`. Falls back to
/// `q` on empty output, abstention, or gateway failure.
pub fn relax_query(q: &str, gateway: &Gateway) -> String {
    let request = match gateway.request(TemplateId::Relax, &fields([("question", q.to_string())])) {
        Ok(r) => r.tag(format!("relax|{q}")).key(q),
        Err(e) => {
            gateway.ledger().warn(format!("relax prompt failed to render: {e}"));
            return q.to_string();
        }
    };
    match gateway.complete(&request) {
        Ok(resp) => {
            let relaxed = resp
                .text
                .lines()
                .map(str::trim)
                .find(|l| !l.is_empty())
                .unwrap_or("");
            if relaxed.is_empty() || parse::is_abstention(relaxed) {
                q.to_string()
            } else {
                relaxed.to_string()
            }
        }
        Err(e) => {
            gateway
                .ledger()
                .warn(format!("query relaxation failed for `{q}` ({e}); using original query"));
            q.to_string()
        }
    }
}

/// A corpus with its index and providers, shared read-only across threads.
#[derive(Clone)]
pub struct Retriever {
    pub corpus: Arc<Corpus>,
    pub index: Arc<VectorIndex>,
    pub embedder: Arc<dyn Embedder>,
    pub reranker: Option<Arc<dyn Reranker>>,
}

impl Retriever {
    pub fn new(corpus: Arc<Corpus>, embedder: Arc<dyn Embedder>) -> Result<Self> {
        let index = VectorIndex::build(&corpus, embedder.as_ref())?;
        Ok(Self {
            corpus,
            index: Arc::new(index),
            embedder,
            reranker: None,
        })
    }

    pub fn with_index(corpus: Arc<Corpus>, index: Arc<VectorIndex>, embedder: Arc<dyn Embedder>) -> Result<Self> {
        if index.fingerprint != embedder.fingerprint() {
            return Err(Error::Fingerprint {
                index: index.fingerprint.clone(),
                provider: embedder.fingerprint(),
            });
        }
        index.check_corpus(&corpus)?;
        Ok(Self {
            corpus,
            index,
            embedder,
            reranker: None,
        })
    }

    pub fn with_reranker(mut self, reranker: Arc<dyn Reranker>) -> Self {
        self.reranker = Some(reranker);
        self
    }

    /// First-phase search only. Does not touch any ledger.
    pub fn retrieve_topk(&self, query: &str, k: usize, kind: UniverseKind) -> Result<Universe> {
        if k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        if self.index.is_empty() {
            return Ok(Universe::empty(query, k, kind));
        }
        let q = embed(query, self.embedder.as_ref())?;
        Ok(Universe {
            query: query.to_string(),
            entries: self.index.top_k(q.as_slice(), k),
            k,
            kind,
        })
    }

    /// One retriever call: first phase at `k_first`, then optional rerank to
    /// `k_final`. Recorded once in `ledger`.
    pub fn search(&self, query: &str, config: &RetrievalConfig, kind: UniverseKind, ledger: &CostLedger) -> Result<Universe> {
        config.validate()?;
        ledger.record_retrieval();
        let first = self.retrieve_topk(query, config.k_first, kind)?;
        let reranker = if config.rerank_enabled {
            self.reranker.as_deref()
        } else {
            None
        };
        Ok(rerank(query, &first, config.k_final, reranker, &self.corpus, ledger))
    }
}

/// Relaxes `q` and retrieves the high-recall universe with a single
/// retriever call.
pub fn build_universe(q: &str, config: &RetrievalConfig, gateway: &Gateway, retriever: &Retriever) -> Result<Universe> {
    let relaxed = relax_query(q, gateway);
    retriever.search(&relaxed, config, UniverseKind::Query, gateway.ledger())
}
