//! Built components for one configuration, and the per-query method runs.

use std::collections::BTreeMap;
use std::sync::Arc;
#[cfg(feature = "http")]
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::{BackendSpec, Method, RunConfig};
use crate::baselines::{dtv_pipeline, rac, DtvMode, PseudoInterpretationSet};
use crate::consolidate::{consolidate, ClarificationSet, ClusterSet, ConsolidationConfig};
use crate::corpus::{ingest, Corpus};
use crate::diversify::{diversify, DiversificationResult};
use crate::embed::{Embedder, HashEmbedder, TokenHashEmbedder};
use crate::error::{Error, Result};
use crate::ledger::CostLedger;
use crate::llm::{Backend, Gateway, ScriptedBackend, TemplateSet};
use crate::retrieval::{build_universe, EmbeddingReranker, RetrievalConfig, Retriever, Universe, VectorIndex};

/// Everything one query produced under one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub query: String,
    /// U_q for VerDICT and RAC, the pseudo-interpretation universe for DtV.
    pub universe: Universe,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudo: Option<PseudoInterpretationSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified: Option<Universe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversification: Option<DiversificationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClusterSet>,
    pub clarifications: ClarificationSet,
}

impl MethodRun {
    /// Passages searched for support when an item cites none: the verified
    /// universe when there is one, else the method's universe.
    pub fn fallback(&self) -> &Universe {
        self.verified.as_ref().unwrap_or(&self.universe)
    }
}

/// VerDICT for one query: relaxed retrieval, one extraction per passage,
/// then clustering and medoid selection.
#[allow(clippy::too_many_arguments)]
pub fn verdict(
    q: &str,
    retrieval: &RetrievalConfig,
    consolidation: &ConsolidationConfig,
    fan_out: usize,
    retriever: &Retriever,
    generator: &Gateway,
    embedder: &dyn Embedder,
) -> Result<MethodRun> {
    let universe = build_universe(q, retrieval, generator, retriever)?;
    let diversification = diversify(q, &universe, &retriever.corpus, generator, fan_out)?;
    let c = consolidate(q, &diversification, consolidation, embedder)?;
    Ok(MethodRun {
        method: Method::Verdict,
        query: q.to_string(),
        universe,
        pseudo: None,
        verified: None,
        diversification: Some(diversification),
        clusters: Some(c.clusters),
        clarifications: c.clarifications,
    })
}

pub struct Engine {
    pub config: RunConfig,
    pub corpus: Arc<Corpus>,
    pub retriever: Arc<Retriever>,
    pub embedder: Arc<dyn Embedder>,
    pub generator: Gateway,
    pub verifier: Gateway,
    pub judge: Gateway,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("method", &self.config.method)
            .field("corpus", &self.corpus.len())
            .finish()
    }
}

/// Instantiates an embedding backend.
pub fn build_embedder(spec: &BackendSpec, seed: u64) -> Result<Arc<dyn Embedder>> {
    match spec {
        BackendSpec::Hash { dim } => Ok(Arc::new(HashEmbedder::new(*dim, seed))),
        BackendSpec::TokenHash { dim } => Ok(Arc::new(TokenHashEmbedder::new(*dim, seed))),
        _ => Err(Error::Config("not an embedding backend".into())),
    }
}

fn generator_backend(name: &str, spec: &BackendSpec) -> Result<Arc<dyn Backend>> {
    match spec {
        BackendSpec::Scripted { script } => Ok(Arc::new(ScriptedBackend::load(name, script)?)),
        #[cfg(feature = "http")]
        BackendSpec::Http {
            url,
            token,
            max_tokens,
            timeout_secs,
        } => Ok(Arc::new(crate::llm::HttpBackend::new(
            name,
            url.clone(),
            token.clone(),
            *max_tokens,
            Duration::from_secs(*timeout_secs),
        ))),
        #[cfg(not(feature = "http"))]
        BackendSpec::Http { .. } => Err(Error::Config(format!(
            "backend `{name}` is HTTP but this build has no `http` feature"
        ))),
        _ => Err(Error::Config(format!("backend `{name}` cannot generate text"))),
    }
}

/// Builds the embedder index for `corpus`: loaded from `path` when given,
/// built in memory otherwise.
pub fn load_or_build_index(corpus: &Corpus, embedder: &dyn Embedder, path: Option<&std::path::Path>) -> Result<VectorIndex> {
    match path {
        Some(p) if p.exists() => {
            let index = VectorIndex::load(p, embedder)?;
            index.check_corpus(corpus)?;
            Ok(index)
        }
        _ => VectorIndex::build(corpus, embedder),
    }
}

impl Engine {
    /// Loads the corpus and index and instantiates every referenced backend.
    pub fn from_config(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let corpus = Arc::new(ingest(&config.paths.corpus)?);
        let templates = Arc::new(match &config.paths.templates {
            Some(dir) => TemplateSet::load_dir(dir)?,
            None => TemplateSet::default(),
        });
        let embedder = build_embedder(&config.backends[&config.roles.embedder], config.seed)?;
        let index = load_or_build_index(&corpus, embedder.as_ref(), config.paths.index.as_deref())?;
        let mut retriever = Retriever::with_index(corpus.clone(), Arc::new(index), embedder.clone())?;
        if let Some(name) = &config.roles.reranker {
            let rerank_embedder = build_embedder(&config.backends[name], config.seed)?;
            retriever = retriever.with_reranker(Arc::new(EmbeddingReranker::new(rerank_embedder)));
        }
        let mut built: BTreeMap<&str, Gateway> = BTreeMap::new();
        for name in [
            config.roles.generator.as_str(),
            config.verifier_name(),
            config.roles.judge.as_str(),
        ] {
            if !built.contains_key(name) {
                let backend = generator_backend(name, &config.backends[name])?;
                built.insert(
                    name,
                    Gateway::new(backend)
                        .with_templates(templates.clone())
                        .with_retries(config.retries),
                );
            }
        }
        let generator = built[config.roles.generator.as_str()].clone();
        let verifier = built[config.verifier_name()].clone();
        let judge = built[config.roles.judge.as_str()].clone();
        Ok(Self {
            corpus,
            retriever: Arc::new(retriever),
            embedder,
            generator,
            verifier,
            judge,
            config,
        })
    }

    /// Runs `method` on `q`, recording costs in `ledger`.
    pub fn run_method(&self, method: Method, q: &str, ledger: &Arc<CostLedger>) -> Result<MethodRun> {
        if q.trim().is_empty() {
            return Err(Error::Invalid("query is empty".into()));
        }
        let c = &self.config;
        let generator = self.generator.with_ledger(ledger.clone());
        match method {
            Method::Verdict => verdict(
                q,
                &c.retrieval,
                &c.consolidation,
                c.fan_out,
                &self.retriever,
                &generator,
                self.embedder.as_ref(),
            ),
            Method::Rac => {
                let universe = build_universe(q, &c.retrieval, &generator, &self.retriever)?;
                let clarifications = rac(q, &universe, &self.corpus, &generator)?;
                Ok(MethodRun {
                    method,
                    query: q.to_string(),
                    universe,
                    pseudo: None,
                    verified: None,
                    diversification: None,
                    clusters: None,
                    clarifications,
                })
            }
            Method::Dtv | Method::DtvNoverify => {
                let mode = if method == Method::Dtv {
                    DtvMode::Full
                } else {
                    DtvMode::NoVerification
                };
                let verifier = self.verifier.with_ledger(ledger.clone());
                let run = dtv_pipeline(q, &c.baseline, &c.retrieval, mode, &self.retriever, &generator, &verifier)?;
                Ok(MethodRun {
                    method,
                    query: q.to_string(),
                    universe: run.universe,
                    pseudo: Some(run.pseudo),
                    verified: run.verified,
                    diversification: None,
                    clusters: None,
                    clarifications: run.clarifications,
                })
            }
        }
    }
}
