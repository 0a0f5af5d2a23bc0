//! Run configuration: one JSON document, paths relative to its directory,
//! backend URLs and tokens overridable from the environment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::consolidate::{ConsolidationConfig, Source};
use crate::diversify::DEFAULT_FAN_OUT;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::retrieval::RetrievalConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Verdict,
    Dtv,
    DtvNoverify,
    Rac,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Verdict, Method::Dtv, Method::DtvNoverify, Method::Rac];

    pub fn source(self) -> Source {
        match self {
            Method::Verdict => Source::Verdict,
            Method::Dtv => Source::Dtv,
            Method::DtvNoverify => Source::DtvNoverify,
            Method::Rac => Source::Rac,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.source().as_str()
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected verdict, dtv, dtv_noverify or rac)")))
    }
}

fn default_max_tokens() -> u32 {
    512
}

fn default_timeout() -> u64 {
    60
}

fn default_dim() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// Replies from a script file (template → key → entry).
    Scripted { script: PathBuf },
    Http {
        url: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        token: Option<String>,
        #[serde(default = "default_max_tokens")]
        max_tokens: u32,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
    /// Embedder: pseudo-random vector per text.
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// Embedder: sum of pseudo-random vectors per content word.
    TokenHash {
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

impl BackendSpec {
    pub fn is_generator(&self) -> bool {
        matches!(self, BackendSpec::Scripted { .. } | BackendSpec::Http { .. })
    }
}

/// Which named backend plays each role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    pub generator: String,
    /// DtV verifier; `baseline.verifier_backend` overrides it, and the
    /// generator is used when neither is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<String>,
    pub judge: String,
    pub embedder: String,
    /// Second-phase reranker embedder; no reranking model when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reranker: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<PathBuf>,
    pub output: PathBuf,
    /// Prebuilt vector index; built in memory when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<PathBuf>,
    /// Directory of `<template code>.txt` overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
}

fn default_seed() -> u64 {
    0
}

fn default_fan_out() -> usize {
    DEFAULT_FAN_OUT
}

fn default_parallelism() -> usize {
    1
}

fn default_retries() -> u32 {
    crate::llm::DEFAULT_RETRIES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub consolidation: ConsolidationConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    pub backends: BTreeMap<String, BackendSpec>,
    pub roles: Roles,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Concurrent extraction calls per query.
    #[serde(default = "default_fan_out")]
    pub fan_out: usize,
    /// Queries processed concurrently in a batch.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
    pub paths: Paths,
}

/// Environment variable name for a backend setting, e.g.
/// `DISAMBIG_BACKEND_GPT_4O_URL` for backend `gpt-4o`.
pub fn env_key(backend: &str, field: &str) -> String {
    let name: String = backend
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect();
    format!("DISAMBIG_BACKEND_{name}_{field}")
}

impl RunConfig {
    /// Reads a config file, resolves relative paths against its directory
    /// and applies environment overrides.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig =
            serde_json::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.apply_env(|k| std::env::var(k).ok());
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.corpus);
        fix(&mut self.paths.output);
        for p in [&mut self.paths.gold, &mut self.paths.index, &mut self.paths.templates]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for spec in self.backends.values_mut() {
            if let BackendSpec::Scripted { script } = spec {
                fix(script);
            }
        }
    }

    /// `DISAMBIG_BACKEND_<NAME>_URL` / `_TOKEN` replace HTTP settings.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for (name, spec) in &mut self.backends {
            if let BackendSpec::Http { url, token, .. } = spec {
                if let Some(v) = lookup(&env_key(name, "URL")) {
                    *url = v;
                }
                if let Some(v) = lookup(&env_key(name, "TOKEN")) {
                    *token = Some(v);
                }
            }
        }
    }

    pub fn verifier_name(&self) -> &str {
        self.baseline
            .verifier_backend
            .as_deref()
            .or(self.roles.verifier.as_deref())
            .unwrap_or(&self.roles.generator)
    }

    fn backend(&self, role: &str, name: &str, generator: bool) -> Result<&BackendSpec> {
        let spec = self
            .backends
            .get(name)
            .ok_or_else(|| Error::Config(format!("{role} backend `{name}` is not configured")))?;
        if spec.is_generator() != generator {
            let want = if generator { "a text-generation" } else { "an embedding" };
            return Err(Error::Config(format!("{role} backend `{name}` is not {want} backend")));
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.retrieval.validate()?;
        self.consolidation.validate()?;
        self.baseline.validate()?;
        self.eval.validate()?;
        self.backend("generator", &self.roles.generator, true)?;
        self.backend("verifier", self.verifier_name(), true)?;
        self.backend("judge", &self.roles.judge, true)?;
        self.backend("embedder", &self.roles.embedder, false)?;
        if let Some(r) = &self.roles.reranker {
            self.backend("reranker", r, false)?;
        }
        for (name, spec) in &self.backends {
            match spec {
                BackendSpec::Hash { dim } | BackendSpec::TokenHash { dim } if *dim == 0 => {
                    return Err(Error::Config(format!("embedder `{name}` needs dim > 0")))
                }
                BackendSpec::Http { url, .. } if url.is_empty() => {
                    return Err(Error::Config(format!("backend `{name}` has no URL")))
                }
                _ => {}
            }
        }
        if self.fan_out == 0 || self.parallelism == 0 {
            return Err(Error::Config("fan_out and parallelism must be positive".into()));
        }
        Ok(())
    }

    /// Directory holding this method's artifacts.
    pub fn run_dir(&self) -> PathBuf {
        self.paths.output.join(self.method.as_str())
    }
}
