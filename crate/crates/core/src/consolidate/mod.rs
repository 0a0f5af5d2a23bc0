//! Consolidation of candidate pairs into a clarification set.
//!
//! Pairs are embedded, clustered with HDBSCAN on cosine distance, and each
//! cluster contributes its medoid. Noise points are dropped or kept as
//! singleton items depending on configuration.

pub mod hdbscan;

use serde::{Deserialize, Deserializer, Serialize};

use crate::diversify::{CandidatePair, DiversificationResult};
use crate::embed::{embed, Embedder, EmbeddingVector};
use crate::error::{Error, Result};

pub use hdbscan::{Clustering, DistanceMatrix, HdbscanParams};

pub const DEFAULT_SEPARATOR: &str = " ||| ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsolidationMode {
    #[default]
    Default,
    /// Fewer, larger clusters; noise is discarded.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMode {
    /// Interpretation, separator, answer.
    #[default]
    Pair,
    QuestionOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsolidationConfig {
    pub mode: ConsolidationMode,
    pub embed_mode: EmbedMode,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Keep each noise point as a singleton item.
    pub allow_singletons: bool,
    pub separator: String,
}

impl Default for ConsolidationConfig {
    fn default() -> Self {
        Self::preset(ConsolidationMode::Default)
    }
}

impl ConsolidationConfig {
    pub fn preset(mode: ConsolidationMode) -> Self {
        let (min_cluster_size, allow_singletons) = match mode {
            ConsolidationMode::Default => (2, true),
            ConsolidationMode::Conservative => (3, false),
        };
        Self {
            mode,
            embed_mode: EmbedMode::Pair,
            min_cluster_size,
            min_samples: 1,
            allow_singletons,
            separator: DEFAULT_SEPARATOR.into(),
        }
    }

    pub fn conservative() -> Self {
        Self::preset(ConsolidationMode::Conservative)
    }

    pub fn params(&self) -> HdbscanParams {
        HdbscanParams {
            min_cluster_size: self.min_cluster_size,
            min_samples: self.min_samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size == 0 || self.min_samples == 0 {
            return Err(Error::Config("min_cluster_size and min_samples must be positive".into()));
        }
        if !self.allow_singletons && self.min_cluster_size < 2 {
            return Err(Error::Config(
                "min_cluster_size must be at least 2 when singletons are not allowed".into(),
            ));
        }
        if self.embed_mode == EmbedMode::Pair && self.separator.is_empty() {
            return Err(Error::Config("pair embedding needs a non-empty separator".into()));
        }
        Ok(())
    }
}

/// Missing fields fall back to the preset of the given (or default) mode.
impl<'de> Deserialize<'de> for ConsolidationConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            #[serde(default)]
            mode: ConsolidationMode,
            embed_mode: Option<EmbedMode>,
            min_cluster_size: Option<usize>,
            min_samples: Option<usize>,
            allow_singletons: Option<bool>,
            separator: Option<String>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let base = Self::preset(raw.mode);
        Ok(Self {
            mode: raw.mode,
            embed_mode: raw.embed_mode.unwrap_or(base.embed_mode),
            min_cluster_size: raw.min_cluster_size.unwrap_or(base.min_cluster_size),
            min_samples: raw.min_samples.unwrap_or(base.min_samples),
            allow_singletons: raw.allow_singletons.unwrap_or(base.allow_singletons),
            separator: raw.separator.unwrap_or(base.separator),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPair {
    pub pair: CandidatePair,
    pub vector: EmbeddingVector,
}

/// Text that is embedded for `pair` under `mode`.
pub fn embedding_text(pair: &CandidatePair, mode: EmbedMode, separator: &str) -> String {
    match mode {
        EmbedMode::Pair => format!("{}{separator}{}", pair.interpretation, pair.answer),
        EmbedMode::QuestionOnly => pair.interpretation.clone(),
    }
}

pub fn embed_pair(pair: &CandidatePair, mode: EmbedMode, separator: &str, provider: &dyn Embedder) -> Result<EmbeddedPair> {
    Ok(EmbeddedPair {
        pair: pair.clone(),
        vector: embed(&embedding_text(pair, mode, separator), provider)?,
    })
}

/// Cluster membership as indices into the clustered list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

/// HDBSCAN over `1 − cos` distances.
pub fn cluster(vectors: &[EmbeddingVector], config: &ConsolidationConfig) -> ClusterSet {
    let slices: Vec<&[f64]> = vectors.iter().map(EmbeddingVector::as_slice).collect();
    let c = hdbscan::hdbscan(&DistanceMatrix::cosine(&slices), config.params());
    ClusterSet {
        clusters: c.clusters,
        noise: c.noise,
    }
}

/// Member with the largest similarity sum to all members; ties go to the
/// lowest extraction index. Panics on an empty slice.
pub fn select_medoid(members: &[EmbeddedPair]) -> &CandidatePair {
    let score = |i: usize| -> f64 { members.iter().map(|m| members[i].vector.dot(&m.vector)).sum() };
    let mut best = 0;
    let mut best_score = score(0);
    for i in 1..members.len() {
        let s = score(i);
        let better = s > best_score
            || (s == best_score && members[i].pair.extraction_index < members[best].pair.extraction_index);
        if better {
            best = i;
            best_score = s;
        }
    }
    &members[best].pair
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Verdict,
    Dtv,
    DtvNoverify,
    Rac,
    Human,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Verdict => "verdict",
            Source::Dtv => "dtv",
            Source::DtvNoverify => "dtv_noverify",
            Source::Rac => "rac",
            Source::Human => "human",
        }
    }
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "verdict" => Source::Verdict,
            "dtv" => Source::Dtv,
            "dtv_noverify" => Source::DtvNoverify,
            "rac" => Source::Rac,
            "human" => Source::Human,
            other => return Err(Error::Config(format!("unknown method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationItem {
    pub interpretation: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_id: Option<String>,
    pub cluster_size: usize,
    /// Passage ids of every pair in the cluster, medoid included.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<String>,
}

impl ClarificationItem {
    pub fn new(interpretation: impl Into<String>, answer: impl Into<String>, passage_id: Option<String>) -> Self {
        Self {
            interpretation: interpretation.into(),
            answer: answer.into(),
            passage_id,
            cluster_size: 1,
            members: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationSet {
    pub query: String,
    pub source: Source,
    pub items: Vec<ClarificationItem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ClarificationSet {
    pub fn empty(query: impl Into<String>, source: Source) -> Self {
        Self {
            query: query.into(),
            source,
            items: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Builds a set, dropping items whose interpretation repeats an earlier
    /// one.
    pub fn new(query: impl Into<String>, source: Source, items: Vec<ClarificationItem>) -> Self {
        let mut set = Self::empty(query, source);
        for item in items {
            if set.items.iter().any(|i| i.interpretation == item.interpretation) {
                set.warnings
                    .push(format!("dropped duplicate interpretation `{}`", item.interpretation));
            } else {
                set.items.push(item);
            }
        }
        set
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn interpretations(&self) -> Vec<String> {
        self.items.iter().map(|i| i.interpretation.clone()).collect()
    }
}

/// Full consolidation output, kept for run artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consolidation {
    pub clusters: ClusterSet,
    pub clarifications: ClarificationSet,
}

pub fn consolidate(
    query: &str,
    result: &DiversificationResult,
    config: &ConsolidationConfig,
    provider: &dyn Embedder,
) -> Result<Consolidation> {
    config.validate()?;
    let embedded = result
        .pairs
        .iter()
        .map(|p| embed_pair(p, config.embed_mode, &config.separator, provider))
        .collect::<Result<Vec<_>>>()?;
    if embedded.is_empty() {
        return Ok(Consolidation {
            clusters: ClusterSet::default(),
            clarifications: ClarificationSet::empty(query, Source::Verdict),
        });
    }
    let vectors: Vec<EmbeddingVector> = embedded.iter().map(|e| e.vector.clone()).collect();
    let clusters = cluster(&vectors, config);

    let mut groups: Vec<Vec<usize>> = clusters.clusters.clone();
    if config.allow_singletons {
        groups.extend(clusters.noise.iter().map(|&i| vec![i]));
    }
    let mut items: Vec<(usize, ClarificationItem)> = groups
        .iter()
        .map(|g| {
            let members: Vec<EmbeddedPair> = g.iter().map(|&i| embedded[i].clone()).collect();
            let medoid = select_medoid(&members);
            let item = ClarificationItem {
                interpretation: medoid.interpretation.clone(),
                answer: medoid.answer.clone(),
                passage_id: Some(medoid.passage_id.clone()),
                cluster_size: g.len(),
                members: members.iter().map(|m| m.pair.passage_id.clone()).collect(),
            };
            (medoid.extraction_index, item)
        })
        .collect();
    items.sort_by(|(ia, a), (ib, b)| b.cluster_size.cmp(&a.cluster_size).then(ia.cmp(ib)));
    Ok(Consolidation {
        clusters,
        clarifications: ClarificationSet::new(query, Source::Verdict, items.into_iter().map(|(_, i)| i).collect()),
    })
}
