#![allow(dead_code)]

pub mod oracles;
pub mod tables;

use std::sync::Arc;

use disambig::corpus::{Corpus, Passage};
use disambig::embed::ScriptedEmbedder;
use disambig::llm::{Gateway, ScriptedBackend};
use disambig::retrieval::Retriever;

/// Corpus where passage `i` embeds to the `i`-th basis vector and each query
/// embeds to the indicator of its listed passages (weighted by `weights`
/// when given), so top-k results are known in advance.
pub fn basis_retriever(ids: &[String], queries: &[(&str, Vec<(usize, f64)>)]) -> Retriever {
    let n = ids.len();
    let passages: Vec<Passage> = ids
        .iter()
        .map(|id| Passage::new(id.clone(), "", format!("body of {id}")))
        .collect();
    let mut embedder = ScriptedEmbedder::new(n + 1);
    for (i, p) in passages.iter().enumerate() {
        let mut v = vec![0.0; n + 1];
        v[i] = 1.0;
        embedder.insert(p.full_text(), v);
    }
    for (q, hits) in queries {
        let mut v = vec![0.0; n + 1];
        v[n] = 1e-3;
        for &(i, w) in hits {
            v[i] = w;
        }
        embedder.insert(*q, v);
    }
    let corpus = Arc::new(Corpus::from_passages("basis", passages).unwrap());
    Retriever::new(corpus, Arc::new(embedder)).unwrap()
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("d{i:02}")).collect()
}

pub fn gateway(backend: ScriptedBackend) -> Gateway {
    Gateway::new(Arc::new(backend))
}
