//! Brute-force references for clustering, medoid selection and top-k search.

use disambig::consolidate::hdbscan::DistanceMatrix;
use disambig::consolidate::{ClusterSet, ConsolidationConfig, EmbeddedPair};
use disambig::diversify::CandidatePair;
use disambig::embed::EmbeddingVector;
use rand::Rng;

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn cosine_matrix(points: &[Vec<f64>]) -> DistanceMatrix {
    let units: Vec<Vec<f64>> = points.iter().map(|p| unit(p)).collect();
    let refs: Vec<&[f64]> = units.iter().map(Vec::as_slice).collect();
    DistanceMatrix::cosine(&refs)
}

/// Kruskal over all pairs, used as an independent MST weight oracle.
pub fn kruskal_weight(d: &DistanceMatrix) -> f64 {
    let n = d.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((d.get(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut comp: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for (w, i, j) in edges {
        let (ci, cj) = (comp[i], comp[j]);
        if ci != cj {
            total += w;
            for c in comp.iter_mut() {
                if *c == cj {
                    *c = ci;
                }
            }
        }
    }
    total
}

/// Points wrapped as extracted pairs; extraction index = position.
pub fn embedded(points: &[Vec<f64>]) -> Vec<EmbeddedPair> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| EmbeddedPair {
            pair: CandidatePair {
                interpretation: format!("q{i}"),
                answer: format!("a{i}"),
                passage_id: format!("p{i}"),
                source_query: "q".into(),
                extraction_index: i,
            },
            vector: EmbeddingVector::normalized(p.clone()).unwrap(),
        })
        .collect()
}

/// Position of the largest similarity sum, first on ties.
pub fn brute_medoid(members: &[EmbeddedPair]) -> usize {
    let sums: Vec<f64> = members
        .iter()
        .map(|a| {
            members
                .iter()
                .map(|b| a.vector.as_slice().iter().zip(b.vector.as_slice()).map(|(x, y)| x * y).sum::<f64>())
                .sum()
        })
        .collect();
    let best = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..members.len()).find(|&i| sums[i] == best).unwrap()
}

/// Clarifications a cluster set turns into under `config`.
pub fn clarification_count(c: &ClusterSet, config: &ConsolidationConfig) -> usize {
    c.clusters.len() + if config.allow_singletons { c.noise.len() } else { 0 }
}

/// Random non-zero vectors; about a third repeat an earlier vector so that
/// scores tie exactly.
pub fn random_vectors(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        if !out.is_empty() && rng.random_bool(0.33) {
            let j = rng.random_range(0..out.len());
            out.push(out[j].clone());
            continue;
        }
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().any(|x| x.abs() > 1e-3) {
            out.push(v);
        }
    }
    out
}

/// Full scan: cosine of every vector, sorted by score descending and then
/// position, first `k` positions.
pub fn exhaustive_top_k(vectors: &[Vec<f64>], query: &[f64], k: usize) -> Vec<usize> {
    let q = unit(query);
    let mut scored: Vec<(f64, usize)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (unit(v).iter().zip(&q).map(|(a, b)| a * b).sum(), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}
