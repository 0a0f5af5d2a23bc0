use disambig::consolidate::hdbscan::{
    core_distances, hdbscan, hdbscan_trace, minimum_spanning_tree, mutual_reachability, HdbscanParams,
};
use disambig::consolidate::{cluster, consolidate, select_medoid, ConsolidationConfig};
use disambig::diversify::{CandidatePair, DiversificationResult};
use disambig::embed::{EmbeddingVector, ScriptedEmbedder};
use proptest::prelude::*;
use serde::Deserialize;

mod common;

use common::oracles::{brute_medoid, clarification_count, cosine_matrix, embedded, kruskal_weight};

#[derive(Deserialize)]
struct Reference {
    cases: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    min_cluster_size: usize,
    min_samples: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<i64>,
    labels_stable: Vec<i64>,
    labels_stable_single: Option<Vec<i64>>,
}

/// Partition as a sorted list of sorted member lists, noise excluded.
fn partition_from_labels(labels: &[i64]) -> Vec<Vec<usize>> {
    let mut groups = std::collections::BTreeMap::<i64, Vec<usize>>::new();
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            groups.entry(l).or_default().push(i);
        }
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

fn canonical(mut clusters: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for c in &mut clusters {
        c.sort();
    }
    clusters.sort();
    clusters
}

#[test]
fn matches_reference_labels() {
    let reference: Reference =
        serde_json::from_str(include_str!("data/hdbscan_reference.json")).unwrap();
    let mut public_api_agrees = 0;
    for (i, case) in reference.cases.iter().enumerate() {
        let params = HdbscanParams {
            min_cluster_size: case.min_cluster_size,
            min_samples: case.min_samples,
        };
        let got = hdbscan(&cosine_matrix(&case.points), params);
        let expected_labels = case.labels_stable_single.as_ref().unwrap_or(&case.labels_stable);
        if case.labels_stable_single.is_none() && case.labels == case.labels_stable {
            public_api_agrees += 1;
        }
        assert_eq!(
            canonical(got.clusters.clone()),
            partition_from_labels(expected_labels),
            "case {i} ({params:?})"
        );
    }
    // The public sklearn API sorts MST edges unstably; it only disagrees on
    // a few cases with tied merge weights.
    assert!(public_api_agrees >= 30, "{public_api_agrees}");
}

#[test]
fn two_blobs_give_two_clusters() {
    #[derive(Deserialize)]
    struct Blobs {
        points: Vec<Vec<f64>>,
    }
    let blobs: Blobs = serde_json::from_str(include_str!("data/two_blobs.json")).unwrap();
    assert_eq!(blobs.points.len(), 20);
    let d = cosine_matrix(&blobs.points);
    for (mcs, ms) in [(2, 1), (3, 1), (2, 2), (5, 3)] {
        let c = hdbscan(
            &d,
            HdbscanParams {
                min_cluster_size: mcs,
                min_samples: ms,
            },
        );
        assert_eq!(c.clusters.len(), 2, "mcs={mcs} ms={ms}");
        assert!(c.noise.is_empty());
        assert_eq!(canonical(c.clusters), [(0..10).collect::<Vec<_>>(), (10..20).collect()]);
    }
}

#[test]
fn single_point_and_identical_points() {
    let one = cosine_matrix(&[vec![1.0, 0.0]]);
    let c = hdbscan(&one, HdbscanParams::default());
    assert_eq!((c.clusters.len(), c.noise.len()), (0, 1));

    let same = cosine_matrix(&vec![vec![0.3, 0.4, 0.5]; 7]);
    for params in [
        HdbscanParams::default(),
        HdbscanParams {
            min_cluster_size: 3,
            min_samples: 3,
        },
    ] {
        let c = hdbscan(&same, params);
        assert_eq!(c.clusters, [(0..7).collect::<Vec<_>>()]);
    }
}

fn points_strategy(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=max_n, 2usize..=5).prop_flat_map(|(n, dim)| {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), n)
            .prop_filter("non-zero", |ps| ps.iter().all(|p| p.iter().any(|x| x.abs() > 1e-3)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mst_weight_matches_kruskal(points in points_strategy(100), ms in 1usize..4) {
        let d = cosine_matrix(&points);
        let mreach = mutual_reachability(&d, &core_distances(&d, ms));
        let mst = minimum_spanning_tree(&mreach);
        prop_assert_eq!(mst.len(), points.len().saturating_sub(1));
        let got: f64 = mst.iter().map(|e| e.weight).sum();
        let want = kruskal_weight(&mreach);
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{} vs {}", got, want);
        let trace = hdbscan_trace(&d, HdbscanParams { min_cluster_size: 2, min_samples: ms });
        prop_assert!((trace.mst_weight() - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn clusters_and_noise_partition_points(points in points_strategy(40), mcs in 2usize..5, ms in 1usize..4) {
        let c = hdbscan(&cosine_matrix(&points), HdbscanParams { min_cluster_size: mcs, min_samples: ms });
        let mut seen: Vec<usize> = c.clusters.iter().flatten().chain(&c.noise).copied().collect();
        seen.sort();
        prop_assert_eq!(seen, (0..points.len()).collect::<Vec<_>>());
        prop_assert!(c.clusters.iter().all(|m| m.len() >= mcs));
    }

    #[test]
    fn permutation_invariant(points in points_strategy(30), seed in any::<u64>()) {
        let n = points.len();
        // Deterministic shuffle from the seed.
        let mut order: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
        let params = HdbscanParams { min_cluster_size: 2, min_samples: 2 };
        let a = hdbscan(&cosine_matrix(&points), params);
        let b = hdbscan(&cosine_matrix(&shuffled), params);
        let b_mapped: Vec<Vec<usize>> = b.clusters.iter().map(|c| c.iter().map(|&i| order[i]).collect()).collect();
        prop_assert_eq!(canonical(a.clusters), canonical(b_mapped));
    }

    #[test]
    fn medoid_matches_brute_force(points in points_strategy(50)) {
        let members = embedded(&points);
        prop_assert_eq!(select_medoid(&members).extraction_index, brute_medoid(&members));
    }

    #[test]
    fn conservative_never_yields_more(points in points_strategy(40)) {
        let members = embedded(&points);
        let vectors: Vec<EmbeddingVector> = members.iter().map(|m| m.vector.clone()).collect();
        let (d, c) = (ConsolidationConfig::default(), ConsolidationConfig::conservative());
        prop_assert!(clarification_count(&cluster(&vectors, &c), &c) <= clarification_count(&cluster(&vectors, &d), &d));
        prop_assert!(cluster(&vectors, &c).clusters.len() <= cluster(&vectors, &d).clusters.len());
    }
}

/// Three tight groups of four plus two far outliers.
fn three_groups() -> (DiversificationResult, ScriptedEmbedder) {
    let anchors = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0],
    ];
    let mut embedder = ScriptedEmbedder::new(5);
    let mut pairs = Vec::new();
    let mut idx = 0;
    for (g, anchor) in anchors.iter().enumerate() {
        for k in 0..4 {
            let mut v = anchor.to_vec();
            v[(g + 1) % 3] += 0.01 * (k as f64 + 1.0);
            v[3] += 0.005 * k as f64;
            let (q, a) = (format!("group {g} question {k}"), format!("answer {g}.{k}"));
            embedder.insert(format!("{q} ||| {a}"), v);
            pairs.push((q, a));
            idx += 1;
        }
    }
    for (o, v) in [[0.0, 0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0, 1.0]].into_iter().enumerate() {
        let (q, a) = (format!("outlier {o}"), format!("odd {o}"));
        embedder.insert(format!("{q} ||| {a}"), v.to_vec());
        pairs.push((q, a));
        idx += 1;
    }
    assert_eq!(idx, 14);
    let pairs = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (q, a))| CandidatePair {
            interpretation: q,
            answer: a,
            passage_id: format!("p{i}"),
            source_query: "q".into(),
            extraction_index: i,
        })
        .collect();
    (
        DiversificationResult {
            pairs,
            ..Default::default()
        },
        embedder,
    )
}

#[test]
fn outliers_dropped_when_singletons_disallowed() {
    let (result, embedder) = three_groups();
    let config = ConsolidationConfig {
        allow_singletons: false,
        ..Default::default()
    };
    let out = consolidate("q", &result, &config, &embedder).unwrap();
    let items = &out.clarifications.items;
    assert_eq!(items.len(), 3);
    assert!(items.iter().all(|i| !i.interpretation.starts_with("outlier")));
    assert!(items.iter().all(|i| i.cluster_size == 4));
    // Ordered by the medoid's extraction index at equal sizes.
    let groups: Vec<&str> = items.iter().map(|i| &i.interpretation[..7]).collect();
    assert_eq!(groups, ["group 0", "group 1", "group 2"]);

    // Items are verbatim input pairs.
    for item in items {
        assert!(result.pairs.iter().any(|p| p.interpretation == item.interpretation
            && p.answer == item.answer
            && Some(&p.passage_id) == item.passage_id.as_ref()));
    }
}

#[test]
fn default_keeps_outliers_as_singletons() {
    let (result, embedder) = three_groups();
    let default = consolidate("q", &result, &ConsolidationConfig::default(), &embedder).unwrap();
    assert_eq!(default.clarifications.len(), 5);
    assert_eq!(default.clarifications.items[3].cluster_size, 1);
    let conservative = consolidate("q", &result, &ConsolidationConfig::conservative(), &embedder).unwrap();
    assert!(conservative.clarifications.len() <= default.clarifications.len());
    assert_eq!(conservative.clarifications.len(), 3);
}
