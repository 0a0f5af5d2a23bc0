//! WebAssembly bindings for three engine routines: HDBSCAN on 2D points,
//! medoid selection, and G-F1. Points are passed flat as `[x0, y0, x1, y1, ...]`.

use disambig::consolidate::hdbscan::{hdbscan, DistanceMatrix, HdbscanParams};
use disambig::consolidate::{select_medoid, EmbeddedPair};
use disambig::diversify::CandidatePair;
use disambig::embed::EmbeddingVector;
use wasm_bindgen::prelude::*;

fn points(flat: &[f64]) -> Result<Vec<&[f64]>, String> {
    if !flat.len().is_multiple_of(2) {
        return Err(format!("expected x,y pairs, got {} numbers", flat.len()));
    }
    if flat.iter().any(|v| !v.is_finite()) {
        return Err("coordinates must be finite".into());
    }
    Ok(flat.chunks(2).collect())
}

/// Euclidean HDBSCAN labels, `-1` for noise.
pub fn cluster_points(flat: &[f64], min_cluster_size: usize, min_samples: usize) -> Result<Vec<i32>, String> {
    if min_cluster_size < 2 || min_samples == 0 {
        return Err("need min_cluster_size >= 2 and min_samples >= 1".into());
    }
    let pts = points(flat)?;
    let c = hdbscan(
        &DistanceMatrix::euclidean(&pts),
        HdbscanParams {
            min_cluster_size,
            min_samples,
        },
    );
    Ok(c.labels.iter().map(|l| l.map_or(-1, |i| i as i32)).collect())
}

/// Index of the point whose direction is most similar to all others
/// (cosine), ties to the lowest index.
pub fn medoid_of(flat: &[f64]) -> Result<usize, String> {
    let pts = points(flat)?;
    if pts.is_empty() {
        return Err("no points".into());
    }
    let members = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let vector = EmbeddingVector::normalized(p.to_vec()).map_err(|e| format!("point {i}: {e}"))?;
            let pair = CandidatePair {
                interpretation: format!("point {i}"),
                answer: String::new(),
                passage_id: i.to_string(),
                source_query: String::new(),
                extraction_index: i,
            };
            Ok(EmbeddedPair { pair, vector })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(select_medoid(&members).extraction_index)
}

#[wasm_bindgen]
pub fn hdbscan_2d(points: &[f64], min_cluster_size: usize, min_samples: usize) -> Result<Vec<i32>, JsError> {
    cluster_points(points, min_cluster_size, min_samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn medoid(points: &[f64]) -> Result<usize, JsError> {
    medoid_of(points).map_err(|e| JsError::new(&e))
}

/// Harmonic mean of grounded precision and recall, 0 when both are 0.
#[wasm_bindgen]
pub fn g_f1(precision: f64, recall: f64) -> f64 {
    disambig::eval::g_f1(precision, recall)
}
