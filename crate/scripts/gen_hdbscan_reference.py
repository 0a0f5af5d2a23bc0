"""Regenerates crates/core/tests/data/hdbscan_reference.json with scikit-learn.

Each case stores random points and two label vectors:
  labels         sklearn.cluster.HDBSCAN on the precomputed 1 - cos matrix
  labels_stable  the same sklearn internals, but with the MST edges sorted
                 stably by weight (the public API uses an unstable sort, so
                 merges of equal weight are ordered arbitrarily there)
`labels_stable_single` repeats the stable run with allow_single_cluster=True
and is present only when `labels_stable` has no cluster.
"""

import json
import sys

import numpy as np
import sklearn
from sklearn.cluster import HDBSCAN
from sklearn.cluster._hdbscan._linkage import make_single_linkage, mst_from_mutual_reachability
from sklearn.cluster._hdbscan._reachability import mutual_reachability_graph
from sklearn.cluster._hdbscan._tree import tree_to_labels


def distances(points):
    x = points / np.linalg.norm(points, axis=1, keepdims=True)
    d = np.clip(1.0 - x @ x.T, 0.0, None)
    np.fill_diagonal(d, 0.0)
    return d


def stable_labels(d, mcs, ms, single):
    mst = mst_from_mutual_reachability(mutual_reachability_graph(d.copy(), min_samples=ms))
    mst = mst[np.argsort(mst["distance"], kind="mergesort")]
    labels, _ = tree_to_labels(make_single_linkage(mst), mcs, "eom", single)
    return labels


def main(out):
    rng = np.random.default_rng(20261015)
    cases = []
    for _ in range(40):
        n = int(rng.integers(6, 40))
        dim = int(rng.integers(3, 7))
        groups = int(rng.integers(1, 6))
        anchors = rng.normal(size=(groups, dim))
        spread = rng.uniform(0.03, 0.4)
        points = anchors[rng.integers(0, groups, size=n)] + spread * rng.normal(size=(n, dim))
        points = np.round(points, 12)
        mcs = int(rng.integers(2, 5))
        ms = int(rng.integers(1, 4))
        d = distances(points)
        case = {
            "min_cluster_size": mcs,
            "min_samples": ms,
            "points": points.tolist(),
            "labels": HDBSCAN(min_cluster_size=mcs, min_samples=ms, metric="precomputed").fit(d.copy()).labels_.tolist(),
            "labels_stable": stable_labels(d, mcs, ms, False).tolist(),
        }
        if max(case["labels_stable"]) < 0:
            case["labels_stable_single"] = stable_labels(d, mcs, ms, True).tolist()
        cases.append(case)
    note = f"scikit-learn {sklearn.__version__}, metric=precomputed 1-cos"
    with open(out, "w") as f:
        json.dump({"note": note, "cases": cases}, f)


if __name__ == "__main__":
    main(sys.argv[1])
