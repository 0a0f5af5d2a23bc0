//! Hierarchical density-based clustering (HDBSCAN) over a dense distance matrix.
//!
//! Pipeline: core distances → mutual-reachability graph → minimum spanning
//! tree (Prim, dense) → single-linkage merge tree → condensed tree at
//! `min_cluster_size` → excess-of-mass cluster selection.
//!
//! Two conventions differ from the common defaults:
//! - A split at distance zero never creates clusters; every point below it
//!   falls out at infinite density. Identical points are inseparable.
//! - When the condensed tree never splits, the root is kept as one cluster
//!   holding the points that persist to its maximal density (if there are
//!   at least `min_cluster_size` of them) instead of declaring everything
//!   noise.

use serde::{Deserialize, Serialize};

/// Symmetric distance matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    /// `1 − cos(a, b)` for unit vectors, clamped at zero.
    pub fn cosine(vectors: &[&[f64]]) -> Self {
        Self::from_fn(vectors.len(), |i, j| {
            let dot: f64 = vectors[i].iter().zip(vectors[j]).map(|(a, b)| a * b).sum();
            (1.0 - dot).max(0.0)
        })
    }

    pub fn euclidean(points: &[&[f64]]) -> Self {
        Self::from_fn(points.len(), |i, j| {
            points[i]
                .iter()
                .zip(points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Neighbourhood size for core distances, counting the point itself.
    pub min_samples: usize,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 2,
            min_samples: 1,
        }
    }
}

/// Distance to the `min_samples`-th nearest point, the point itself included
/// (so `min_samples = 1` gives all zeros). Clamped to `n`.
pub fn core_distances(d: &DistanceMatrix, min_samples: usize) -> Vec<f64> {
    let n = d.len();
    let k = min_samples.clamp(1, n.max(1));
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| d.get(i, j)).collect();
            row.select_nth_unstable_by(k - 1, f64::total_cmp);
            row[k - 1]
        })
        .collect()
}

pub fn mutual_reachability(d: &DistanceMatrix, core: &[f64]) -> DistanceMatrix {
    DistanceMatrix::from_fn(d.len(), |i, j| d.get(i, j).max(core[i]).max(core[j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Prim's algorithm on the complete graph, O(n²). Ties resolve to the lower
/// vertex index.
pub fn minimum_spanning_tree(d: &DistanceMatrix) -> Vec<MstEdge> {
    let n = d.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let w = d.get(current, v);
            if w < best[v] {
                best[v] = w;
                from[v] = current;
            }
            if next == usize::MAX || best[v] < next_w {
                next = v;
                next_w = best[v];
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge {
            a: from[next],
            b: next,
            weight: next_w,
        });
        current = next;
    }
    edges
}

/// One merge of the single-linkage tree. Nodes `< n` are points; merge `i`
/// creates node `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Re-links each Prim edge from the previously added vertex instead of its
/// true endpoint. Prim finishes every threshold component before leaving
/// it, so the partition hierarchy is unchanged; merges of equal weight are
/// then ordered along the visit sequence.
pub fn prim_chain(mst: &[MstEdge]) -> Vec<MstEdge> {
    let mut prev = 0;
    mst.iter()
        .map(|e| {
            let linked = MstEdge {
                a: prev,
                b: e.b,
                weight: e.weight,
            };
            prev = e.b;
            linked
        })
        .collect()
}

/// Single-linkage merge tree from MST edges (sorted stably by weight).
pub fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let mut edges = mst.to_vec();
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight));
    // Union-find over 2n-1 tree nodes; each root is its own tree label.
    let mut uf = UnionFind::new(2 * n);
    let mut size = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (i, e) in edges.iter().enumerate() {
        let node = n + i;
        let ra = uf.find(e.a);
        let rb = uf.find(e.b);
        let s = size[ra] + size[rb];
        merges.push(Merge {
            left: ra,
            right: rb,
            distance: e.weight,
            size: s,
        });
        uf.parent[ra] = node;
        uf.parent[rb] = node;
        size[node] = s;
    }
    merges
}

/// An edge of the condensed tree. Clusters are numbered from `n` (the root).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    pub n: usize,
    pub edges: Vec<CondensedEdge>,
}

impl CondensedTree {
    pub fn root(&self) -> usize {
        self.n
    }

    pub fn is_cluster(&self, node: usize) -> bool {
        node >= self.n
    }

    pub fn cluster_children(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.parent == cluster && e.child >= self.n)
            .map(|e| e.child)
    }

    pub fn num_clusters(&self) -> usize {
        1 + self.edges.iter().filter(|e| e.child >= self.n).count()
    }
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

/// Leaves (points) under a merge-tree node.
fn leaves(node: usize, n: usize, merges: &[Merge], out: &mut Vec<usize>) {
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            let m = &merges[x - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
}

fn node_size(node: usize, n: usize, merges: &[Merge]) -> usize {
    if node < n {
        1
    } else {
        merges[node - n].size
    }
}

/// Condenses the merge tree: a split where both sides have at least
/// `min_cluster_size` points yields two child clusters; otherwise the small
/// side's points fall out of the current cluster.
pub fn condense_tree(n: usize, merges: &[Merge], min_cluster_size: usize) -> CondensedTree {
    let mut edges = Vec::new();
    if n < 2 {
        if n == 1 {
            edges.push(CondensedEdge {
                parent: 1,
                child: 0,
                lambda: f64::INFINITY,
                child_size: 1,
            });
        }
        return CondensedTree { n, edges };
    }
    let root = 2 * n - 2;
    let mut label = vec![usize::MAX; 2 * n - 1];
    label[root] = n;
    let mut next_label = n + 1;
    // Pending merge-tree nodes that still head a cluster, processed top-down.
    let mut queue = std::collections::VecDeque::from([root]);
    let mut fallen = Vec::new();
    while let Some(node) = queue.pop_front() {
        if node < n {
            continue;
        }
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let parent = label[node];
        let (ls, rs) = (node_size(m.left, n, merges), node_size(m.right, n, merges));
        let fall_out = |child: usize, edges: &mut Vec<CondensedEdge>, fallen: &mut Vec<usize>| {
            fallen.clear();
            leaves(child, n, merges, fallen);
            for &p in fallen.iter() {
                edges.push(CondensedEdge {
                    parent,
                    child: p,
                    lambda,
                    child_size: 1,
                });
            }
        };
        let big = |s: usize| s >= min_cluster_size && m.distance > 0.0;
        match (big(ls), big(rs)) {
            (true, true) => {
                for (child, size) in [(m.left, ls), (m.right, rs)] {
                    label[child] = next_label;
                    edges.push(CondensedEdge {
                        parent,
                        child: next_label,
                        lambda,
                        child_size: size,
                    });
                    next_label += 1;
                    queue.push_back(child);
                }
            }
            (false, false) => {
                fall_out(m.left, &mut edges, &mut fallen);
                fall_out(m.right, &mut edges, &mut fallen);
            }
            (true, false) => {
                label[m.left] = parent;
                queue.push_back(m.left);
                fall_out(m.right, &mut edges, &mut fallen);
            }
            (false, true) => {
                label[m.right] = parent;
                queue.push_back(m.right);
                fall_out(m.left, &mut edges, &mut fallen);
            }
        }
    }
    CondensedTree { n, edges }
}

/// Excess-of-mass stability per cluster label (indexed by `label − n`).
pub fn stabilities(tree: &CondensedTree) -> Vec<f64> {
    let n = tree.n;
    let count = tree.num_clusters();
    let mut birth = vec![0.0; count];
    for e in &tree.edges {
        if e.child >= n {
            birth[e.child - n] = e.lambda;
        }
    }
    let mut stability = vec![0.0; count];
    for e in &tree.edges {
        let b = birth[e.parent - n];
        let persistence = if e.lambda == b { 0.0 } else { e.lambda - b };
        stability[e.parent - n] += persistence * e.child_size as f64;
    }
    stability
}

/// Flat clustering result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster index per point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    /// Members of each cluster in ascending point order; clusters ordered
    /// by their smallest member.
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

impl Clustering {
    fn from_membership(n: usize, mut clusters: Vec<Vec<usize>>) -> Self {
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.retain(|c| !c.is_empty());
        clusters.sort_by_key(|c| c[0]);
        let mut labels = vec![None; n];
        for (ci, c) in clusters.iter().enumerate() {
            for &p in c {
                labels[p] = Some(ci);
            }
        }
        let noise = (0..n).filter(|&p| labels[p].is_none()).collect();
        Self {
            labels,
            clusters,
            noise,
        }
    }
}

/// Selects clusters by excess of mass (ties favour the parent) and labels
/// points.
pub fn extract_clusters(tree: &CondensedTree, min_cluster_size: usize) -> Clustering {
    let n = tree.n;
    if n == 0 {
        return Clustering::from_membership(0, Vec::new());
    }
    if n < min_cluster_size.max(1) {
        return Clustering::from_membership(n, Vec::new());
    }
    let count = tree.num_clusters();
    let root = tree.root();

    // Parent cluster of every node and children lists.
    let mut parent_of = vec![usize::MAX; n + count];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); count];
    for e in &tree.edges {
        parent_of[e.child] = e.parent;
        if e.child >= n {
            children[e.parent - n].push(e.child);
        }
    }

    let mut selected = vec![false; count];
    if children[0].is_empty() {
        // Root-only tree: keep the points that persist to the root's
        // maximal lambda.
        let max_lambda = tree
            .edges
            .iter()
            .filter(|e| e.parent == root)
            .map(|e| e.lambda)
            .fold(f64::NEG_INFINITY, f64::max);
        let members: Vec<usize> = tree
            .edges
            .iter()
            .filter(|e| e.parent == root && e.child < n && e.lambda >= max_lambda)
            .map(|e| e.child)
            .collect();
        if members.len() >= min_cluster_size.max(1) {
            return Clustering::from_membership(n, vec![members]);
        }
        return Clustering::from_membership(n, Vec::new());
    }

    let mut stability = stabilities(tree);
    // Children always carry larger labels than their parents.
    for c in (1..count).rev() {
        let subtree: f64 = children[c].iter().map(|&ch| stability[ch - n]).sum();
        if children[c].is_empty() || subtree <= stability[c] {
            selected[c] = true;
            let mut stack: Vec<usize> = children[c].clone();
            while let Some(d) = stack.pop() {
                selected[d - n] = false;
                stack.extend(children[d - n].iter().copied());
            }
        } else {
            stability[c] = subtree;
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for p in 0..n {
        let mut c = parent_of[p];
        while c != usize::MAX && c >= n {
            if selected[c - n] {
                members[c - n].push(p);
                break;
            }
            c = parent_of[c];
        }
    }
    Clustering::from_membership(n, members)
}

/// Intermediate products, exposed for inspection and testing.
#[derive(Debug, Clone)]
pub struct HdbscanTrace {
    pub core: Vec<f64>,
    pub mst: Vec<MstEdge>,
    pub merges: Vec<Merge>,
    pub tree: CondensedTree,
    pub clustering: Clustering,
}

impl HdbscanTrace {
    pub fn mst_weight(&self) -> f64 {
        self.mst.iter().map(|e| e.weight).sum()
    }
}

pub fn hdbscan_trace(d: &DistanceMatrix, params: HdbscanParams) -> HdbscanTrace {
    let n = d.len();
    let core = core_distances(d, params.min_samples);
    let mreach = mutual_reachability(d, &core);
    let mst = minimum_spanning_tree(&mreach);
    let merges = single_linkage(n, &prim_chain(&mst));
    let mcs = params.min_cluster_size.max(1);
    let tree = condense_tree(n, &merges, mcs);
    let clustering = extract_clusters(&tree, mcs);
    HdbscanTrace {
        core,
        mst,
        merges,
        tree,
        clustering,
    }
}

pub fn hdbscan(d: &DistanceMatrix, params: HdbscanParams) -> Clustering {
    hdbscan_trace(d, params).clustering
}
