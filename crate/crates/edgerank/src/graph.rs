//! Similarity graphs over covariate interpoint distances.
//!
//! The test statistic is driven by a similarity graph on the covariate
//! rows: either a k-MST (union of k edge-disjoint spanning trees extracted
//! greedily from the complete distance graph) or an undirected k-nearest
//! neighbor graph. Every undirected similarity edge is stored as both
//! ordered orientations `(i, j)` and `(j, i)`, because the rank statistic
//! pairs the asymmetric ranks of the two endpoints.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Symmetric matrix of pairwise Euclidean distances.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>, // row-major n x n
}

impl DistanceMatrix {
    /// Validate and wrap a full square matrix (e.g. loaded from a file).
    ///
    /// Requires a symmetric, zero-diagonal, nonnegative, finite matrix.
    /// Entries with tiny asymmetries (relative 1e-9, as written by text
    /// round-trips) are symmetrized by averaging.
    pub fn from_matrix(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "distance matrix needs at least 2 rows, got {n}"
            )));
        }
        if data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "distance matrix data length {} does not match {n}x{n}",
                data.len()
            )));
        }
        for i in 0..n {
            let dii = data[i * n + i];
            if dii != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "distance matrix diagonal entry ({i},{i}) is {dii}, expected 0"
                )));
            }
            for j in 0..n {
                let d = data[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "distance matrix entry ({i},{j}) is {d}, expected finite and nonnegative"
                    )));
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = data[i * n + j];
                let b = data[j * n + i];
                if a != b {
                    let scale = a.abs().max(b.abs());
                    if (a - b).abs() > 1e-9 * scale {
                        return Err(Error::InvalidInput(format!(
                            "distance matrix is asymmetric at ({i},{j}): {a} vs {b}"
                        )));
                    }
                    let avg = 0.5 * (a + b);
                    data[i * n + j] = avg;
                    data[j * n + i] = avg;
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Pairwise Euclidean distances between the rows of `x`.
pub fn compute_distances(x: &Array2<f64>) -> Result<DistanceMatrix> {
    let n = x.nrows();
    let p = x.ncols();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 observations to build a distance matrix, got {n}"
        )));
    }
    if p < 1 {
        return Err(Error::InvalidInput(
            "covariate matrix has no columns".to_string(),
        ));
    }
    for (row, r) in x.rows().into_iter().enumerate() {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCovariate { row });
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let xi = x.row(i);
        for j in (i + 1)..n {
            let xj = x.row(j);
            let mut ss = 0.0;
            for (a, b) in xi.iter().zip(xj.iter()) {
                let d = a - b;
                ss += d * d;
            }
            let d = ss.sqrt();
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, data })
}

/// How a similarity graph was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// Union of `k` edge-disjoint spanning trees.
    Kmst { k: usize },
    /// Undirected k-nearest-neighbor graph.
    Knn { k: usize },
}

impl GraphKind {
    pub fn name(&self) -> &'static str {
        match self {
            GraphKind::Kmst { .. } => "kmst",
            GraphKind::Knn { .. } => "knn",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            GraphKind::Kmst { k } | GraphKind::Knn { k } => *k,
        }
    }
}

/// Similarity graph stored as ordered node pairs, both orientations per
/// undirected edge.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    n: usize,
    kind: GraphKind,
    edges: Vec<(usize, usize)>,   // sorted, no self-loops, no duplicates
    adjacency: Vec<Vec<usize>>,   // sorted out-neighbors per node
}

impl SimilarityGraph {
    fn from_undirected(n: usize, kind: GraphKind, undirected: &[(usize, usize)]) -> Self {
        let mut edges = Vec::with_capacity(2 * undirected.len());
        for &(i, j) in undirected {
            debug_assert!(i != j);
            edges.push((i, j));
            edges.push((j, i));
        }
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in &edges {
            adjacency[i].push(j);
        }
        Self {
            n,
            kind,
            edges,
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// Ordered edges, both orientations, in lexicographic order.
    pub fn ordered_edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn undirected_edge_count(&self) -> usize {
        self.edges.len() / 2
    }

    /// Out-neighbors of node `i` (equal to its neighbor set, by the
    /// orientation-closure invariant).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Union of `k` edge-disjoint spanning trees, extracted greedily: the
/// m-th round runs Kruskal on the complete distance graph minus the edges
/// of rounds 1..m-1.
///
/// Distance ties are broken by the lexicographic (min-index, max-index)
/// order of the unordered pair, so builds are deterministic.
pub fn build_kmst(dm: &DistanceMatrix, k: usize) -> Result<SimilarityGraph> {
    let n = dm.n();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".to_string()));
    }
    // k(n-1) tree edges must fit in the n(n-1)/2 unordered pairs.
    if 2 * k > n {
        return Err(Error::InvalidConfig(format!(
            "k = {k} too large: a {k}-MST on {n} nodes needs {} edges but the \
             complete graph has only {}",
            k * (n - 1),
            n * (n - 1) / 2
        )));
    }

    let mut all: Vec<(usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            all.push((i, j));
        }
    }
    all.sort_unstable_by(|&(ai, aj), &(bi, bj)| {
        dm.get(ai, aj)
            .total_cmp(&dm.get(bi, bj))
            .then(ai.cmp(&bi))
            .then(aj.cmp(&bj))
    });

    let mut used = vec![false; all.len()];
    let mut undirected = Vec::with_capacity(k * (n - 1));
    for round in 1..=k {
        let mut uf = UnionFind::new(n);
        let mut accepted = 0;
        for (idx, &(i, j)) in all.iter().enumerate() {
            if used[idx] {
                continue;
            }
            if uf.union(i, j) {
                used[idx] = true;
                undirected.push((i, j));
                accepted += 1;
                if accepted == n - 1 {
                    break;
                }
            }
        }
        if accepted < n - 1 {
            return Err(Error::ResidualDisconnected {
                round,
                requested: k,
            });
        }
    }
    Ok(SimilarityGraph::from_undirected(
        n,
        GraphKind::Kmst { k },
        &undirected,
    ))
}

/// Undirected k-nearest-neighbor graph: the unordered pair {i, j} is an
/// edge iff j is among the k nearest neighbors of i or i is among the k
/// nearest neighbors of j. Neighbor ties are broken by node index.
pub fn build_knn(dm: &DistanceMatrix, k: usize) -> Result<SimilarityGraph> {
    let n = dm.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "k-NN requires 1 <= k <= n-1, got k = {k} with n = {n}"
        )));
    }
    let mut pairs = std::collections::BTreeSet::new();
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_unstable_by(|&a, &b| {
            dm.get(i, a).total_cmp(&dm.get(i, b)).then(a.cmp(&b))
        });
        for &j in order.iter().take(k) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let undirected: Vec<(usize, usize)> = pairs.into_iter().collect();
    Ok(SimilarityGraph::from_undirected(
        n,
        GraphKind::Knn { k },
        &undirected,
    ))
}
