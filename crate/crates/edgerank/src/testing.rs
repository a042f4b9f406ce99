//! The within-cluster edge-rank test.
//!
//! The statistic sums, over the ordered edges of the similarity graph,
//! the normalized response ranks of edges whose endpoints fall in the
//! same cluster. Under the null of exchangeable cluster labels (fixed
//! counts), its exact permutation mean and variance have closed forms,
//! which this module evaluates from a one-pass summary of the graph and
//! rank matrix. Small standardized values are evidence of within-cluster
//! similarity beyond what covariate proximity alone explains, so the
//! test is one-sided on the lower tail.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::ranks::RankMatrix;
use crate::util::mix_seed;

/// Relative threshold below which the permutation variance is treated as
/// degenerate (scale-free guard against cancellation).
pub const DEGENERATE_VARIANCE_REL_TOL: f64 = 1e-12;

/// Schema version of the serialized [`TestResult`].
pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// One-pass aggregates of the graph/rank pair, sufficient for all
/// closed-form permutation moments.
///
/// All edge sums run over ordered edges (both orientations).
#[derive(Debug, Clone)]
pub struct GraphRankSummary {
    n: usize,
    /// Sum of edge ranks.
    pub edge_rank_sum: f64,
    /// Sum of squared edge ranks.
    pub edge_rank_sq_sum: f64,
    /// Sum of products of the two orientations' ranks per edge.
    pub edge_rank_cross_sum: f64,
    /// Per-node sum of ranks assigned by the node to its neighbors.
    pub out_rank: Vec<f64>,
    /// Per-node sum of ranks assigned to the node by its neighbors.
    pub in_rank: Vec<f64>,
    /// Sum over ordered edges of the edge rank times the total rank mass
    /// incident to its two endpoints (the focal edge's own two ranks
    /// included, each counted twice via the out/in sums).
    pub rank_neighborhood_sum: f64,
}

impl GraphRankSummary {
    pub fn collect(graph: &SimilarityGraph, ranks: &RankMatrix) -> Result<Self> {
        let n = check_same_n(graph, ranks)?;
        let mut edge_rank_sum = 0.0;
        let mut edge_rank_sq_sum = 0.0;
        let mut edge_rank_cross_sum = 0.0;
        let mut out_rank = vec![0.0; n];
        let mut in_rank = vec![0.0; n];
        for &(i, j) in graph.ordered_edges() {
            let rij = ranks.get(i, j);
            edge_rank_sum += rij;
            edge_rank_sq_sum += rij * rij;
            edge_rank_cross_sum += rij * ranks.get(j, i);
            out_rank[i] += rij;
            in_rank[j] += rij;
        }
        let mut rank_neighborhood_sum = 0.0;
        for &(i, j) in graph.ordered_edges() {
            let incident = out_rank[i] + in_rank[i] + out_rank[j] + in_rank[j];
            rank_neighborhood_sum += ranks.get(i, j) * incident;
        }
        Ok(Self {
            n,
            edge_rank_sum,
            edge_rank_sq_sum,
            edge_rank_cross_sum,
            out_rank,
            in_rank,
            rank_neighborhood_sum,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn check_same_n(graph: &SimilarityGraph, ranks: &RankMatrix) -> Result<usize> {
    if graph.n() != ranks.n() {
        return Err(Error::InvalidInput(format!(
            "graph has {} nodes but rank matrix has {} rows",
            graph.n(),
            ranks.n()
        )));
    }
    Ok(graph.n())
}

fn check_assignment(n: usize, clusters: &ClusterAssignment) -> Result<()> {
    if clusters.n() != n {
        return Err(Error::InvalidInput(format!(
            "cluster assignment covers {} observations but the data has {n}",
            clusters.n()
        )));
    }
    Ok(())
}

/// Sum of edge ranks over ordered edges whose endpoints both lie in
/// cluster `s`.
pub fn within_cluster_edge_rank(
    graph: &SimilarityGraph,
    ranks: &RankMatrix,
    clusters: &ClusterAssignment,
    s: usize,
) -> Result<f64> {
    let n = check_same_n(graph, ranks)?;
    check_assignment(n, clusters)?;
    if s >= clusters.n_clusters() {
        return Err(Error::UnknownCluster {
            id: s,
            n_clusters: clusters.n_clusters(),
        });
    }
    let labels = clusters.labels();
    let mut total = 0.0;
    for &(i, j) in graph.ordered_edges() {
        if labels[i] == s && labels[j] == s {
            total += ranks.get(i, j);
        }
    }
    Ok(total)
}

fn check_moment_sizes(n: usize, n_s: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::UnsupportedSize { n });
    }
    if n_s == 0 || n_s > n {
        return Err(Error::InvalidInput(format!(
            "cluster size {n_s} out of range 1..={n}"
        )));
    }
    Ok(())
}

/// Exact permutation mean and variance of the within-cluster edge-rank of
/// one cluster of size `n_s`, under uniformly random labels with fixed
/// counts.
pub fn t_moments(summary: &GraphRankSummary, n_s: usize) -> Result<(f64, f64)> {
    check_moment_sizes(summary.n, n_s)?;
    let n = summary.n as f64;
    let ns = n_s as f64;
    let r_x = summary.edge_rank_sum;
    let pair = summary.edge_rank_sq_sum + summary.edge_rank_cross_sum;
    let p2 = ns * (ns - 1.0) / (n * (n - 1.0));
    let expectation = p2 * r_x;
    let inner = (n - ns) / (n - 3.0) * summary.rank_neighborhood_sum
        + (ns - 2.0 * n + 3.0) / (n - 3.0) * pair
        + (ns - 3.0) / (n - 3.0) * r_x * r_x;
    let variance = p2 * (pair + (ns - 2.0) / (n - 2.0) * inner - p2 * r_x * r_x);
    Ok((expectation, variance))
}

/// Exact permutation covariance between the within-cluster edge-ranks of
/// two distinct clusters of sizes `n_s` and `n_t`.
pub fn t_covariance(summary: &GraphRankSummary, n_s: usize, n_t: usize) -> Result<f64> {
    check_moment_sizes(summary.n, n_s)?;
    check_moment_sizes(summary.n, n_t)?;
    if n_s + n_t > summary.n {
        return Err(Error::InvalidInput(format!(
            "cluster sizes {n_s} + {n_t} exceed the sample size {}",
            summary.n
        )));
    }
    let n = summary.n as f64;
    let ns = n_s as f64;
    let nt = n_t as f64;
    let r_x = summary.edge_rank_sum;
    let prefactor =
        ns * nt * (ns - 1.0) * (nt - 1.0) / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
    Ok(prefactor
        * ((4.0 * n - 6.0) / (n * (n - 1.0)) * r_x * r_x
            + summary.edge_rank_sq_sum
            + summary.edge_rank_cross_sum
            - summary.rank_neighborhood_sum))
}

/// Graph metadata embedded in a serialized [`TestResult`].
#[derive(Debug, Clone, Serialize)]
pub struct GraphMeta {
    #[serde(rename = "type")]
    pub kind: String,
    pub k: usize,
    /// Undirected edge count.
    pub edges: usize,
}

impl GraphMeta {
    fn of(graph: &SimilarityGraph) -> Self {
        Self {
            kind: graph.kind().name().to_string(),
            k: graph.kind().k(),
            edges: graph.undirected_edge_count(),
        }
    }
}

/// Exact permutation moments per cluster and pairwise covariances.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterMoments {
    pub e_t: Vec<f64>,
    pub var_t: Vec<f64>,
    pub cov_t: Vec<CovarianceEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceEntry {
    pub s: usize,
    pub t: usize,
    pub value: f64,
}

/// Full test output; serializes to the documented JSON shape.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub schema_version: u32,
    pub n: usize,
    pub n_clusters: usize,
    pub counts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_names: Option<Vec<String>>,
    pub graph: GraphMeta,
    pub t_per_cluster: Vec<f64>,
    pub v: f64,
    pub e_v: f64,
    pub var_v: f64,
    pub z: f64,
    pub p_asymptotic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_permutation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tie_warning: bool,
    pub cluster_moments: ClusterMoments,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsReport>,
}

/// Standardized statistic with exact permutation moments and the
/// asymptotic (lower-tail standard normal) p-value.
pub fn z_statistic(
    graph: &SimilarityGraph,
    ranks: &RankMatrix,
    clusters: &ClusterAssignment,
) -> Result<TestResult> {
    let n = check_same_n(graph, ranks)?;
    check_assignment(n, clusters)?;
    if n < 4 {
        return Err(Error::UnsupportedSize { n });
    }
    let n_clusters = clusters.n_clusters();
    if n_clusters < 2 {
        return Err(Error::InvalidInput(
            "the test requires at least 2 clusters".to_string(),
        ));
    }

    let summary = GraphRankSummary::collect(graph, ranks)?;
    let labels = clusters.labels();
    let mut t_per_cluster = vec![0.0; n_clusters];
    for &(i, j) in graph.ordered_edges() {
        if labels[i] == labels[j] {
            t_per_cluster[labels[i]] += ranks.get(i, j);
        }
    }

    let counts = clusters.counts().to_vec();
    let mut e_t = Vec::with_capacity(n_clusters);
    let mut var_t = Vec::with_capacity(n_clusters);
    for &ns in &counts {
        let (e, var) = t_moments(&summary, ns)?;
        e_t.push(e);
        var_t.push(var);
    }
    let mut cov_t = Vec::with_capacity(n_clusters * (n_clusters - 1) / 2);
    for s in 0..n_clusters {
        for t in (s + 1)..n_clusters {
            cov_t.push(CovarianceEntry {
                s,
                t,
                value: t_covariance(&summary, counts[s], counts[t])?,
            });
        }
    }

    let v: f64 = t_per_cluster.iter().sum();
    let e_v: f64 = e_t.iter().sum();
    let var_v: f64 =
        var_t.iter().sum::<f64>() + 2.0 * cov_t.iter().map(|c| c.value).sum::<f64>();

    let threshold = DEGENERATE_VARIANCE_REL_TOL * summary.edge_rank_sum.powi(2);
    if var_v <= threshold {
        return Err(Error::DegenerateVariance {
            variance: var_v,
            threshold,
        });
    }

    let z = (v - e_v) / var_v.sqrt();
    let p_asymptotic = Normal::new(0.0, 1.0).unwrap().cdf(z);

    Ok(TestResult {
        schema_version: RESULT_SCHEMA_VERSION,
        n,
        n_clusters,
        counts,
        cluster_names: None,
        graph: GraphMeta::of(graph),
        t_per_cluster,
        v,
        e_v,
        var_v,
        z,
        p_asymptotic,
        p_permutation: None,
        permutations: None,
        seed: None,
        tie_warning: ranks.ties_detected(),
        cluster_moments: ClusterMoments { e_t, var_t, cov_t },
        diagnostics: None,
    })
}

/// Outcome of the Monte Carlo permutation test.
#[derive(Debug, Clone)]
pub struct PermutationTest {
    /// Add-one estimate `(1 + #{b : Z_b <= Z_obs}) / (B + 1)`.
    pub p_value: f64,
    /// Standardized statistic of each permuted relabeling, in draw order.
    pub z_values: Vec<f64>,
    pub observed_z: f64,
}

fn v_from_labels(graph: &SimilarityGraph, ranks: &RankMatrix, labels: &[usize]) -> f64 {
    let mut v = 0.0;
    for &(i, j) in graph.ordered_edges() {
        if labels[i] == labels[j] {
            v += ranks.get(i, j);
        }
    }
    v
}

/// Monte Carlo permutation p-value from `b` uniformly random relabelings
/// that preserve the cluster counts.
///
/// Each draw uses an RNG derived from `(seed, draw index)`, so results are
/// identical regardless of execution order or parallelism. The moments are
/// label-count-only and hence constant across draws; only the statistic is
/// recomputed per draw.
pub fn permutation_pvalue(
    graph: &SimilarityGraph,
    ranks: &RankMatrix,
    clusters: &ClusterAssignment,
    b: usize,
    seed: u64,
) -> Result<PermutationTest> {
    if b == 0 {
        return Err(Error::InvalidConfig(
            "permutation count must be at least 1".to_string(),
        ));
    }
    let observed = z_statistic(graph, ranks, clusters)?;
    let sd = observed.var_v.sqrt();
    let e_v = observed.e_v;
    let base_labels = clusters.labels();

    let z_values: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, draw as u64));
            let mut labels = base_labels.to_vec();
            labels.shuffle(&mut rng);
            (v_from_labels(graph, ranks, &labels) - e_v) / sd
        })
        .collect();

    let at_or_below = z_values.iter().filter(|&&z| z <= observed.z).count();
    let p_value = (1 + at_or_below) as f64 / (b + 1) as f64;
    Ok(PermutationTest {
        p_value,
        z_values,
        observed_z: observed.z,
    })
}

/// Which p-values to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Asymptotic,
    Permutation,
    Both,
}

impl Method {
    pub fn wants_permutation(self) -> bool {
        matches!(self, Method::Permutation | Method::Both)
    }
}

/// Options for [`run_test`].
#[derive(Debug, Clone)]
pub struct TestOptions {
    pub method: Method,
    /// Permutation count B (used when the method includes permutation).
    pub permutations: usize,
    pub seed: u64,
    /// Attach the regularity-condition diagnostics block.
    pub diagnostics: bool,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            method: Method::Both,
            permutations: 2000,
            seed: 1,
            diagnostics: false,
        }
    }
}

/// Run the test end to end on a prepared graph, rank matrix, and cluster
/// assignment.
pub fn run_test(
    graph: &SimilarityGraph,
    ranks: &RankMatrix,
    clusters: &ClusterAssignment,
    opts: &TestOptions,
) -> Result<TestResult> {
    let mut result = z_statistic(graph, ranks, clusters)?;
    if opts.method.wants_permutation() {
        let perm = permutation_pvalue(graph, ranks, clusters, opts.permutations, opts.seed)?;
        result.p_permutation = Some(perm.p_value);
        result.permutations = Some(opts.permutations);
        result.seed = Some(opts.seed);
    }
    if opts.diagnostics {
        result.diagnostics = Some(condition_diagnostics(graph, ranks)?);
    }
    Ok(result)
}

/// Advisory summaries of the asymptotic-normality regularity conditions.
///
/// `A(i,j)` is the subgraph of all edges sharing a node with edge (i,j),
/// the edge itself included; `B(i,j)` extends it by one more step. Sizes
/// and rank sums are over ordered edges. These quantities are reported,
/// never enforced.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub ordered_edges: usize,
    pub undirected_edges: usize,
    /// Max over edges of |A(i,j)|.
    pub max_adjacent_edges: usize,
    /// Mean over edges of |A(i,j)|.
    pub mean_adjacent_edges: f64,
    /// Max over edges with positive rank of R_A / (|A| * R_i(j)).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond2_max_ratio: Option<f64>,
    /// Sum of (R_i(j) * |A|)^2 over edges, divided by R_X1 * sqrt(n).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond3_ratio: Option<f64>,
    /// Sum of R_i(j) * R_A * R_B over edges, divided by R_X1^1.5.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond4_ratio: Option<f64>,
}

pub fn condition_diagnostics(
    graph: &SimilarityGraph,
    ranks: &RankMatrix,
) -> Result<DiagnosticsReport> {
    let n = check_same_n(graph, ranks)?;
    let summary = GraphRankSummary::collect(graph, ranks)?;
    let edges = graph.ordered_edges();

    let mut in_scope = vec![false; n];
    let mut scope: Vec<usize> = Vec::new();

    let mut max_a = 0usize;
    let mut sum_a = 0usize;
    let mut cond2_max: Option<f64> = None;
    let mut cond3_num = 0.0;
    let mut cond4_num = 0.0;

    for &(i, j) in edges {
        let rij = ranks.get(i, j);
        // Every edge incident to i or j, the focal edge included. Ordered
        // incidence at a node is twice its undirected degree; the two
        // orientations of (i,j) are counted from both endpoints.
        let a_size = 2 * graph.degree(i) + 2 * graph.degree(j) - 2;
        let r_a = summary.out_rank[i]
            + summary.in_rank[i]
            + summary.out_rank[j]
            + summary.in_rank[j]
            - rij
            - ranks.get(j, i);

        max_a = max_a.max(a_size);
        sum_a += a_size;
        if rij > 0.0 {
            let ratio = r_a / (a_size as f64 * rij);
            cond2_max = Some(cond2_max.map_or(ratio, |m: f64| m.max(ratio)));
        }
        cond3_num += (rij * a_size as f64).powi(2);

        // Nodes reachable within one edge of {i, j}; edges with an endpoint
        // here are exactly the edges sharing a node with some edge of A.
        scope.clear();
        for &v in [i, j]
            .iter()
            .chain(graph.neighbors(i).iter())
            .chain(graph.neighbors(j).iter())
        {
            if !in_scope[v] {
                in_scope[v] = true;
                scope.push(v);
            }
        }
        let mut r_b = 0.0;
        for &v in &scope {
            r_b += summary.out_rank[v] + summary.in_rank[v];
        }
        // Edges with both endpoints in scope were counted twice above.
        for &v in &scope {
            for &w in graph.neighbors(v) {
                if in_scope[w] {
                    r_b -= ranks.get(v, w);
                }
            }
        }
        cond4_num += rij * r_a * r_b;
        for &v in &scope {
            in_scope[v] = false;
        }
    }

    let r_x1 = summary.edge_rank_sq_sum;
    let (cond3_ratio, cond4_ratio) = if r_x1 > 0.0 {
        (
            Some(cond3_num / (r_x1 * (n as f64).sqrt())),
            Some(cond4_num / r_x1.powf(1.5)),
        )
    } else {
        (None, None)
    };

    Ok(DiagnosticsReport {
        ordered_edges: edges.len(),
        undirected_edges: graph.undirected_edge_count(),
        max_adjacent_edges: max_a,
        mean_adjacent_edges: sum_a as f64 / edges.len().max(1) as f64,
        cond2_max_ratio: cond2_max,
        cond3_ratio,
        cond4_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_kmst, build_knn, compute_distances};
    use crate::ranks::compute_normalized_ranks;
    use ndarray::array;

    fn path_graph_4() -> SimilarityGraph {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        build_kmst(&compute_distances(&x).unwrap(), 1).unwrap()
    }

    #[test]
    fn single_cluster_captures_all_edge_ranks() {
        let g = path_graph_4();
        let r = compute_normalized_ranks(&[0.3, -1.2, 2.0, 0.7]).unwrap();
        let c = ClusterAssignment::new(vec![0, 0, 0, 0]).unwrap();
        let summary = GraphRankSummary::collect(&g, &r).unwrap();
        let t = within_cluster_edge_rank(&g, &r, &c, 0).unwrap();
        assert!((t - summary.edge_rank_sum).abs() < 1e-12);
    }

    #[test]
    fn singleton_clusters_have_zero_statistic() {
        let g = path_graph_4();
        let r = compute_normalized_ranks(&[0.3, -1.2, 2.0, 0.7]).unwrap();
        let c = ClusterAssignment::new(vec![0, 1, 2, 3]).unwrap();
        for s in 0..4 {
            assert_eq!(within_cluster_edge_rank(&g, &r, &c, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn path_graph_split_matches_explicit_sum() {
        let g = path_graph_4();
        let y = [0.9, 0.1, 3.0, 2.2];
        let r = compute_normalized_ranks(&y).unwrap();
        let c = ClusterAssignment::new(vec![0, 0, 1, 1]).unwrap();
        let t0 = within_cluster_edge_rank(&g, &r, &c, 0).unwrap();
        let t1 = within_cluster_edge_rank(&g, &r, &c, 1).unwrap();
        assert!((t0 - (r.get(0, 1) + r.get(1, 0))).abs() < 1e-15);
        assert!((t1 - (r.get(2, 3) + r.get(3, 2))).abs() < 1e-15);
    }

    #[test]
    fn unknown_cluster_id_is_rejected() {
        let g = path_graph_4();
        let r = compute_normalized_ranks(&[0.3, -1.2, 2.0, 0.7]).unwrap();
        let c = ClusterAssignment::new(vec![0, 0, 1, 1]).unwrap();
        assert!(matches!(
            within_cluster_edge_rank(&g, &r, &c, 2),
            Err(Error::UnknownCluster { id: 2, .. })
        ));
    }

    #[test]
    fn singleton_cluster_moments_vanish() {
        let g = path_graph_4();
        let r = compute_normalized_ranks(&[0.3, -1.2, 2.0, 0.7]).unwrap();
        let summary = GraphRankSummary::collect(&g, &r).unwrap();
        let (e, var) = t_moments(&summary, 1).unwrap();
        assert_eq!(e, 0.0);
        assert_eq!(var, 0.0);
        assert_eq!(t_covariance(&summary, 1, 3).unwrap(), 0.0);
    }

    #[test]
    fn full_cluster_is_constant_under_permutation() {
        let x = array![[0.1], [0.9], [2.3], [3.1], [4.8], [6.0]];
        let g = build_kmst(&compute_distances(&x).unwrap(), 2).unwrap();
        let r = compute_normalized_ranks(&[0.4, -0.2, 1.9, 0.8, -1.5, 0.0]).unwrap();
        let summary = GraphRankSummary::collect(&g, &r).unwrap();
        let (e, var) = t_moments(&summary, 6).unwrap();
        assert!((e - summary.edge_rank_sum).abs() < 1e-12);
        assert!(var.abs() < 1e-10 * summary.edge_rank_sum.powi(2).max(1.0));
    }

    #[test]
    fn moments_require_n_at_least_4() {
        let x = array![[0.0], [1.0], [3.0]];
        let g = build_kmst(&compute_distances(&x).unwrap(), 1).unwrap();
        let r = compute_normalized_ranks(&[0.0, 1.0, 2.0]).unwrap();
        let summary = GraphRankSummary::collect(&g, &r).unwrap();
        assert!(matches!(
            t_moments(&summary, 2),
            Err(Error::UnsupportedSize { n: 3 })
        ));
    }

    #[test]
    fn in_and_out_rank_sums_agree_with_total() {
        let x = array![[0.0], [0.7], [1.9], [2.1], [4.0], [5.5], [6.1]];
        let g = build_knn(&compute_distances(&x).unwrap(), 2).unwrap();
        let r =
            compute_normalized_ranks(&[1.0, -0.3, 0.5, 2.2, -1.8, 0.9, 0.2]).unwrap();
        let s = GraphRankSummary::collect(&g, &r).unwrap();
        let out: f64 = s.out_rank.iter().sum();
        let inn: f64 = s.in_rank.iter().sum();
        assert!((out - s.edge_rank_sum).abs() < 1e-12);
        assert!((inn - s.edge_rank_sum).abs() < 1e-12);
        // Cauchy-Schwarz across edge orientations.
        assert!(s.edge_rank_cross_sum <= s.edge_rank_sq_sum + 1e-12);
    }

    #[test]
    fn z_statistic_is_deterministic() {
        let x = array![[0.0, 1.0], [1.2, 0.3], [2.5, 2.0], [3.3, 0.1], [4.1, 1.7], [5.0, 0.4]];
        let dm = compute_distances(&x).unwrap();
        let g = build_kmst(&dm, 1).unwrap();
        let r = compute_normalized_ranks(&[0.4, -0.2, 1.9, 0.8, -1.5, 0.0]).unwrap();
        let c = ClusterAssignment::new(vec![0, 0, 0, 1, 1, 1]).unwrap();
        let a = z_statistic(&g, &r, &c).unwrap();
        let b = z_statistic(&g, &r, &c).unwrap();
        assert_eq!(a.z.to_bits(), b.z.to_bits());
        assert_eq!(a.p_asymptotic.to_bits(), b.p_asymptotic.to_bits());
        assert!((0.0..=1.0).contains(&a.p_asymptotic));
    }

    #[test]
    fn all_singletons_is_degenerate() {
        let x = array![[0.0], [1.0], [2.5], [4.0]];
        let g = build_kmst(&compute_distances(&x).unwrap(), 1).unwrap();
        let r = compute_normalized_ranks(&[0.4, -0.2, 1.9, 0.8]).unwrap();
        let c = ClusterAssignment::new(vec![0, 1, 2, 3]).unwrap();
        assert!(matches!(
            z_statistic(&g, &r, &c),
            Err(Error::DegenerateVariance { .. })
        ));
    }

    #[test]
    fn one_cluster_is_rejected() {
        let x = array![[0.0], [1.0], [2.5], [4.0]];
        let g = build_kmst(&compute_distances(&x).unwrap(), 1).unwrap();
        let r = compute_normalized_ranks(&[0.4, -0.2, 1.9, 0.8]).unwrap();
        let c = ClusterAssignment::new(vec![5, 5, 5, 5]).unwrap();
        assert!(z_statistic(&g, &r, &c).is_err());
    }

    #[test]
    fn permutation_pvalue_is_reproducible_and_floored() {
        let x = array![[0.0], [1.1], [2.0], [3.2], [4.1], [5.3], [6.2], [7.4]];
        let g = build_kmst(&compute_distances(&x).unwrap(), 2).unwrap();
        let r = compute_normalized_ranks(&[0.1, 0.2, 0.25, 0.15, 5.0, 5.1, 5.2, 5.05])
            .unwrap();
        let c = ClusterAssignment::new(vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        let a = permutation_pvalue(&g, &r, &c, 500, 42).unwrap();
        let b = permutation_pvalue(&g, &r, &c, 500, 42).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.z_values, b.z_values);
        assert!(a.p_value >= 1.0 / 501.0);

        let other = permutation_pvalue(&g, &r, &c, 2000, 43).unwrap();
        let again = permutation_pvalue(&g, &r, &c, 2000, 42).unwrap();
        // Different seeds agree up to Monte Carlo error.
        assert!((other.p_value - again.p_value).abs() < 0.1);
    }

    #[test]
    fn diagnostics_on_path_graph() {
        let g = path_graph_4();
        let r = compute_normalized_ranks(&[0.4, -0.2, 1.9, 0.8]).unwrap();
        let d = condition_diagnostics(&g, &r).unwrap();
        assert_eq!(d.ordered_edges, 6);
        assert_eq!(d.undirected_edges, 3);
        // Middle edge (1,2): all three undirected edges share a node.
        assert_eq!(d.max_adjacent_edges, 6);
        // End edges see two undirected edges (4 ordered).
        assert!((d.mean_adjacent_edges - (4.0 + 4.0 + 6.0 + 6.0 + 4.0 + 4.0) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_on_complete_graph_are_symmetric() {
        let x = array![[0.0, 0.0], [1.0, 0.2], [0.3, 1.1], [1.4, 1.3]];
        let g = build_knn(&compute_distances(&x).unwrap(), 3).unwrap();
        let r = compute_normalized_ranks(&[0.4, -0.2, 1.9, 0.8]).unwrap();
        let d = condition_diagnostics(&g, &r).unwrap();
        assert_eq!(d.ordered_edges, 12);
        // |A| = 2*3 + 2*3 - 2 = 10 for every edge of K4.
        assert_eq!(d.max_adjacent_edges, 10);
        assert!((d.mean_adjacent_edges - 10.0).abs() < 1e-12);
    }

    #[test]
    fn run_test_attaches_requested_blocks() {
        let x = array![[0.0], [1.1], [2.0], [3.2], [4.1], [5.3]];
        let g = build_kmst(&compute_distances(&x).unwrap(), 1).unwrap();
        let r = compute_normalized_ranks(&[0.4, -0.2, 1.9, 0.8, -1.5, 0.0]).unwrap();
        let c = ClusterAssignment::new(vec![0, 0, 0, 1, 1, 1]).unwrap();
        let opts = TestOptions {
            method: Method::Both,
            permutations: 200,
            seed: 7,
            diagnostics: true,
        };
        let res = run_test(&g, &r, &c, &opts).unwrap();
        assert!(res.p_permutation.is_some());
        assert_eq!(res.permutations, Some(200));
        assert_eq!(res.seed, Some(7));
        assert!(res.diagnostics.is_some());

        let asym_only = run_test(
            &g,
            &r,
            &c,
            &TestOptions {
                method: Method::Asymptotic,
                diagnostics: false,
                ..opts
            },
        )
        .unwrap();
        assert!(asym_only.p_permutation.is_none());
        assert!(asym_only.diagnostics.is_none());
    }
}
