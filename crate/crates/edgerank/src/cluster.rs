//! Cluster labels and counts.

use crate::error::{Error, Result};

/// Per-observation cluster membership with per-cluster counts.
///
/// Cluster ids are compact (`0..n_clusters`); arbitrary input ids are
/// remapped to compact form by ascending original id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl ClusterAssignment {
    /// Build from raw labels. Distinct values are mapped to 0..I in
    /// ascending order.
    pub fn new(raw: Vec<usize>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidInput(
                "cluster assignment must be non-empty".to_string(),
            ));
        }
        let mut distinct: Vec<usize> = raw.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let labels: Vec<usize> = raw
            .iter()
            .map(|v| distinct.binary_search(v).expect("value came from raw"))
            .collect();
        let mut counts = vec![0usize; distinct.len()];
        for &l in &labels {
            counts[l] += 1;
        }
        Ok(Self { labels, counts })
    }

    /// Balanced block assignment: `n_clusters` consecutive blocks of
    /// `per_cluster` observations each.
    pub fn balanced(n_clusters: usize, per_cluster: usize) -> Result<Self> {
        if n_clusters == 0 || per_cluster == 0 {
            return Err(Error::InvalidInput(
                "balanced assignment needs at least one cluster and one observation per cluster"
                    .to_string(),
            ));
        }
        let labels: Vec<usize> = (0..n_clusters)
            .flat_map(|s| std::iter::repeat_n(s, per_cluster))
            .collect();
        let counts = vec![per_cluster; n_clusters];
        Ok(Self { labels, counts })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, s: usize) -> Result<usize> {
        self.counts.get(s).copied().ok_or(Error::UnknownCluster {
            id: s,
            n_clusters: self.counts.len(),
        })
    }
}
