//! Asymmetric normalized ranks of the response values.
//!
//! For each observation `i`, the remaining observations are ranked by
//! their absolute distance to `y[i]`, closest first. The normalized rank
//! of `j` with respect to `i` is `(rank - 1) / n`, so each row contains
//! exactly the values `{0, 1/n, ..., (n-2)/n}`. Ranks are not symmetric.

use crate::error::{Error, Result};

/// Row-wise normalized ranks. The diagonal is unused.
#[derive(Debug, Clone)]
pub struct RankMatrix {
    n: usize,
    data: Vec<f64>, // row-major n x n, diagonal 0.0 and meaningless
    ties_detected: bool,
}

impl RankMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Normalized rank of `j` with respect to `i`, for `i != j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert_ne!(i, j);
        self.data[i * self.n + j]
    }

    /// True when at least one row had tied distances, i.e. rank order was
    /// decided by the index tie-break rather than the data.
    pub fn ties_detected(&self) -> bool {
        self.ties_detected
    }
}

/// Rank every observation against every other by closeness in response
/// space. Ties in distance are broken by the smaller index first, so the
/// result is deterministic even with duplicate values.
pub fn compute_normalized_ranks(y: &[f64]) -> Result<RankMatrix> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 responses to rank, got {n}"
        )));
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite response value at row {pos}"
        )));
    }

    let mut data = vec![0.0; n * n];
    let mut ties_detected = false;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| ((y[j] - y[i]).abs(), j)),
        );
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if order.windows(2).any(|w| w[0].0 == w[1].0) {
            ties_detected = true;
        }
        for (pos, &(_, j)) in order.iter().enumerate() {
            // raw rank is pos + 1; normalized rank is (raw - 1) / n
            data[i * n + j] = pos as f64 / n as f64;
        }
    }
    Ok(RankMatrix {
        n,
        data,
        ties_detected,
    })
}
