//! Shared test oracles.
//!
//! Everything here recomputes quantities from first principles (exhaustive
//! enumeration, brute-force scans) and never calls the closed-form code
//! paths it is used to check.

/// Visit every distinct label vector with the given per-cluster counts.
fn visit_assignments(
    remaining: &mut [usize],
    labels: &mut Vec<usize>,
    n: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if labels.len() == n {
        f(labels);
        return;
    }
    for s in 0..remaining.len() {
        if remaining[s] > 0 {
            remaining[s] -= 1;
            labels.push(s);
            visit_assignments(remaining, labels, n, f);
            labels.pop();
            remaining[s] += 1;
        }
    }
}

/// Exact permutation-null moments obtained by enumerating every label
/// placement.
pub struct EnumeratedMoments {
    pub placements: usize,
    pub e_t: Vec<f64>,
    pub var_t: Vec<f64>,
    /// Full covariance matrix of (T_1, ..., T_I); diagonal is var_t.
    pub cov: Vec<Vec<f64>>,
    pub e_v: f64,
    pub var_v: f64,
    /// The total statistic of every placement, in visit order.
    pub v_values: Vec<f64>,
}

/// Enumerate all multinomial label placements over `counts` and compute
/// the exact distribution of the per-cluster within-cluster edge-rank
/// sums. `edges` are ordered pairs; `rank(i, j)` is the normalized rank
/// of j with respect to i.
pub fn enumerate_moments(
    n: usize,
    edges: &[(usize, usize)],
    rank: &impl Fn(usize, usize) -> f64,
    counts: &[usize],
) -> EnumeratedMoments {
    assert_eq!(counts.iter().sum::<usize>(), n, "counts must sum to n");
    let n_clusters = counts.len();
    let mut remaining = counts.to_vec();
    let mut labels = Vec::with_capacity(n);

    let mut placements = 0usize;
    let mut sum_t = vec![0.0; n_clusters];
    let mut sum_prod = vec![vec![0.0; n_clusters]; n_clusters];
    let mut v_values = Vec::new();

    visit_assignments(&mut remaining, &mut labels, n, &mut |labels| {
        let mut t = vec![0.0; n_clusters];
        for &(i, j) in edges {
            if labels[i] == labels[j] {
                t[labels[i]] += rank(i, j);
            }
        }
        for s in 0..n_clusters {
            sum_t[s] += t[s];
            for u in 0..n_clusters {
                sum_prod[s][u] += t[s] * t[u];
            }
        }
        v_values.push(t.iter().sum());
        placements += 1;
    });

    let m = placements as f64;
    let e_t: Vec<f64> = sum_t.iter().map(|s| s / m).collect();
    let mut cov = vec![vec![0.0; n_clusters]; n_clusters];
    for s in 0..n_clusters {
        for u in 0..n_clusters {
            cov[s][u] = sum_prod[s][u] / m - e_t[s] * e_t[u];
        }
    }
    let var_t: Vec<f64> = (0..n_clusters).map(|s| cov[s][s]).collect();
    let e_v: f64 = e_t.iter().sum();
    let var_v: f64 = (0..n_clusters)
        .map(|s| (0..n_clusters).map(|u| cov[s][u]).sum::<f64>())
        .sum();
    EnumeratedMoments {
        placements,
        e_t,
        var_t,
        cov,
        e_v,
        var_v,
        v_values,
    }
}

/// Exact lower-tail probability P(V <= v_obs) of the enumerated
/// permutation distribution.
pub fn exact_lower_tail(v_values: &[f64], v_obs: f64) -> f64 {
    let hits = v_values.iter().filter(|&&v| v <= v_obs + 1e-12).count();
    hits as f64 / v_values.len() as f64
}

/// Closeness check with relative tolerance and a tiny absolute floor for
/// quantities that cancel to zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-12
}

/// Number of distinct multinomial placements, for sanity checks.
pub fn multinomial(counts: &[usize]) -> usize {
    let n: usize = counts.iter().sum();
    let mut num = 1usize;
    let mut k = 0usize;
    for &c in counts {
        for i in 1..=c {
            num = num * (k + i) / i;
        }
        k += c;
    }
    let _ = n;
    num
}
