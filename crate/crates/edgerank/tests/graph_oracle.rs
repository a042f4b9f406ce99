//! Graph construction against brute-force oracles.

use edgerank::graph::{build_kmst, build_knn, compute_distances, DistanceMatrix};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Minimum spanning-tree weight by exhaustive enumeration of all
/// (n-1)-edge subsets of the allowed unordered pairs.
fn min_spanning_weight(n: usize, dm: &DistanceMatrix, banned: &[(usize, usize)]) -> f64 {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !banned.contains(&(i, j)) {
                pairs.push((i, j));
            }
        }
    }
    let mut best = f64::INFINITY;
    let m = pairs.len();
    let want = n - 1;
    let mut choice: Vec<usize> = (0..want).collect();
    loop {
        // Spanning-tree check via component merging.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut merged = 0;
        let mut weight = 0.0;
        for &idx in &choice {
            let (i, j) = pairs[idx];
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
                merged += 1;
            }
            weight += dm.get(i, j);
        }
        if merged == want && weight < best {
            best = weight;
        }
        // Next combination.
        let mut k = want;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if choice[k] != m - want + k {
                choice[k] += 1;
                for l in (k + 1)..want {
                    choice[l] = choice[l - 1] + 1;
                }
                break;
            }
        }
    }
}

fn undirected(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = edges.iter().filter(|&&(i, j)| i < j).copied().collect();
    out.sort_unstable();
    out
}

#[test]
fn successive_trees_are_minimal_by_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..5 {
        let n = 6;
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-10.0..10.0));
        let dm = compute_distances(&x).unwrap();
        let g = build_kmst(&dm, 2).unwrap();
        let all = undirected(g.ordered_edges());
        assert_eq!(all.len(), 2 * (n - 1));

        // Recover the first tree: Kruskal order means the first round is
        // the overall MST; identify it by rebuilding with k = 1.
        let t1 = undirected(build_kmst(&dm, 1).unwrap().ordered_edges());
        let w1: f64 = t1.iter().map(|&(i, j)| dm.get(i, j)).sum();
        assert!((w1 - min_spanning_weight(n, &dm, &[])).abs() < 1e-9);

        // The second round must be the MST of the residual graph.
        let t2: Vec<(usize, usize)> = all.iter().filter(|e| !t1.contains(e)).copied().collect();
        assert_eq!(t2.len(), n - 1);
        let w2: f64 = t2.iter().map(|&(i, j)| dm.get(i, j)).sum();
        assert!((w2 - min_spanning_weight(n, &dm, &t1)).abs() < 1e-9);

        // Rounds are edge-disjoint by construction.
        for e in &t1 {
            assert!(!t2.contains(e));
        }
    }
}

#[test]
fn knn_matches_per_node_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 8;
    let k = 3;
    let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-5.0..5.0));
    let dm = compute_distances(&x).unwrap();
    let g = build_knn(&dm, k).unwrap();

    let mut expected = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| dm.get(i, a).total_cmp(&dm.get(i, b)).then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            expected.insert((i, j));
            expected.insert((j, i));
        }
    }
    let got: std::collections::BTreeSet<(usize, usize)> =
        g.ordered_edges().iter().copied().collect();
    assert_eq!(got, expected);
}

#[test]
fn distances_match_double_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((5, 3), |_| rng.random_range(-2.0..2.0));
    let dm = compute_distances(&x).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let mut ss = 0.0;
            for c in 0..3 {
                ss += (x[[i, c]] - x[[j, c]]).powi(2);
            }
            assert_eq!(dm.get(i, j), ss.sqrt(), "entry ({i},{j})");
        }
    }
}
