//! Graph-based rank test for the presence of random effects in clustered
//! data.
//!
//! Given covariates `X` (possibly with many more columns than rows), a
//! scalar response `Y`, and a cluster label per observation, the test asks
//! whether observations from the same cluster are closer in response space
//! than covariate similarity alone would predict. It is model-free: no
//! mixed model is fitted and no variance component is estimated.
//!
//! The pipeline:
//!
//! 1. build a similarity graph on the covariate rows ([`graph`]): a k-MST
//!    or k-nearest-neighbor graph over Euclidean distances;
//! 2. rank every response against every other by closeness ([`ranks`]);
//! 3. sum the ranks of graph edges that stay within a cluster, standardize
//!    with the exact permutation-null moments, and read off a lower-tail
//!    p-value, asymptotic or Monte Carlo ([`testing`]).
//!
//! The [`simulate`] module generates clustered datasets from several mixed
//! model families and runs calibration and power experiments; [`cli`]
//! backs the `edgerank` binary.
//!
//! ```
//! use edgerank::{graph, ranks, simulate, testing};
//!
//! let cfg = simulate::LmmConfig {
//!     n: 120,
//!     p: 50,
//!     clusters: 4,
//!     tau2: 4.0,
//!     snr: 5.0,
//!     ..Default::default()
//! };
//! let ds = simulate::generate(simulate::Scenario::RandomIntercept, &cfg, 5).unwrap();
//! let dm = graph::compute_distances(&ds.x).unwrap();
//! let g = graph::build_kmst(&dm, 5).unwrap();
//! let r = ranks::compute_normalized_ranks(&ds.y).unwrap();
//! let result = testing::run_test(&g, &r, &ds.clusters, &Default::default()).unwrap();
//! assert!(result.p_permutation.unwrap() < 0.05);
//! ```

pub mod cli;
pub mod cluster;
pub mod error;
pub mod graph;
pub mod io;
pub mod ranks;
pub mod simulate;
pub mod testing;
mod util;

pub use cluster::ClusterAssignment;
pub use error::{Error, Result};
pub use graph::{build_kmst, build_knn, compute_distances, DistanceMatrix, GraphKind, SimilarityGraph};
pub use ranks::{compute_normalized_ranks, RankMatrix};
pub use testing::{run_test, Method, TestOptions, TestResult};
