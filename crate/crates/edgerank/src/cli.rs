//! Implementations behind the `edgerank` binary.
//!
//! Three subcommands: `test` runs the test on a user-supplied CSV,
//! `simulate` writes a synthetic clustered dataset, and `reproduce`
//! re-runs a named calibration or power experiment grid. All randomness
//! flows from the `--seed` flag; repeated invocations with identical
//! inputs and flags produce byte-identical outputs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::graph::{build_kmst, build_knn, compute_distances, GraphKind};
use crate::io;
use crate::ranks::compute_normalized_ranks;
use crate::simulate::{
    run_power, CovariateDist, ErrorDist, LmmConfig, PowerPoint, RunSettings, Scenario,
};
use crate::testing::{run_test, Method, TestOptions};

#[derive(Debug, Parser)]
#[command(
    name = "edgerank",
    version,
    about = "Graph-based rank test for random effects in clustered data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a dataset for a random effect.
    Test(TestArgs),
    /// Generate a synthetic clustered dataset.
    Simulate(SimulateArgs),
    /// Re-run a calibration or power experiment grid.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphChoice {
    Kmst,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    Asymptotic,
    Permutation,
    Both,
}

impl From<MethodChoice> for Method {
    fn from(m: MethodChoice) -> Self {
        match m {
            MethodChoice::Asymptotic => Method::Asymptotic,
            MethodChoice::Permutation => Method::Permutation,
            MethodChoice::Both => Method::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceChoice {
    Euclidean,
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistChoice {
    Normal,
    T3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleChoice {
    /// Paper-scale grid sizes and trial counts.
    Full,
    /// Half the observations and half the trials per cell.
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableChoice {
    T1,
    T2,
    Power1,
    Power2,
    Power3,
    Power4a,
    Power4b,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Input CSV with header cluster,y,x1,...,xp.
    #[arg(long)]
    pub input: PathBuf,
    /// Similarity graph family.
    #[arg(long, value_enum, default_value_t = GraphChoice::Kmst)]
    pub graph: GraphChoice,
    /// Graph density parameter (number of trees / neighbors).
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = MethodChoice::Both)]
    pub method: MethodChoice,
    /// Permutation count.
    #[arg(long, default_value_t = 2000)]
    pub b: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Where interpoint distances come from.
    #[arg(long, value_enum, default_value_t = DistanceChoice::Euclidean)]
    pub distance: DistanceChoice,
    /// Square distance-matrix CSV (headerless); required with
    /// --distance precomputed.
    #[arg(long)]
    pub distance_matrix: Option<PathBuf>,
    /// Write the JSON result to this path instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Omit the regularity-condition diagnostics block.
    #[arg(long)]
    pub no_diagnostics: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario: 1, 2, 3, 4a, or 4b.
    #[arg(long)]
    pub scenario: String,
    /// Optional key = value config file applied before the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub sigma_eps: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Random slopes per cluster (scenario 3).
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, value_enum)]
    pub error_dist: Option<DistChoice>,
    #[arg(long, value_enum)]
    pub x_dist: Option<DistChoice>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output dataset CSV path.
    #[arg(long)]
    pub output: PathBuf,
    /// Truth sidecar path (default: <output>.truth.json).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Experiment grid to run.
    #[arg(long, value_enum)]
    pub table: TableChoice,
    /// Trials per grid cell (default: the experiment's own count).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScaleChoice::Full)]
    pub scale: ScaleChoice,
    /// Override the per-table default method.
    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,
    /// Permutation count per trial.
    #[arg(long, default_value_t = 2000)]
    pub b: usize,
    /// Graph density parameter (spanning trees).
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Output results CSV path.
    #[arg(long)]
    pub output: PathBuf,
    /// Optional per-trial JSON-lines log (includes the per-cluster
    /// statistics).
    #[arg(long)]
    pub trial_log: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test(args) => cmd_test(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Reproduce(args) => cmd_reproduce(&args),
    }
}

/// Run the test on a CSV input and emit the JSON result.
pub fn cmd_test(args: &TestArgs) -> Result<()> {
    let table = io::read_input_csv(&args.input)?;
    if table.clusters.n_clusters() < 2 {
        return Err(Error::InvalidInput(format!(
            "the test needs at least 2 distinct clusters, found {}",
            table.clusters.n_clusters()
        )));
    }
    let n = table.y.len();

    let dm = match args.distance {
        DistanceChoice::Euclidean => {
            let x = table.x.as_ref().ok_or_else(|| {
                Error::InvalidInput(
                    "input has no covariate columns; supply x columns or use \
                     --distance precomputed"
                        .to_string(),
                )
            })?;
            compute_distances(x)?
        }
        DistanceChoice::Precomputed => {
            let path = args.distance_matrix.as_ref().ok_or_else(|| {
                Error::InvalidConfig(
                    "--distance precomputed requires --distance-matrix".to_string(),
                )
            })?;
            let dm = io::read_distance_csv(path)?;
            if dm.n() != n {
                return Err(Error::InvalidInput(format!(
                    "distance matrix is {}x{} but the input has {n} rows",
                    dm.n(),
                    dm.n()
                )));
            }
            dm
        }
    };

    let graph = match args.graph {
        GraphChoice::Kmst => build_kmst(&dm, args.k)?,
        GraphChoice::Knn => build_knn(&dm, args.k)?,
    };
    if (graph.undirected_edge_count() as f64) > (n as f64).powf(1.5) {
        eprintln!(
            "note: the graph has {} edges, more than n^1.5 = {:.0}; the normal \
             approximation degrades on dense graphs — consider a smaller k",
            graph.undirected_edge_count(),
            (n as f64).powf(1.5)
        );
    }

    let ranks = compute_normalized_ranks(&table.y)?;
    let opts = TestOptions {
        method: args.method.into(),
        permutations: args.b,
        seed: args.seed,
        diagnostics: !args.no_diagnostics,
    };
    let mut result = run_test(&graph, &ranks, &table.clusters, &opts)?;
    result.cluster_names = Some(table.cluster_names.clone());

    let json = io::test_result_to_json(&result)?;
    let summary = match result.p_permutation {
        Some(p_perm) => format!(
            "Z = {:.4}, p_asymptotic = {:.4}, p_permutation = {:.4} (n = {}, clusters = {}, {}-{} with {} edges)",
            result.z,
            result.p_asymptotic,
            p_perm,
            result.n,
            result.n_clusters,
            result.graph.k,
            result.graph.kind,
            result.graph.edges
        ),
        None => format!(
            "Z = {:.4}, p_asymptotic = {:.4} (n = {}, clusters = {}, {}-{} with {} edges)",
            result.z,
            result.p_asymptotic,
            result.n,
            result.n_clusters,
            result.graph.k,
            result.graph.kind,
            result.graph.edges
        ),
    };
    match &args.output {
        Some(path) => {
            std::fs::write(path, json)?;
            println!("{summary}");
        }
        None => {
            print!("{json}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn build_sim_config(args: &SimulateArgs) -> Result<(Scenario, LmmConfig)> {
    let scenario = Scenario::parse(&args.scenario)?;
    let mut cfg = LmmConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        io::apply_config_overrides(&mut cfg, &text)?;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(c) = args.clusters {
        cfg.clusters = c;
    }
    if let Some(t) = args.tau2 {
        cfg.tau2 = t;
    }
    if let Some(s) = args.snr {
        cfg.snr = s;
    }
    if let Some(s) = args.sigma_eps {
        cfg.sigma_eps = s;
    }
    if let Some(r) = args.rho {
        cfg.rho = r;
    }
    if let Some(q) = args.q {
        cfg.slopes = q;
    }
    if let Some(d) = args.error_dist {
        cfg.error_dist = match d {
            DistChoice::Normal => ErrorDist::Normal,
            DistChoice::T3 => ErrorDist::ScaledT3,
        };
    }
    if let Some(d) = args.x_dist {
        cfg.x_dist = match d {
            DistChoice::Normal => CovariateDist::Normal,
            DistChoice::T3 => CovariateDist::T3,
        };
    }
    Ok((scenario, cfg))
}

/// Generate a dataset and write it with its truth sidecar.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (scenario, cfg) = build_sim_config(args)?;
    let ds = crate::simulate::generate(scenario, &cfg, args.seed)?;
    io::write_dataset_csv(&args.output, &ds)?;
    let truth_path = args
        .truth
        .clone()
        .unwrap_or_else(|| sidecar_path(&args.output));
    io::write_truth_json(&truth_path, &ds.truth)?;
    println!(
        "wrote {} ({} rows, {} covariates, {} clusters) and {}",
        args.output.display(),
        cfg.n,
        cfg.p,
        cfg.clusters,
        truth_path.display()
    );
    Ok(())
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_os_string();
    name.push(".truth.json");
    PathBuf::from(name)
}

struct TableSpec {
    points: Vec<PowerPoint>,
    default_trials: usize,
    default_method: Method,
    description: &'static str,
    tolerance_note: &'static str,
}

fn table_spec(table: TableChoice, scale: ScaleChoice, k: usize) -> TableSpec {
    let half = |v: usize| if scale == ScaleChoice::Desk { v / 2 } else { v };
    let n = half(500);
    let mut points = Vec::new();
    let (default_trials, default_method, description, tolerance_note) = match table {
        TableChoice::T1 | TableChoice::T2 => {
            let t3 = table == TableChoice::T2;
            for snr in [1.0, 4.0, 8.0] {
                for clusters in [5, 10, 20] {
                    for p in [100, 500, 1000] {
                        points.push(PowerPoint {
                            scenario: Scenario::RandomIntercept,
                            cfg: LmmConfig {
                                n,
                                p,
                                clusters,
                                tau2: 0.0,
                                snr,
                                error_dist: if t3 {
                                    ErrorDist::ScaledT3
                                } else {
                                    ErrorDist::Normal
                                },
                                x_dist: if t3 {
                                    CovariateDist::T3
                                } else {
                                    CovariateDist::Normal
                                },
                                ..Default::default()
                            },
                        });
                    }
                }
            }
            (
                half(500),
                Method::Both,
                if t3 {
                    "type I error, t3 errors and covariates, tau2 = 0"
                } else {
                    "type I error, normal errors and covariates, tau2 = 0"
                },
                "type-I-error cells are expected within +/-0.03 (full scale) or +/-0.05 (desk scale) of 0.05",
            )
        }
        TableChoice::Power1 => {
            for clusters in [5, 10] {
                for p in [200, 500, 1000] {
                    for tau2 in [0.0, 0.5, 1.0, 1.5, 2.0] {
                        points.push(PowerPoint {
                            scenario: Scenario::RandomIntercept,
                            cfg: LmmConfig {
                                n,
                                p,
                                clusters,
                                tau2,
                                snr: 5.0,
                                ..Default::default()
                            },
                        });
                    }
                }
            }
            (
                half(100),
                Method::Permutation,
                "power, independent cluster intercepts, snr = 5",
                "power cells are expected within +/-0.10 (full scale) or +/-0.15 (desk scale) of reference values",
            )
        }
        TableChoice::Power2 => {
            for rho in [0.2, 0.5, 0.7] {
                for tau2 in [1.0, 1.5, 2.0, 2.5] {
                    points.push(PowerPoint {
                        scenario: Scenario::CorrelatedIntercepts,
                        cfg: LmmConfig {
                            n,
                            p: 500,
                            clusters: 5,
                            tau2,
                            snr: 5.0,
                            rho,
                            ..Default::default()
                        },
                    });
                }
            }
            (
                half(100),
                Method::Permutation,
                "power, AR-correlated cluster intercepts, snr = 5",
                "power cells are expected within +/-0.10 (full scale) or +/-0.15 (desk scale) of reference values",
            )
        }
        TableChoice::Power3 => {
            for q in [5, 10, 20] {
                for tau2 in [1.0, 1.5, 2.0, 2.5] {
                    points.push(PowerPoint {
                        scenario: Scenario::RandomSlopes,
                        cfg: LmmConfig {
                            n,
                            p: 500,
                            clusters: 5,
                            tau2,
                            snr: 5.0,
                            rho: 0.5,
                            slopes: q,
                            ..Default::default()
                        },
                    });
                }
            }
            (
                half(100),
                Method::Permutation,
                "power, random intercept plus q random slopes per cluster, rho = 0.5, snr = 5",
                "power cells are expected within +/-0.10 (full scale) or +/-0.15 (desk scale) of reference values",
            )
        }
        TableChoice::Power4a | TableChoice::Power4b => {
            let mixed = table == TableChoice::Power4b;
            let tau2s = if mixed {
                [1.0, 1.5, 2.0, 2.5]
            } else {
                [0.5, 1.0, 1.5, 2.0]
            };
            for clusters in [5, 10] {
                for p in [200, 500, 1000] {
                    for tau2 in tau2s {
                        points.push(PowerPoint {
                            scenario: if mixed {
                                Scenario::NonlinearMixed
                            } else {
                                Scenario::NonlinearFixed
                            },
                            cfg: LmmConfig {
                                n,
                                p,
                                clusters,
                                tau2,
                                snr: 4.0,
                                ..Default::default()
                            },
                        });
                    }
                }
            }
            (
                half(100),
                Method::Permutation,
                if mixed {
                    "power, logistic transform of fixed and random effects, snr = 4"
                } else {
                    "power, log|x beta| transform of the fixed effects, snr = 4"
                },
                "power cells are expected within +/-0.10 (full scale) or +/-0.15 (desk scale) of reference values",
            )
        }
    };
    let _ = k;
    TableSpec {
        points,
        default_trials,
        default_method,
        description,
        tolerance_note,
    }
}

/// Run a named experiment grid and write the results CSV.
pub fn cmd_reproduce(args: &ReproduceArgs) -> Result<()> {
    let spec = table_spec(args.table, args.scale, args.k);
    let trials = args.trials.unwrap_or(spec.default_trials);
    let settings = RunSettings {
        graph: GraphKind::Kmst { k: args.k },
        method: args.method.map(Method::from).unwrap_or(spec.default_method),
        permutations: args.b,
        alpha: 0.05,
        seed: args.seed,
    };
    let outcome = run_power(&spec.points, &settings, trials)?;

    let scale_name = match args.scale {
        ScaleChoice::Full => "full",
        ScaleChoice::Desk => "desk",
    };
    let comments = vec![
        format!("table: {:?}", args.table).to_lowercase(),
        format!("description: {}", spec.description),
        format!(
            "scale: {scale_name} (n = {}, trials = {} per cell)",
            spec.points[0].cfg.n, trials
        ),
        format!(
            "graph: {}-mst, permutations = {}, alpha = 0.05, seed = {}",
            args.k, args.b, args.seed
        ),
        format!("tolerance: {}", spec.tolerance_note),
    ];
    io::write_results_csv(&args.output, &comments, &outcome.rows)?;

    if let Some(log_path) = &args.trial_log {
        let cells: Vec<(String, &[crate::simulate::TrialRecord])> = spec
            .points
            .iter()
            .zip(&outcome.records_per_point)
            .map(|(pt, recs)| {
                (
                    format!(
                        "scenario={} p={} i={} tau2={} rho={} q={} snr={}",
                        pt.scenario.code(),
                        pt.cfg.p,
                        pt.cfg.clusters,
                        pt.cfg.tau2,
                        pt.cfg.rho,
                        pt.cfg.slopes,
                        pt.cfg.snr
                    ),
                    recs.as_slice(),
                )
            })
            .collect();
        io::write_trial_log(log_path, &cells)?;
    }
    println!(
        "wrote {} ({} rows, {} grid cells, {} trials per cell)",
        args.output.display(),
        outcome.rows.len(),
        spec.points.len(),
        trials
    );
    Ok(())
}
