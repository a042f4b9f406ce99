//! Clustered-data generators and the Monte Carlo experiment harness.
//!
//! All generators share one model skeleton: covariate rows are drawn iid,
//! a coefficient vector is drawn uniform in [-1, 1] per coordinate and
//! rescaled to a target signal-to-noise ratio, cluster-level random
//! effects enter through a balanced one-way layout, and independent noise
//! is added. The scenarios differ in the random-effect covariance
//! (independent, AR-structured, per-cluster intercept-plus-slope blocks)
//! and in whether the linear predictor passes through a nonlinearity.
//!
//! Every generator is a pure function of `(config, seed)`. Draw order is
//! fixed (covariates, coefficients, random effects, noise) so that
//! degenerate parameter choices reduce exactly to the simpler scenario
//! with the same seed.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::graph::{build_kmst, build_knn, compute_distances, GraphKind, SimilarityGraph};
use crate::ranks::compute_normalized_ranks;
use crate::testing::{run_test, Method, TestOptions};

pub(crate) use crate::util::mix_seed;

/// Distribution of the additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorDist {
    Normal,
    /// Student t with 3 degrees of freedom, scaled to unit variance.
    ScaledT3,
}

/// Distribution of the covariate entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateDist {
    Normal,
    T3,
}

/// Data-generating model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Linear model with independent cluster intercepts.
    RandomIntercept,
    /// Linear model with AR-correlated cluster intercepts.
    CorrelatedIntercepts,
    /// Linear model with per-cluster random intercept and slopes.
    RandomSlopes,
    /// log|x beta| transformation of the fixed effects only.
    NonlinearFixed,
    /// Logistic transformation of fixed and random effects together.
    NonlinearMixed,
}

impl Scenario {
    /// Short code used in the CLI and result tables.
    pub fn code(self) -> &'static str {
        match self {
            Scenario::RandomIntercept => "1",
            Scenario::CorrelatedIntercepts => "2",
            Scenario::RandomSlopes => "3",
            Scenario::NonlinearFixed => "4a",
            Scenario::NonlinearMixed => "4b",
        }
    }

    pub fn parse(code: &str) -> Result<Self> {
        match code {
            "1" => Ok(Scenario::RandomIntercept),
            "2" => Ok(Scenario::CorrelatedIntercepts),
            "3" => Ok(Scenario::RandomSlopes),
            "4a" => Ok(Scenario::NonlinearFixed),
            "4b" => Ok(Scenario::NonlinearMixed),
            other => Err(Error::InvalidConfig(format!(
                "unknown scenario '{other}' (expected 1, 2, 3, 4a, or 4b)"
            ))),
        }
    }
}

/// Sizes and parameters of the generating model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmConfig {
    pub n: usize,
    pub p: usize,
    /// Number of clusters; the design is balanced, so `n` must divide
    /// evenly.
    pub clusters: usize,
    /// Random-effect variance.
    pub tau2: f64,
    /// Target beta'beta / sigma_eps^2.
    pub snr: f64,
    pub sigma_eps: f64,
    pub error_dist: ErrorDist,
    pub x_dist: CovariateDist,
    /// AR parameter of the random-effect covariance (scenarios 2 and 3).
    pub rho: f64,
    /// Number of random slopes per cluster (scenario 3).
    pub slopes: usize,
    /// Off-diagonal covariance reading: `rho^|i-j|` as written when false,
    /// `tau2 * rho^|i-j|` when true.
    pub scale_offdiag_by_tau2: bool,
}

impl Default for LmmConfig {
    fn default() -> Self {
        Self {
            n: 500,
            p: 100,
            clusters: 5,
            tau2: 0.0,
            snr: 1.0,
            sigma_eps: 1.0,
            error_dist: ErrorDist::Normal,
            x_dist: CovariateDist::Normal,
            rho: 0.0,
            slopes: 0,
            scale_offdiag_by_tau2: false,
        }
    }
}

impl LmmConfig {
    fn validate(&self, scenario: Scenario) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidConfig(format!(
                "n = {} too small, need at least 4",
                self.n
            )));
        }
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be at least 1".to_string()));
        }
        if self.clusters == 0 {
            return Err(Error::InvalidConfig(
                "need at least one cluster".to_string(),
            ));
        }
        if !self.n.is_multiple_of(self.clusters) {
            return Err(Error::InvalidConfig(format!(
                "balanced design requires clusters ({}) to divide n ({})",
                self.clusters, self.n
            )));
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.tau2) {
            return Err(Error::InvalidConfig(format!("tau2 = {} invalid", self.tau2)));
        }
        if !nonneg(self.snr) {
            return Err(Error::InvalidConfig(format!("snr = {} invalid", self.snr)));
        }
        if !nonneg(self.sigma_eps) || self.sigma_eps == 0.0 {
            return Err(Error::InvalidConfig(format!(
                "sigma_eps = {} must be positive",
                self.sigma_eps
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!(
                "rho = {} must lie in [0, 1)",
                self.rho
            )));
        }
        match scenario {
            Scenario::RandomIntercept | Scenario::NonlinearFixed | Scenario::NonlinearMixed => {
                if self.rho != 0.0 || self.slopes != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "scenario {} takes neither rho nor slopes (got rho = {}, slopes = {})",
                        scenario.code(),
                        self.rho,
                        self.slopes
                    )));
                }
            }
            Scenario::CorrelatedIntercepts => {
                if self.slopes != 0 {
                    return Err(Error::InvalidConfig(
                        "scenario 2 takes no random slopes".to_string(),
                    ));
                }
            }
            Scenario::RandomSlopes => {
                if self.slopes >= self.p {
                    return Err(Error::InvalidConfig(format!(
                        "scenario 3 requires slopes ({}) < p ({})",
                        self.slopes, self.p
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What actually generated a dataset, kept alongside it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: String,
    pub seed: u64,
    pub config: LmmConfig,
    pub beta: Vec<f64>,
    /// Realized random effects: one intercept per cluster, or `q + 1`
    /// values per cluster in the random-slope scenario.
    pub u: Vec<f64>,
    /// Random-effect covariance when it is non-trivial (scenarios 2, 3),
    /// row-major.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<Vec<f64>>>,
}

/// A generated dataset in the shape the test consumes.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub clusters: ClusterAssignment,
    pub truth: GroundTruth,
}

/// Rescale a raw coefficient vector so that beta'beta / sigma_eps^2 hits
/// the target exactly.
pub fn scale_beta_to_snr(raw: &[f64], snr: f64, sigma_eps: f64) -> Result<Vec<f64>> {
    if snr == 0.0 {
        return Ok(vec![0.0; raw.len()]);
    }
    let ss: f64 = raw.iter().map(|b| b * b).sum();
    if ss == 0.0 {
        return Err(Error::InvalidConfig(
            "cannot rescale an all-zero coefficient vector to a positive snr".to_string(),
        ));
    }
    let factor = (snr * sigma_eps * sigma_eps / ss).sqrt();
    Ok(raw.iter().map(|b| b * factor).collect())
}

fn draw_covariates(rng: &mut ChaCha8Rng, cfg: &LmmConfig) -> Array2<f64> {
    let total = cfg.n * cfg.p;
    let data: Vec<f64> = match cfg.x_dist {
        CovariateDist::Normal => (0..total).map(|_| StandardNormal.sample(rng)).collect(),
        CovariateDist::T3 => {
            let t = StudentT::new(3.0).unwrap();
            (0..total).map(|_| t.sample(rng)).collect()
        }
    };
    Array2::from_shape_vec((cfg.n, cfg.p), data).expect("shape matches data length")
}

fn draw_beta(rng: &mut ChaCha8Rng, cfg: &LmmConfig) -> Result<Vec<f64>> {
    let raw: Vec<f64> = (0..cfg.p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    scale_beta_to_snr(&raw, cfg.snr, cfg.sigma_eps)
}

fn draw_noise(rng: &mut ChaCha8Rng, cfg: &LmmConfig) -> Vec<f64> {
    match cfg.error_dist {
        ErrorDist::Normal => (0..cfg.n)
            .map(|_| cfg.sigma_eps * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        ErrorDist::ScaledT3 => {
            // t3 has variance 3; divide by sqrt(3) for unit variance.
            let t = StudentT::new(3.0).unwrap();
            let scale = cfg.sigma_eps / 3.0_f64.sqrt();
            (0..cfg.n).map(|_| scale * t.sample(rng)).collect()
        }
    }
}

fn linear_predictor(x: &Array2<f64>, beta: &[f64]) -> Vec<f64> {
    x.rows()
        .into_iter()
        .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect()
}

/// Covariance with `tau2` on the diagonal and `rho^|i-j|` off it
/// (optionally scaled by `tau2`).
fn ar_covariance(dim: usize, tau2: f64, rho: f64, scale_offdiag: bool) -> Vec<f64> {
    let mut a = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            a[i * dim + j] = if i == j {
                tau2
            } else {
                let base = rho.powi((i as i64 - j as i64).unsigned_abs() as i32);
                if scale_offdiag {
                    tau2 * base
                } else {
                    base
                }
            };
        }
    }
    a
}

fn cholesky_lower(a: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..j {
                s += l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                let pivot = a[i * dim + i] - s;
                if pivot <= 0.0 {
                    return None;
                }
                l[i * dim + j] = pivot.sqrt();
            } else {
                l[i * dim + j] = (a[i * dim + j] - s) / l[j * dim + j];
            }
        }
    }
    Some(l)
}

fn correlated_effects(
    rng: &mut ChaCha8Rng,
    dim: usize,
    tau2: f64,
    rho: f64,
    scale_offdiag: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let innovations: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let psi = ar_covariance(dim, tau2, rho, scale_offdiag);
    if tau2 == 0.0 && (rho == 0.0 || scale_offdiag) {
        return Ok((vec![0.0; dim], psi));
    }
    let l = cholesky_lower(&psi, dim).ok_or(Error::NotPositiveDefinite { tau2, rho })?;
    let mut u = vec![0.0; dim];
    for i in 0..dim {
        let mut acc = 0.0;
        for k in 0..=i {
            acc += l[i * dim + k] * innovations[k];
        }
        u[i] = acc;
    }
    Ok((u, psi))
}

fn as_rows(flat: &[f64], dim: usize) -> Vec<Vec<f64>> {
    flat.chunks(dim).map(|r| r.to_vec()).collect()
}

/// Generate a dataset from the given scenario.
pub fn generate(scenario: Scenario, cfg: &LmmConfig, seed: u64) -> Result<Dataset> {
    cfg.validate(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_cluster = cfg.n / cfg.clusters;
    let clusters = ClusterAssignment::balanced(cfg.clusters, per_cluster)?;
    let labels = clusters.labels().to_vec();

    let x = draw_covariates(&mut rng, cfg);
    let mut beta = draw_beta(&mut rng, cfg)?;
    let mut eta = linear_predictor(&x, &beta);
    if scenario == Scenario::NonlinearFixed {
        // log|eta| blows up on an exactly-zero predictor; redraw the
        // coefficients in that probability-zero event.
        let mut attempts = 0;
        while eta.iter().any(|v| v.abs() < 1e-300) {
            attempts += 1;
            if attempts > 64 {
                return Err(Error::InvalidConfig(
                    "could not draw coefficients with a nonzero linear predictor".to_string(),
                ));
            }
            beta = draw_beta(&mut rng, cfg)?;
            eta = linear_predictor(&x, &beta);
        }
    }

    let (u, psi): (Vec<f64>, Option<Vec<Vec<f64>>>) = match scenario {
        Scenario::RandomIntercept | Scenario::NonlinearFixed | Scenario::NonlinearMixed => {
            let sd = cfg.tau2.sqrt();
            let u: Vec<f64> = (0..cfg.clusters)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (u, None)
        }
        Scenario::CorrelatedIntercepts => {
            let (u, psi) = correlated_effects(
                &mut rng,
                cfg.clusters,
                cfg.tau2,
                cfg.rho,
                cfg.scale_offdiag_by_tau2,
            )?;
            (u, Some(as_rows(&psi, cfg.clusters)))
        }
        Scenario::RandomSlopes => {
            let dim = cfg.slopes + 1;
            let mut u = Vec::with_capacity(cfg.clusters * dim);
            let mut psi = None;
            for _ in 0..cfg.clusters {
                let (us, p) = correlated_effects(
                    &mut rng,
                    dim,
                    cfg.tau2,
                    cfg.rho,
                    cfg.scale_offdiag_by_tau2,
                )?;
                u.extend(us);
                psi.get_or_insert_with(|| as_rows(&p, dim));
            }
            (u, psi)
        }
    };

    let noise = draw_noise(&mut rng, cfg);

    let y: Vec<f64> = match scenario {
        Scenario::RandomIntercept | Scenario::CorrelatedIntercepts => (0..cfg.n)
            .map(|i| eta[i] + u[labels[i]] + noise[i])
            .collect(),
        Scenario::RandomSlopes => {
            let dim = cfg.slopes + 1;
            (0..cfg.n)
                .map(|i| {
                    let s = labels[i];
                    let us = &u[s * dim..(s + 1) * dim];
                    let mut effect = us[0];
                    for m in 0..cfg.slopes {
                        effect += x[[i, m]] * us[m + 1];
                    }
                    eta[i] + effect + noise[i]
                })
                .collect()
        }
        Scenario::NonlinearFixed => (0..cfg.n)
            .map(|i| eta[i].abs().ln() + u[labels[i]] + noise[i])
            .collect(),
        Scenario::NonlinearMixed => (0..cfg.n)
            .map(|i| {
                let us = u[labels[i]];
                (1.0 + us) / (1.0 + (-(eta[i] + us)).exp()) + noise[i]
            })
            .collect(),
    };

    Ok(Dataset {
        x,
        y,
        clusters,
        truth: GroundTruth {
            scenario: scenario.code().to_string(),
            seed,
            config: cfg.clone(),
            beta,
            u,
            psi,
        },
    })
}

/// Graph, method, and seeding choices shared by all experiment runs.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub graph: GraphKind,
    pub method: Method,
    /// Permutation count per trial.
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            graph: GraphKind::Kmst { k: 20 },
            method: Method::Both,
            permutations: 2000,
            alpha: 0.05,
            seed: 1,
        }
    }
}

fn build_graph(kind: GraphKind, x: &Array2<f64>) -> Result<SimilarityGraph> {
    let dm = compute_distances(x)?;
    match kind {
        GraphKind::Kmst { k } => build_kmst(&dm, k),
        GraphKind::Knn { k } => build_knn(&dm, k),
    }
}

/// One generate-then-test cycle, serialized into experiment logs.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub z: f64,
    pub v: f64,
    pub p_asymptotic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_permutation: Option<f64>,
    pub t_per_cluster: Vec<f64>,
}

fn run_trial(
    scenario: Scenario,
    cfg: &LmmConfig,
    settings: &RunSettings,
    trial: usize,
    trial_seed: u64,
) -> Result<TrialRecord> {
    let ds = generate(scenario, cfg, mix_seed(trial_seed, 0))?;
    let graph = build_graph(settings.graph, &ds.x)?;
    let ranks = compute_normalized_ranks(&ds.y)?;
    let opts = TestOptions {
        method: settings.method,
        permutations: settings.permutations,
        seed: mix_seed(trial_seed, 1),
        diagnostics: false,
    };
    let result = run_test(&graph, &ranks, &ds.clusters, &opts)?;
    Ok(TrialRecord {
        trial,
        seed: trial_seed,
        z: result.z,
        v: result.v,
        p_asymptotic: result.p_asymptotic,
        p_permutation: result.p_permutation,
        t_per_cluster: result.t_per_cluster,
    })
}

fn run_cell(
    scenario: Scenario,
    cfg: &LmmConfig,
    settings: &RunSettings,
    cell_seed: u64,
    trials: usize,
) -> Result<Vec<TrialRecord>> {
    if trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".to_string()));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| run_trial(scenario, cfg, settings, t, mix_seed(cell_seed, t as u64)))
        .collect()
}

/// Rejection count, rate, and binomial Monte Carlo standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateSummary {
    pub rejections: usize,
    pub rate: f64,
    pub mc_se: f64,
}

fn summarize<F: Fn(&TrialRecord) -> Option<f64>>(
    records: &[TrialRecord],
    alpha: f64,
    p_of: F,
) -> Option<RateSummary> {
    let ps: Vec<f64> = records.iter().map_while(p_of).collect();
    if ps.len() != records.len() {
        return None;
    }
    let rejections = ps.iter().filter(|&&p| p <= alpha).count();
    let rate = rejections as f64 / records.len() as f64;
    Some(RateSummary {
        rejections,
        rate,
        mc_se: (rate * (1.0 - rate) / records.len() as f64).sqrt(),
    })
}

/// Result of a null-calibration run.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub trials: usize,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<RateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation: Option<RateSummary>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

/// Repeated generate-test cycles under the null (`tau2` must be zero);
/// reports rejection proportions for the requested methods.
pub fn run_calibration(
    cfg: &LmmConfig,
    settings: &RunSettings,
    trials: usize,
) -> Result<CalibrationResult> {
    if cfg.tau2 != 0.0 {
        return Err(Error::InvalidConfig(format!(
            "calibration runs require tau2 = 0, got {}",
            cfg.tau2
        )));
    }
    let records = run_cell(Scenario::RandomIntercept, cfg, settings, settings.seed, trials)?;
    Ok(CalibrationResult {
        trials,
        alpha: settings.alpha,
        asymptotic: summarize(&records, settings.alpha, |r| Some(r.p_asymptotic)),
        permutation: summarize(&records, settings.alpha, |r| r.p_permutation),
        records,
    })
}

/// One grid point of a power study.
#[derive(Debug, Clone)]
pub struct PowerPoint {
    pub scenario: Scenario,
    pub cfg: LmmConfig,
}

/// One output row of a power study.
#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub clusters: usize,
    pub tau2: f64,
    pub rho: f64,
    pub q: usize,
    pub snr: f64,
    pub method: String,
    pub trials: usize,
    pub rejections: usize,
    pub power: f64,
    pub mc_se: f64,
}

/// Power rows plus the raw per-trial records per grid point.
#[derive(Debug, Clone)]
pub struct PowerOutcome {
    pub rows: Vec<PowerRow>,
    pub records_per_point: Vec<Vec<TrialRecord>>,
}

/// Run every grid point for `trials` trials each. With `Method::Both`,
/// each point yields one row per method.
pub fn run_power(
    points: &[PowerPoint],
    settings: &RunSettings,
    trials: usize,
) -> Result<PowerOutcome> {
    let mut rows = Vec::new();
    let mut records_per_point = Vec::with_capacity(points.len());
    for (idx, point) in points.iter().enumerate() {
        let cell_seed = mix_seed(settings.seed, idx as u64);
        let records = run_cell(point.scenario, &point.cfg, settings, cell_seed, trials)?;
        let mut push = |method: &str, summary: RateSummary| {
            rows.push(PowerRow {
                scenario: point.scenario.code().to_string(),
                n: point.cfg.n,
                p: point.cfg.p,
                clusters: point.cfg.clusters,
                tau2: point.cfg.tau2,
                rho: point.cfg.rho,
                q: point.cfg.slopes,
                snr: point.cfg.snr,
                method: method.to_string(),
                trials,
                rejections: summary.rejections,
                power: summary.rate,
                mc_se: summary.mc_se,
            });
        };
        match settings.method {
            Method::Asymptotic => {
                let s = summarize(&records, settings.alpha, |r| Some(r.p_asymptotic)).unwrap();
                push("asymptotic", s);
            }
            Method::Permutation | Method::Both => {
                if settings.method == Method::Both {
                    let s =
                        summarize(&records, settings.alpha, |r| Some(r.p_asymptotic)).unwrap();
                    push("asymptotic", s);
                }
                let s = summarize(&records, settings.alpha, |r| r.p_permutation)
                    .expect("permutation p-values present for this method");
                push("permutation", s);
            }
        }
        records_per_point.push(records);
    }
    Ok(PowerOutcome {
        rows,
        records_per_point,
    })
}
