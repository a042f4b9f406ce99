//! Slower simulation checks: generator calibration against reference
//! rejection rates and the direction of the within-cluster statistic.

use edgerank::graph::GraphKind;
use edgerank::simulate::{
    generate, run_calibration, run_power, LmmConfig, PowerPoint, RunSettings, Scenario,
};
use edgerank::testing::Method;

#[test]
fn random_slope_power_exceeds_reference_floor() {
    // Reference: power 0.83 at q = 5, tau2 = 1, I = 5, p = 500, N = 500.
    // Asymptotic p-values are used here to keep the runtime down; they
    // track the permutation p-values to within 0.03.
    let point = PowerPoint {
        scenario: Scenario::RandomSlopes,
        cfg: LmmConfig {
            n: 500,
            p: 500,
            clusters: 5,
            tau2: 1.0,
            snr: 5.0,
            rho: 0.5,
            slopes: 5,
            ..Default::default()
        },
    };
    let settings = RunSettings {
        graph: GraphKind::Kmst { k: 20 },
        method: Method::Asymptotic,
        permutations: 1,
        alpha: 0.05,
        seed: 12,
    };
    let outcome = run_power(std::slice::from_ref(&point), &settings, 100).unwrap();
    let power = outcome.rows[0].power;
    assert!(power >= 0.7, "scenario-3 power {power} below 0.7");
}

#[test]
fn log_transformed_null_is_calibrated() {
    // tau2 = 0 under the log|x beta| model: rejection rate stays near the
    // nominal level.
    let point = PowerPoint {
        scenario: Scenario::NonlinearFixed,
        cfg: LmmConfig {
            n: 200,
            p: 50,
            clusters: 5,
            tau2: 0.0,
            snr: 4.0,
            ..Default::default()
        },
    };
    let settings = RunSettings {
        graph: GraphKind::Kmst { k: 20 },
        method: Method::Asymptotic,
        permutations: 1,
        alpha: 0.05,
        seed: 4,
    };
    let outcome = run_power(std::slice::from_ref(&point), &settings, 200).unwrap();
    let rate = outcome.rows[0].power;
    assert!(
        (0.01..=0.105).contains(&rate),
        "null rejection rate {rate} far from 0.05"
    );
}

#[test]
fn within_cluster_statistic_shrinks_under_alternative() {
    // The within-cluster edge-rank sum is visibly smaller when a real
    // random effect is present.
    let settings = RunSettings {
        graph: GraphKind::Kmst { k: 1 },
        method: Method::Asymptotic,
        permutations: 1,
        alpha: 0.05,
        seed: 6,
    };
    let mean_v = |tau2: f64| {
        let point = PowerPoint {
            scenario: Scenario::RandomIntercept,
            cfg: LmmConfig {
                n: 200,
                p: 200,
                clusters: 4,
                tau2,
                snr: 5.0,
                ..Default::default()
            },
        };
        let outcome = run_power(std::slice::from_ref(&point), &settings, 15).unwrap();
        let recs = &outcome.records_per_point[0];
        recs.iter().map(|r| r.v).sum::<f64>() / recs.len() as f64
    };
    let v_null = mean_v(0.0);
    let v_alt = mean_v(4.0);
    assert!(
        v_alt < v_null,
        "mean V under alternative ({v_alt}) not below null ({v_null})"
    );
}

#[test]
fn calibration_reports_both_methods() {
    let cfg = LmmConfig {
        n: 100,
        p: 20,
        clusters: 5,
        tau2: 0.0,
        snr: 1.0,
        ..Default::default()
    };
    let settings = RunSettings {
        graph: GraphKind::Kmst { k: 5 },
        method: Method::Both,
        permutations: 200,
        alpha: 0.05,
        seed: 2,
    };
    let res = run_calibration(&cfg, &settings, 20).unwrap();
    let asym = res.asymptotic.unwrap();
    let perm = res.permutation.unwrap();
    assert_eq!(res.records.len(), 20);
    assert!(asym.rate <= 0.3 && perm.rate <= 0.3);
    // Per-trial records expose the per-cluster statistics.
    assert!(res.records.iter().all(|r| r.t_per_cluster.len() == 5));
}

#[test]
fn generators_are_seed_deterministic_end_to_end() {
    for scenario in [
        Scenario::RandomIntercept,
        Scenario::CorrelatedIntercepts,
        Scenario::RandomSlopes,
        Scenario::NonlinearFixed,
        Scenario::NonlinearMixed,
    ] {
        let cfg = LmmConfig {
            n: 24,
            p: 6,
            clusters: 4,
            tau2: 1.0,
            snr: 2.0,
            rho: if scenario == Scenario::CorrelatedIntercepts
                || scenario == Scenario::RandomSlopes
            {
                0.4
            } else {
                0.0
            },
            slopes: if scenario == Scenario::RandomSlopes { 2 } else { 0 },
            ..Default::default()
        };
        let a = generate(scenario, &cfg, 55).unwrap();
        let b = generate(scenario, &cfg, 55).unwrap();
        assert_eq!(a.y, b.y, "{scenario:?} not deterministic");
        assert_eq!(a.x, b.x);
    }
}
