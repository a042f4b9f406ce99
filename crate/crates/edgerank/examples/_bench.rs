use edgerank::graph::GraphKind;
use edgerank::simulate::{run_calibration, LmmConfig, RunSettings};
use edgerank::testing::Method;
use std::time::Instant;

fn main() {
    for (p, method, b, label) in [
        (100usize, Method::Asymptotic, 2000usize, "p=100 asym"),
        (500, Method::Asymptotic, 2000, "p=500 asym"),
        (100, Method::Both, 2000, "p=100 both B=2000"),
        (500, Method::Both, 2000, "p=500 both B=2000"),
    ] {
        let cfg = LmmConfig { n: 500, p, clusters: 5, tau2: 0.0, snr: 1.0, ..Default::default() };
        let settings = RunSettings { graph: GraphKind::Kmst { k: 20 }, method, permutations: b, alpha: 0.05, seed: 3 };
        let t0 = Instant::now();
        let trials = 5;
        let res = run_calibration(&cfg, &settings, trials).unwrap();
        let dt = t0.elapsed();
        println!("{label}: {:.0} ms/trial  (rate_asym = {:?})", dt.as_millis() as f64 / trials as f64, res.asymptotic.map(|r| r.rate));
    }
}
