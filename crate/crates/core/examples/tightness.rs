//! Rank diagnostics of every relaxation on a batch of seeded scenarios.
//!
//! cargo run --release --example tightness -- [n] [p_out] [runs]

use std::time::Instant;

use robust_pgo::estimate::{estimate, EstimateOptions, Method};
use robust_pgo::synth::{generate, ScenarioConfig};

fn main() -> robust_pgo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(Ok(20), |s| s.parse()).expect("n");
    let p_out: f64 = args.get(1).map_or(Ok(0.2), |s| s.parse()).expect("p_out");
    let runs: u64 = args.get(2).map_or(Ok(3), |s| s.parse()).expect("runs");
    let opts = EstimateOptions::default();

    println!("method        run  stable_rank  rank(RR)  rank(X)  tight  gap_bound   ms");
    for method in Method::ALL.into_iter().filter(|m| m.spec().is_some()) {
        for run in 0..runs {
            let config = ScenarioConfig::erdos_renyi(n, 0.5).with_outliers(p_out).with_seed(run);
            let graph = generate(&config)?;
            let start = Instant::now();
            let est = estimate(&graph, method, &opts)?;
            let ms = start.elapsed().as_millis();
            let d = est.diagnostics.expect("relaxations report diagnostics");
            println!(
                "{:<13} {run:>3}  {:>11.4}  {:>8}  {:>7}  {:>5}  {:>9.2e}  {ms:>5}",
                method.to_string(),
                d.stable_rank,
                d.numeric_rank,
                d.lifted_rank,
                d.tight,
                d.subopt_gap_bound,
            );
        }
    }
    Ok(())
}
