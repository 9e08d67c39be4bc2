//! A small Monte Carlo experiment: a plan of scenarios and outlier rates,
//! run in parallel, written as per-run rows and a summary.
//!
//! cargo run --release --example monte_carlo -- [out_dir] [runs]

use std::path::PathBuf;

use robust_pgo::estimate::Method;
use robust_pgo::harness::{run_experiment, ExperimentPlan};
use robust_pgo::synth::ScenarioConfig;

fn main() -> robust_pgo::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "experiment".into()));
    let runs: usize = args.next().map_or(Ok(3), |s| s.parse()).expect("runs");
    std::fs::create_dir_all(&out)?;

    let plan = ExperimentPlan {
        scenarios: vec![ScenarioConfig::erdos_renyi(15, 0.5)],
        p_out: vec![0.0, 0.2],
        methods: vec!["l2-2stage".parse()?, "huber-2stage".parse()?, Method::GaussNewton],
        runs,
        seed: 2024,
        output: Some(out.join("results.csv")),
        summary: Some(out.join("summary.csv")),
        ..ExperimentPlan::default()
    };
    std::fs::write(out.join("plan.toml"), plan.to_toml()?)?;
    let results = run_experiment(&plan, None)?;
    results.save(&plan)?;

    for s in &results.summary {
        println!(
            "p_out={:.1} {:<13} trans_err={:.4}±{:.4}  rot_err={:.5}",
            s.p_out,
            s.method,
            s.trans_err_mean.unwrap_or(f64::NAN),
            s.trans_err_std.unwrap_or(f64::NAN),
            s.rot_err_mean.unwrap_or(f64::NAN)
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
