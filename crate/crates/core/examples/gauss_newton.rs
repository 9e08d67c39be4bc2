//! Gauss–Newton from odometry on a grid scenario, next to the Huber 2-stage
//! relaxation.
//!
//! cargo run --release --example gauss_newton -- [p_out] [seed]

use robust_pgo::baselines::{gauss_newton, odometry_init, GNOptions};
use robust_pgo::estimate::{estimate, EstimateOptions, Method};
use robust_pgo::harness::{align_gauge, error_metrics};
use robust_pgo::synth::{generate, ScenarioConfig};

fn main() -> robust_pgo::Result<()> {
    let mut args = std::env::args().skip(1);
    let p_out: f64 = args.next().map_or(Ok(0.2), |s| s.parse()).expect("p_out");
    let seed: u64 = args.next().map_or(Ok(5), |s| s.parse()).expect("seed");
    let graph = generate(&ScenarioConfig::grid(4, 5).with_outliers(p_out).with_seed(seed))?;
    let truth = graph.ground_truth.clone().expect("ground truth");

    let init = odometry_init(&graph)?;
    let gn = gauss_newton(&graph, &init, &GNOptions::default())?;
    println!(
        "gauss-newton: cost {:.3} -> {:.3} in {} iterations (converged {})",
        gn.initial_cost, gn.cost, gn.iterations, gn.converged
    );
    let (t, r) = error_metrics(&align_gauge(&gn.poses, &truth)?, &truth)?;
    println!("  trans_err={t:.4}  rot_err={r:.5}");

    let huber: Method = "huber-2stage".parse()?;
    let est = estimate(&graph, huber, &EstimateOptions::default())?;
    let (t, r) = error_metrics(&align_gauge(&est.poses, &truth)?, &truth)?;
    println!("{huber}: trans_err={t:.4}  rot_err={r:.5}");
    Ok(())
}
