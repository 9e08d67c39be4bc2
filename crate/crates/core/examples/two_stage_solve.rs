//! Solves a contaminated scenario with each 2-stage relaxation and reports
//! the errors after gauge alignment.
//!
//! cargo run --release --example two_stage_solve -- [p_out] [seed]

use robust_pgo::costs::CostKind;
use robust_pgo::estimate::{estimate, EstimateOptions, Method};
use robust_pgo::harness::{align_gauge, error_metrics};
use robust_pgo::relax::{MethodSpec, Stages};
use robust_pgo::synth::{generate, ScenarioConfig};

fn main() -> robust_pgo::Result<()> {
    let mut args = std::env::args().skip(1);
    let p_out: f64 = args.next().map_or(Ok(0.2), |s| s.parse()).expect("p_out");
    let seed: u64 = args.next().map_or(Ok(1), |s| s.parse()).expect("seed");
    let graph = generate(&ScenarioConfig::erdos_renyi(20, 0.5).with_outliers(p_out).with_seed(seed))?;
    let truth = graph.ground_truth.clone().expect("ground truth");
    let opts = EstimateOptions::default();

    for cost in CostKind::ROBUST {
        let method = Method::Relaxation(MethodSpec::new(Stages::TwoStage, cost));
        let est = estimate(&graph, method, &opts)?;
        let (t_err, r_err) = error_metrics(&align_gauge(&est.poses, &truth)?, &truth)?;
        let d = est.diagnostics.expect("diagnostics");
        println!(
            "{:<13} trans_err={t_err:.4} m  rot_err={r_err:.5} rad  stable_rank={:.4}  converged={}",
            method.to_string(),
            d.stable_rank,
            est.converged
        );
    }
    Ok(())
}
