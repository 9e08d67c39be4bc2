//! Solves the joint (1-stage) relaxation and compares it with the 2-stage
//! pipeline on the same scenario.
//!
//! cargo run --release --example one_stage_solve -- [cost] [p_out]

use robust_pgo::costs::CostKind;
use robust_pgo::estimate::{estimate, EstimateOptions, Method};
use robust_pgo::harness::{align_gauge, error_metrics};
use robust_pgo::relax::{MethodSpec, Stages};
use robust_pgo::synth::{generate, ScenarioConfig};

fn main() -> robust_pgo::Result<()> {
    let mut args = std::env::args().skip(1);
    let cost: CostKind = args.next().map_or(Ok(CostKind::L1), |s| s.parse()).expect("cost");
    let p_out: f64 = args.next().map_or(Ok(0.3), |s| s.parse()).expect("p_out");
    let graph = generate(&ScenarioConfig::erdos_renyi(20, 0.5).with_outliers(p_out).with_seed(3))?;
    let truth = graph.ground_truth.clone().expect("ground truth");
    let opts = EstimateOptions::default();

    for stages in [Stages::OneStage, Stages::TwoStage] {
        let method = Method::Relaxation(MethodSpec::new(stages, cost));
        let est = estimate(&graph, method, &opts)?;
        let (t_err, r_err) = error_metrics(&align_gauge(&est.poses, &truth)?, &truth)?;
        let d = est.diagnostics.expect("diagnostics");
        println!(
            "{:<13} trans_err={t_err:.4}  rot_err={r_err:.5}  rank(RR)={:<3} rank(X)={:<3} relaxed={:.3}  rounded={:.3}  iterations={}",
            method.to_string(),
            d.numeric_rank, d.lifted_rank, d.relaxed_cost, d.rounded_cost, est.iterations
        );
    }
    Ok(())
}
