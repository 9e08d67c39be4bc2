//! Checks the 2-stage rotation pipeline against exhaustive grid search on
//! tiny rotation-only instances.
//!
//! cargo run --release --example brute_force_oracle -- [instances] [p_out] [steps]

use robust_pgo::brute::{grid_search, integer_degree_instance};
use robust_pgo::costs::CostKind;
use robust_pgo::estimate::{rotation_pipeline, EstimateOptions};

fn main() -> robust_pgo::Result<()> {
    let mut args = std::env::args().skip(1);
    let instances: u64 = args.next().map_or(Ok(5), |s| s.parse()).expect("instances");
    let p_out: f64 = args.next().map_or(Ok(0.3), |s| s.parse()).expect("p_out");
    let steps: usize = args.next().map_or(Ok(360), |s| s.parse()).expect("steps");
    let opts = EstimateOptions::default();

    println!("seed  n  cost   grid_optimum  relaxation  relaxed_bound");
    for seed in 0..instances {
        let n = 3 + (seed % 2) as usize;
        let graph = integer_degree_instance(n, p_out, seed)?;
        for cost in CostKind::ROBUST {
            let grid = grid_search(&graph, cost, steps)?;
            let sol = rotation_pipeline(cost, &graph, &opts.sdp)?;
            println!(
                "{seed:>4}  {n}  {:<5}  {:>12.6}  {:>10.6}  {:>13.6}",
                cost.name(),
                grid.cost,
                sol.rounded_cost,
                sol.relaxed_cost
            );
        }
    }
    Ok(())
}
