//! Flags outliers from the residuals of an estimate and sweeps the
//! thresholds into a precision/recall curve.
//!
//! cargo run --release --example outlier_detection -- [method] [out.csv]

use robust_pgo::detect::{best_balanced, detect, pr_area, pr_sweep, residuals, write_pr_csv, ThresholdGrid};
use robust_pgo::estimate::{estimate, EstimateOptions, Method};
use robust_pgo::synth::{generate, ScenarioConfig};

fn main() -> robust_pgo::Result<()> {
    let mut args = std::env::args().skip(1);
    let method: Method = args.next().map_or(Ok("l1-2stage".parse()?), |s| s.parse())?;
    let out = args.next();
    let graph = generate(&ScenarioConfig::erdos_renyi(20, 0.5).with_outliers(0.2).with_seed(11))?;
    let labels = graph.outlier_labels.clone().expect("synthetic labels");
    let est = estimate(&graph, method, &EstimateOptions::default())?;

    // single operating point: 0.5 m and 5 degrees
    let d = detect(&graph, &est.poses, 0.5, 5f64.to_radians())?;
    let counts = d.counts.expect("labels are present");
    println!(
        "{method}: flagged {} of {} edges, precision {:.3}, recall {:.3}",
        d.predicted.iter().filter(|&&f| f).count(),
        graph.m(),
        counts.precision(),
        counts.recall().unwrap_or(f64::NAN)
    );

    let points = pr_sweep(&residuals(&graph, &est.poses)?, &labels, &ThresholdGrid::default())?;
    println!(
        "sweep of {} thresholds: area {:.3}, best min(P, R) {:.3}",
        points.len(),
        pr_area(&points).unwrap_or(f64::NAN),
        best_balanced(&points).unwrap_or(f64::NAN)
    );
    if let Some(path) = out {
        write_pr_csv(std::fs::File::create(&path)?, &[(method.to_string(), points)])?;
        println!("wrote {path}");
    }
    Ok(())
}
