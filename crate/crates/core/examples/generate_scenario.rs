//! Generates one scenario per topology and writes each as g2o and JSON.
//!
//! cargo run --release --example generate_scenario -- [out_dir]

use std::path::PathBuf;

use robust_pgo::posegraph::write_g2o;
use robust_pgo::synth::{generate, ScenarioConfig};

fn main() -> robust_pgo::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    std::fs::create_dir_all(&out)?;
    let configs = [
        ("erdos_renyi", ScenarioConfig::erdos_renyi(20, 0.5)),
        ("geometric", ScenarioConfig::geometric(30)),
        ("grid", ScenarioConfig::grid(4, 5)),
    ];
    for (name, config) in configs {
        let graph = generate(&config.with_outliers(0.2).with_seed(7))?;
        let truth = graph.ground_truth.clone().expect("synthetic graphs carry ground truth");
        let outliers = graph.outlier_labels.as_ref().map_or(0, |l| l.iter().filter(|&&o| o).count());
        std::fs::write(out.join(format!("{name}.g2o")), write_g2o(&graph, &truth)?)?;
        graph.save(out.join(format!("{name}.json")))?;
        println!("{name:<12} n={:<3} m={:<4} outliers={outliers}", graph.n, graph.m());
    }
    println!("wrote {}", out.display());
    Ok(())
}
