//! Reads a g2o file (or a generated scenario), solves it and writes the
//! estimate back as g2o.
//!
//! cargo run --release --example g2o_roundtrip -- [input.g2o] [output.g2o]

use robust_pgo::estimate::{estimate, EstimateOptions, Method};
use robust_pgo::posegraph::{parse_g2o, write_g2o};
use robust_pgo::synth::{generate, ScenarioConfig};

fn main() -> robust_pgo::Result<()> {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => {
            let g = generate(&ScenarioConfig::grid(3, 4).with_outliers(0.1).with_seed(2))?;
            write_g2o(&g, &g.ground_truth.clone().expect("ground truth"))?
        }
    };
    let doc = parse_g2o(&text)?;
    println!("read {} vertices and {} edges", doc.graph.n, doc.graph.m());

    let method: Method = "huber-2stage".parse()?;
    let est = estimate(&doc.graph, method, &EstimateOptions::default())?;
    let out = write_g2o(&doc.graph, &est.poses)?;

    // the writer keeps 17 significant digits, so a second pass agrees to rounding
    let again = parse_g2o(&out)?;
    let drift = again
        .graph
        .edges
        .iter()
        .zip(&doc.graph.edges)
        .map(|(a, b)| (a.rel_translation - b.rel_translation).norm())
        .fold(0.0, f64::max);
    println!("largest translation change after a second pass: {drift:.1e} m");
    match args.next() {
        Some(path) => {
            std::fs::write(&path, out)?;
            println!("wrote {path}");
        }
        None => print!("{}", out.lines().take(4).collect::<Vec<_>>().join("\n") + "\n...\n"),
    }
    Ok(())
}
