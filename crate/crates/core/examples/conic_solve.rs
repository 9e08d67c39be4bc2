//! Low-level use of the conic solver: the nearest unit-diagonal PSD matrix
//! to a set of inconsistent pairwise targets under an absolute-value fit.
//!
//! cargo run --release --example conic_solve -- [log.csv]

use nalgebra::DMatrix;
use robust_pgo::sdp::{self, Cone, ConicProblem, FixedBlock, PenaltyKind, PenaltyTerm, SliceRow, SolveOptions};

fn main() -> robust_pgo::Result<()> {
    // pairwise targets no correlation matrix can match at once
    let targets = [(0, 1, 0.9), (1, 2, 0.9), (0, 2, -0.9)];
    let mut problem = ConicProblem::new(3, Cone::Psd);
    for (i, j, c) in targets {
        problem.terms.push(PenaltyTerm {
            kind: PenaltyKind::L1Norm,
            weight: 1.0,
            rows: vec![SliceRow::entry(i, j, c)],
        });
    }
    for i in 0..3 {
        problem.fixed_blocks.push(FixedBlock {
            row: i,
            col: i,
            value: DMatrix::from_element(1, 1, 1.0),
        });
    }

    let opts = SolveOptions {
        record_history: true,
        ..SolveOptions::default()
    };
    let report = sdp::solve(&problem, &opts);
    println!(
        "converged={} after {} iterations, objective {:.6}",
        report.converged, report.iterations, report.objective
    );
    println!("X =\n{:.4}", report.x_hat);
    println!("eigenvalues {:?}", report.eigenvalues.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>());
    if let Some(path) = std::env::args().nth(1) {
        report.write_log_csv(std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
