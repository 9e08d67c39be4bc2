//! Exhaustive grid search over rotation angles for tiny rotation-only
//! instances.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{rotation_term, CostKind};
use crate::error::{Error, Result};
use crate::geometry::{Pose2, Rotation2};
use crate::posegraph::{MeasurementEdge, PoseGraph};

/// Largest number of configurations a search may visit.
pub const MAX_CONFIGURATIONS: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    /// Angles of the best configuration, radians, with pose 0 at zero.
    pub angles: Vec<f64>,
    pub cost: f64,
    /// Grid points per full turn.
    pub steps: usize,
}

/// Minimizes the rotation cost over angles on a grid of `steps` points per
/// turn, with pose 0 fixed at angle zero.
pub fn grid_search(graph: &PoseGraph, cost: CostKind, steps: usize) -> Result<GridOptimum> {
    graph.ensure_valid()?;
    let n = graph.n;
    if steps == 0 {
        return Err(Error::Config("grid needs at least one step".into()));
    }
    let free = n.saturating_sub(1) as u32;
    if (steps as u64).checked_pow(free).is_none_or(|c| c > MAX_CONFIGURATIONS) {
        return Err(Error::Config(format!("{steps}^{free} configurations exceed the search budget")));
    }
    let h = std::f64::consts::TAU / steps as f64;
    // each edge cost depends only on the grid offset θⱼ − θᵢ
    let tables: Vec<Vec<f64>> = graph
        .edges
        .iter()
        .map(|e| {
            (0..steps)
                .map(|d| {
                    let r = Rotation2::from_angle(d as f64 * h).expect("finite angle");
                    rotation_term(cost, e.w_r, &(r.matrix() - e.rel_rotation.matrix()))
                })
                .collect()
        })
        .collect();
    let eval = |idx: &[usize]| -> f64 {
        graph
            .edges
            .iter()
            .zip(&tables)
            .map(|(e, t)| t[(idx[e.to] + steps - idx[e.from]) % steps])
            .sum()
    };
    let search = |first: usize| -> (f64, Vec<usize>) {
        let mut idx = vec![0usize; n];
        if n > 1 {
            idx[1] = first;
        }
        let mut best = (eval(&idx), idx.clone());
        // odometer over poses 2..n
        loop {
            let mut k = 2;
            while k < n {
                idx[k] += 1;
                if idx[k] < steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k >= n {
                return best;
            }
            let c = eval(&idx);
            if c < best.0 {
                best = (c, idx.clone());
            }
        }
    };
    let firsts = if n > 1 { steps } else { 1 };
    let (cost_min, idx) = (0..firsts)
        .into_par_iter()
        .map(search)
        .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
        .expect("at least one configuration");
    Ok(GridOptimum {
        angles: idx.iter().map(|&i| i as f64 * h).collect(),
        cost: cost_min,
        steps,
    })
}

/// Rotation-only instance on the complete graph with every angle a whole
/// number of degrees: inlier noise of a few degrees and, with probability
/// `p_out`, a uniformly random measurement. Translations are zero.
pub fn integer_degree_instance(n: usize, p_out: f64, seed: u64) -> Result<PoseGraph> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::<f64>::new(0.0, 3.0).expect("valid sigma");
    let deg = |d: i64| Rotation2::from_angle((d.rem_euclid(360) as f64).to_radians()).expect("finite angle");
    let truth: Vec<i64> = (0..n).map(|_| rng.gen_range(0..360)).collect();
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let outlier = rng.gen_bool(p_out);
            let d = if outlier {
                rng.gen_range(0..360)
            } else {
                truth[j] - truth[i] + noise.sample(&mut rng).round() as i64
            };
            let rel = Pose2::new(deg(d), Vector2::zeros());
            edges.push(MeasurementEdge::new(i, j, rel, 1.0, 1.0));
            labels.push(outlier);
        }
    }
    let mut g = PoseGraph::new(n, edges);
    g.ground_truth = Some(truth.iter().map(|&d| Pose2::new(deg(d), Vector2::zeros())).collect());
    g.outlier_labels = Some(labels);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::eval_rotation_cost;

    #[test]
    fn consistent_instance_has_zero_optimum() {
        let g = integer_degree_instance(3, 0.0, 1).unwrap();
        let mut g = g;
        let gt = g.ground_truth.clone().unwrap();
        for e in g.edges.iter_mut() {
            e.rel_rotation = gt[e.from].rotation.between(&gt[e.to].rotation);
        }
        for cost in CostKind::ROBUST {
            let opt = grid_search(&g, cost, 360).unwrap();
            assert!(opt.cost < 1e-12, "{cost}: {}", opt.cost);
        }
    }

    #[test]
    fn optimum_matches_reported_angles() {
        let g = integer_degree_instance(4, 0.3, 7).unwrap();
        let opt = grid_search(&g, CostKind::L1, 90).unwrap();
        let rots: Vec<Rotation2> = opt.angles.iter().map(|&a| Rotation2::from_angle(a).unwrap()).collect();
        assert!((eval_rotation_cost(CostKind::L1, &g, &rots) - opt.cost).abs() < 1e-9);
        assert_eq!(opt.angles[0], 0.0);
    }

    #[test]
    fn coarse_search_matches_naive_enumeration() {
        let g = integer_degree_instance(3, 0.5, 3).unwrap();
        let steps = 24;
        let opt = grid_search(&g, CostKind::Huber, steps).unwrap();
        let h = std::f64::consts::TAU / steps as f64;
        let mut best = f64::INFINITY;
        for a in 0..steps {
            for b in 0..steps {
                let rots = [0.0, a as f64 * h, b as f64 * h].map(|t| Rotation2::from_angle(t).unwrap());
                best = best.min(eval_rotation_cost(CostKind::Huber, &g, &rots));
            }
        }
        assert!((opt.cost - best).abs() < 1e-12);
    }

    #[test]
    fn oversized_search_rejected() {
        let g = integer_degree_instance(6, 0.0, 0).unwrap();
        assert!(matches!(grid_search(&g, CostKind::L2, 360), Err(Error::Config(_))));
    }

    #[test]
    fn instances_are_reproducible() {
        let a = integer_degree_instance(4, 0.25, 11).unwrap();
        let b = integer_degree_instance(4, 0.25, 11).unwrap();
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.m(), 6);
    }
}
