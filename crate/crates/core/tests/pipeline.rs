use proptest::prelude::*;

use robust_pgo::costs::{eval_cost, CostKind};
use robust_pgo::estimate::{estimate, EstimateOptions, Method};
use robust_pgo::geometry::Pose2;
use robust_pgo::harness::{align_gauge, error_metrics, run_trial, TrialOptions};
use robust_pgo::posegraph::{parse_g2o, write_g2o};
use robust_pgo::synth::{generate, ScenarioConfig};

fn method(s: &str) -> Method {
    s.parse().unwrap()
}

#[test]
fn huber_two_stage_beats_gauss_newton_on_rotations() {
    // paired runs on contaminated Erdős–Rényi graphs
    let opts = TrialOptions::default();
    let (mut huber, mut gn) = (0.0, 0.0);
    for seed in 0..3 {
        let config = ScenarioConfig::erdos_renyi(20, 0.5).with_outliers(0.3).with_seed(seed);
        let t = run_trial(&config, &[method("huber-2stage"), Method::GaussNewton], &opts);
        huber += t.get(method("huber-2stage")).unwrap().rot_err.unwrap();
        gn += t.get(Method::GaussNewton).unwrap().rot_err.unwrap();
    }
    assert!(huber < gn, "huber {huber} vs gn {gn}");
}

#[test]
fn rounded_cost_bounds_relaxed_cost() {
    let g = generate(&ScenarioConfig::erdos_renyi(12, 0.5).with_outliers(0.2).with_seed(8)).unwrap();
    for m in ["l1-2stage", "l2-2stage", "huber-2stage", "l2-1stage"] {
        let est = estimate(&g, method(m), &EstimateOptions::default()).unwrap();
        let d = est.diagnostics.unwrap();
        assert!(d.rounded_cost >= d.relaxed_cost - 1e-6, "{m}: {} < {}", d.rounded_cost, d.relaxed_cost);
        assert!(d.subopt_gap_bound >= -1e-6);
    }
}

#[test]
fn one_stage_objective_is_the_full_pose_cost() {
    let g = generate(&ScenarioConfig::erdos_renyi(10, 0.6).with_outliers(0.1).with_seed(2)).unwrap();
    let est = estimate(&g, method("l2-1stage"), &EstimateOptions::default()).unwrap();
    let d = est.diagnostics.unwrap();
    let direct = eval_cost(CostKind::L2, &g, &est.poses);
    assert!((d.rounded_cost - direct).abs() < 1e-9 * direct.max(1.0));
}

#[test]
fn g2o_round_trip_keeps_estimates() {
    let g = generate(&ScenarioConfig::grid(3, 3).with_outliers(0.2).with_seed(6)).unwrap();
    let est = estimate(&g, method("l2-2stage"), &EstimateOptions::default()).unwrap();
    let doc = parse_g2o(&write_g2o(&g, &est.poses).unwrap()).unwrap();
    for (a, b) in doc.graph.edges.iter().zip(&g.edges) {
        assert_eq!((a.from, a.to), (b.from, b.to));
        assert!((a.rel_translation - b.rel_translation).norm() < 1e-12);
        assert!(a.rel_rotation.between(&b.rel_rotation).angle().abs() < 1e-12);
        assert!((a.w_t - b.w_t).abs() < 1e-12 && (a.w_r - b.w_r).abs() < 1e-12);
    }
    for (a, b) in doc.initial.iter().zip(&est.poses) {
        assert!((a.translation - b.translation).norm() < 1e-12);
        assert!(a.rotation.between(&b.rotation).angle().abs() < 1e-12);
    }
}

#[test]
fn tolerance_option_loosens_every_solve() {
    let g = generate(&ScenarioConfig::erdos_renyi(10, 0.5).with_outliers(0.2).with_seed(1)).unwrap();
    let tight = estimate(&g, method("l2-2stage"), &EstimateOptions::default()).unwrap();
    let loose = estimate(&g, method("l2-2stage"), &EstimateOptions::default().with_tolerance(1e-4)).unwrap();
    assert!(loose.iterations < tight.iterations);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Estimates are defined up to a global pose: moving the reference
    /// leaves the aligned errors unchanged.
    #[test]
    fn aligned_errors_ignore_the_gauge(seed in 0u64..1000, x in -20.0..20.0f64, y in -20.0..20.0f64, th in -3.0..3.0f64) {
        let g = generate(&ScenarioConfig::erdos_renyi(8, 0.6).with_outliers(0.1).with_seed(seed)).unwrap();
        let truth = g.ground_truth.clone().unwrap();
        let est = estimate(&g, Method::GaussNewton, &EstimateOptions::default()).unwrap();
        let gauge = Pose2::from_xy_theta(x, y, th).unwrap();
        let moved: Vec<Pose2> = est.poses.iter().map(|p| gauge.compose(p)).collect();
        let a = error_metrics(&align_gauge(&est.poses, &truth).unwrap(), &truth).unwrap();
        let b = error_metrics(&align_gauge(&moved, &truth).unwrap(), &truth).unwrap();
        prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }
}
