//! End-to-end estimators: relax, solve, round and diagnose, or run the
//! Gauss–Newton baseline.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::baselines::{gauss_newton, odometry_init, GNOptions};
use crate::costs::CostKind;
use crate::error::{Error, Result};
use crate::geometry::{Pose2, Rotation2};
use crate::posegraph::PoseGraph;
use crate::relax::{solve_onestage, solve_rotation_stage, solve_translations, MethodSpec, Stages};
use crate::rounding::{
    diagnose, rank2_factor, round_rotations, round_translations, Objective, RoundedSolution,
};
use crate::sdp::{SolveOptions, SolveReport};

/// A relaxation-based method or the Gauss–Newton baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Relaxation(MethodSpec),
    GaussNewton,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Relaxation(MethodSpec::ALL[0]),
        Method::Relaxation(MethodSpec::ALL[1]),
        Method::Relaxation(MethodSpec::ALL[2]),
        Method::Relaxation(MethodSpec::ALL[3]),
        Method::Relaxation(MethodSpec::ALL[4]),
        Method::Relaxation(MethodSpec::ALL[5]),
        Method::GaussNewton,
    ];

    pub fn spec(&self) -> Option<MethodSpec> {
        match self {
            Method::Relaxation(s) => Some(*s),
            Method::GaussNewton => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Relaxation(s) => s.fmt(f),
            Method::GaussNewton => f.write_str("gn"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gn" | "gauss-newton" => Ok(Method::GaussNewton),
            _ => s.parse().map(Method::Relaxation),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateOptions {
    /// Solver settings for the rotation and translation stages.
    pub sdp: SolveOptions,
    /// Solver settings for 1-stage relaxations. Their infimum is generally
    /// not attained, so these run to an iteration cap.
    pub onestage: SolveOptions,
    pub gn: GNOptions,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            sdp: SolveOptions::default(),
            onestage: SolveOptions {
                eps_abs: 1e-10,
                eps_rel: 1e-11,
                max_iter: 5000,
                ..SolveOptions::default()
            },
            gn: GNOptions::default(),
        }
    }
}

impl EstimateOptions {
    /// Sets the stopping tolerance of every conic solve.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        for o in [&mut self.sdp, &mut self.onestage] {
            o.eps_abs = tol;
            o.eps_rel = tol / 10.0;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub method: Method,
    pub poses: Vec<Pose2>,
    /// Rounding diagnostics; absent for Gauss–Newton.
    pub diagnostics: Option<RoundedSolution>,
    /// Quadratic cost reached by Gauss–Newton.
    pub gn_cost: Option<f64>,
    /// Every solve met its stopping rule.
    pub converged: bool,
    /// Total solver iterations.
    pub iterations: usize,
}

/// Rounded rotations of the rotation-stage relaxation, with the raw blocks
/// and the solver report.
#[derive(Debug, Clone)]
pub struct RotationEstimate {
    pub rotations: Vec<Rotation2>,
    pub blocks: Vec<Matrix2<f64>>,
    pub report: SolveReport,
}

/// Solves the rotation-stage relaxation and rounds it.
pub fn estimate_rotations(
    cost: CostKind,
    graph: &PoseGraph,
    opts: &SolveOptions,
) -> Result<RotationEstimate> {
    let report = solve_rotation_stage(cost, graph, opts)?;
    let factor = rank2_factor(&report.x_hat);
    let rounded = round_rotations(&factor.z, graph.n)?;
    Ok(RotationEstimate {
        rotations: rounded.rotations,
        blocks: rounded.blocks,
        report,
    })
}

/// Rotation-stage estimate with its tightness diagnostics against the
/// rotation-only cost.
pub fn rotation_pipeline(
    cost: CostKind,
    graph: &PoseGraph,
    opts: &SolveOptions,
) -> Result<RoundedSolution> {
    let r = estimate_rotations(cost, graph, opts)?;
    let zeros = vec![Default::default(); graph.n];
    diagnose(
        graph,
        cost,
        Objective::RotationOnly,
        &r.report.x_hat,
        r.report.objective,
        &r.blocks,
        r.rotations,
        zeros,
    )
}

fn two_stage(cost: CostKind, graph: &PoseGraph, opts: &EstimateOptions) -> Result<Estimate> {
    let r = estimate_rotations(cost, graph, &opts.sdp)?;
    let t = solve_translations(cost, graph, &r.rotations, &opts.sdp)?;
    let diag = diagnose(
        graph,
        cost,
        Objective::RotationOnly,
        &r.report.x_hat,
        r.report.objective,
        &r.blocks,
        r.rotations,
        t.translations,
    )?;
    Ok(Estimate {
        method: Method::Relaxation(MethodSpec::new(Stages::TwoStage, cost)),
        poses: diag.poses(),
        diagnostics: Some(diag),
        gn_cost: None,
        converged: r.report.converged && t.report.converged,
        iterations: r.report.iterations + t.report.iterations,
    })
}

fn one_stage(cost: CostKind, graph: &PoseGraph, opts: &EstimateOptions) -> Result<Estimate> {
    let n = graph.n;
    let report = solve_onestage(cost, graph, &opts.onestage)?;
    // X^{tt} is cost-free and the solver leaves it arbitrary, so rotations
    // come from X^{RR} alone; translations then share its gauge
    let rr = report.x_hat.view((0, 0), (2 * n, 2 * n)).into_owned();
    let factor = rank2_factor(&rr);
    let rounded = round_rotations(&factor.z, n)?;
    let x_rt = report.x_hat.view((0, 2 * n), (2 * n, n)).into_owned();
    let translations = round_translations(&x_rt, &rounded.rotations)?;
    let diag = diagnose(
        graph,
        cost,
        Objective::Full,
        &report.x_hat,
        report.objective,
        &rounded.blocks,
        rounded.rotations,
        translations,
    )?;
    Ok(Estimate {
        method: Method::Relaxation(MethodSpec::new(Stages::OneStage, cost)),
        poses: diag.poses(),
        diagnostics: Some(diag),
        gn_cost: None,
        converged: report.converged,
        iterations: report.iterations,
    })
}

fn gauss_newton_baseline(graph: &PoseGraph, opts: &GNOptions) -> Result<Estimate> {
    let init = odometry_init(graph)?;
    let r = gauss_newton(graph, &init, opts)?;
    Ok(Estimate {
        method: Method::GaussNewton,
        poses: r.poses,
        diagnostics: None,
        gn_cost: Some(r.cost),
        converged: r.converged,
        iterations: r.iterations,
    })
}

/// Runs `method` on `graph`.
pub fn estimate(graph: &PoseGraph, method: Method, opts: &EstimateOptions) -> Result<Estimate> {
    graph.ensure_valid()?;
    match method {
        Method::GaussNewton => gauss_newton_baseline(graph, &opts.gn),
        Method::Relaxation(spec) => {
            spec.validate()?;
            match spec.stages {
                Stages::TwoStage => two_stage(spec.cost, graph, opts),
                Stages::OneStage => one_stage(spec.cost, graph, opts),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap_angle;
    use crate::synth::{generate, ScenarioConfig};

    /// Max pose error after removing the gauge with pose 0.
    fn anchored_error(est: &[Pose2], gt: &[Pose2]) -> f64 {
        let g = gt[0].compose(&est[0].inverse());
        est.iter()
            .zip(gt)
            .map(|(e, t)| {
                let a = g.compose(e);
                let dt = (a.translation - t.translation).norm();
                let dr = wrap_angle(a.rotation.angle() - t.rotation.angle()).abs();
                dt.max(dr)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("l3-2stage".parse::<Method>().is_err());
        let json = serde_json::to_string(&Method::GaussNewton).unwrap();
        assert_eq!(json, "\"gn\"");
    }

    #[test]
    fn every_method_recovers_noiseless_ground_truth() {
        let g = generate(&ScenarioConfig::erdos_renyi(8, 0.6).noiseless().with_seed(2)).unwrap();
        let gt = g.ground_truth.clone().unwrap();
        // huber 1-stage converges sublinearly at zero noise and is left out
        let huber_one = Method::Relaxation(MethodSpec::new(Stages::OneStage, CostKind::Huber));
        for m in Method::ALL.into_iter().filter(|&m| m != huber_one) {
            let e = estimate(&g, m, &EstimateOptions::default()).unwrap();
            let err = anchored_error(&e.poses, &gt);
            assert!(err < 1e-5, "{m}: error {err}");
            if let Some(d) = &e.diagnostics {
                assert!(d.tight, "{m}: {d:?}");
                assert!(
                    d.subopt_gap_bound.abs() < 1e-6,
                    "{m}: gap {}",
                    d.subopt_gap_bound
                );
            }
        }
    }

    #[test]
    fn rounded_cost_bounds_relaxed_cost() {
        let g = generate(
            &ScenarioConfig::erdos_renyi(8, 0.6)
                .with_outliers(0.3)
                .with_seed(5),
        )
        .unwrap();
        for m in Method::ALL.iter().filter(|m| m.spec().is_some()) {
            let d = estimate(&g, *m, &EstimateOptions::default())
                .unwrap()
                .diagnostics
                .unwrap();
            assert!(d.subopt_gap_bound >= -1e-6, "{m}: {}", d.subopt_gap_bound);
        }
    }

    #[test]
    fn rotation_pipeline_tight_on_consistent_rotations() {
        let g = generate(&ScenarioConfig::erdos_renyi(6, 0.8).noiseless().with_seed(8)).unwrap();
        for cost in CostKind::ROBUST {
            let d = rotation_pipeline(cost, &g, &SolveOptions::default()).unwrap();
            assert!(d.tight);
            assert!(d.rounded_cost < 1e-6);
        }
    }
}
