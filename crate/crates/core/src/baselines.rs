//! Odometric initialization and a Gauss–Newton solver for the quadratic
//! pose-graph cost.

use std::collections::VecDeque;
use std::f64::consts::SQRT_2;

use nalgebra::{Cholesky, DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::costs::{eval_cost, CostKind};
use crate::error::{Error, Result};
use crate::geometry::{Pose2, Rotation2};
use crate::posegraph::PoseGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GNOptions {
    pub max_iters: usize,
    /// Stop once the step norm falls below this.
    pub step_tol: f64,
    /// Initial Levenberg damping; raised ×10 whenever a step increases the
    /// cost.
    pub damping: f64,
}

impl Default for GNOptions {
    fn default() -> Self {
        GNOptions {
            max_iters: 100,
            step_tol: 1e-9,
            damping: 0.0,
        }
    }
}

/// Composes poses outward from pose 0 along a spanning tree: the odometric
/// edges when they reach every node, otherwise a breadth-first tree over all
/// edges.
pub fn odometry_init(graph: &PoseGraph) -> Result<Vec<Pose2>> {
    if graph.n == 0 {
        return Err(Error::EmptyGraph);
    }
    if let Some(odo) = &graph.odometric {
        if odo.len() == graph.m() {
            if let Some(poses) = compose_tree(graph, |k| odo[k]) {
                return Ok(poses);
            }
        }
    }
    compose_tree(graph, |_| true).ok_or(Error::Disconnected)
}

fn compose_tree(graph: &PoseGraph, usable: impl Fn(usize) -> bool) -> Option<Vec<Pose2>> {
    let adj = graph.adjacency();
    let mut poses: Vec<Option<Pose2>> = vec![None; graph.n];
    poses[0] = Some(Pose2::identity());
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let pu = poses[u].unwrap();
        for &(v, k) in &adj[u] {
            if poses[v].is_some() || !usable(k) {
                continue;
            }
            let e = &graph.edges[k];
            let rel = e.relative_pose();
            poses[v] = Some(if e.from == u {
                pu.compose(&rel)
            } else {
                pu.compose(&rel.inverse())
            });
            queue.push_back(v);
        }
    }
    poses.into_iter().collect()
}

/// Stacked weighted residuals `[w_t r_t; (w_R/√2) vec(r_R)]` per edge, whose
/// squared norm is the quadratic cost, and their Jacobian with respect to
/// `(θᵢ, tᵢ)` for poses `1..n` (pose 0 is the gauge).
pub fn residual_jacobian(
    graph: &PoseGraph,
    thetas: &[f64],
    trans: &[Vector2<f64>],
) -> (DVector<f64>, DMatrix<f64>) {
    let m = graph.m();
    let nvar = 3 * (graph.n - 1);
    let mut r = DVector::zeros(6 * m);
    let mut jac = DMatrix::zeros(6 * m, nvar);
    let col = |i: usize| if i == 0 { None } else { Some(3 * (i - 1)) };
    for (k, e) in graph.edges.iter().enumerate() {
        let (i, j) = (e.from, e.to);
        let (si, ci) = thetas[i].sin_cos();
        let d = trans[j] - trans[i];
        let row = 6 * k;
        // Rᵢᵀ d with Rᵢ = [[c, −s], [s, c]]
        let rt = Vector2::new(ci * d.x + si * d.y, -si * d.x + ci * d.y) - e.rel_translation;
        r[row] = e.w_t * rt.x;
        r[row + 1] = e.w_t * rt.y;
        let phi = thetas[j] - thetas[i];
        let (sp, cp) = phi.sin_cos();
        let rbar = e.rel_rotation.matrix();
        let wr = e.w_r / SQRT_2;
        let rel = [cp, -sp, sp, cp];
        let drel = [-sp, -cp, cp, -sp];
        for q in 0..4 {
            r[row + 2 + q] = wr * (rel[q] - rbar[(q / 2, q % 2)]);
        }
        if let Some(c) = col(i) {
            // ∂(Rᵢᵀd)/∂θᵢ = [[−s, c], [−c, −s]] d
            jac[(row, c)] = e.w_t * (-si * d.x + ci * d.y);
            jac[(row + 1, c)] = e.w_t * (-ci * d.x - si * d.y);
            for q in 0..4 {
                jac[(row + 2 + q, c)] = -wr * drel[q];
            }
            // ∂/∂tᵢ = −Rᵢᵀ
            jac[(row, c + 1)] = -e.w_t * ci;
            jac[(row, c + 2)] = -e.w_t * si;
            jac[(row + 1, c + 1)] = e.w_t * si;
            jac[(row + 1, c + 2)] = -e.w_t * ci;
        }
        if let Some(c) = col(j) {
            for q in 0..4 {
                jac[(row + 2 + q, c)] = wr * drel[q];
            }
            jac[(row, c + 1)] = e.w_t * ci;
            jac[(row, c + 2)] = e.w_t * si;
            jac[(row + 1, c + 1)] = -e.w_t * si;
            jac[(row + 1, c + 2)] = e.w_t * ci;
        }
    }
    (r, jac)
}

/// Gradient of the quadratic cost with respect to `(θᵢ, tᵢ)`, `i ≥ 1`.
pub fn quadratic_gradient(graph: &PoseGraph, poses: &[Pose2]) -> DVector<f64> {
    let (th, tr) = unpack(poses);
    let (r, j) = residual_jacobian(graph, &th, &tr);
    2.0 * j.transpose() * r
}

fn unpack(poses: &[Pose2]) -> (Vec<f64>, Vec<Vector2<f64>>) {
    (
        poses.iter().map(|p| p.rotation.angle()).collect(),
        poses.iter().map(|p| p.translation).collect(),
    )
}

fn pack(thetas: &[f64], trans: &[Vector2<f64>]) -> Result<Vec<Pose2>> {
    thetas
        .iter()
        .zip(trans)
        .map(|(&t, &x)| Ok(Pose2::new(Rotation2::from_angle(t)?, x)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GNResult {
    pub poses: Vec<Pose2>,
    pub initial_cost: f64,
    pub cost: f64,
    pub iterations: usize,
    /// Cost after each accepted step.
    pub accepted_costs: Vec<f64>,
    /// Step norm fell below `step_tol`.
    pub converged: bool,
}

/// Minimizes the quadratic cost from `init`, keeping pose 0 fixed.
pub fn gauss_newton(graph: &PoseGraph, init: &[Pose2], opts: &GNOptions) -> Result<GNResult> {
    graph.ensure_valid()?;
    if init.len() != graph.n {
        return Err(Error::LengthMismatch {
            expected: graph.n,
            got: init.len(),
        });
    }
    let (mut th, mut tr) = unpack(init);
    let cost_of = |th: &[f64], tr: &[Vector2<f64>]| -> Result<f64> {
        Ok(eval_cost(CostKind::Quadratic, graph, &pack(th, tr)?))
    };
    let initial_cost = cost_of(&th, &tr)?;
    let mut cost = initial_cost;
    let mut accepted_costs = Vec::new();
    let mut mu = opts.damping;
    let mut converged = graph.n == 1;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iters {
        iterations += 1;
        let (r, j) = residual_jacobian(graph, &th, &tr);
        let h = j.transpose() * &j;
        let g = j.transpose() * r;
        let scale = h.diagonal().max().max(1e-12);
        loop {
            let damped = &h + DMatrix::identity(h.nrows(), h.ncols()) * mu;
            let step = Cholesky::new(damped).map(|c| -c.solve(&g));
            let Some(step) = step else {
                mu = if mu == 0.0 { 1e-9 * scale } else { mu * 10.0 };
                if mu > 1e12 * scale {
                    return Err(Error::Singular(
                        "normal equations stay singular under damping".into(),
                    ));
                }
                continue;
            };
            if step.norm() < opts.step_tol {
                converged = true;
                break;
            }
            let mut th2 = th.clone();
            let mut tr2 = tr.clone();
            for i in 1..graph.n {
                let c = 3 * (i - 1);
                th2[i] += step[c];
                tr2[i] += Vector2::new(step[c + 1], step[c + 2]);
            }
            let c2 = cost_of(&th2, &tr2)?;
            if c2 <= cost {
                th = th2;
                tr = tr2;
                cost = c2;
                accepted_costs.push(c2);
                mu = if mu > 0.0 && mu / 10.0 > opts.damping {
                    mu / 10.0
                } else {
                    opts.damping
                };
                break;
            }
            mu = if mu == 0.0 { 1e-6 * scale } else { mu * 10.0 };
            if mu > 1e12 * scale {
                // no descent direction left at this damping range
                converged = true;
                break;
            }
        }
    }
    Ok(GNResult {
        poses: pack(&th, &tr)?,
        initial_cost,
        cost,
        iterations,
        accepted_costs,
        converged,
    })
}
