//! Monte Carlo experiments: gauge-aligned error metrics, per-trial records
//! and CSV tables.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::Vector2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{best_balanced, pr_area, pr_sweep, residuals, ThresholdGrid};
use crate::error::{Error, Result};
use crate::estimate::{estimate, EstimateOptions, Method};
use crate::geometry::{angle_from_rot, Pose2, Rotation2};
use crate::synth::{generate, ScenarioConfig};

/// How an estimate is brought into the reference frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    /// Least-squares rigid fit of the translations.
    #[default]
    Procrustes,
    /// Map pose 0 of the estimate onto pose 0 of the reference.
    Anchor,
}

/// Rigid transform `g` such that `g ∘ estimate` best matches `reference`.
pub fn gauge_transform(estimate: &[Pose2], reference: &[Pose2], mode: AlignMode) -> Result<Pose2> {
    if estimate.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            got: estimate.len(),
        });
    }
    if estimate.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if mode == AlignMode::Anchor {
        return Ok(reference[0].compose(&estimate[0].inverse()));
    }
    let k = estimate.len() as f64;
    let mu_e = estimate.iter().map(|p| p.translation).sum::<Vector2<f64>>() / k;
    let mu_r = reference.iter().map(|p| p.translation).sum::<Vector2<f64>>() / k;
    let (mut dot, mut cross, mut norms) = (0.0, 0.0, 0.0);
    for (e, r) in estimate.iter().zip(reference) {
        let a = e.translation - mu_e;
        let b = r.translation - mu_r;
        dot += a.dot(&b);
        cross += a.x * b.y - a.y * b.x;
        norms += a.norm() * b.norm();
    }
    // coincident points leave the rotation undetermined
    let angle = if dot.hypot(cross) <= 1e-12 * norms.max(f64::MIN_POSITIVE) {
        0.0
    } else {
        cross.atan2(dot)
    };
    let g = Rotation2::from_angle(angle)?;
    Ok(Pose2::new(g, mu_r - g.rotate(&mu_e)))
}

/// Applies the Procrustes gauge fit to every pose.
pub fn align_gauge(estimate: &[Pose2], reference: &[Pose2]) -> Result<Vec<Pose2>> {
    align_gauge_with(estimate, reference, AlignMode::Procrustes)
}

pub fn align_gauge_with(estimate: &[Pose2], reference: &[Pose2], mode: AlignMode) -> Result<Vec<Pose2>> {
    let g = gauge_transform(estimate, reference, mode)?;
    Ok(estimate.iter().map(|p| g.compose(p)).collect())
}

/// Mean translation error (meters) and mean absolute rotation error
/// (radians).
pub fn error_metrics(aligned: &[Pose2], reference: &[Pose2]) -> Result<(f64, f64)> {
    if aligned.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            got: aligned.len(),
        });
    }
    if aligned.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let k = aligned.len() as f64;
    let t = aligned
        .iter()
        .zip(reference)
        .map(|(a, r)| (a.translation - r.translation).norm())
        .sum::<f64>();
    let r = aligned
        .iter()
        .zip(reference)
        .map(|(a, r)| angle_from_rot(&a.rotation.between(&r.rotation)).abs())
        .sum::<f64>();
    Ok((t / k, r / k))
}

/// Options shared by every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialOptions {
    pub estimate: EstimateOptions,
    pub align: AlignMode,
    /// Run the precision/recall sweep on each estimate.
    pub detection: bool,
    pub thresholds: ThresholdGrid,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions {
            estimate: EstimateOptions::default(),
            align: AlignMode::Procrustes,
            detection: true,
            thresholds: ThresholdGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The solver stopped at its iteration cap; the estimate is still used.
    NotConverged,
    Failed(String),
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Ok => f.write_str("ok"),
            Status::NotConverged => f.write_str("not_converged"),
            Status::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

/// Outcome of one method on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub status: Status,
    pub trans_err: Option<f64>,
    pub rot_err: Option<f64>,
    pub stable_rank: Option<f64>,
    pub numeric_rank: Option<usize>,
    /// Numeric rank of the whole relaxed matrix.
    pub lifted_rank: Option<usize>,
    pub relaxed_cost: Option<f64>,
    pub rounded_cost: Option<f64>,
    pub gap_bound: Option<f64>,
    pub tight: Option<bool>,
    pub iterations: usize,
    pub wall_ms: f64,
    /// Area under the interpolated precision/recall curve.
    pub pr_area: Option<f64>,
    /// Best `min(precision, recall)` over the sweep.
    pub pr_balanced: Option<f64>,
}

impl MethodRecord {
    fn failed(method: Method, msg: String) -> Self {
        MethodRecord {
            method,
            status: Status::Failed(msg),
            trans_err: None,
            rot_err: None,
            stable_rank: None,
            numeric_rank: None,
            lifted_rank: None,
            relaxed_cost: None,
            rounded_cost: None,
            gap_bound: None,
            tight: None,
            iterations: 0,
            wall_ms: 0.0,
            pr_area: None,
            pr_balanced: None,
        }
    }
}

/// Every requested method on one generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config: ScenarioConfig,
    pub w_t: f64,
    pub w_r: f64,
    pub methods: Vec<MethodRecord>,
}

impl TrialRecord {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// The record with wall-clock times zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> TrialRecord {
        let mut r = self.clone();
        r.methods.iter_mut().for_each(|m| m.wall_ms = 0.0);
        r
    }

    pub fn get(&self, method: Method) -> Option<&MethodRecord> {
        self.methods.iter().find(|m| m.method == method)
    }
}

fn run_method(
    graph: &crate::posegraph::PoseGraph,
    truth: &[Pose2],
    method: Method,
    opts: &TrialOptions,
) -> Result<MethodRecord> {
    let start = Instant::now();
    let est = estimate(graph, method, &opts.estimate)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let aligned = align_gauge_with(&est.poses, truth, opts.align)?;
    let (trans_err, rot_err) = error_metrics(&aligned, truth)?;
    let (pr_area_v, pr_balanced) = match (&graph.outlier_labels, opts.detection) {
        (Some(labels), true) => {
            let pts = pr_sweep(&residuals(graph, &est.poses)?, labels, &opts.thresholds)?;
            (pr_area(&pts), best_balanced(&pts))
        }
        _ => (None, None),
    };
    let d = est.diagnostics.as_ref();
    Ok(MethodRecord {
        method,
        status: if est.converged { Status::Ok } else { Status::NotConverged },
        trans_err: Some(trans_err),
        rot_err: Some(rot_err),
        stable_rank: d.map(|d| d.stable_rank),
        numeric_rank: d.map(|d| d.numeric_rank),
        lifted_rank: d.map(|d| d.lifted_rank),
        relaxed_cost: d.map(|d| d.relaxed_cost),
        rounded_cost: d.map(|d| d.rounded_cost).or(est.gn_cost),
        gap_bound: d.map(|d| d.subopt_gap_bound),
        tight: d.map(|d| d.tight),
        iterations: est.iterations,
        wall_ms,
        pr_area: pr_area_v,
        pr_balanced,
    })
}

/// Generates the scenario of `config` and runs every method on it. Failures
/// are recorded per method.
pub fn run_trial(config: &ScenarioConfig, methods: &[Method], opts: &TrialOptions) -> TrialRecord {
    let (w_t, w_r) = config.weights();
    let graph = generate(config).and_then(|g| match g.ground_truth.clone() {
        Some(t) => Ok((g, t)),
        None => Err(Error::InvalidGraph("scenario has no ground truth".into())),
    });
    let methods = methods
        .iter()
        .map(|&m| match &graph {
            Ok((g, truth)) => run_method(g, truth, m, opts).unwrap_or_else(|e| MethodRecord::failed(m, e.to_string())),
            Err(e) => MethodRecord::failed(m, e.to_string()),
        })
        .collect();
    TrialRecord {
        config: config.clone(),
        w_t,
        w_r,
        methods,
    }
}

/// Scenario grid, methods and output paths of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    /// Base scenarios; `p_out` and `seed` are set per cell and run.
    pub scenarios: Vec<ScenarioConfig>,
    pub p_out: Vec<f64>,
    pub methods: Vec<Method>,
    pub runs: usize,
    /// Master seed from which every trial seed is derived.
    pub seed: u64,
    /// Per-run and aggregate rows.
    pub output: Option<PathBuf>,
    /// Mean and standard deviation per cell and method.
    pub summary: Option<PathBuf>,
    pub options: TrialOptions,
}

impl Default for ExperimentPlan {
    /// Erdős–Rényi graphs with `n ∈ {20, 50}`, `p_out ∈ {0, 0.1, …, 0.5}`,
    /// all seven methods and 30 runs per cell.
    fn default() -> Self {
        ExperimentPlan {
            scenarios: vec![ScenarioConfig::erdos_renyi(20, 0.5), ScenarioConfig::erdos_renyi(50, 0.5)],
            p_out: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            methods: Method::ALL.to_vec(),
            runs: 30,
            seed: 0,
            output: None,
            summary: None,
            options: TrialOptions::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: ExperimentPlan = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.p_out.is_empty() || self.methods.is_empty() || self.runs == 0 {
            return Err(Error::Config("plan needs scenarios, p_out values, methods and runs".into()));
        }
        for s in &self.scenarios {
            for &p in &self.p_out {
                s.clone().with_outliers(p).validate()?;
            }
        }
        Ok(())
    }

    /// Scenario configurations of every cell, in plan order.
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        self.scenarios
            .iter()
            .flat_map(|s| self.p_out.iter().map(move |&p| s.clone().with_outliers(p)))
            .collect()
    }
}

/// Seed of run `run` in cell `cell`: an independent ChaCha stream per cell.
pub fn trial_seed(master: u64, cell: usize, run: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(cell as u64);
    rng.set_word_pos(2 * run as u128);
    rng.next_u64()
}

/// One CSV row: a single run, or a cell mean when `run` is `mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub topology: String,
    pub n: usize,
    pub p_out: f64,
    pub method: String,
    pub run: String,
    pub seed: Option<u64>,
    pub trans_err: Option<f64>,
    pub rot_err: Option<f64>,
    pub stable_rank: Option<f64>,
    pub numeric_rank: Option<f64>,
    pub relaxed_cost: Option<f64>,
    pub rounded_cost: Option<f64>,
    pub gap_bound: Option<f64>,
    /// `true`/`false` per run; fraction of tight runs for a mean row.
    pub tight: Option<String>,
    pub wall_ms: f64,
    pub w_t: f64,
    pub w_r: f64,
    pub status: String,
}

/// Mean and sample standard deviation per cell and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub topology: String,
    pub n: usize,
    pub p_out: f64,
    pub method: String,
    pub runs: usize,
    pub failed: usize,
    pub not_converged: usize,
    pub trans_err_mean: Option<f64>,
    pub trans_err_std: Option<f64>,
    pub rot_err_mean: Option<f64>,
    pub rot_err_std: Option<f64>,
    pub stable_rank_mean: Option<f64>,
    pub stable_rank_std: Option<f64>,
    pub numeric_rank_mean: Option<f64>,
    pub lifted_rank_mean: Option<f64>,
    pub tight_fraction: Option<f64>,
    pub gap_bound_mean: Option<f64>,
    pub gap_bound_min: Option<f64>,
    pub pr_area_mean: Option<f64>,
    pub wall_ms_mean: f64,
    pub w_t: f64,
    pub w_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub trials: Vec<TrialRecord>,
    /// Per-run rows followed by one mean row per cell and method.
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn std_dev(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    if v.len() < 2 {
        return Some(0.0);
    }
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

fn run_row(t: &TrialRecord, m: &MethodRecord, run: usize) -> ResultRow {
    ResultRow {
        topology: t.config.topology.name().into(),
        n: t.config.n,
        p_out: t.config.p_out,
        method: m.method.to_string(),
        run: run.to_string(),
        seed: Some(t.config.seed),
        trans_err: m.trans_err,
        rot_err: m.rot_err,
        stable_rank: m.stable_rank,
        numeric_rank: m.numeric_rank.map(|r| r as f64),
        relaxed_cost: m.relaxed_cost,
        rounded_cost: m.rounded_cost,
        gap_bound: m.gap_bound,
        tight: m.tight.map(|b| b.to_string()),
        wall_ms: m.wall_ms,
        w_t: t.w_t,
        w_r: t.w_r,
        status: m.status.to_string(),
    }
}

fn aggregate(cell: &[&TrialRecord], method: Method) -> (ResultRow, SummaryRow) {
    let recs: Vec<&MethodRecord> = cell.iter().filter_map(|t| t.get(method)).collect();
    let col = |f: &dyn Fn(&MethodRecord) -> Option<f64>| -> Vec<f64> { recs.iter().filter_map(|m| f(m)).collect() };
    let trans = col(&|m| m.trans_err);
    let rot = col(&|m| m.rot_err);
    let srank = col(&|m| m.stable_rank);
    let nrank = col(&|m| m.numeric_rank.map(|r| r as f64));
    let lrank = col(&|m| m.lifted_rank.map(|r| r as f64));
    let relaxed = col(&|m| m.relaxed_cost);
    let rounded = col(&|m| m.rounded_cost);
    let gap = col(&|m| m.gap_bound);
    let tight = col(&|m| m.tight.map(|b| b as u8 as f64));
    let area = col(&|m| m.pr_area);
    let wall = col(&|m| Some(m.wall_ms));
    let failed = recs.iter().filter(|m| matches!(m.status, Status::Failed(_))).count();
    let not_converged = recs.iter().filter(|m| m.status == Status::NotConverged).count();
    let first = cell[0];
    let status = format!("runs={} failed={failed} not_converged={not_converged}", recs.len());
    let row = ResultRow {
        topology: first.config.topology.name().into(),
        n: first.config.n,
        p_out: first.config.p_out,
        method: method.to_string(),
        run: "mean".into(),
        seed: None,
        trans_err: mean(&trans),
        rot_err: mean(&rot),
        stable_rank: mean(&srank),
        numeric_rank: mean(&nrank),
        relaxed_cost: mean(&relaxed),
        rounded_cost: mean(&rounded),
        gap_bound: mean(&gap),
        tight: mean(&tight).map(|f| f.to_string()),
        wall_ms: mean(&wall).unwrap_or(0.0),
        w_t: first.w_t,
        w_r: first.w_r,
        status,
    };
    let summary = SummaryRow {
        topology: row.topology.clone(),
        n: row.n,
        p_out: row.p_out,
        method: row.method.clone(),
        runs: recs.len(),
        failed,
        not_converged,
        trans_err_mean: row.trans_err,
        trans_err_std: std_dev(&trans),
        rot_err_mean: row.rot_err,
        rot_err_std: std_dev(&rot),
        stable_rank_mean: row.stable_rank,
        stable_rank_std: std_dev(&srank),
        numeric_rank_mean: row.numeric_rank,
        lifted_rank_mean: mean(&lrank),
        tight_fraction: mean(&tight),
        gap_bound_mean: row.gap_bound,
        gap_bound_min: gap.iter().copied().reduce(f64::min),
        pr_area_mean: mean(&area),
        wall_ms_mean: row.wall_ms,
        w_t: row.w_t,
        w_r: row.w_r,
    };
    (row, summary)
}

/// Runs every (cell, run) trial of `plan` on `jobs` threads (all cores when
/// `None`). Results do not depend on the thread count.
pub fn run_experiment(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<ExperimentResults> {
    plan.validate()?;
    let cells = plan.cells();
    let tasks: Vec<ScenarioConfig> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, cfg)| (0..plan.runs).map(move |r| cfg.clone().with_seed(trial_seed(plan.seed, c, r))))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let trials: Vec<TrialRecord> =
        pool.install(|| tasks.par_iter().map(|cfg| run_trial(cfg, &plan.methods, &plan.options)).collect());

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (c, cell) in trials.chunks(plan.runs).enumerate() {
        debug_assert_eq!(cell[0].config.p_out, cells[c].p_out);
        for (run, t) in cell.iter().enumerate() {
            rows.extend(t.methods.iter().map(|m| run_row(t, m, run)));
        }
    }
    for cell in trials.chunks(plan.runs) {
        let refs: Vec<&TrialRecord> = cell.iter().collect();
        for &m in &plan.methods {
            let (row, s) = aggregate(&refs, m);
            rows.push(row);
            summary.push(s);
        }
    }
    Ok(ExperimentResults { trials, rows, summary })
}

pub fn write_rows_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl ExperimentResults {
    /// Writes the result and summary tables to the plan's output paths.
    pub fn save(&self, plan: &ExperimentPlan) -> Result<()> {
        if let Some(p) = &plan.output {
            write_rows_csv(std::fs::File::create(p)?, &self.rows)?;
        }
        if let Some(p) = &plan.summary {
            write_rows_csv(std::fs::File::create(p)?, &self.summary)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::CostKind;
    use crate::relax::{MethodSpec, Stages};
    use rand::Rng;
    use std::f64::consts::FRAC_PI_2;

    fn pose(x: f64, y: f64, t: f64) -> Pose2 {
        Pose2::from_xy_theta(x, y, t).unwrap()
    }

    fn random_poses(n: usize, seed: u64) -> Vec<Pose2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| pose(rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0), rng.gen_range(-3.0..3.0)))
            .collect()
    }

    fn objective(est: &[Pose2], reference: &[Pose2], g: &Pose2) -> f64 {
        est.iter()
            .zip(reference)
            .map(|(e, r)| (g.compose(e).translation - r.translation).norm_squared())
            .sum()
    }

    #[test]
    fn identical_estimate_gives_identity() {
        let p = random_poses(6, 1);
        let g = gauge_transform(&p, &p, AlignMode::Procrustes).unwrap();
        assert!(g.rotation.angle().abs() < 1e-12);
        assert!(g.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_known_rigid_transform() {
        let reference = random_poses(6, 2);
        let g = pose(3.0, -7.0, FRAC_PI_2);
        let est: Vec<Pose2> = reference.iter().map(|p| g.inverse().compose(p)).collect();
        let found = gauge_transform(&est, &reference, AlignMode::Procrustes).unwrap();
        assert!((found.rotation.angle() - FRAC_PI_2).abs() < 1e-12);
        assert!((found.translation - g.translation).norm() < 1e-10);
        let aligned = align_gauge(&est, &reference).unwrap();
        let (t, r) = error_metrics(&aligned, &reference).unwrap();
        assert!(t < 1e-10 && r < 1e-12);
    }

    #[test]
    fn procrustes_beats_random_transforms() {
        let reference = random_poses(10, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let est: Vec<Pose2> = reference
            .iter()
            .map(|p| {
                let t = p.translation + Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                pose(t.x + 5.0, t.y, p.rotation.angle() + 0.3)
            })
            .collect();
        let best = objective(&est, &reference, &gauge_transform(&est, &reference, AlignMode::Procrustes).unwrap());
        for _ in 0..10_000 {
            let g = pose(rng.gen_range(-60.0..60.0), rng.gen_range(-60.0..60.0), rng.gen_range(-3.15..3.15));
            assert!(best <= objective(&est, &reference, &g) + 1e-9);
        }
    }

    #[test]
    fn coincident_points_use_identity_rotation() {
        let p = [pose(1.0, 1.0, 0.5)];
        let g = gauge_transform(&p, &[pose(2.0, 3.0, 0.0)], AlignMode::Procrustes).unwrap();
        assert_eq!(g.rotation.angle(), 0.0);
        assert!((g.translation - Vector2::new(1.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn perfect_estimate_has_zero_error() {
        let p = random_poses(5, 5);
        assert_eq!(error_metrics(&p, &p).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn single_offset_pose_error() {
        let reference = random_poses(10, 6);
        let mut est = reference.clone();
        est[3].translation.x += 1.0;
        let aligned = align_gauge(&est, &reference).unwrap();
        let (t, _) = error_metrics(&aligned, &reference).unwrap();
        // the fit shifts every pose by 0.1: nine errors of 0.1 and one of 0.9
        assert!((t - 0.18).abs() < 5e-3, "{t}");
    }

    #[test]
    fn rotation_error_is_gauge_invariant() {
        let reference = random_poses(8, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let est: Vec<Pose2> = reference
            .iter()
            .map(|p| pose(p.translation.x, p.translation.y, p.rotation.angle() + rng.gen_range(-0.1..0.1)))
            .collect();
        let (_, r0) = error_metrics(&align_gauge(&est, &reference).unwrap(), &reference).unwrap();
        let g = pose(-4.0, 9.0, 2.0);
        let moved: Vec<Pose2> = est.iter().map(|p| g.compose(p)).collect();
        let (_, r1) = error_metrics(&align_gauge(&moved, &reference).unwrap(), &reference).unwrap();
        assert!((r0 - r1).abs() < 1e-10);
    }

    #[test]
    fn anchor_mode_maps_first_pose() {
        let reference = random_poses(4, 9);
        let g = pose(1.0, 2.0, 0.7);
        let est: Vec<Pose2> = reference.iter().map(|p| g.compose(p)).collect();
        let aligned = align_gauge_with(&est, &reference, AlignMode::Anchor).unwrap();
        let (t, r) = error_metrics(&aligned, &reference).unwrap();
        assert!(t < 1e-10 && r < 1e-12);
    }

    fn quick_options() -> TrialOptions {
        TrialOptions {
            thresholds: ThresholdGrid {
                eta_t: vec![0.1, 1.0, 10.0],
                eta_r: vec![0.1, 0.5, 1.0],
            },
            ..TrialOptions::default()
        }
    }

    #[test]
    fn zero_noise_trial_is_exact() {
        let cfg = ScenarioConfig::erdos_renyi(6, 0.7).noiseless().with_seed(3);
        let m = [Method::Relaxation(MethodSpec::new(Stages::TwoStage, CostKind::L1)), Method::GaussNewton];
        let rec = run_trial(&cfg, &m, &quick_options());
        for r in &rec.methods {
            assert_eq!(r.status, Status::Ok);
            assert!(r.trans_err.unwrap() < 1e-5 && r.rot_err.unwrap() < 1e-5, "{r:?}");
        }
        assert_eq!(rec.methods[0].tight, Some(true));
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = ScenarioConfig::erdos_renyi(6, 0.7).with_outliers(0.2).with_seed(12);
        let m = [Method::Relaxation(MethodSpec::new(Stages::TwoStage, CostKind::Huber)), Method::GaussNewton];
        let a = run_trial(&cfg, &m, &quick_options());
        let b = run_trial(&cfg, &m, &quick_options());
        assert_eq!(a.without_timing(), b.without_timing());
    }

    #[test]
    fn generation_failure_is_recorded() {
        let mut cfg = ScenarioConfig::erdos_renyi(6, 0.7);
        cfg.env_size = -1.0;
        let rec = run_trial(&cfg, &[Method::GaussNewton], &quick_options());
        assert!(matches!(rec.methods[0].status, Status::Failed(_)));
    }

    fn tiny_plan() -> ExperimentPlan {
        ExperimentPlan {
            scenarios: vec![ScenarioConfig::erdos_renyi(6, 0.7)],
            p_out: vec![0.1],
            methods: vec![Method::Relaxation(MethodSpec::new(Stages::TwoStage, CostKind::L2)), Method::GaussNewton],
            runs: 2,
            seed: 5,
            options: quick_options(),
            ..ExperimentPlan::default()
        }
    }

    #[test]
    fn one_cell_two_runs_gives_three_rows_per_method() {
        let plan = tiny_plan();
        let res = run_experiment(&plan, Some(2)).unwrap();
        for m in &plan.methods {
            let name = m.to_string();
            let rows: Vec<_> = res.rows.iter().filter(|r| r.method == name).collect();
            assert_eq!(rows.len(), 3);
            let runs: Vec<f64> = rows.iter().filter(|r| r.run != "mean").map(|r| r.trans_err.unwrap()).collect();
            let agg = rows.iter().find(|r| r.run == "mean").unwrap();
            assert!((agg.trans_err.unwrap() - (runs[0] + runs[1]) / 2.0).abs() < 1e-15);
        }
        assert_eq!(res.summary.len(), 2);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let plan = tiny_plan();
        let strip = |r: ExperimentResults| r.trials.iter().map(|t| t.without_timing()).collect::<Vec<_>>();
        assert_eq!(strip(run_experiment(&plan, Some(1)).unwrap()), strip(run_experiment(&plan, Some(3)).unwrap()));
    }

    #[test]
    fn csv_header_lists_result_columns() {
        let res = run_experiment(&tiny_plan(), Some(1)).unwrap();
        let mut buf = Vec::new();
        write_rows_csv(&mut buf, &res.rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "topology,n,p_out,method,run,seed,trans_err,rot_err,stable_rank,numeric_rank,relaxed_cost,\
             rounded_cost,gap_bound,tight,wall_ms,w_t,w_r,status"
        );
    }

    #[test]
    fn plan_round_trips_through_toml() {
        let plan = tiny_plan();
        let text = plan.to_toml().unwrap();
        assert_eq!(ExperimentPlan::from_toml(&text).unwrap(), plan);
        let minimal = "runs = 2\np_out = [0.2]\nmethods = [\"gn\", \"l1-2stage\"]\n\n[[scenarios]]\nn = 9\ntopology = { kind = \"grid\", rows = 3, cols = 3 }\n";
        let p = ExperimentPlan::from_toml(minimal).unwrap();
        assert_eq!(p.methods[1].to_string(), "l1-2stage");
        assert_eq!(p.scenarios[0].n, 9);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for c in 0..5 {
            for r in 0..50 {
                assert!(seen.insert(trial_seed(1, c, r)));
            }
        }
    }
}
