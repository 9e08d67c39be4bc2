use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use robust_pgo::brute::{grid_search, integer_degree_instance, GridOptimum};
use robust_pgo::costs::CostKind;
use robust_pgo::detect::{detect, pr_sweep, residuals, write_pr_csv, ThresholdGrid};
use robust_pgo::estimate::{estimate, Estimate, EstimateOptions, Method};
use robust_pgo::geometry::Pose2;
use robust_pgo::harness::{align_gauge, error_metrics, run_experiment, write_rows_csv, ExperimentPlan};
use robust_pgo::posegraph::{parse_g2o, write_g2o, PoseGraph};
use robust_pgo::synth::{generate, ScenarioConfig, Topology};
use robust_pgo::{Error, Result};

#[derive(Parser)]
#[command(name = "rpgo", version, about = "Robust planar pose graph optimization via convex relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario as JSON or g2o.
    Generate(GenerateArgs),
    /// Estimate poses with one method and report diagnostics as JSON.
    Solve(SolveArgs),
    /// Precision/recall of residual-based outlier detection as CSV.
    Detect(DetectArgs),
    /// Run a Monte Carlo experiment plan and write result tables.
    Experiment(ExperimentArgs),
    /// Grid-search the global optimum of a tiny rotation-only instance.
    BruteForce(BruteForceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    ErdosRenyi,
    Geometric,
    Grid,
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario file (TOML); other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    #[arg(long)]
    n: Option<usize>,
    /// Erdős–Rényi edge probability.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Geometric connection radius, meters.
    #[arg(long)]
    radius: Option<f64>,
    /// Grid rows; columns follow from `n`.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    p_out: Option<f64>,
    #[arg(long)]
    sigma_t: Option<f64>,
    #[arg(long)]
    sigma_r: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; `.g2o` selects g2o, anything else JSON. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// Stopping tolerance of the conic solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap of every conic solve.
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverArgs {
    fn options(&self) -> EstimateOptions {
        let mut o = EstimateOptions::default();
        if let Some(t) = self.tol {
            o = o.with_tolerance(t);
        }
        if let Some(m) = self.max_iter {
            o.sdp.max_iter = m;
            o.onestage.max_iter = m;
        }
        o
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Pose graph (`.json` or `.g2o`).
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "huber-2stage")]
    method: Method,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output path; `.g2o` writes the estimate as vertices. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Estimated poses: output of `solve` or a g2o file. When absent the
    /// graph is solved with `--method`.
    #[arg(long)]
    poses: Option<PathBuf>,
    #[arg(long, default_value = "huber-2stage")]
    method: Method,
    #[command(flatten)]
    solver: SolverArgs,
    /// Classify at a single threshold pair (meters, radians) instead of
    /// sweeping; prints JSON.
    #[arg(long, num_args = 2, value_names = ["ETA_T", "ETA_R"])]
    at: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Plan file (TOML); defaults to the full Monte Carlo plan.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Restrict to these methods.
    #[arg(long)]
    method: Vec<Method>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Results CSV (per-run and mean rows).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV (mean and standard deviation per cell); defaults to stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct BruteForceArgs {
    /// Rotation-only graph; when absent an integer-degree instance is drawn.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    p_out: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rotation cost; repeat for several. Defaults to l1, l2 and huber.
    #[arg(long)]
    cost: Vec<CostKind>,
    /// Grid points per full turn.
    #[arg(long, default_value_t = 360)]
    steps: usize,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut c = match &a.config {
        Some(p) => ScenarioConfig::from_toml(&fs::read_to_string(p)?)?,
        None => ScenarioConfig::default(),
    };
    if let Some(n) = a.n {
        c.n = n;
    }
    if let Some(t) = a.topology {
        c.topology = match t {
            TopologyArg::ErdosRenyi => Topology::ErdosRenyi { p: a.p },
            TopologyArg::Geometric => Topology::Geometric {
                radius: a.radius.unwrap_or(c.env_size / 4.0),
            },
            TopologyArg::Grid => {
                let rows = a.rows.unwrap_or(4);
                Topology::Grid {
                    rows,
                    cols: c.n / rows.max(1),
                }
            }
        };
    }
    if let Some(v) = a.p_out {
        c.p_out = v;
    }
    if let Some(v) = a.sigma_t {
        c.sigma_t = v;
    }
    if let Some(v) = a.sigma_r {
        c.sigma_r = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    let g = generate(&c)?;
    match &a.out {
        Some(p) => g.save(p),
        None => emit(None, &g.to_json()?),
    }
}

#[derive(Serialize)]
struct SolveOutput {
    #[serde(flatten)]
    estimate: Estimate,
    /// Errors against the ground truth after gauge alignment.
    trans_err: Option<f64>,
    rot_err: Option<f64>,
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let g = PoseGraph::load(&a.graph)?;
    let est = estimate(&g, a.method, &a.solver.options())?;
    let (trans_err, rot_err) = match &g.ground_truth {
        Some(t) => {
            let (te, re) = error_metrics(&align_gauge(&est.poses, t)?, t)?;
            (Some(te), Some(re))
        }
        None => (None, None),
    };
    match &a.out {
        Some(p) if p.extension().is_some_and(|e| e == "g2o") => emit(Some(p), &write_g2o(&g, &est.poses)?),
        out => emit(
            out.as_deref(),
            &json(&SolveOutput {
                estimate: est,
                trans_err,
                rot_err,
            })?,
        ),
    }
}

fn load_poses(path: &Path) -> Result<Vec<Pose2>> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "g2o") {
        return Ok(parse_g2o(&text)?.initial);
    }
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let poses = v.get("poses").cloned().unwrap_or(v);
    Ok(serde_json::from_value(poses)?)
}

fn cmd_detect(a: DetectArgs) -> Result<()> {
    let g = PoseGraph::load(&a.graph)?;
    let (label, poses) = match &a.poses {
        Some(p) => ("estimate".to_string(), load_poses(p)?),
        None => (a.method.to_string(), estimate(&g, a.method, &a.solver.options())?.poses),
    };
    if let Some(at) = &a.at {
        return emit(a.out.as_deref(), &json(&detect(&g, &poses, at[0], at[1])?)?);
    }
    let labels = g
        .outlier_labels
        .as_ref()
        .ok_or_else(|| Error::InvalidGraph("graph has no outlier labels".into()))?;
    let points = pr_sweep(&residuals(&g, &poses)?, labels, &ThresholdGrid::default())?;
    let mut buf = Vec::new();
    write_pr_csv(&mut buf, &[(label, points)])?;
    emit(a.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut plan = match &a.plan {
        Some(p) => ExperimentPlan::from_toml(&fs::read_to_string(p)?)?,
        None => ExperimentPlan::default(),
    };
    if !a.method.is_empty() {
        plan.methods = a.method.clone();
    }
    if let Some(r) = a.runs {
        plan.runs = r;
    }
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if a.solver.tol.is_some() || a.solver.max_iter.is_some() {
        plan.options.estimate = a.solver.options();
    }
    if a.out.is_some() {
        plan.output = a.out.clone();
    }
    if a.summary.is_some() {
        plan.summary = a.summary.clone();
    }
    let results = run_experiment(&plan, a.jobs)?;
    results.save(&plan)?;
    if plan.summary.is_none() {
        write_rows_csv(io::stdout(), &results.summary)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BruteForceOutput {
    graph: PoseGraph,
    optima: Vec<(CostKind, GridOptimum)>,
}

fn cmd_brute_force(a: BruteForceArgs) -> Result<()> {
    let g = match &a.graph {
        Some(p) => PoseGraph::load(p)?,
        None => integer_degree_instance(a.n, a.p_out, a.seed)?,
    };
    let costs = if a.cost.is_empty() { CostKind::ROBUST.to_vec() } else { a.cost.clone() };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let optima = pool.install(|| {
        costs
            .iter()
            .map(|&c| grid_search(&g, c, a.steps).map(|o| (c, o)))
            .collect::<Result<Vec<_>>>()
    })?;
    emit(a.out.as_deref(), &json(&BruteForceOutput { graph: g, optima })?)
}

fn main() {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::BruteForce(a) => cmd_brute_force(a),
    };
    if let Err(e) = r {
        eprintln!("rpgo: {e}");
        std::process::exit(1);
    }
}
