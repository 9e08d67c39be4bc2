//! Synthetic pose-graph scenarios: ground truth, topology, inlier noise and
//! outlier contamination.
//!
//! Every scenario is a pure function of its [`ScenarioConfig`] (including the
//! seed). Randomness comes from ChaCha8, which is platform-stable.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::Vector2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Rotation2};
use crate::posegraph::{MeasurementEdge, PoseGraph};

pub type ScenarioRng = ChaCha8Rng;

pub const DEFAULT_RETRY_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// Each unordered pair is connected independently with probability `p`.
    ErdosRenyi { p: f64 },
    /// Pairs closer than `radius` (meters) are connected.
    Geometric { radius: f64 },
    /// A `rows × cols` lattice traversed by a serpentine odometric chain.
    Grid { rows: usize, cols: usize },
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::ErdosRenyi { .. } => "erdos_renyi",
            Topology::Geometric { .. } => "geometric",
            Topology::Grid { .. } => "grid",
        }
    }
}

/// Parameters of one synthetic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n: usize,
    pub topology: Topology,
    /// Side of the square environment, meters.
    pub env_size: f64,
    pub sigma_t: f64,
    pub sigma_r: f64,
    pub p_out: f64,
    pub seed: u64,
    /// Translation weight; defaults to `1/(3σ_T)`.
    pub w_t: Option<f64>,
    /// Rotation weight; defaults to `1/(3√2·σ_R)`.
    pub w_r: Option<f64>,
    pub retry_cap: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let env_size = 50.0;
        ScenarioConfig {
            n: 20,
            topology: Topology::ErdosRenyi { p: 0.5 },
            env_size,
            sigma_t: 0.1,
            sigma_r: 0.01,
            p_out: 0.0,
            seed: 0,
            w_t: None,
            w_r: None,
            retry_cap: DEFAULT_RETRY_CAP,
        }
    }
}

impl ScenarioConfig {
    pub fn erdos_renyi(n: usize, p: f64) -> Self {
        ScenarioConfig {
            n,
            topology: Topology::ErdosRenyi { p },
            ..Default::default()
        }
    }

    /// Geometric graph with the default radius `Δ/4`.
    pub fn geometric(n: usize) -> Self {
        let c = ScenarioConfig::default();
        ScenarioConfig {
            n,
            topology: Topology::Geometric {
                radius: c.env_size / 4.0,
            },
            ..c
        }
    }

    pub fn grid(rows: usize, cols: usize) -> Self {
        ScenarioConfig {
            n: rows * cols,
            topology: Topology::Grid { rows, cols },
            ..Default::default()
        }
    }

    pub fn with_outliers(mut self, p_out: f64) -> Self {
        self.p_out = p_out;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.sigma_t = 0.0;
        self.sigma_r = 0.0;
        self
    }

    /// Weight pair used for every edge. A zero sigma falls back to weight 1.
    pub fn weights(&self) -> (f64, f64) {
        let w_t = self.w_t.unwrap_or(if self.sigma_t > 0.0 {
            1.0 / (3.0 * self.sigma_t)
        } else {
            1.0
        });
        let w_r = self.w_r.unwrap_or(if self.sigma_r > 0.0 {
            1.0 / (3.0 * SQRT_2 * self.sigma_r)
        } else {
            1.0
        });
        (w_t, w_r)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        match self.topology {
            Topology::ErdosRenyi { p } if !(p > 0.0 && p <= 1.0) => {
                return bad(format!("edge probability {p} not in (0, 1]"))
            }
            Topology::Geometric { radius } if !(radius > 0.0 && radius.is_finite()) => {
                return bad(format!("radius {radius} must be positive"))
            }
            Topology::Grid { rows, cols } if rows * cols != self.n || rows == 0 || cols == 0 => {
                return bad(format!(
                    "grid {rows}x{cols} does not have n = {} nodes",
                    self.n
                ))
            }
            _ => {}
        }
        if !(self.env_size > 0.0 && self.env_size.is_finite()) {
            return bad("env_size must be positive".into());
        }
        if !(self.sigma_t >= 0.0 && self.sigma_r >= 0.0) {
            return bad("noise sigmas must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.p_out) {
            return bad(format!("p_out {} not in [0, 1]", self.p_out));
        }
        let (w_t, w_r) = self.weights();
        if !(w_t > 0.0 && w_r > 0.0 && w_t.is_finite() && w_r.is_finite()) {
            return bad("weights must be positive and finite".into());
        }
        Ok(())
    }

    /// Parses a `key = value` config file.
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn rng(&self) -> ScenarioRng {
        ScenarioRng::seed_from_u64(self.seed)
    }
}

/// Lattice position of chain index `k` in a serpentine traversal.
fn serpentine_cell(k: usize, cols: usize) -> (usize, usize) {
    let r = k / cols;
    let c = if r.is_multiple_of(2) {
        k % cols
    } else {
        cols - 1 - k % cols
    };
    (r, c)
}

/// Ground-truth poses: uniform positions in `[0, Δ]²` (lattice points for
/// grids, spanning `Δ` along the longer side) and uniform orientations.
pub fn sample_ground_truth(config: &ScenarioConfig, rng: &mut impl Rng) -> Vec<Pose2> {
    let delta = config.env_size;
    (0..config.n)
        .map(|k| {
            let t = match config.topology {
                Topology::Grid { rows, cols } => {
                    let (r, c) = serpentine_cell(k, cols);
                    let spacing = delta / (rows.max(cols).max(2) - 1) as f64;
                    Vector2::new(c as f64 * spacing, r as f64 * spacing)
                }
                _ => Vector2::new(rng.gen_range(0.0..=delta), rng.gen_range(0.0..=delta)),
            };
            Pose2::new(Rotation2::from_angle_unchecked(uniform_angle(rng)), t)
        })
        .collect()
}

/// Uniform over `(−π, π]`.
fn uniform_angle(rng: &mut impl Rng) -> f64 {
    // gen::<f64>() is in [0, 1); map to (−π, π].
    PI - 2.0 * PI * rng.gen::<f64>()
}

/// One draw of the edge set (not checked for connectivity). Edges are
/// oriented `i < j`, except the grid, whose odometric chain comes first in
/// traversal order followed by the lattice closures.
pub fn build_topology(
    config: &ScenarioConfig,
    gt: &[Pose2],
    rng: &mut impl Rng,
) -> Vec<(usize, usize)> {
    let n = config.n;
    match config.topology {
        Topology::ErdosRenyi { p } => {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            edges
        }
        Topology::Geometric { radius } => {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if (gt[i].translation - gt[j].translation).norm() < radius {
                        edges.push((i, j));
                    }
                }
            }
            edges
        }
        Topology::Grid { rows, cols } => grid_edges(rows, cols),
    }
}

fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let n = rows * cols;
    let mut index = vec![vec![0usize; cols]; rows];
    for k in 0..n {
        let (r, c) = serpentine_cell(k, cols);
        index[r][c] = k;
    }
    let mut edges: Vec<(usize, usize)> = (1..n).map(|k| (k - 1, k)).collect();
    let mut closures = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let a = index[r][c];
            let mut push = |b: usize| {
                let (i, j) = (a.min(b), a.max(b));
                if j != i + 1 {
                    closures.push((i, j));
                }
            };
            if c + 1 < cols {
                push(index[r][c + 1]);
            }
            if r + 1 < rows {
                push(index[r + 1][c]);
            }
        }
    }
    closures.sort_unstable();
    edges.extend(closures);
    edges
}

/// Draws measurements for every edge. With probability `p_out` an edge is an
/// outlier whose noise is `Uniform(−Δ/4, Δ/4)²` in translation and
/// `Uniform(−π, π)` in angle; otherwise the noise is Gaussian with `σ_T`,
/// `σ_R`.
pub fn synthesize_measurements(
    gt: &[Pose2],
    edges: &[(usize, usize)],
    config: &ScenarioConfig,
    rng: &mut impl Rng,
) -> PoseGraph {
    let (w_t, w_r) = config.weights();
    let quarter = config.env_size / 4.0;
    let mut labels = Vec::with_capacity(edges.len());
    let measurements = edges
        .iter()
        .map(|&(i, j)| {
            let exact = gt[i].between(&gt[j]);
            let outlier = rng.gen::<f64>() < config.p_out;
            let (dt, dtheta) = if outlier {
                let dt = Vector2::new(
                    rng.gen_range(-quarter..quarter),
                    rng.gen_range(-quarter..quarter),
                );
                (dt, rng.gen_range(-PI..PI))
            } else {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                let na: f64 = rng.sample(StandardNormal);
                (Vector2::new(nx, ny) * config.sigma_t, na * config.sigma_r)
            };
            labels.push(outlier);
            let rel = Pose2::new(
                exact
                    .rotation
                    .compose(&Rotation2::from_angle_unchecked(dtheta)),
                exact.translation + dt,
            );
            MeasurementEdge::new(i, j, rel, w_t, w_r)
        })
        .collect();
    let mut graph = PoseGraph::new(gt.len(), measurements);
    graph.ground_truth = Some(gt.to_vec());
    graph.outlier_labels = Some(labels);
    graph
}

/// Generates a connected scenario, redrawing positions and edges until the
/// graph is connected or the retry cap is hit.
pub fn generate(config: &ScenarioConfig) -> Result<PoseGraph> {
    config.validate()?;
    let mut rng = config.rng();
    let cap = config.retry_cap.max(1);
    for _ in 0..cap {
        let gt = sample_ground_truth(config, &mut rng);
        let edges = build_topology(config, &gt, &mut rng);
        let probe = PoseGraph::new(
            config.n,
            edges
                .iter()
                .map(|&(i, j)| MeasurementEdge::new(i, j, Pose2::identity(), 1.0, 1.0))
                .collect(),
        );
        if !probe.is_connected() {
            continue;
        }
        let mut graph = synthesize_measurements(&gt, &edges, config, &mut rng);
        if let Topology::Grid { .. } = config.topology {
            graph.odometric = Some((0..edges.len()).map(|k| k + 1 < config.n).collect());
        }
        return Ok(graph);
    }
    Err(Error::Generation {
        attempts: cap,
        reason: format!("no connected graph for {config:?}"),
    })
}
