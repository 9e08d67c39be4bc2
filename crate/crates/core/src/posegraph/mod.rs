//! Pose graph data model.
//!
//! A [`PoseGraph`] holds `n` nodes with dense ids `0..n` and a list of
//! directed relative-pose measurements. Each measurement `i → j` is expressed
//! in the frame of node `i`:
//!
//! ```text
//! t̄ᵢⱼ = Rᵢᵀ (tⱼ − tᵢ) + noise,    R̄ᵢⱼ = Rᵢᵀ Rⱼ · noise
//! ```
//!
//! Weights follow the square-root-information convention: `w_t = √I_xx` and
//! `w_r = √I_θθ`, so that the quadratic objective multiplies squared residuals
//! by `w²` while the robust objectives multiply unsquared residuals by `w`.

mod g2o;

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Rotation2};

pub use g2o::{parse_g2o, write_g2o, G2oDocument};

/// One relative-pose measurement `from → to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEdge {
    pub from: usize,
    pub to: usize,
    pub rel_rotation: Rotation2,
    pub rel_translation: Vector2<f64>,
    pub w_t: f64,
    pub w_r: f64,
}

impl MeasurementEdge {
    pub fn new(from: usize, to: usize, rel: Pose2, w_t: f64, w_r: f64) -> Self {
        MeasurementEdge {
            from,
            to,
            rel_rotation: rel.rotation,
            rel_translation: rel.translation,
            w_t,
            w_r,
        }
    }

    pub fn relative_pose(&self) -> Pose2 {
        Pose2::new(self.rel_rotation, self.rel_translation)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseGraph {
    pub n: usize,
    pub edges: Vec<MeasurementEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<Pose2>>,
    /// `true` marks an outlier measurement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_labels: Option<Vec<bool>>,
    /// Edges forming the odometric chain, when the generator knows them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub odometric: Option<Vec<bool>>,
    /// Original (possibly sparse) vertex ids, indexed by dense id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_ids: Option<Vec<i64>>,
}

/// One problem found by [`PoseGraph::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyGraph,
    NodeOutOfRange { edge: usize, node: usize },
    SelfLoop { edge: usize },
    NonPositiveWeight { edge: usize },
    NonFiniteMeasurement { edge: usize },
    Disconnected { unreachable: Vec<usize> },
    LabelLength { expected: usize, got: usize },
    GroundTruthLength { expected: usize, got: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGraph => write!(f, "graph has no nodes"),
            Violation::NodeOutOfRange { edge, node } => {
                write!(f, "edge {edge}: node {node} out of range")
            }
            Violation::SelfLoop { edge } => write!(f, "edge {edge}: self loop"),
            Violation::NonPositiveWeight { edge } => {
                write!(f, "edge {edge}: nonpositive or non-finite weight")
            }
            Violation::NonFiniteMeasurement { edge } => {
                write!(f, "edge {edge}: non-finite measurement")
            }
            Violation::Disconnected { unreachable } => {
                write!(
                    f,
                    "disconnected: nodes {unreachable:?} unreachable from node 0"
                )
            }
            Violation::LabelLength { expected, got } => {
                write!(f, "outlier labels: expected {expected}, got {got}")
            }
            Violation::GroundTruthLength { expected, got } => {
                write!(f, "ground truth: expected {expected} poses, got {got}")
            }
        }
    }
}

impl PoseGraph {
    pub fn new(n: usize, edges: Vec<MeasurementEdge>) -> Self {
        PoseGraph {
            n,
            edges,
            ..Default::default()
        }
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Lists every structural problem; an empty list means every solver in
    /// the crate accepts the graph.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(Violation::EmptyGraph);
            return out;
        }
        for (k, e) in self.edges.iter().enumerate() {
            for node in [e.from, e.to] {
                if node >= self.n {
                    out.push(Violation::NodeOutOfRange { edge: k, node });
                }
            }
            if e.from == e.to {
                out.push(Violation::SelfLoop { edge: k });
            }
            if !(e.w_t.is_finite() && e.w_t > 0.0 && e.w_r.is_finite() && e.w_r > 0.0) {
                out.push(Violation::NonPositiveWeight { edge: k });
            }
            if e.rel_translation.iter().any(|v| !v.is_finite()) {
                out.push(Violation::NonFiniteMeasurement { edge: k });
            }
        }
        if let Some(labels) = &self.outlier_labels {
            if labels.len() != self.edges.len() {
                out.push(Violation::LabelLength {
                    expected: self.edges.len(),
                    got: labels.len(),
                });
            }
        }
        if let Some(gt) = &self.ground_truth {
            if gt.len() != self.n {
                out.push(Violation::GroundTruthLength {
                    expected: self.n,
                    got: gt.len(),
                });
            }
        }
        let reach = self.reachable_from_zero();
        let unreachable: Vec<usize> = (0..self.n).filter(|&i| !reach[i]).collect();
        if !unreachable.is_empty() {
            out.push(Violation::Disconnected { unreachable });
        }
        out
    }

    /// Fails with the first violation, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidGraph(v.to_string())),
        }
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.reachable_from_zero().iter().all(|&r| r)
    }

    fn reachable_from_zero(&self) -> Vec<bool> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        if self.n == 0 {
            return seen;
        }
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Undirected adjacency: `adj[u]` lists `(neighbor, edge index)`.
    /// Out-of-range endpoints are skipped.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (k, e) in self.edges.iter().enumerate() {
            if e.from < self.n && e.to < self.n && e.from != e.to {
                adj[e.from].push((e.to, k));
                adj[e.to].push((e.from, k));
            }
        }
        adj
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Loads a graph from `.json` or `.g2o` (by extension).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "g2o") {
            Ok(parse_g2o(&text)?.graph)
        } else {
            Self::from_json(&text)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if path.extension().is_some_and(|e| e == "g2o") {
            let poses = self
                .ground_truth
                .clone()
                .unwrap_or_else(|| vec![Pose2::identity(); self.n]);
            write_g2o(self, &poses)?
        } else {
            self.to_json()?
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}
