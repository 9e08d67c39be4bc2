//! Residual-based outlier classification and precision/recall sweeps.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::costs::edge_residual;
use crate::error::{Error, Result};
use crate::geometry::{angle_to_frobenius, Pose2};
use crate::posegraph::PoseGraph;

/// Unweighted residual norms of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// `‖Rᵢᵀ(tⱼ − tᵢ) − t̄ᵢⱼ‖₂`, meters.
    pub r_t: f64,
    /// `‖RᵢᵀRⱼ − R̄ᵢⱼ‖_F`.
    pub r_r: f64,
}

/// Residual norms of every edge at `poses`.
pub fn residuals(graph: &PoseGraph, poses: &[Pose2]) -> Result<Vec<Residual>> {
    if poses.len() != graph.n {
        return Err(Error::LengthMismatch {
            expected: graph.n,
            got: poses.len(),
        });
    }
    Ok(graph
        .edges
        .iter()
        .map(|e| {
            let r = edge_residual(e, poses);
            Residual {
                r_t: r.r_t.norm(),
                r_r: r.r_r.norm(),
            }
        })
        .collect())
}

/// Flags an edge when either residual reaches its threshold. `eta_r` is in
/// Frobenius units.
pub fn classify(residuals: &[Residual], eta_t: f64, eta_r: f64) -> Vec<bool> {
    residuals.iter().map(|r| r.r_t >= eta_t || r.r_r >= eta_r).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    /// True outliers.
    pub n_out: usize,
    /// Predicted outliers that are outliers.
    pub true_pos: usize,
    /// Predicted outliers that are inliers.
    pub false_pos: usize,
}

impl Counts {
    pub fn tally(predicted: &[bool], labels: &[bool]) -> Result<Self> {
        if predicted.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: labels.len(),
                got: predicted.len(),
            });
        }
        let mut c = Counts {
            n_out: 0,
            true_pos: 0,
            false_pos: 0,
        };
        for (&p, &l) in predicted.iter().zip(labels) {
            c.n_out += l as usize;
            c.true_pos += (p && l) as usize;
            c.false_pos += (p && !l) as usize;
        }
        Ok(c)
    }

    /// One when nothing is predicted.
    pub fn precision(&self) -> f64 {
        let predicted = self.true_pos + self.false_pos;
        if predicted == 0 {
            1.0
        } else {
            self.true_pos as f64 / predicted as f64
        }
    }

    /// Undefined when there are no outliers.
    pub fn recall(&self) -> Option<f64> {
        (self.n_out > 0).then(|| self.true_pos as f64 / self.n_out as f64)
    }
}

/// Classification of every edge at one threshold pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub residuals: Vec<Residual>,
    pub predicted: Vec<bool>,
    pub eta_t: f64,
    /// Rotation threshold as an angle, radians.
    pub eta_r: f64,
    /// Present when the graph carries outlier labels.
    pub counts: Option<Counts>,
}

/// Classifies the edges of `graph` at `poses`; `eta_r` is an angle.
pub fn detect(graph: &PoseGraph, poses: &[Pose2], eta_t: f64, eta_r: f64) -> Result<DetectionResult> {
    let residuals = residuals(graph, poses)?;
    let predicted = classify(&residuals, eta_t, angle_to_frobenius(eta_r));
    let counts = match &graph.outlier_labels {
        Some(l) => Some(Counts::tally(&predicted, l)?),
        None => None,
    };
    Ok(DetectionResult {
        residuals,
        predicted,
        eta_t,
        eta_r,
        counts,
    })
}

/// Threshold axes of a precision/recall sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    /// Translation thresholds, meters.
    pub eta_t: Vec<f64>,
    /// Rotation thresholds as angles, radians.
    pub eta_r: Vec<f64>,
}

impl Default for ThresholdGrid {
    /// 100 log-spaced `η_t` in `[1e-3, 50]` m and 100 evenly spaced `η_R`
    /// in `(0, π]`.
    fn default() -> Self {
        let k = 100;
        let (lo, hi) = (1e-3f64.ln(), 50f64.ln());
        ThresholdGrid {
            eta_t: (0..k).map(|i| (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp()).collect(),
            eta_r: (1..=k).map(|i| PI * i as f64 / k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// `η_t` and `η_R` advance together.
    Diagonal,
    /// Every pair of thresholds.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub eta_t: f64,
    /// Radians.
    pub eta_r: f64,
    pub precision: f64,
    pub recall: Option<f64>,
    pub sweep: SweepMode,
}

/// Precision and recall over the diagonal of `grid` followed by every
/// threshold pair. Requires equal axis lengths for the diagonal.
pub fn pr_sweep(residuals: &[Residual], labels: &[bool], grid: &ThresholdGrid) -> Result<Vec<PrPoint>> {
    if grid.eta_t.len() != grid.eta_r.len() {
        return Err(Error::Config("threshold axes must have equal length".into()));
    }
    let point = |eta_t: f64, eta_r: f64, sweep| -> Result<PrPoint> {
        let c = Counts::tally(&classify(residuals, eta_t, angle_to_frobenius(eta_r)), labels)?;
        Ok(PrPoint {
            eta_t,
            eta_r,
            precision: c.precision(),
            recall: c.recall(),
            sweep,
        })
    };
    let mut out = Vec::with_capacity(grid.eta_t.len() * (grid.eta_r.len() + 1));
    for (&t, &r) in grid.eta_t.iter().zip(&grid.eta_r) {
        out.push(point(t, r, SweepMode::Diagonal)?);
    }
    for &t in &grid.eta_t {
        for &r in &grid.eta_r {
            out.push(point(t, r, SweepMode::Grid)?);
        }
    }
    Ok(out)
}

/// Area under the interpolated precision/recall curve: precision at recall
/// `r` is the best precision among points with recall at least `r`. `None`
/// when recall is undefined.
pub fn pr_area(points: &[PrPoint]) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| p.recall.map(|r| (r, p.precision)))
        .collect::<Option<_>>()?;
    if pts.is_empty() {
        return None;
    }
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut area = 0.0;
    let mut best = 0.0f64;
    for (k, &(r, p)) in pts.iter().enumerate() {
        best = best.max(p);
        let next = pts.get(k + 1).map_or(0.0, |q| q.0);
        area += (r - next) * best;
    }
    Some(area)
}

/// Largest `min(precision, recall)` over the sweep.
pub fn best_balanced(points: &[PrPoint]) -> Option<f64> {
    points
        .iter()
        .filter_map(|p| p.recall.map(|r| r.min(p.precision)))
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

#[derive(Serialize)]
struct PrRow<'a> {
    method: &'a str,
    eta_t: f64,
    #[serde(rename = "eta_R")]
    eta_r: f64,
    precision: f64,
    recall: Option<f64>,
    sweep: SweepMode,
}

/// Writes PR points as CSV with columns
/// `method,eta_t,eta_R,precision,recall,sweep`.
pub fn write_pr_csv<W: Write>(out: W, rows: &[(String, Vec<PrPoint>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (method, points) in rows {
        for p in points {
            w.serialize(PrRow {
                method,
                eta_t: p.eta_t,
                eta_r: p.eta_r,
                precision: p.precision,
                recall: p.recall,
                sweep: p.sweep,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
