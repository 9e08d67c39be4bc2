//! 2D g2o text interop (`VERTEX_SE2` / `EDGE_SE2`).

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::Vector2;

use super::{MeasurementEdge, PoseGraph};
use crate::error::{Error, Result};
use crate::geometry::{Pose2, Rotation2};

const ISOTROPY_TOL: f64 = 1e-9;

/// A parsed g2o file: the graph plus the initial guess from `VERTEX_SE2`.
#[derive(Debug, Clone, PartialEq)]
pub struct G2oDocument {
    pub graph: PoseGraph,
    pub initial: Vec<Pose2>,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::G2o {
        line,
        msg: msg.into(),
    }
}

fn fields<const N: usize>(tokens: &[&str], line: usize) -> Result<[f64; N]> {
    if tokens.len() != N {
        return Err(err(
            line,
            format!("expected {N} numeric fields, found {}", tokens.len()),
        ));
    }
    let mut out = [0.0; N];
    for (o, t) in out.iter_mut().zip(tokens) {
        *o = t
            .parse::<f64>()
            .map_err(|_| err(line, format!("invalid number {t:?}")))?;
        if !o.is_finite() {
            return Err(err(line, format!("non-finite number {t:?}")));
        }
    }
    Ok(out)
}

fn parse_id(tok: &str, line: usize) -> Result<i64> {
    tok.parse::<i64>()
        .map_err(|_| err(line, format!("invalid vertex id {tok:?}")))
}

/// Parses 2D g2o text.
///
/// Vertex ids are re-indexed densely in order of first appearance (vertices
/// first, then edge endpoints); the original ids are kept in
/// `graph.vertex_ids`. The translation information block must be isotropic
/// and uncorrelated with rotation, since the estimators carry one scalar
/// weight per residual.
pub fn parse_g2o(text: &str) -> Result<G2oDocument> {
    let mut ids: HashMap<i64, usize> = HashMap::new();
    let mut original: Vec<i64> = Vec::new();
    let mut vertices: Vec<(usize, Pose2)> = Vec::new();
    let mut edges = Vec::new();
    let mut any_record = false;

    let mut dense = |id: i64, ids: &mut HashMap<i64, usize>| -> usize {
        *ids.entry(id).or_insert_with(|| {
            original.push(id);
            original.len() - 1
        })
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "VERTEX_SE2" => {
                if tokens.len() != 5 {
                    return Err(err(line, "VERTEX_SE2 expects: id x y theta"));
                }
                let id = parse_id(tokens[1], line)?;
                let [x, y, th] = fields::<3>(&tokens[2..], line)?;
                if ids.contains_key(&id) {
                    return Err(err(line, format!("duplicate vertex {id}")));
                }
                let k = dense(id, &mut ids);
                vertices.push((k, Pose2::from_xy_theta(x, y, th)?));
                any_record = true;
            }
            "EDGE_SE2" => {
                if tokens.len() != 12 {
                    return Err(err(
                        line,
                        "EDGE_SE2 expects: i j dx dy dtheta I11 I12 I13 I22 I23 I33",
                    ));
                }
                let i = parse_id(tokens[1], line)?;
                let j = parse_id(tokens[2], line)?;
                let [dx, dy, dth, i11, i12, i13, i22, i23, i33] = fields::<9>(&tokens[3..], line)?;
                if (i11 - i22).abs() > ISOTROPY_TOL || i12.abs() > ISOTROPY_TOL {
                    return Err(err(
                        line,
                        format!(
                            "anisotropic translation information (I11={i11}, I22={i22}, I12={i12}); \
                             only isotropic weights w_t·I₂ are representable"
                        ),
                    ));
                }
                if i13.abs() > ISOTROPY_TOL || i23.abs() > ISOTROPY_TOL {
                    return Err(err(
                        line,
                        "translation/rotation cross-information (I13, I23) must be zero",
                    ));
                }
                if i11 <= 0.0 || i33 <= 0.0 {
                    return Err(err(line, "information diagonal must be positive"));
                }
                if i == j {
                    return Err(err(line, "self loop"));
                }
                let from = dense(i, &mut ids);
                let to = dense(j, &mut ids);
                let rel = Pose2::new(Rotation2::from_angle(dth)?, Vector2::new(dx, dy));
                edges.push(MeasurementEdge::new(from, to, rel, i11.sqrt(), i33.sqrt()));
                any_record = true;
            }
            other => return Err(err(line, format!("unsupported record {other:?}"))),
        }
    }
    if !any_record {
        return Err(Error::EmptyGraph);
    }

    let n = original.len();
    let mut initial = vec![Pose2::identity(); n];
    for (k, p) in vertices {
        initial[k] = p;
    }
    let dense_ids = original.iter().enumerate().all(|(k, &id)| id == k as i64);
    let mut graph = PoseGraph::new(n, edges);
    if !dense_ids {
        graph.vertex_ids = Some(original);
    }
    Ok(G2oDocument { graph, initial })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes 2D g2o text with 17 significant digits per number.
pub fn write_g2o(graph: &PoseGraph, poses: &[Pose2]) -> Result<String> {
    if poses.len() != graph.n {
        return Err(Error::LengthMismatch {
            expected: graph.n,
            got: poses.len(),
        });
    }
    let id = |k: usize| -> i64 { graph.vertex_ids.as_ref().map_or(k as i64, |ids| ids[k]) };
    let mut out = String::new();
    for (k, p) in poses.iter().enumerate() {
        writeln!(
            out,
            "VERTEX_SE2 {} {} {} {}",
            id(k),
            num(p.translation.x),
            num(p.translation.y),
            num(p.rotation.angle())
        )
        .unwrap();
    }
    for e in &graph.edges {
        let it = e.w_t * e.w_t;
        let ir = e.w_r * e.w_r;
        writeln!(
            out,
            "EDGE_SE2 {} {} {} {} {} {} {} {} {} {} {}",
            id(e.from),
            id(e.to),
            num(e.rel_translation.x),
            num(e.rel_translation.y),
            num(e.rel_rotation.angle()),
            num(it),
            num(0.0),
            num(0.0),
            num(it),
            num(0.0),
            num(ir)
        )
        .unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_example() {
        let text = "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0 0\nEDGE_SE2 0 1 1 0 0 100 0 0 100 0 10000";
        let doc = parse_g2o(text).unwrap();
        assert_eq!(doc.graph.n, 2);
        assert_eq!(doc.graph.m(), 1);
        let e = &doc.graph.edges[0];
        assert_eq!((e.from, e.to), (0, 1));
        assert_eq!(e.w_t, 10.0);
        assert_eq!(e.w_r, 100.0);
        assert_eq!(doc.initial[1].translation, Vector2::new(1.0, 0.0));
        assert!(doc.graph.vertex_ids.is_none());
    }

    #[test]
    fn empty_stream_is_error() {
        assert!(matches!(parse_g2o(""), Err(Error::EmptyGraph)));
        assert!(matches!(
            parse_g2o("# comment only\n\n"),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 oops 0 0\n";
        match parse_g2o(text) {
            Err(Error::G2o { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn anisotropic_information_rejected() {
        let text = "EDGE_SE2 0 1 1 0 0 100 0 0 50 0 10000";
        match parse_g2o(text) {
            Err(Error::G2o { line, msg }) => {
                assert_eq!(line, 1);
                assert!(msg.contains("anisotropic"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_g2o("EDGE_SE2 0 1 1 0 0 100 3 0 100 0 10000").is_err());
    }

    #[test]
    fn sparse_ids_are_reindexed_and_written_back() {
        let text = "VERTEX_SE2 10 0 0 0\nVERTEX_SE2 42 1 0 0\nEDGE_SE2 10 42 1 0 0 4 0 0 4 0 9";
        let doc = parse_g2o(text).unwrap();
        assert_eq!(doc.graph.vertex_ids, Some(vec![10, 42]));
        assert_eq!(doc.graph.edges[0].from, 0);
        let out = write_g2o(&doc.graph, &doc.initial).unwrap();
        assert!(out.starts_with("VERTEX_SE2 10 "));
        assert!(out.contains("EDGE_SE2 10 42 "));
    }

    #[test]
    fn write_length_mismatch() {
        let g = PoseGraph::new(3, vec![]);
        assert!(matches!(
            write_g2o(&g, &[Pose2::identity()]),
            Err(Error::LengthMismatch {
                expected: 3,
                got: 1
            })
        ));
    }
}
