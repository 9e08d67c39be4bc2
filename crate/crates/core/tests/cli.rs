use std::path::Path;
use std::process::{Command, Output};

use robust_pgo::posegraph::{parse_g2o, PoseGraph};

fn rpgo(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_rpgo"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn rpgo");
    assert!(
        out.status.success(),
        "rpgo {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn generate_then_solve_then_detect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    rpgo(&["generate", "--n", "12", "--p-out", "0.2", "--seed", "3", "--out", "g.json"], d);
    rpgo(&["generate", "--n", "12", "--p-out", "0.2", "--seed", "3", "--out", "g.g2o"], d);
    let g = PoseGraph::load(d.join("g.json")).unwrap();
    let doc = parse_g2o(&std::fs::read_to_string(d.join("g.g2o")).unwrap()).unwrap();
    assert_eq!(g.n, 12);
    assert_eq!(doc.graph.edges.len(), g.m());
    assert!(g.outlier_labels.is_some());

    let out = rpgo(&["solve", "--graph", "g.json", "--method", "l2-2stage", "--out", "est.json"], d);
    assert!(out.stdout.is_empty());
    let est: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("est.json")).unwrap()).unwrap();
    assert_eq!(est["method"], "l2-2stage");
    assert_eq!(est["poses"].as_array().unwrap().len(), 12);
    assert!(est["trans_err"].as_f64().unwrap().is_finite());
    assert!(est["diagnostics"]["stable_rank"].as_f64().unwrap() >= 1.0);

    rpgo(&["detect", "--graph", "g.json", "--poses", "est.json", "--out", "pr.csv"], d);
    let csv = std::fs::read_to_string(d.join("pr.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "method,eta_t,eta_R,precision,recall,sweep");
    assert!(lines.count() > 100);

    let at = rpgo(&["detect", "--graph", "g.json", "--poses", "est.json", "--at", "1.0", "0.1"], d);
    let v: serde_json::Value = serde_json::from_slice(&at.stdout).unwrap();
    assert_eq!(v["predicted"].as_array().unwrap().len(), g.m());
}

#[test]
fn gauss_newton_writes_g2o_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    rpgo(&["generate", "--topology", "grid", "--n", "12", "--rows", "3", "--seed", "1", "--out", "grid.json"], d);
    rpgo(&["solve", "--graph", "grid.json", "--method", "gn", "--out", "est.g2o"], d);
    let doc = parse_g2o(&std::fs::read_to_string(d.join("est.g2o")).unwrap()).unwrap();
    assert_eq!(doc.initial.len(), 12);
}

#[test]
fn experiment_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("plan.toml"),
        "p_out = [0.1]\nmethods = [\"huber-2stage\", \"gn\"]\nruns = 2\nseed = 4\n\n[[scenarios]]\nn = 8\n",
    )
    .unwrap();
    let args = ["experiment", "--plan", "plan.toml", "--jobs", "1", "--out", "rows.csv", "--summary", "summary.csv"];
    rpgo(&args, d);
    let rows = std::fs::read_to_string(d.join("rows.csv")).unwrap();
    let header = rows.lines().next().unwrap();
    assert!(header.starts_with(
        "topology,n,p_out,method,run,seed,trans_err,rot_err,stable_rank,numeric_rank,relaxed_cost,rounded_cost,gap_bound,tight,wall_ms"
    ));
    // two runs plus one mean row per method
    assert_eq!(rows.lines().count(), 1 + 2 * 3);
    assert_eq!(rows.lines().filter(|l| l.contains(",mean,")).count(), 2);
    let summary = std::fs::read_to_string(d.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    // same plan, same bytes apart from timing
    rpgo(&["experiment", "--plan", "plan.toml", "--jobs", "1", "--out", "rows2.csv", "--summary", "s2.csv"], d);
    let strip = |t: &str| -> Vec<String> {
        t.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f[14] = "";
                f.join(",")
            })
            .collect()
    };
    let again = std::fs::read_to_string(d.join("rows2.csv")).unwrap();
    assert_eq!(strip(&rows), strip(&again));
}

#[test]
fn brute_force_reports_each_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out = rpgo(&["brute-force", "--n", "3", "--seed", "2", "--steps", "72"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let optima = v["optima"].as_array().unwrap();
    let costs: Vec<&str> = optima.iter().map(|o| o[0].as_str().unwrap()).collect();
    assert_eq!(costs, ["l1", "l2", "huber"]);
    assert!(optima.iter().all(|o| o[1]["angles"].as_array().unwrap().len() == 3));
}

#[test]
fn invalid_input_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.g2o"), "VERTEX_SE2 0 0 0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rpgo"))
        .args(["solve", "--graph", "bad.g2o"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("rpgo: "));
    let out = Command::new(env!("CARGO_BIN_EXE_rpgo"))
        .args(["solve", "--graph", "x.json", "--method", "l3-2stage"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
