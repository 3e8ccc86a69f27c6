use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use varpx::experiment::{ConvergenceReport, InfSupReportSet, SolveReport, CSV_HEADER, SCHEMA};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn varpx(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varpx"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("spawn varpx")
}

fn parse_row(line: &str) -> Vec<Option<f64>> {
    line.split(',').map(|f| if f.is_empty() { None } else { Some(f.parse().expect("number")) }).collect()
}

#[test]
fn converge_matches_golden_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = varpx(&["converge", "--threads", "1"], &data("newtonian_small.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let got = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let want = std::fs::read_to_string(data("golden_newtonian_small.csv")).unwrap();
    let (g, w): (Vec<&str>, Vec<&str>) = (got.lines().collect(), want.lines().collect());
    assert_eq!(g.len(), w.len());
    assert_eq!(g[0], CSV_HEADER);
    for (a, b) in g[1..].iter().zip(&w[1..]) {
        for (x, y) in parse_row(a).iter().zip(parse_row(b)) {
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-9 * y.abs().max(1e-300), "{a} vs {b}"),
                (None, None) => {}
                _ => panic!("{a} vs {b}"),
            }
        }
    }
}

#[test]
fn report_json_round_trips_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = varpx(&["converge", "--seed", "11"], &data("newtonian_small.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let report: ConvergenceReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.schema, SCHEMA);
    assert_eq!(report.config.seed, 11);
    assert_eq!(report.config.mesh.levels, vec![2, 4, 8]);
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
    assert!(report.pass);
}

#[test]
fn failed_verdict_exits_with_two() {
    // zero errors leave the rates undefined
    let dir = tempfile::tempdir().unwrap();
    let out = varpx(&["converge"], &data("zero_solution.json"), dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap().lines().count(), 3);
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = varpx(&["converge"], &data("bad_levels.json"), dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
    let out = varpx(&["solve"], &data("missing.json"), dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn infsup_and_solve_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = varpx(&["infsup"], &data("newtonian_small.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r: InfSupReportSet = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(r.scans.len(), 3);
    assert_eq!(std::fs::read_to_string(dir.path().join("infsup.csv")).unwrap().lines().count(), 10);

    let solve_dir = dir.path().join("solve");
    let out = varpx(&["solve"], &data("newtonian_small.json"), &solve_dir);
    assert_eq!(out.status.code(), Some(0));
    let s: SolveReport = serde_json::from_str(&std::fs::read_to_string(solve_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!((s.n, s.newton_iterations), (8, 1));
    let mesh = varpx::mesh::Triangulation::read_text(std::io::BufReader::new(std::fs::File::open(solve_dir.join("mesh.txt")).unwrap())).unwrap();
    assert_eq!(mesh.num_cells(), 128);
    assert_eq!(std::fs::read_to_string(solve_dir.join("fields.csv")).unwrap().lines().count(), 82);
}
