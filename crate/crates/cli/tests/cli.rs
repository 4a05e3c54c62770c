use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qgdiff_core::io::read_ndjson;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn qgdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgdiff")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_good_and_rejects_bad_files() {
    assert_eq!(qgdiff(&["validate", path(&data("good.json"))]).status.code(), Some(0));
    assert_eq!(qgdiff(&["validate", "--graph", path(&data("minimal.json"))]).status.code(), Some(0));
    let bad = qgdiff(&["validate", path(&data("bad_missing_length.json"))]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("/edges/0/length"));
    assert_eq!(qgdiff(&["validate", "/nonexistent/scenario.json"]).status.code(), Some(2));
}

#[test]
fn zero_data_give_zero_solution_and_fluxes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("star.csv");
    let run = qgdiff(&["solve-elliptic", "--graph", path(&data("star_zero.json")), "--out", path(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let table = std::fs::read_to_string(&out).unwrap();
    let mut rows = table.lines();
    assert_eq!(rows.next(), Some("edge,node,x,u,v"));
    let mut n = 0;
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0, "{row}");
        assert_eq!(cols[4].parse::<f64>().unwrap(), 0.0, "{row}");
        n += 1;
    }
    assert_eq!(n, 3 * 9);
    let fluxes = std::fs::read_to_string(dir.path().join("star.fluxes.csv")).unwrap();
    let mut rows = fluxes.lines();
    assert_eq!(rows.next(), Some("edge,from,to,a,b"));
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[4].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn elliptic_methods_agree_through_the_cli() {
    let newton = qgdiff(&["solve-elliptic", "--graph", path(&data("good.json")), "--method", "newton", "--cells", "24"]);
    let gluing = qgdiff(&["solve-elliptic", "--graph", path(&data("good.json")), "--method", "gluing", "--cells", "24"]);
    assert_eq!(newton.status.code(), Some(0));
    assert_eq!(gluing.status.code(), Some(0));
    let col = |o: &Output| -> Vec<f64> {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .skip(1)
            .take_while(|l| !l.is_empty())
            .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
            .collect()
    };
    let (a, b) = (col(&newton), col(&gluing));
    assert_eq!(a.len(), 2 * 25);
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-6));
}

#[test]
fn parabolic_stream_is_line_delimited_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.ndjson");
    let run = qgdiff(&[
        "solve-parabolic", "--graph", path(&data("good.json")), "--out", path(&out), "--dt", "0.05", "--t-end", "0.5",
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines() {
        serde_json_line(line);
    }
    let records = read_ndjson(&text).unwrap();
    assert_eq!(records.len(), 11);
    assert_eq!(records[10].t, 0.5);
    assert_eq!(records[0].vertex_values.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);

    let svg = dir.path().join("run.svg");
    let plot = qgdiff(&["plot", path(&out), "--out", path(&svg), "--vertices", "a,c"]);
    assert_eq!(plot.status.code(), Some(0));
    let svg = std::fs::read_to_string(svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 3);
}

fn serde_json_line(line: &str) {
    assert!(line.starts_with("{\"t\":") && line.ends_with("}}"), "{line}");
    read_ndjson(line).unwrap();
}

#[test]
fn parabolic_run_needs_a_time_grid() {
    let run = qgdiff(&["solve-parabolic", "--graph", path(&data("minimal.json"))]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_reports() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_qgdiff"))
            .args(["verify", "--suite", "mass-balance", "--seed", "3", "--trials", "12"])
            .env("QGDIFF_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn verify_all_suites_pass_with_small_trials() {
    let run = qgdiff(&["verify", "--seed", "1", "--trials", "3"]);
    let text = String::from_utf8_lossy(&run.stdout);
    assert_eq!(run.status.code(), Some(0), "{text}");
    assert!(text.contains("PASS mass-balance") && text.ends_with("all properties hold\n"));
}
