//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails. Runs without the libtest harness so that every line is
//! printed.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qgdiff_cli::run_cli;
use qgdiff_core::diagnostics::{heat_oracle, heat_temporal_order, run_suite, PropertyReport};
use qgdiff_core::edge_solver::solve_edge_bvp;
use qgdiff_core::io::{read_ndjson, Checkpoint};
use qgdiff_core::parabolic::{energy_ledger, Forcing, TemporalOrder};
use qgdiff_core::scenario::ScenarioDoc;
use qgdiff_core::{
    solve_parabolic, Edge, EdgeBvp, EdgeFunction, Evolution, GraphSpec, Method, MetricGraph, Nonlinearity, Schedule,
    SolverConfig, TimeGrid, VertexFlux,
};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn suite(name: &str, seed: u64, trials: usize) -> Result<Vec<PropertyReport>, String> {
    run_suite(name, seed, trials, &cfg()).map_err(|e| e.to_string())
}

fn summarize(reports: &[PropertyReport], tol: f64) -> Verdict {
    let worst = reports.iter().map(|r| r.worst_violation).fold(f64::NEG_INFINITY, f64::max);
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.to_string()).collect();
    let mut detail = format!("{} reports, worst violation {worst:.3e} (tol {tol:e})", reports.len());
    if !failed.is_empty() {
        detail.push_str(&format!("; failing: {}", failed.join(" | ")));
    }
    verdict(failed.is_empty() && worst <= tol, detail)
}

fn manufactured_convergence() -> Result<Verdict, String> {
    let mut errs = Vec::new();
    for cells in [32, 64, 128] {
        let bvp = EdgeBvp::from_fn(1.0, 2.0, Nonlinearity::Identity, cells, |x| (1.0 + PI * PI) * (PI * x).cos());
        let sol = solve_edge_bvp(&bvp, &cfg()).map_err(|e| e.to_string())?;
        let h = 1.0 / cells as f64;
        let err = sol
            .u
            .iter()
            .enumerate()
            .map(|(j, u)| (u - (PI * j as f64 * h).cos()).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let eoc: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(verdict(
        eoc.iter().all(|&r| r >= 1.9) && errs[2] <= 5e-4,
        format!("errors [{}], EOC {eoc:.3?} (≥ 1.9), error at 128 cells ≤ 5e-4", sci(&errs)),
    ))
}

fn exact_linear_p3() -> Result<Verdict, String> {
    let mut worst: f64 = 0.0;
    for cells in [2, 7, 32, 100] {
        let bvp = EdgeBvp::from_fn(1.0, 3.0, Nonlinearity::Identity, cells, |x| x).with_fluxes(-1.0, 1.0);
        let sol = solve_edge_bvp(&bvp, &cfg()).map_err(|e| e.to_string())?;
        let h = 1.0 / cells as f64;
        for (j, u) in sol.u.iter().enumerate() {
            worst = worst.max((u - j as f64 * h).abs());
        }
    }
    Ok(verdict(worst <= 1e-8, format!("worst nodal error {worst:.3e} over 2/7/32/100 cells (tol 1e-8)")))
}

fn star3(cells: usize) -> MetricGraph {
    MetricGraph::build(GraphSpec::new(
        &["c", "a", "b", "d"],
        vec![
            Edge::new("e1", "c", "a", 1.0, 2.0).with_cells(cells),
            Edge::new("e2", "c", "b", 0.8, 2.0).with_cells(cells),
            Edge::new("e3", "d", "c", 1.2, 2.0).with_cells(cells),
        ],
    ))
    .unwrap()
}

fn heat_oracle_agreement() -> Result<Verdict, String> {
    let g = star3(64);
    let v0 = EdgeFunction::from_fn(&g, |e, x| (PI * x * (e as f64 + 1.0) / 2.0).cos() + 0.3 * e as f64);
    let f = EdgeFunction::from_fn(&g, |e, x| 0.5 * (3.0 * x + e as f64).sin());
    let mut sched = Schedule::zero(&g)
        .with_flux(1, VertexFlux::Constant(0.3))
        .with_flux(3, VertexFlux::Constant(-0.2));
    for k in 0..g.edge_count() {
        sched = sched.with_forcing(k, Forcing::Nodal(f.edge(k).to_vec()));
    }
    let grid = TimeGrid::uniform(1.0, 1e-2).map_err(|e| e.to_string())?;
    let traj = solve_parabolic(&g, &v0, &sched, &grid, &cfg()).map_err(|e| e.to_string())?;
    let oracle = heat_oracle(&g, &v0, &sched, &grid).map_err(|e| e.to_string())?;
    let worst = traj
        .records
        .iter()
        .zip(&oracle.v)
        .map(|(r, o)| r.v.max_abs_diff(o))
        .fold(0.0, f64::max);
    Ok(verdict(
        worst <= 1e-9 && traj.records.len() == 101,
        format!("{} steps, worst per-step difference {worst:.3e} (tol 1e-9)", traj.records.len() - 1),
    ))
}

fn porous_medium_constant() -> Result<Verdict, String> {
    let g = MetricGraph::build(GraphSpec::new(
        &["a", "b", "c"],
        vec![
            Edge::new("ab", "a", "b", 1.0, 2.0).with_cells(16).with_gamma(Nonlinearity::power(3.0).unwrap()),
            Edge::new("bc", "b", "c", 0.7, 3.0).with_cells(16).with_gamma(Nonlinearity::power(3.0).unwrap()),
            Edge::new("ca", "c", "a", 1.3, 1.5).with_cells(16).with_gamma(Nonlinearity::power(3.0).unwrap()),
        ],
    ))
    .unwrap();
    let mut sched = Schedule::zero(&g);
    for (k, e) in g.edges().iter().enumerate() {
        sched = sched.with_forcing(k, Forcing::Nodal(vec![1.0; e.cells + 1]));
    }
    let grid = TimeGrid::uniform(1.0, 0.05).map_err(|e| e.to_string())?;
    let traj = solve_parabolic(&g, &EdgeFunction::zeros(&g), &sched, &grid, &cfg()).map_err(|e| e.to_string())?;
    let (mut dv, mut du) = (0.0f64, 0.0f64);
    for r in &traj.records {
        dv = r.v.values().iter().flatten().map(|v| (v - r.t).abs()).fold(dv, f64::max);
        du = r.u.to_dofs().iter().map(|u| (u - r.t.cbrt()).abs()).fold(du, f64::max);
    }
    Ok(verdict(
        dv <= 1e-8 && du <= 1e-8,
        format!("max |v − t| {dv:.3e}, max |u − t^(1/3)| {du:.3e} over {} steps (tol 1e-8)", grid.steps()),
    ))
}

fn energy_ledgers() -> Result<Verdict, String> {
    let mut reports = suite("energy", 12, 20)?;
    // The heat and porous-medium runs join the battery.
    let g = star3(32);
    let v0 = EdgeFunction::from_fn(&g, |e, x| (2.0 * x + e as f64).sin());
    let sched = Schedule::zero(&g).with_flux(1, VertexFlux::Constant(0.4));
    let traj = solve_parabolic(&g, &v0, &sched, &TimeGrid::uniform(0.5, 0.02).unwrap(), &cfg()).map_err(|e| e.to_string())?;
    reports.push(PropertyReport::new(
        "energy-ledger-heat",
        0,
        1e-8,
        energy_ledger(&traj).into_iter().map(|(r, s)| r / s),
    ));
    let decay = solve_parabolic(&g, &v0, &Schedule::zero(&g), &TimeGrid::uniform(0.5, 0.02).unwrap(), &cfg())
        .map_err(|e| e.to_string())?;
    reports.push(PropertyReport::new(
        "energy-decay-heat",
        0,
        1e-8,
        [decay.last().energy - decay.records[0].energy],
    ));
    Ok(summarize(&reports, 1e-8))
}

fn poincare() -> Result<Verdict, String> {
    let reports = suite("poincare", 0, 0)?;
    Ok(summarize(&reports, 0.01))
}

fn temporal_order() -> Result<Verdict, String> {
    match heat_temporal_order(&cfg()).map_err(|e| e.to_string())? {
        TemporalOrder::Estimated { order, differences, .. } => Ok(verdict(
            (0.8..=1.2).contains(&order),
            format!("Richardson EOC {order:.4} in [0.8, 1.2], successive differences [{}]", sci(&differences)),
        )),
        TemporalOrder::NotApplicable { .. } => Ok(verdict(false, "configuration reported no temporal order")),
    }
}

fn cli(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(std::iter::once("qgdiff").chain(args.iter().copied()), &mut out, &mut err);
    (code, out, err)
}

fn determinism_and_io() -> Result<Verdict, String> {
    let mut notes = Vec::new();
    let mut ok = true;

    let a = cli(&["verify", "--suite", "comparison", "--seed", "7"]);
    let b = cli(&["verify", "--suite", "comparison", "--seed", "7"]);
    let same = a.0 == 0 && a.1 == b.1 && a.0 == b.0;
    ok &= same;
    notes.push(format!("verify rerun identical: {same}"));

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = data("good.json");
    let s = scenario.to_str().unwrap();
    let full = dir.path().join("full.ndjson");
    let part = dir.path().join("part.ndjson");
    let ck = dir.path().join("part.ckpt.json");
    let r1 = cli(&["solve-parabolic", "--graph", s, "--out", full.to_str().unwrap()]);
    let r2 = cli(&[
        "solve-parabolic", "--graph", s, "--out", part.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap(),
        "--checkpoint-every", "5", "--max-steps", "5",
    ]);
    let r3 = cli(&["solve-parabolic", "--graph", s, "--out", part.to_str().unwrap(), "--resume", ck.to_str().unwrap()]);
    let full_text = std::fs::read(&full).map_err(|e| e.to_string())?;
    let part_text = std::fs::read(&part).map_err(|e| e.to_string())?;
    let resumed = r1.0 == 0 && r2.0 == 0 && r3.0 == 0 && full_text == part_text && read_ndjson(std::str::from_utf8(&full_text).unwrap()).map(|r| r.len()) == Ok(11);
    ok &= resumed;
    notes.push(format!("checkpoint at step 5 resumes bit-identically: {resumed}"));

    let edited = dir.path().join("edited.json");
    let text = std::fs::read_to_string(&scenario).unwrap().replace("\"length\": 0.8", "\"length\": 0.9");
    std::fs::write(&edited, text).unwrap();
    let r4 = cli(&["solve-parabolic", "--graph", edited.to_str().unwrap(), "--resume", ck.to_str().unwrap()]);
    let mismatch = r4.0 == 2 && String::from_utf8_lossy(&r4.2).contains("checkpoint belongs to scenario");
    ok &= mismatch;
    notes.push(format!("edited scenario rejected: {mismatch}"));

    // A checkpoint of the initial record resumes from v0.
    let sc = qgdiff_core::load_scenario(&scenario).map_err(|e| e.to_string())?;
    let grid = sc.time.clone().unwrap();
    let run = Evolution {
        graph: &sc.graph,
        schedule: &sc.schedule,
        grid: &grid,
        cfg: &sc.cfg,
        method: Method::Monolithic,
    };
    let base = run.evolve(&sc.initial, None, |_| Ok(())).map_err(|e| e.to_string())?;
    let start = Checkpoint::from_record(&sc, &base.records[0], None);
    let again = run
        .evolve(&sc.initial, Some(start.resume(&sc).map_err(|e| e.to_string())?), |_| Ok(()))
        .map_err(|e| e.to_string())?;
    let empty_ok = again.records == base.records;
    ok &= empty_ok;
    notes.push(format!("step-0 checkpoint resumes from v0: {empty_ok}"));

    let mut golden = 0;
    let mut golden_fail = Vec::new();
    for entry in std::fs::read_dir(data("")).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|x| x == "expected") {
            let json = path.with_extension("json");
            let want = std::fs::read_to_string(&path).unwrap();
            let (code, _, err) = cli(&["validate", json.to_str().unwrap()]);
            let got = String::from_utf8_lossy(&err).replace(&format!("error: {}: ", json.display()), "");
            golden += 1;
            if code != 2 || got != want {
                golden_fail.push(json.file_name().unwrap().to_string_lossy().into_owned());
            }
        }
    }
    let normalized = std::fs::read_to_string(data("good.normalized.json")).map_err(|e| e.to_string())?;
    let doc = ScenarioDoc::from_json(&std::fs::read_to_string(&scenario).unwrap()).map_err(|e| e.to_string())?;
    golden += 1;
    if doc.to_json_pretty() + "\n" != normalized {
        golden_fail.push("good.normalized.json".into());
    }
    ok &= golden_fail.is_empty();
    notes.push(format!("{golden} schema golden files, failing: {golden_fail:?}"));
    Ok(verdict(ok, notes.join("; ")))
}

type Criterion = (&'static str, fn() -> Result<Verdict, String>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("manufactured single-edge convergence", manufactured_convergence),
        ("exact P1 solution for p = 3", exact_linear_p3),
        ("elliptic mass balance, 100 random graphs", || Ok(summarize(&suite("mass-balance", 3, 100)?, 1e-8))),
        ("comparison principle, 50 ordered pairs", || Ok(summarize(&suite("comparison", 4, 50)?, 1e-8))),
        ("monolithic vs gluing on the battery", || Ok(summarize(&suite("methods", 5, 0)?, 1e-6))),
        ("L∞ and ≪ bounds, 50 draws", || Ok(summarize(&suite("linf", 6, 50)?, 1e-8))),
        ("monotone flux sweeps on the battery", || Ok(summarize(&suite("flux-sweep", 7, 0)?, 1e-10))),
        ("resolvent τ-sweep and T-contraction", || Ok(summarize(&suite("resolvent", 8, 20)?, 1e-8))),
        ("heat equation vs dense backward Euler", heat_oracle_agreement),
        ("spatially constant porous-medium run", porous_medium_constant),
        ("parabolic L¹ contraction, 20 pairs", || Ok(summarize(&suite("contraction", 11, 20)?, 1e-7))),
        ("energy ledger and decay", energy_ledgers),
        ("Poincaré constant on edge and path", poincare),
        ("temporal order of implicit Euler", temporal_order),
        ("determinism, checkpoints and schema goldens", determinism_and_io),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        if !v.passed {
            failures += 1;
        }
        println!(
            "[{}] {:02} {name}: {} ({:.2}s)",
            if v.passed { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
