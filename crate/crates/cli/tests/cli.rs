use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use spdmd_core::snapshot::{save_snapshots, Grid, SnapshotFormat, SnapshotMatrix};
use spdmd_core::synthetic::{generate, random_fixture, strong_weak_fixture, three_pair_fixture, FixtureSpec};
use spdmd_core::{c64, Mat};
use tempfile::TempDir;

fn spdmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdmd"))
        .args(args)
        .env_remove("SPDMD_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = spdmd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_grid() -> Grid {
    Grid::new(16, 24, 0.5, 0.5, 30.0).unwrap()
}

fn write_spec(dir: &TempDir, name: &str, spec: &FixtureSpec) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, spec.to_json()).unwrap();
    path
}

fn fixture_file(dir: &TempDir, name: &str, spec: &FixtureSpec, steps: usize, fmt: SnapshotFormat) -> PathBuf {
    let snaps = generate(&spec.ground_truth().unwrap(), steps).unwrap();
    let path = dir.path().join(name);
    save_snapshots(&snaps, &path, fmt).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap()
}

fn complex_list(v: &Value) -> Vec<c64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|z| c64::new(z[0].as_f64().unwrap(), z[1].as_f64().unwrap()))
        .collect()
}

#[test]
fn synth_then_decompose_recovers_the_spectrum() {
    let dir = TempDir::new().unwrap();
    let spec = three_pair_fixture(small_grid(), 0.0, 2);
    let spec_path = write_spec(&dir, "spec.json", &spec);
    let out = dir.path().join("syn");
    ok(&["synth", "--input", s(&spec_path), "--steps", "32", "--out", s(&out)]);
    let gt = read_json(&out.join("ground_truth.json"));
    assert_eq!(gt["steps"], 32);

    let dec = dir.path().join("dec");
    ok(&["decompose", "--input", s(&out.join("fixture.snpb")), "--out", s(&dec)]);
    let report = read_json(&dec.join("decomposition.json"));
    assert_eq!(report["rank"], 6);
    assert_eq!(report["n_snapshots"], 31);
    let found = complex_list(&report["eigenvalues"]);
    let truth: Vec<c64> = spec.modes.iter().map(|m| c64::new(m.lambda[0], m.lambda[1])).collect();
    for t in &truth {
        let best = found.iter().map(|f| (f - t).norm()).fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-8, "{t}: {best:e}");
    }
    for f in ["modes_re.snpb", "modes_im.snpb", "modes.csv"] {
        assert!(dec.join(f).exists(), "{f}");
    }
    let table = fs::read_to_string(dec.join("modes.csv")).unwrap();
    assert_eq!(table.lines().count(), 7);
    assert!(table.starts_with("label,amp_mag,re_lambda,im_lambda,modulus,period_steps,period_physical,class\n"));
}

#[test]
fn synth_is_deterministic_and_seed_sensitive() {
    let dir = TempDir::new().unwrap();
    let spec = three_pair_fixture(small_grid(), 1e-3, 2);
    let spec_path = write_spec(&dir, "spec.json", &spec);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&["synth", "--input", s(&spec_path), "--steps", "12", "--seed", seed, "--out", s(&out)]);
        fs::read(out.join("fixture.snpb")).unwrap()
    };
    assert_eq!(run("a", "5"), run("b", "5"));
    assert_ne!(run("a", "5"), run("c", "6"));
}

#[test]
fn conjugate_violating_spec_is_rejected() {
    let dir = TempDir::new().unwrap();
    let mut spec = three_pair_fixture(small_grid(), 0.0, 2);
    spec.modes.remove(1);
    let spec_path = write_spec(&dir, "bad.json", &spec);
    let out = spdmd(&["synth", "--input", s(&spec_path), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "spec");
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = spdmd(&["decompose", "--input", s(&empty), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "format");
    assert_eq!(err["exit_code"], 2);

    let garbage = dir.path().join("garbage.bin");
    fs::write(&garbage, [0u8, 1, 2, 3]).unwrap();
    let out = spdmd(&["decompose", "--input", s(&garbage), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));

    let data = fixture_file(&dir, "a.snpb", &three_pair_fixture(small_grid(), 0.0, 1), 8, SnapshotFormat::Binary);
    let out = spdmd(&[
        "decompose",
        "--input",
        s(&data),
        "--observable",
        "vorticity_magnitude",
        "--out",
        s(&dir.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_data_is_a_numerical_error() {
    let dir = TempDir::new().unwrap();
    let grid = small_grid();
    let zeros = SnapshotMatrix::new(grid, Mat::zeros(grid.len(), 6), "zero").unwrap();
    let path = dir.path().join("zero.csv");
    save_snapshots(&zeros, &path, SnapshotFormat::Csv).unwrap();
    let out = spdmd(&["decompose", "--input", s(&path), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"], "rank");
}

#[test]
fn eighty_five_snapshots_give_at_most_eighty_four_modes() {
    let dir = TempDir::new().unwrap();
    let spec = random_fixture(small_grid(), 3, 0.05, 4);
    let path = fixture_file(&dir, "long.csv", &spec, 85, SnapshotFormat::Csv);
    let out = dir.path().join("dec");
    ok(&["decompose", "--input", s(&path), "--out", s(&out)]);
    let report = read_json(&out.join("decomposition.json"));
    let r = report["rank"].as_u64().unwrap();
    assert!(r <= 84 && r > 6, "rank {r}");
    assert_eq!(report["eigenvalues"].as_array().unwrap().len() as u64, r);
}

#[test]
fn spdmd_limits_and_selection() {
    let dir = TempDir::new().unwrap();
    let spec = strong_weak_fixture(small_grid(), 0);
    let data = fixture_file(&dir, "sw.snpb", &spec, 41, SnapshotFormat::Binary);
    let dense = dir.path().join("dense");
    ok(&["spdmd", "--input", s(&data), "--gamma", "0", "--out", s(&dense)]);
    let rep = read_json(&dense.join("spdmd.json"));
    assert_eq!(rep["cardinality"], rep["rank"]);
    assert!(rep["solution"]["J_loss_percent"].as_f64().unwrap() < 1e-3);

    let sparse = dir.path().join("sparse");
    ok(&["spdmd", "--input", s(&data), "--gamma", "1e6", "--out", s(&sparse)]);
    let rep = read_json(&sparse.join("spdmd.json"));
    assert!(rep["cardinality"].as_u64().unwrap() <= 2);
    assert!(rep["solution"]["J_loss_percent"].as_f64().unwrap() > 50.0);

    // locate a mid-range weight from the sweep, then rerun at that weight
    let sw = dir.path().join("sweep");
    ok(&["sweep", "--input", s(&data), "--grid", "60", "--format", "json", "--out", s(&sw)]);
    let sweep = read_json(&sw.join("sweep.json"));
    let gamma = sweep["points"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["solution"]["support"].as_array().map(Vec::len) == Some(4))
        .map(|p| p["gamma"].as_f64().unwrap())
        .expect("no four-mode point");
    let mid = dir.path().join("mid");
    ok(&["spdmd", "--input", s(&data), "--gamma", &gamma.to_string(), "--out", s(&mid)]);
    let rep = read_json(&mid.join("spdmd.json"));
    let dec_dir = dir.path().join("dec");
    ok(&["decompose", "--input", s(&data), "--out", s(&dec_dir)]);
    let eig = complex_list(&read_json(&dec_dir.join("decomposition.json"))["eigenvalues"]);
    for label in rep["ordered_labels"].as_array().unwrap() {
        let l = eig[label.as_u64().unwrap() as usize - 1];
        let strong = spec.modes[..4].iter().any(|m| (c64::new(m.lambda[0], m.lambda[1]) - l).norm() < 1e-6);
        assert!(strong, "weak mode {l} selected");
    }
    assert_eq!(fs::read_to_string(mid.join("spdmd_modes.csv")).unwrap().lines().count(), 5);
}

#[test]
fn iteration_cap_exits_with_code_four_and_writes_results() {
    let dir = TempDir::new().unwrap();
    let data = fixture_file(&dir, "a.snpb", &three_pair_fixture(small_grid(), 0.0, 1), 20, SnapshotFormat::Binary);
    let out = dir.path().join("sp");
    let res = spdmd(&["spdmd", "--input", s(&data), "--gamma", "1", "--kmax", "1", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(4));
    assert_eq!(error_json(&res)["error"], "convergence");
    let rep = read_json(&out.join("spdmd.json"));
    assert_eq!(rep["solution"]["converged"], false);
}

#[test]
fn sweep_csv_rows_and_endpoints() {
    let dir = TempDir::new().unwrap();
    let data = fixture_file(&dir, "a.csv", &three_pair_fixture(small_grid(), 0.0, 1), 32, SnapshotFormat::Csv);
    let out = dir.path().join("sw");
    ok(&["sweep", "--input", s(&data), "--grid", "37", "--out", s(&out)]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 37);
    assert_eq!(rows[0][1], "6");
    assert!(rows[36][1].parse::<usize>().unwrap() <= 1);
}

#[test]
fn vorticity_sweep_trend_is_monotone_on_nested_supports() {
    let dir = TempDir::new().unwrap();
    let grid = small_grid();
    let vy = fixture_file(&dir, "vy.snpb", &random_fixture(grid, 3, 0.0, 21), 40, SnapshotFormat::Binary);
    let vz = fixture_file(&dir, "vz.snpb", &random_fixture(grid, 3, 0.0, 22), 40, SnapshotFormat::Binary);
    let out = dir.path().join("sw");
    ok(&[
        "sweep",
        "--input-vy",
        s(&vy),
        "--input-vz",
        s(&vz),
        "--observable",
        "vorticity_magnitude",
        "--rank",
        "20",
        "--gamma-min",
        "1",
        "--gamma-max",
        "1000",
        "--grid",
        "250",
        "--format",
        "json",
        "--out",
        s(&out),
    ]);
    let sweep = read_json(&out.join("sweep.json"));
    let points = sweep["points"].as_array().unwrap();
    assert_eq!(points.len(), 250);
    let sols: Vec<(Vec<u64>, f64)> = points
        .iter()
        .map(|p| {
            let sol = &p["solution"];
            let sup = sol["support"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
            (sup, sol["J_pol"].as_f64().unwrap())
        })
        .collect();
    for (a, ja) in &sols {
        for (b, jb) in &sols {
            if a.iter().all(|j| b.contains(j)) {
                assert!(*ja >= jb - 1e-9);
            }
        }
    }
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = TempDir::new().unwrap();
    let data = fixture_file(&dir, "a.snpb", &three_pair_fixture(small_grid(), 0.0, 1), 12, SnapshotFormat::Binary);
    let out = Command::new(env!("CARGO_BIN_EXE_spdmd"))
        .args(["sweep", "--input", s(&data), "--grid", "4", "--out", s(&dir.path().join("x"))])
        .env("SPDMD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
