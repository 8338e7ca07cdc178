use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bwopt::datasets::{generate, GenSpec};
use bwopt::io::{read_dataset, write_dataset, write_point, DatasetMetadata};
use bwopt::{DiscreteDistribution, GaussianMeasure, SpdMatrix};
use nalgebra::DVector;
use serde_json::Value;
use tempfile::TempDir;

const GEN: &str = "method=2,n=8,d=3,alpha=0.5,beta=2";

fn bwopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwopt")).args(args).output().unwrap()
}

fn bwopt_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwopt")).args(args).env(key, value).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn diag(v: &[f64]) -> SpdMatrix {
    SpdMatrix::from_diagonal(v).unwrap()
}

fn dataset(dir: &Path, name: &str, p: &DiscreteDistribution) -> PathBuf {
    let path = dir.join(name);
    write_dataset(&path, p, DatasetMetadata::default()).unwrap();
    path
}

#[test]
fn dirac_barycenter_takes_one_step() {
    let dir = TempDir::new().unwrap();
    let sigma = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
    let input = dataset(dir.path(), "dirac.json", &DiscreteDistribution::dirac(sigma.clone()));
    let start = dir.path().join("start.json");
    write_point(&start, &GaussianMeasure::centered(SpdMatrix::identity(2))).unwrap();
    let summary = dir.path().join("s.json");
    let o = bwopt(&["barycenter", "--input", s(&input), "--start", s(&start), "--out-summary", s(&summary)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&summary);
    assert_eq!(v["iterations"], 1);
    assert_eq!(v["termination"], "converged");
    let cov: Vec<f64> = serde_json::from_value(v["final_point"]["cov"].clone()).unwrap();
    for (a, b) in cov.iter().zip([2.0, 0.5, 0.5, 1.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn trace_and_summary_pass_the_validator() {
    let dir = TempDir::new().unwrap();
    let (trace, summary) = (dir.path().join("t.csv"), dir.path().join("s.json"));
    let o = bwopt(&["barycenter", "--gen", GEN, "--out-trace", s(&trace), "--out-summary", s(&summary)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let header = fs::read_to_string(&trace).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "iter,objective,grad_norm_sq,lambda_min,lambda_max,w2sq_to_ref,wall_ns");
    let rows = csv_rows(&trace);
    assert_eq!(rows.last().unwrap()[0], json(&summary)["iterations"].to_string());
    assert!(rows.iter().all(|r| r[5].is_empty()));

    let o = bwopt(&["validate", "--trace", s(&trace), "--summary", s(&summary)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // drop the last row: the trace no longer ends where the summary says
    let text = fs::read_to_string(&trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    fs::write(&trace, lines[..lines.len() - 1].join("\n")).unwrap();
    assert_eq!(code(&bwopt(&["validate", "--trace", s(&trace), "--summary", s(&summary)])), 7);

    fs::write(&trace, text.replacen("iter,", "iteration,", 1)).unwrap();
    assert_eq!(code(&bwopt(&["validate", "--trace", s(&trace)])), 7);
    fs::write(&trace, text.replace(",0.", ",-0.")).unwrap();
    assert_eq!(code(&bwopt(&["validate", "--trace", s(&trace)])), 7);
}

#[test]
fn reference_column_reaches_zero_at_the_solution() {
    let dir = TempDir::new().unwrap();
    let cov = |v: &[f64]| GaussianMeasure::new(DVector::from_vec(vec![1.0, -2.0]), diag(v)).unwrap();
    let p = DiscreteDistribution::uniform(vec![cov(&[1.0, 4.0]), cov(&[9.0, 1.0])]).unwrap();
    let input = dataset(dir.path(), "p.json", &p);
    let reference = dir.path().join("ref.json");
    let star = GaussianMeasure::new(DVector::from_vec(vec![1.0, -2.0]), diag(&[4.0, 2.25])).unwrap();
    write_point(&reference, &star).unwrap();
    let trace = dir.path().join("t.csv");
    let o = bwopt(&["barycenter", "--input", s(&input), "--ref", s(&reference), "--out-trace", s(&trace)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&trace);
    let w2: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(w2[0] > 1.0);
    assert!(w2.last().unwrap().abs() < 1e-12, "{w2:?}");
}

#[test]
fn gen_data_round_trips_bitwise() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d.json");
    let o = bwopt(&["gen-data", "--gen", "method=7,n=13,d=4,alpha=0.1,beta=50,seed=11", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (loaded, meta) = read_dataset(&out).unwrap();
    assert_eq!(meta.seed, Some(11));
    let direct = generate(&GenSpec::new(7, 13, 4, 0.1, 50.0, 11)).unwrap();
    for (a, b) in loaded.covariances().zip(direct.covariances()) {
        let bits = |m: &SpdMatrix| m.matrix().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn dataset_seed_is_shared_across_commands() {
    let dir = TempDir::new().unwrap();
    let (data, summary) = (dir.path().join("d.json"), dir.path().join("s.json"));
    assert_eq!(code(&bwopt(&["gen-data", "--gen", GEN, "--seed", "3", "--out", s(&data)])), 0);
    let o = bwopt(&["median", "--gen", GEN, "--seed", "3", "--epsilon", "0.2", "--max-iters", "5", "--out-summary", s(&summary)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, meta) = read_dataset(&data).unwrap();
    assert_eq!(json(&summary)["input"]["gen"]["seed"], meta.seed.unwrap());
    assert_eq!(json(&summary)["seed"], 3);
}

#[test]
fn sgd_streams_follow_the_seed() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("d.json");
    assert_eq!(code(&bwopt(&["gen-data", "--gen", GEN, "--out", s(&input)])), 0);
    let run = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        let o = bwopt(&["barycenter", "--sgd", "--input", s(&input), "--max-iters", "50", "--seed", seed, "--out-summary", s(&path)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        json(&path)["final_point"].clone()
    };
    assert_eq!(run("1", "a.json"), run("1", "b.json"));
    assert_ne!(run("1", "a.json"), run("2", "c.json"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str, name: &str| {
        let path = dir.path().join(name);
        let o = bwopt_env(&["barycenter", "--gen", "method=1,n=30,d=4,alpha=1,beta=10", "--out-summary", s(&path)], "BW_THREADS", threads);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        json(&path)["final_point"].clone()
    };
    assert_eq!(run("1", "a.json"), run("4", "b.json"));
    assert_eq!(code(&bwopt_env(&["barycenter", "--gen", GEN], "BW_THREADS", "0")), 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("d.json");
    assert_eq!(code(&bwopt(&["gen-data", "--gen", GEN, "--out", s(&input)])), 0);

    // budget exhausted with a tolerance set
    let o = bwopt(&["barycenter", "--input", s(&input), "--max-iters", "1"]);
    assert_eq!(code(&o), 3);
    // a zero tolerance makes the budget the stopping rule
    assert_eq!(code(&bwopt(&["barycenter", "--input", s(&input), "--max-iters", "1", "--grad-tol", "0"])), 0);

    // usage
    assert_eq!(code(&bwopt(&["barycenter"])), 2);
    assert_eq!(code(&bwopt(&["barycenter", "--input", s(&input), "--gen", GEN])), 2);
    assert_eq!(code(&bwopt(&["median", "--input", s(&input)])), 2);

    // I/O and parse errors name the file
    let missing = dir.path().join("missing.json");
    let o = bwopt(&["barycenter", "--input", s(&missing)]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));
    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\n  \"dimension\": 2,\n  \"atoms\": [\n oops").unwrap();
    let o = bwopt(&["barycenter", "--input", s(&broken)]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("broken.json") && stderr(&o).contains("line 4"), "{}", stderr(&o));

    // invalid inputs
    assert_eq!(code(&bwopt(&["median", "--input", s(&input), "--epsilon", "2"])), 6);
    assert_eq!(code(&bwopt(&["euclidean", "--input", s(&input), "--lambda-min", "1.9", "--lambda-max", "2"])), 6);
    assert_eq!(code(&bwopt(&["rbarycenter", "--input", s(&input), "--gamma", "1", "--kappa", "1"])), 6);
}

#[test]
fn every_solver_runs_on_noncentered_data() {
    let dir = TempDir::new().unwrap();
    let atom = |m: [f64; 2], v: &[f64]| GaussianMeasure::new(DVector::from_vec(m.to_vec()), diag(v)).unwrap();
    let p = DiscreteDistribution::uniform(vec![
        atom([1.0, 0.0], &[1.0, 2.0]),
        atom([-1.0, 3.0], &[2.0, 1.5]),
        atom([0.5, 0.5], &[1.2, 1.1]),
    ])
    .unwrap();
    let input = dataset(dir.path(), "p.json", &p);
    let cases: [&[&str]; 6] = [
        &["barycenter"],
        &["barycenter", "--sgd", "--max-iters", "100"],
        &["rbarycenter", "--gamma", "0.5"],
        &["median", "--epsilon", "0.1", "--max-iters", "3000"],
        &["euclidean", "--max-iters", "20000"],
        &["euclidean", "--stochastic", "--max-iters", "100"],
    ];
    for (k, args) in cases.iter().enumerate() {
        let summary = dir.path().join(format!("s{k}.json"));
        let mut full = args.to_vec();
        full.extend(["--input", s(&input), "--out-summary", s(&summary)]);
        let o = bwopt(&full);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        let mean: Vec<f64> = serde_json::from_value(json(&summary)["final_point"]["mean"].clone()).unwrap();
        let expected = match args[0] {
            "rbarycenter" => [1.0 / 6.0 / 1.5, 3.5 / 3.0 / 1.5],
            "median" => [mean[0], mean[1]],
            _ => [1.0 / 6.0, 3.5 / 3.0],
        };
        assert!((mean[0] - expected[0]).abs() < 1e-12 && (mean[1] - expected[1]).abs() < 1e-12, "{args:?}: {mean:?}");
    }
    assert_eq!(json(&dir.path().join("s3.json"))["config"]["lifted"], true);
}

#[test]
fn sdp_export_of_two_scalars() {
    let dir = TempDir::new().unwrap();
    let p = DiscreteDistribution::uniform_covariances(vec![diag(&[1.0]), diag(&[9.0])]).unwrap();
    let input = dataset(dir.path(), "p.json", &p);
    let (out, report) = (dir.path().join("p.sdpa"), dir.path().join("r.json"));
    let o = bwopt(&["sdp-export", "--input", s(&input), "--out", s(&out), "--check", "--out-summary", s(&report)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
    assert_eq!(&lines[..4], &["3", "2", "2 2", "1 -1 -1"]);
    let r = json(&report);
    // Σ* = 4, S₁ = 2, S₂ = 6: 4 − (2 + 6) = −4
    assert!((r["objective"].as_f64().unwrap() + 4.0).abs() < 1e-9);
    assert!((r["objective"].as_f64().unwrap() - r["expected_objective"].as_f64().unwrap()).abs() < 1e-7);
    assert!(r["min_slack_eigenvalue"].as_f64().unwrap() > -1e-9);
}

#[test]
fn dim_sweep_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = bwopt(&["dim-sweep", "--dims", "2,4", "--n", "6", "--kappa", "20", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0].as_str(), rows[1][0].as_str()), ("2", "4"));
    assert!(rows.iter().all(|r| r[2] == "true"));
    let o = bwopt(&["dim-sweep", "--dims", "3", "--n", "6", "--kappa", "20", "--max-iters", "0"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn robustness_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rob.csv");
    let o = bwopt(&[
        "robustness", "--gen", "method=2,n=10,d=2,alpha=1,beta=3", "--factors", "1,20",
        "--epsilon", "0.1", "--max-iters", "3000", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    let last: Vec<f64> = rows[1].iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 20.0);
    assert!(last[1] < last[2], "median shift {} vs barycenter shift {}", last[1], last[2]);
}
