use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tflab")).args(args).env_remove("TFLAB_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL_SCAN: [&str; 6] = ["counterexample", "scan", "--N", "8,16,32", "--trials", "32"];

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let mut args = SMALL_SCAN.to_vec();
        args.extend(["--out", dir.to_str().unwrap()]);
        assert_eq!(tflab(&args).status.code(), Some(0));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}

#[test]
fn different_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for seed in ["1", "2"] {
        let dir = tmp.path().join(seed);
        let mut args = SMALL_SCAN.to_vec();
        args.extend(["--seed", seed, "--out", dir.to_str().unwrap()]);
        tflab(&args);
        csvs.push(fs::read_to_string(dir.join("counterexample.csv")).unwrap());
    }
    assert_ne!(csvs[0], csvs[1]);
}

#[test]
fn every_numeric_cell_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = SMALL_SCAN.to_vec();
    args.extend(["--out", tmp.path().to_str().unwrap()]);
    tflab(&args);
    let text = fs::read_to_string(tmp.path().join("counterexample.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "N,avg_norm,norm_f1_p,norm_f2_q,ratio");
    for line in lines {
        for cell in line.split(',') {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(v.to_string().parse::<f64>().unwrap(), v);
            assert_eq!(cell.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}

#[test]
fn missing_exponent_is_inferred_and_logged() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tflab(&["counterexample", "scan", "--N", "8,16", "--trials", "32", "--r", "1", "--p", "1.5", "--out", tmp.path().to_str().unwrap()]);
    assert!(stderr(&out).contains("q inferred"), "{}", stderr(&out));
    let m = manifest(tmp.path());
    assert!((m["params"]["q"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!(m["log"].as_array().unwrap().iter().any(|l| l.as_str().unwrap().contains("q inferred")));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["no-such-command"],
        vec!["counterexample", "scan", "--r", "1", "--p", "2", "--q", "3"],
        vec!["counterexample", "scan", "--trials", "0"],
        vec!["rm-check", "--J", "four"],
        vec![],
    ] {
        let out = tflab(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn failed_bound_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tflab(&["counterexample", "scan", "--r", "0.6", "--trials", "32", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL ratio_growth"));
    assert_eq!(manifest(tmp.path())["pass"], false);
}

#[test]
fn config_file_and_seed_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    let out_dir = tmp.path().join("out");
    fs::write(
        &cfg,
        serde_json::json!({
            "experiment": "rm-check",
            "params": { "J": [4, 16], "trials": 32 },
            "seed": 3,
            "output": out_dir,
        })
        .to_string(),
    )
    .unwrap();
    let out = tflab(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(manifest(&out_dir)["seed"], 3);

    let out = Command::new(env!("CARGO_BIN_EXE_tflab")).args(["--config", cfg.to_str().unwrap()]).env("TFLAB_SEED", "9").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(&out_dir);
    assert_eq!(m["seed"], 9);
    assert_eq!(m["experiment"], "rm-check");
    assert_eq!(m["baseline_hash"].as_str().unwrap().len(), 64);
    let files = m["files"].as_object().unwrap();
    let digest = tflab::harness::sha256_hex(&fs::read(out_dir.join("rm.csv")).unwrap());
    assert_eq!(files["rm.csv"], digest);
}

#[test]
fn unknown_experiment_in_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": "no-such-scan"}"#).unwrap();
    assert_eq!(tflab(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn help_documents_csv_columns() {
    let h = stdout(&tflab(&["pipeline", "run", "--help"]));
    assert!(h.contains("stages.csv columns"));
    let h = stdout(&tflab(&["counterexample", "scan", "--help"]));
    assert!(h.contains("N, avg_norm, norm_f1_p, norm_f2_q, ratio"));
    assert!(stdout(&tflab(&["--help"])).contains("Exit status"));
}

#[test]
fn enlarge_and_separate_print_json() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("ivs.json");
    fs::write(&input, "[[0, 1], [0.5, 0.25], [4, 2], [5, 1]]").unwrap();
    let out = tflab(&["enlarge", input.to_str().unwrap(), "--A", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["pairs"].as_array().unwrap().len(), 4);
    assert!(v["class_count"].as_u64().unwrap() >= 1);

    fs::write(&input, "[[0, 4], [0, 2], [2, 1], [8, 1]]").unwrap();
    let out = tflab(&["separate", input.to_str().unwrap(), "--n", "2", "--D", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let total = v["sharp"].as_array().unwrap().len() + v["flat"].as_array().unwrap().len();
    assert_eq!(total, 4);
}

#[test]
fn plot_annotates_the_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("t.csv");
    fs::write(&csv, "x,y\n1,1\n4,2\n16,4\n").unwrap();
    let svg = tmp.path().join("t.svg");
    let out = tflab(&["plot", csv.to_str().unwrap(), "--x", "x", "--y", "y", "--log", "-o", svg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("fitted slope 0.5000"));
    assert!(fs::read_to_string(&svg).unwrap().contains("fitted slope 0.5000"));
    let out = tflab(&["plot", csv.to_str().unwrap(), "--x", "x", "--y", "missing", "-o", svg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
