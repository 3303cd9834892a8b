use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nnmass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnmass"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const THREE_CELLS: &str = r#"{"cells":[{"depth":4,"width":2,"shortcut_budget":3},
 {"depth":4,"width":3,"shortcut_budget":4},{"depth":4,"width":4,"shortcut_budget":5}],
 "activation":"relu","input_dim":3,"output_dim":10}"#;

#[test]
fn mass_of_three_cell_example() {
    let dir = tempfile::tempdir().unwrap();
    let arch = dir.path().join("arch.json");
    write(&arch, THREE_CELLS);
    let v = stdout_json(&nnmass(&["mass", "--arch", arch.to_str().unwrap()]));
    assert_eq!(v["nn_mass"], 28.0);
    assert_eq!(v["per_cell_density"].as_array().unwrap().len(), 3);
    for key in ["nn_density", "avg_degree_estimate", "avg_degree_exact_longrange"] {
        assert!(v[key].is_number(), "{key}");
    }
}

#[test]
fn simulate_sv_writes_one_row_per_mass() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sv.csv");
    let args = ["simulate-sv", "--width", "8", "--mass", "0:300:30", "--trials", "5", "--seed", "7", "--out", out.to_str().unwrap()];
    stdout_json(&nnmass(&args));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "width,mass,matrix_rows,trials,mean_sv,stddev_sv");
    assert_eq!(lines.len(), 11);
    assert!(lines[2].starts_with("8,30.0,23,5,"));
    // Same flags, same bytes.
    stdout_json(&nnmass(&args));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
}

#[test]
fn design_hits_28_exactly() {
    let v = stdout_json(&nnmass(&["design", "--target-mass", "28", "--cells", "4x2,4x3,4x4", "--tol", "0"]));
    assert_eq!(v["achieved_mass"], 28.0);
    assert_eq!(v["gap"], 0.0);
    assert_eq!(v["within_tolerance"], true);
    assert_eq!(v["budgets"].as_array().unwrap().len(), 3);
}

#[test]
fn errors_are_json_with_exit_1() {
    let out = nnmass(&["design", "--target-mass", "1000", "--cells", "4x2", "--tol", "0.05"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["code"], "infeasible");
    assert_eq!(err["context"]["max"], 8.0);
    assert!(err["message"].is_string());

    let out = nnmass(&["mass", "--arch", "/nonexistent/arch.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["code"], "io");
    assert_eq!(err["context"]["path"], "/nonexistent/arch.json");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(nnmass(&["mass"]).status.code(), Some(2));
    assert_eq!(nnmass(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        nnmass(&["simulate-sv", "--width", "8", "--mass", "0:300", "--trials", "5", "--seed", "1", "--out", "x.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn train_checkpoint_and_ldi() {
    let dir = tempfile::tempdir().unwrap();
    let arch = dir.path().join("arch.json");
    write(
        &arch,
        r#"{"cells":[{"depth":6,"width":4,"shortcut_budget":5}],"activation":"relu","input_dim":2,"output_dim":2}"#,
    );
    let trace = dir.path().join("trace.csv");
    let ckpt = dir.path().join("model.ckpt");
    let args = [
        "train", "--arch", arch.to_str().unwrap(), "--data", "circle:4", "--epochs", "2", "--batch-size", "16",
        "--lr", "0.05", "--seed", "3", "--train-samples", "500", "--test-samples", "100",
        "--out", trace.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap(),
    ];
    let v = stdout_json(&nnmass(&args));
    assert_eq!(v["epochs"], 2);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(text.lines().next().unwrap(), "epoch,train_loss,train_acc,test_acc");
    assert_eq!(text.lines().count(), 3);
    let first_ckpt = std::fs::read(&ckpt).unwrap();
    stdout_json(&nnmass(&args));
    assert_eq!(std::fs::read_to_string(&trace).unwrap(), text);
    assert_eq!(std::fs::read(&ckpt).unwrap(), first_ckpt);

    let ldi = stdout_json(&nnmass(&["ldi", "--checkpoint", ckpt.to_str().unwrap(), "--probes", "4", "--seed", "1"]));
    assert_eq!(ldi["layers"].as_array().unwrap().len(), 5);
    let fresh = stdout_json(&nnmass(&["ldi", "--arch", arch.to_str().unwrap(), "--seed", "1"]));
    assert!(fresh["summary_mean_sv"].as_f64().unwrap() > 0.0);
}

#[test]
fn gen_data_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("seg.csv");
    let v = stdout_json(&nnmass(&[
        "gen-data", "--kind", "seg", "--n", "20", "--samples", "1000", "--seed", "5", "--out", data.to_str().unwrap(),
    ]));
    assert_eq!(v["samples"], 1000);
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().next().unwrap(), "f0,f1,label");

    let pts = dir.path().join("pts.csv");
    write(&pts, "x,y\n1,2\n2,2.9\n3,4.1\n4,5\n5,6.2\n");
    let fit = stdout_json(&nnmass(&["fit", "--csv", pts.to_str().unwrap(), "--x", "x", "--y", "y"]));
    assert!((fit["fit"]["slope"].as_f64().unwrap() - 1.05).abs() < 1e-9);
}

#[test]
fn small_sweep_is_ordered_and_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    write(
        &grid,
        r#"{"widths":[4],"depths":[4,5],"budgets":[1,3],"repeats":2,"activation":"relu",
            "train":{"epochs":1,"batch_size":32,"lr0":0.05},
            "dataset":{"source":"synthetic","kind":"circle","n":4,"n_train":300,"n_test":60},
            "probes":4}"#,
    );
    let run = |jobs: &str, name: &str| {
        let out = dir.path().join(name);
        let v = stdout_json(&nnmass(&[
            "sweep", "--grid", grid.to_str().unwrap(), "--seed", "9", "--jobs", jobs, "--out", out.to_str().unwrap(),
        ]));
        assert_eq!(v["rows"], 8);
        std::fs::read_to_string(out).unwrap()
    };
    let serial = run("1", "a.csv");
    assert_eq!(serial, run("3", "b.csv"));
    let lines: Vec<&str> = serial.lines().collect();
    assert_eq!(
        lines[0],
        "depth,width,budget,seed,nn_mass,nn_density,param_count,flop_count,test_acc,train_loss,mean_init_sv,diverged"
    );
    assert!(lines[1].starts_with("4,4,1,"));
    assert!(lines[8].starts_with("5,4,3,"));

    let fit = stdout_json(&nnmass(&[
        "fit", "--csv", dir.path().join("a.csv").to_str().unwrap(), "--x", "nn_mass", "--y", "mean_init_sv",
    ]));
    assert_eq!(fit["points"], 4);
}
