//! End-to-end checks of the `qbnn` binary: wiring, exit codes, determinism.

use std::path::Path;
use std::process::{Command, Output};

fn qbnn(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qbnn"));
    cmd.args(args).env_remove("QBNN_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn ipe_scan_writes_deterministic_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("noise.csv");
    let args = [
        "ipe-scan", "--qubits", "6", "--x-min", "-1", "--x-max", "1", "--grid", "20", "--draws",
        "10", "--seed", "0",
    ];
    let run = |out_path: &Path| {
        let out_str = out_path.to_str().unwrap();
        let mut full: Vec<&str> = args.to_vec();
        full.extend_from_slice(&["--out", out_str]);
        qbnn(&full, &[])
    };
    let first = run(&out);
    assert!(first.status.success(), "{}", stderr_of(&first));
    let text = String::from_utf8(read(&out)).unwrap();
    assert!(text.starts_with("x,estimate\n"));
    assert_eq!(text.lines().count(), 1 + 20 * 10);
    let exact = dir.path().join("noise_exact.csv");
    assert!(String::from_utf8(read(&exact))
        .unwrap()
        .starts_with("x,value,probability\n"));

    let out2 = dir.path().join("noise2.csv");
    let second = run(&out2);
    assert!(second.status.success());
    assert_eq!(read(&out), read(&out2));
}

#[test]
fn run_requires_qubits_for_quantum_modes() {
    let dir = tempfile::tempdir().unwrap();
    let output = qbnn(
        &[
            "run",
            "--task",
            "linreg",
            "--mode",
            "qiqp",
            "--seed",
            "0",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(output.status.code(), Some(2), "{}", stderr_of(&output));
    assert!(stderr_of(&output).contains("qubits"));
}

#[test]
fn run_emits_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run_into = |sub: &str| {
        let out = dir.path().join(sub);
        let output = qbnn(
            &[
                "run",
                "--task",
                "linreg",
                "--mode",
                "cicp",
                "--seed",
                "1",
                "--points",
                "10",
                "--draws",
                "8",
                "--warmup",
                "8",
                "--max-tree-depth",
                "4",
                "--out",
                out.to_str().unwrap(),
            ],
            &[],
        );
        assert!(output.status.success(), "{}", stderr_of(&output));
        out
    };
    let a = run_into("a");
    let b = run_into("b");
    for file in ["metrics.json", "cost_report.json", "predictive_grid.csv"] {
        assert_eq!(read(&a.join(file)), read(&b.join(file)), "{file}");
    }
    let metrics: serde_json::Value =
        serde_json::from_slice(&read(&a.join("metrics.json"))).unwrap();
    for key in ["mean_loglik", "stderr_loglik", "rmse_vs_reference"] {
        assert!(metrics.get(key).is_some(), "missing {key}");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&read(&a.join("cost_report.json"))).unwrap();
    for key in ["omega", "p", "k", "n", "m", "r", "r_e", "speedup_inference"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn config_file_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"task":"linreg","mode":"cicp","sead":3}"#).unwrap();
    let output = qbnn(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("sead"));
}

#[test]
fn config_file_drives_a_run_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
  "task": "linreg",
  "mode": "cicp",
  "seed": 4,
  "data": {{ "points": 10, "grid_points": 7 }},
  "sampler": {{ "draws": 8, "warmup": 8, "max_tree_depth": 4 }},
  "out_dir": {:?}
}}"#,
            dir.path().join("from_config").to_str().unwrap()
        ),
    )
    .unwrap();
    let output = qbnn(&["run", "--config", config.to_str().unwrap()], &[]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert!(dir.path().join("from_config/metrics.json").exists());

    // The --out flag overrides the config's out_dir.
    let output = qbnn(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("flag_out").to_str().unwrap(),
        ],
        &[],
    );
    assert!(output.status.success());
    assert!(dir.path().join("flag_out/metrics.json").exists());
    assert_eq!(
        read(&dir.path().join("from_config/metrics.json")),
        read(&dir.path().join("flag_out/metrics.json")),
    );
}

#[test]
fn env_seed_is_a_fallback_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let scan = |name: &str, extra: &[&str], envs: &[(&str, &str)]| {
        let out = dir.path().join(name);
        let mut args = vec!["ipe-scan", "--qubits", "5", "--grid", "8", "--draws", "6"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out.to_str().unwrap()]);
        let output = qbnn(&args, envs);
        assert!(output.status.success(), "{}", stderr_of(&output));
        read(&out)
    };
    let with_env = scan("env.csv", &[], &[("QBNN_SEED", "9")]);
    let with_flag = scan("flag.csv", &["--seed", "9"], &[]);
    let with_default = scan("default.csv", &[], &[]);
    let flag_beats_env = scan("both.csv", &["--seed", "9"], &[("QBNN_SEED", "2")]);
    assert_eq!(with_env, with_flag);
    assert_ne!(with_env, with_default);
    assert_eq!(flag_beats_env, with_flag);
}

#[test]
fn grid_expands_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid");
    let output = qbnn(
        &[
            "grid",
            "--task",
            "linreg",
            "--modes",
            "cicp,qiqp",
            "--qubits",
            "5",
            "--seeds",
            "0,1",
            "--points",
            "10",
            "--draws",
            "6",
            "--warmup",
            "6",
            "--max-tree-depth",
            "4",
            "--jobs",
            "1",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    for cell in ["cicp_seed0", "cicp_seed1", "qiqp_n5_seed0", "qiqp_n5_seed1"] {
        assert!(out.join(cell).join("metrics.json").exists(), "{cell}");
    }
}

#[test]
fn cost_report_prints_expressions() {
    let output = qbnn(
        &[
            "cost-report",
            "--samples-k",
            "4",
            "--train-n",
            "4",
            "--test-m",
            "4",
            "--omega",
            "5",
            "--weights-p",
            "25",
            "--epsilon",
            "1",
            "--r-a",
            "1",
            "--r-e",
            "1",
            "--quantum-inference",
        ],
        &[],
    );
    assert!(output.status.success(), "{}", stderr_of(&output));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["speedup_inference"], serde_json::Value::Bool(true));
    assert_eq!(report["r"], serde_json::json!(1.0));
    let expected = (16.0f64).powf(1.5) * 5.0;
    assert_eq!(
        report["quantum_inference_cost"],
        serde_json::json!(expected)
    );
}
