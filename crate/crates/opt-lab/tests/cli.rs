//! End-to-end checks of the `opt-lab` binary: determinism of persisted
//! ensembles, exit codes, verification round trips, plots, and the 1-D
//! construction subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_opt-lab")
}

fn run_cmd(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn opt-lab")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("opt_lab_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_small_ensemble(out: &Path) -> Output {
    run_small_ensemble_with_noise(out, "1")
}

fn run_small_ensemble_with_noise(out: &Path, d: &str) -> Output {
    run_cmd(
        &[
            "run",
            "--method",
            "sgd",
            "--problem.name",
            "quadratic",
            "--problem.dim",
            "2",
            "--problem.eig_min",
            "0.8",
            "--problem.eig_max",
            "0.8",
            "--schedule",
            "inv_k:1:1",
            "--oracle.c",
            "0",
            "--oracle.d",
            d,
            "--oracle.noise",
            if d == "0" { "zero" } else { "gaussian_isotropic" },
            "--t",
            "300",
            "--reps",
            "8",
            "--seed",
            "5",
            "--out_dir",
            out.to_str().unwrap(),
        ],
        &[],
    )
}

#[test]
fn run_writes_deterministic_csvs_and_manifest() {
    let d1 = tmp_dir("det1");
    let d2 = tmp_dir("det2");
    let o1 = run_small_ensemble(&d1);
    assert!(o1.status.success(), "{}", String::from_utf8_lossy(&o1.stderr));
    let o2 = run_small_ensemble(&d2);
    assert!(o2.status.success());

    for i in 0..8 {
        let name = format!("rep_{i:03}.csv");
        let a = std::fs::read(d1.join(&name)).unwrap();
        let b = std::fs::read(d2.join(&name)).unwrap();
        assert_eq!(a, b, "trace {name} differs between identical runs");
    }
    let m1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m1["format_version"], 1);
    assert_eq!(m1["reps"], 8);
    assert!(m1["config_hash"].as_str().unwrap().len() == 16);
    // fixed CSV header
    let head = std::fs::read_to_string(d1.join("rep_000.csv")).unwrap();
    assert!(head.starts_with("k,alpha,obj,measure,step_len\n"));
}

#[test]
fn incompatible_config_exits_2() {
    // random reshuffling on a problem without a finite sum
    let out = run_cmd(
        &[
            "run",
            "--method",
            "rr",
            "--problem.name",
            "quadratic",
            "--schedule",
            "inv_k:1:1",
            "--t",
            "10",
            "--reps",
            "2",
            "--seed",
            "1",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("finite-sum"), "stderr: {err}");
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(run_cmd(&["frobnicate"], &[]).status.code(), Some(2));
}

#[test]
fn verify_passes_and_halved_rhs_fails_with_exit_1() {
    // a noiseless run: the descent recursion holds with zero slack, so
    // halving the right side is detected deterministically at every k
    let dir = tmp_dir("verify");
    let run = run_small_ensemble_with_noise(&dir, "0");
    assert!(run.status.success());
    let manifest = dir.join("manifest.json");

    let ok = run_cmd(
        &[
            "verify",
            "--manifest",
            manifest.to_str().unwrap(),
            "--conditions",
            "p1,p2,p3,recursion:sgd_noise,trend",
            "--out",
            dir.join("reports.json").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap();
    let verdicts: Vec<&str> = reports
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["verdict"].as_str().unwrap())
        .collect();
    assert!(verdicts.iter().all(|v| *v == "pass" || *v == "inconclusive"), "{verdicts:?}");

    // negative control: halved right side must fail and exit 1
    let halved = run_cmd(
        &[
            "verify",
            "--manifest",
            manifest.to_str().unwrap(),
            "--conditions",
            "recursion:sgd_noise",
            "--rhs-scale",
            "0.5",
        ],
        &[],
    );
    assert_eq!(halved.status.code(), Some(1));
}

#[test]
fn verify_skips_mismatched_recursion_with_reason() {
    let dir = tmp_dir("skip");
    assert!(run_small_ensemble(&dir).status.success());
    let out = run_cmd(
        &[
            "verify",
            "--manifest",
            dir.join("manifest.json").to_str().unwrap(),
            "--conditions",
            "recursion:rr_epoch",
        ],
        &[],
    );
    // skipped is not a failure
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("skipped"), "{text}");
}

#[test]
fn plots_are_emitted_and_deterministic() {
    let dir = tmp_dir("plot");
    assert!(run_small_ensemble(&dir).status.success());
    let manifest = dir.join("manifest.json");
    for kind in ["measure_vs_k", "min_measure_vs_T", "recursion_slack"] {
        let out_path = dir.join(format!("{kind}.svg"));
        let out = run_cmd(
            &[
                "plot",
                "--input",
                manifest.to_str().unwrap(),
                "--kind",
                kind,
                "--out",
                out_path.to_str().unwrap(),
            ],
            &[],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let svg = std::fs::read_to_string(&out_path).unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
    // plotting twice gives identical bytes
    let p1 = dir.join("a.svg");
    let p2 = dir.join("b.svg");
    for p in [&p1, &p2] {
        run_cmd(
            &[
                "plot",
                "--input",
                manifest.to_str().unwrap(),
                "--kind",
                "measure_vs_k",
                "--out",
                p.to_str().unwrap(),
            ],
            &[],
        );
    }
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    // missing/unsupported plot kind errors out
    let bad = run_cmd(
        &[
            "plot",
            "--input",
            manifest.to_str().unwrap(),
            "--kind",
            "nope",
            "--out",
            dir.join("x.svg").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn counterexample_subcommand_emits_trace_and_summary() {
    let dir = tmp_dir("cex");
    let csv = dir.join("trace.csv");
    let out = run_cmd(
        &["counterexample", "--T", "2000", "--out", csv.to_str().unwrap()],
        &[],
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["exact_iterates"], true);
    assert_eq!(summary["complexity_bound_holds"], true);
    assert_eq!(summary["summability_holds"], true);
    assert_eq!(summary["unit_gradient_parity"], "odd");

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("k,alpha,obj,measure,step_len\n"));
    assert_eq!(text.lines().count(), 2002);
    let json_path = csv.with_extension("summary.json");
    assert!(json_path.exists());

    // the trace plots through the standard CSV path
    let svg_path = dir.join("cex.svg");
    let plotted = run_cmd(
        &[
            "plot",
            "--input",
            csv.to_str().unwrap(),
            "--kind",
            "measure_vs_k",
            "--out",
            svg_path.to_str().unwrap(),
        ],
        &[],
    );
    assert!(plotted.status.success());
}

#[test]
fn seed_falls_back_to_environment_variable() {
    let d1 = tmp_dir("env1");
    let d2 = tmp_dir("env2");
    for (dir, seed) in [(&d1, "77"), (&d2, "77")] {
        let out = run_cmd(
            &[
                "run",
                "--method",
                "sgd",
                "--problem.name",
                "quadratic",
                "--schedule",
                "inv_k:1:1",
                "--oracle.d",
                "1",
                "--oracle.noise",
                "gaussian_isotropic",
                "--t",
                "50",
                "--reps",
                "2",
                "--out_dir",
                dir.to_str().unwrap(),
            ],
            &[("OPT_LAB_SEED", seed)],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        std::fs::read(d1.join("rep_000.csv")).unwrap(),
        std::fs::read(d2.join("rep_000.csv")).unwrap()
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 77);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tmp_dir("cfg");
    let cfg_path = dir.join("exp.cfg");
    std::fs::write(
        &cfg_path,
        "method = sgd\nproblem.name = quadratic\nproblem.dim = 2\nschedule = inv_k:1:1\n\
         oracle.d = 1\noracle.noise = gaussian_isotropic\nt = 40\nreps = 2\nseed = 9\n",
    )
    .unwrap();
    // flag overrides the file's t
    let out = run_cmd(
        &[
            "run",
            "--t",
            "60",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out_dir",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["t"], 60);
}

#[test]
fn tampered_trace_fails_verification_as_io_level_error() {
    let dir = tmp_dir("tamper");
    assert!(run_small_ensemble(&dir).status.success());
    // flip one byte in a stored trace
    let path = dir.join("rep_001.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text = text.replacen('1', "2", 1);
    std::fs::write(&path, text).unwrap();
    let out = run_cmd(
        &[
            "verify",
            "--manifest",
            dir.join("manifest.json").to_str().unwrap(),
            "--conditions",
            "p2",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn all_diverged_exits_4_with_manifest_written() {
    let dir = tmp_dir("div");
    let out = run_cmd(
        &[
            "run",
            "--method",
            "sgd",
            "--problem.name",
            "quadratic",
            "--schedule",
            "constant:3.0",
            "--t",
            "400",
            "--reps",
            "3",
            "--seed",
            "1",
            "--out_dir",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(4));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["summary"]["divergence_count"], 3);
}

#[test]
fn prox_sgd_manifest_verifies_envelope_recursion_at_stride_one() {
    let dir = tmp_dir("proxv");
    let out = run_cmd(
        &[
            "run",
            "--method",
            "prox_sgd",
            "--problem.name",
            "quadratic",
            "--problem.dim",
            "2",
            "--regularizer.kind",
            "l1",
            "--regularizer.lambda",
            "1.0",
            "--schedule",
            "inv_k:1:1",
            "--oracle.d",
            "1",
            "--oracle.noise",
            "gaussian_isotropic",
            "--measure",
            "env_grad",
            "--stride",
            "1",
            "--t",
            "150",
            "--reps",
            "8",
            "--seed",
            "2",
            "--out_dir",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let verified = run_cmd(
        &[
            "verify",
            "--manifest",
            dir.join("manifest.json").to_str().unwrap(),
            "--conditions",
            "p1,p2,p3prime,recursion:prox_sgd_envelope,recursion:prox_sgd_step,trend",
            "--out",
            dir.join("reports.json").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        verified.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&verified.stderr)
    );
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap();
    for r in reports.as_array().unwrap() {
        let v = r["verdict"].as_str().unwrap();
        assert!(
            v == "pass" || v == "inconclusive",
            "{}: {v} ({:?})",
            r["condition"],
            r["notes"]
        );
    }
}

#[test]
fn rr_manifest_verifies_with_permutation_resampling() {
    let dir = tmp_dir("rrv");
    let out = run_cmd(
        &[
            "run",
            "--method",
            "rr",
            "--problem.name",
            "logistic_finite_sum",
            "--problem.dim",
            "3",
            "--problem.n_points",
            "6",
            "--schedule",
            "inv_k:0.5:1",
            "--t",
            "200",
            "--reps",
            "8",
            "--seed",
            "3",
            "--out_dir",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let verified = run_cmd(
        &[
            "verify",
            "--manifest",
            dir.join("manifest.json").to_str().unwrap(),
            "--conditions",
            "p1,p3prime,recursion:rr_epoch,trend",
            "--out",
            dir.join("reports.json").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        verified.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&verified.stderr)
    );
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap();
    for r in reports.as_array().unwrap() {
        let v = r["verdict"].as_str().unwrap();
        assert!(
            v == "pass" || v == "inconclusive",
            "{}: {v} ({:?})",
            r["condition"],
            r["notes"]
        );
        if r["condition"] == "p3prime" {
            assert_eq!(r["statistics"]["resampling_mode"], "permutation_resampling");
        }
    }
}
