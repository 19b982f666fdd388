//! End-to-end tests through the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fkchain"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fkchain-cli-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small grids and loose-enough tolerances so each command finishes in
/// seconds; physics tests live in the library crate.
fn fast_config(dir: &Path, beta: f64, reference_q: i64) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        format!(
            "[model]\nalpha = \"(8/13)*golden\"\nbeta = {beta}\n\n\
             [solver]\ntol = 1e-8\nreference_q = {reference_q}\n\n\
             [table]\nn_s = 64\nn_kappa = 16\n"
        ),
    )
    .unwrap();
    path
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_exits_zero_and_lists_subcommands() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["table", "relax", "hull", "converge", "reconstruct", "orbit", "atomistic", "disregistry", "check"] {
        assert!(text.contains(name), "help is missing {name}:\n{text}");
    }
}

#[test]
fn unknown_subcommand_is_rejected() {
    let out = run(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(stderr_text(&out).contains("unknown command"));
}

#[test]
fn missing_config_is_a_named_error() {
    let out = run(&["check"]);
    assert!(!out.status.success());
    assert!(stderr_text(&out).contains("--config"));
}

#[test]
fn empty_config_fails_only_on_alpha() {
    let dir = scratch("empty-config");
    let cfg = dir.join("empty.toml");
    std::fs::write(&cfg, "").unwrap();
    let out = run(&["check", "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr_text(&out).contains("model.alpha"), "{}", stderr_text(&out));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = scratch("unknown-key");
    let cfg = dir.join("typo.toml");
    std::fs::write(&cfg, "[model]\nalpa = 0.99\n").unwrap();
    let out = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr_text(&out).contains("alpa"), "{}", stderr_text(&out));
}

#[test]
fn check_reports_conditions_and_dumps_idempotently() {
    let dir = scratch("check");
    let cfg = fast_config(&dir, 764.0, 233);
    let out1 = dir.join("out1");
    let out = run(&["check", "--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr_text(&out));

    let conditions: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("conditions.json")).unwrap()).unwrap();
    assert!(conditions["twist_margin"].as_f64().unwrap() > 0.0);
    assert!(conditions["lower_bound"].as_f64().unwrap().is_finite());

    // Loading the dumped config and dumping again changes nothing.
    let dumped = out1.join("config.toml");
    let out2 = dir.join("out2");
    let out = run(&["check", "--config", dumped.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr_text(&out));
    assert_eq!(
        std::fs::read(&dumped).unwrap(),
        std::fs::read(out2.join("config.toml")).unwrap()
    );

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "check");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["parameters"]["model"]["beta"].as_f64().unwrap() == 764.0);
}

#[test]
fn beta_override_lands_in_the_manifest() {
    let dir = scratch("beta-override");
    let cfg = fast_config(&dir, 764.0, 233);
    let out1 = dir.join("out");
    let out = run(&[
        "check", "--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap(), "--beta", "10",
    ]);
    assert!(out.status.success(), "{}", stderr_text(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["parameters"]["model"]["beta"].as_f64().unwrap(), 10.0);

    // The override must reach the physics: the curvature-stiffness part of
    // the report scales linearly in beta.
    let conditions: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("conditions.json")).unwrap()).unwrap();
    let alpha = 8.0 / 13.0 * (1.0 + 5.0_f64.sqrt()) / 2.0;
    let flat = 10.0 / (alpha * alpha * 2.1262 * 2.1262);
    assert!((conditions["flat_substrate_margin"].as_f64().unwrap() - flat).abs() < 1e-12);
}

#[test]
fn relax_then_orbit_produce_consistent_outputs() {
    let dir = scratch("relax-orbit");
    let cfg = fast_config(&dir, 764.0, 233);
    let out1 = dir.join("relax");
    let out = run(&[
        "relax", "--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap(),
        "--p", "34", "--q", "35",
    ]);
    assert!(out.status.success(), "{}", stderr_text(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["converged"], true);
    assert!(summary["final_energy"].as_f64().unwrap() < summary["initial_energy"].as_f64().unwrap());
    let state = std::fs::read_to_string(out1.join("state.txt")).unwrap();
    assert!(state.starts_with("fk-state v1"));

    let out2 = dir.join("orbit");
    let out = run(&[
        "orbit", "--config", cfg.to_str().unwrap(), "--out", out2.to_str().unwrap(),
        "--p", "34", "--q", "35",
    ]);
    assert!(out.status.success(), "{}", stderr_text(&out));
    let head: String = std::fs::read_to_string(out2.join("orbit.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(head, "j,theta,p,s_lift");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("summary.json")).unwrap()).unwrap();
    assert!(summary["return_theta_gap"].as_f64().unwrap() < 1e-6);
    assert!(summary["lift_advance_minus_p"].as_f64().unwrap() < 1e-6);
}

#[test]
fn converge_small_study_is_deterministic_and_converged() {
    let dir = scratch("converge");
    let cfg = fast_config(&dir, 764.0, 233);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.join(name);
        let out = run(&[
            "converge", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
            "--qmax", "130", "--jobs", "1",
        ]);
        assert!(out.status.success(), "{}", stderr_text(&out));
        outputs.push(std::fs::read(out_dir.join("study.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "study.csv must be byte-identical across reruns");

    let text = String::from_utf8(outputs[0].clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "p,q,artificial_strain,error,converged_flag");
    let mut rows = 0;
    for line in lines {
        assert!(line.ends_with(",true"), "unconverged row: {line}");
        rows += 1;
    }
    assert!(rows >= 10, "expected a dozen approximants, got {rows}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["all_converged"], true);
    assert_eq!(summary["reference_q"], 233);
}

#[test]
fn input_config_is_never_mutated() {
    let dir = scratch("no-mutation");
    let cfg = fast_config(&dir, 764.0, 233);
    let before = std::fs::read(&cfg).unwrap();
    let out = run(&["table", "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr_text(&out));
    assert_eq!(std::fs::read(&cfg).unwrap(), before);
}
