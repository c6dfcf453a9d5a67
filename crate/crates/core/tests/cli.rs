use std::path::Path;
use std::process::Command;

use lifeline::envs::ChainSpec;
use lifeline::nn::GaussianPolicy;
use lifeline::rng::{Purpose, RunSeed};

fn lifeline(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lifeline")).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn write(path: &Path, text: &str) -> String {
    std::fs::write(path, text).unwrap();
    path.display().to_string()
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("exp.toml"),
        "algorithm = \"cf_ewc\"\nenvironment = \"chain\"\nseeds = [4, 5]\nsteps_per_task = 50000\n",
    );
    let out = dir.path().join("runs").join("cf");
    let (code, text) = lifeline(&["run", &cfg, "--seed", "9", "--steps-per-task", "600", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    // --seed replaces the seed list
    assert!(out.join("seed_9").join("episodes.csv").exists());
    assert!(!out.join("seed_4").exists());
    let resolved = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(resolved.contains("steps_per_task = 600"), "{resolved}");

    let (code, text) = lifeline(&["report", dir.path().join("runs").to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("cf_ewc"));
    assert!(dir.path().join("runs").join("report.csv").exists());
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(&dir.path().join("typo.toml"), "algorithm = \"ppo\"\nstep_per_task = 10\n");
    let (code, text) = lifeline(&["run", &typo]);
    assert_eq!(code, 1, "{text}");
    let bad_alg = write(&dir.path().join("alg.toml"), "algorithm = \"trpo\"\n");
    assert_eq!(lifeline(&["run", &bad_alg]).0, 1);
    assert_eq!(lifeline(&["run", "/nonexistent/exp.toml"]).0, 1);
    let (code, text) = lifeline(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("no runs found"));
}

#[test]
fn oracle_check_gates_on_violations() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("chain.txt");
    ChainSpec::hazard_chain().save(&spec_path).unwrap();
    let ckpt = dir.path().join("policy.txt");
    let policy = GaussianPolicy::new(5, &[8], 1, &mut RunSeed(1).stream(Purpose::Init)).unwrap();
    policy.to_checkpoint().save(&ckpt).unwrap();
    let (s, c) = (spec_path.to_str().unwrap(), ckpt.to_str().unwrap());

    // a near-random policy is far from optimal on every task
    let (code, text) = lifeline(&["oracle-check", s, c, "--cost-limit", "0.0", "--eps-forget", "0.01"]);
    assert_eq!(code, 3, "{text}");
    assert!(text.contains("upright") && text.contains("mirrored") && text.contains("shifted"));

    let (code, text) = lifeline(&["oracle-check", s, c, "--cost-limit", "100", "--eps-forget", "100", "--tasks", "upright"]);
    assert_eq!(code, 0, "{text}");
    assert!(!text.contains("mirrored"));

    // width mismatch between chain and policy
    let wrong = dir.path().join("wrong.txt");
    GaussianPolicy::new(3, &[8], 1, &mut RunSeed(1).stream(Purpose::Init))
        .unwrap()
        .to_checkpoint()
        .save(&wrong)
        .unwrap();
    assert_eq!(lifeline(&["oracle-check", s, wrong.to_str().unwrap()]).0, 1);
}

#[test]
fn grad_check_passes() {
    let (code, text) = lifeline(&["grad-check", "--instances", "10"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("70 checks, 0 failed"), "{text}");
}
