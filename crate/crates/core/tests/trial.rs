//! Whole-trial behaviour through the public experiment API and the CLI.

use std::fs;
use std::process::Command;

use advexp::collectors::CollectorKind;
use advexp::env::EnvId;
use advexp::experiment::{read_logs, run_trial, Preset, TrialConfig, CURVE_HEADER};

fn tiny(env: EnvId, kind: CollectorKind, iterations: usize) -> TrialConfig {
    let mut c = TrialConfig::preset(Preset::Desk, env, kind, 3);
    c.iterations = iterations;
    c.inverse.hidden = 8;
    c.inverse.recurrent = 8;
    c.ppo.hidden = vec![8, 8];
    c.eval.every_samples = 1000;
    c.eval.n_eval = 5;
    c.eval.demo_episodes = 10;
    c
}

#[test]
fn eval_points_increase_and_end_on_the_budget() {
    let c = tiny(EnvId::PointReach, CollectorKind::Adversarial, 5);
    let log = run_trial(&c).unwrap();
    assert!(log.completed());
    let samples: Vec<usize> = log.eval.iter().map(|p| p.samples).collect();
    assert_eq!(samples, vec![0, 1000, 2000, 2500]);
    assert!(log.eval.iter().all(|p| (0.0..=1.0).contains(&p.success_rate)));
    assert_eq!(log.batch_losses.len(), 5 * 25);
    // 2500 steps hold one full 2050-step PPO batch
    assert_eq!(log.ppo.len(), 1);
    assert_eq!(log.iterations.len(), 5);
}

#[test]
fn demo_trials_use_the_nominal_sample_axis() {
    let log = run_trial(&tiny(EnvId::ArmReach, CollectorKind::Demo, 4)).unwrap();
    assert_eq!(log.env_samples, 0);
    assert_eq!(log.eval.last().unwrap().samples, 2000);
    assert!(log.eval.iter().all(|p| p.env_samples == 0));
}

#[test]
fn loss_history_is_capped() {
    let mut c = tiny(EnvId::PushBlock, CollectorKind::Random, 3);
    c.loss_history_batches = 30;
    assert_eq!(run_trial(&c).unwrap().batch_losses.len(), 30);
}

#[test]
fn invalid_config_is_rejected_up_front() {
    let mut c = tiny(EnvId::PushBlock, CollectorKind::Random, 3);
    c.eval.n_eval = 0;
    assert!(run_trial(&c).is_err());
}

#[test]
fn cli_run_then_kde() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        serde_json::to_string(&tiny(EnvId::PushBlock, CollectorKind::Random, 2)).unwrap(),
    )
    .unwrap();
    let out = dir.path().join("runs");
    let status = Command::new(env!("CARGO_BIN_EXE_advexp"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--seed", "8"])
        .env("ADVEXP_OUT_ROOT", &out)
        .status()
        .unwrap();
    assert!(status.success());
    let trial = out.join("push_block/random/seed_8");
    let curve = fs::read_to_string(trial.join("curve.csv")).unwrap();
    assert!(curve.starts_with(CURVE_HEADER));
    let logs = read_logs(&out).unwrap();
    assert_eq!(logs.len(), 1);
    assert_eq!(logs[0].config.seed, 8);

    let pdf = dir.path().join("pdf.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_advexp"))
        .args(["kde", "--in", out.to_str().unwrap(), "--out", pdf.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(pdf).unwrap();
    assert_eq!(text.lines().next(), Some("collector,loss,density"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("random,")));
}

#[test]
fn cli_rejects_unknown_collector() {
    let out = Command::new(env!("CARGO_BIN_EXE_advexp"))
        .args(["run", "--collector", "greedy"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("greedy"));
}
