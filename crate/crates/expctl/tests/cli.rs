use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use vtwin_expctl::metrics::parse_csv;

fn vtwin(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vtwin"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TOY: &str = "scenario = \"builtin:toy2\"\n[baseline]\nepisodes = 2\n";

#[test]
fn missing_subcommand_fails() {
    assert!(!vtwin(&[], &[]).status.success());
}

#[test]
fn unknown_config_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[baseline]\nepisodez = 3\n");
    let o = vtwin(&["baseline", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error:") && err.contains("episodez"), "{err}");
}

#[test]
fn missing_config_file_is_reported() {
    let o = vtwin(&["route", "--config", "/nonexistent/cfg.toml"], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/cfg.toml"));
}

#[test]
fn agent_eval_without_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"builtin:toy2\"\n");
    let o = vtwin(&["eval", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("checkpoint"), "{}", stderr(&o));
}

#[test]
fn seeds_repeat_and_csv_header_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let out = dir.path().join("o");
    let o = vtwin(&["baseline", "--config", &cfg, "--seed", "7", "--seed", "9", "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "run_id,seed,step,metric,value,units");
    let seeds: BTreeSet<u64> = parse_csv(&text).unwrap().iter().map(|r| r.seed).collect();
    assert_eq!(seeds, BTreeSet::from([7, 9]));
    for f in ["summary.json", "timing.json", "config.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn env_override_reaches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let out = dir.path().join("o");
    let o =
        vtwin(&["baseline", "--config", &cfg, "--out", out.to_str().unwrap()], &[("VTWIN_BASELINE__EPISODES", "1")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs = parse_csv(&std::fs::read_to_string(out.join("metrics.csv")).unwrap()).unwrap();
    assert!(recs.iter().all(|r| r.step == 0));
    let bad =
        vtwin(&["baseline", "--config", &cfg, "--out", out.to_str().unwrap()], &[("VTWIN_BASELINE__EPISODES", "many")]);
    assert!(!bad.status.success());
}

#[test]
fn strict_paper_flag_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[route]\nsteps = 5\nalgorithms = [\"durp\"]\ntraces = false\n");
    let out = dir.path().join("o");
    let o = vtwin(&["route", "--config", &cfg, "--strict-paper", "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(text.contains("strict_paper = true"), "{text}");
}

#[test]
fn checkpoint_for_another_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"builtin:toy2\"\n[trainer]\nhidden = [8]\nbatch_size = 8\ndiffusion_steps = 3\nepisodes = 1\n[train]\neval_episodes = 0\n");
    let ck_out = dir.path().join("ck");
    let o = vtwin(&["train", "--config", &cfg, "--out", ck_out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ck = ck_out.join("checkpoints/seed-0.json");
    let other = dir.path().join("grid.toml");
    std::fs::write(&other, "[eval]\ncompute_sweep = [40e9]\nassist = [true]\n").unwrap();
    let o = vtwin(
        &[
            "eval",
            "--config",
            other.to_str().unwrap(),
            "--checkpoint",
            ck.to_str().unwrap(),
            "--out",
            dir.path().join("e").to_str().unwrap(),
        ],
        &[],
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("trained for"), "{}", stderr(&o));
}
