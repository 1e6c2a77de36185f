use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use macov::harness::{
    cmd_discover, cmd_plot, cmd_train, read_aggregate, ExperimentConfig, HarnessError, AGGREGATE_HEADER,
};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn quick(extra: &str) -> ExperimentConfig {
    let text = format!(
        "[task]\nbuiltin = \"fourroom-2agent\"\n[options]\nsource = \"multi\"\ntot_num = 4\n[run]\nseeds = [0, 1, 2]\nepisodes = 40\n{extra}"
    );
    ExperimentConfig::from_toml(&text, ".").unwrap()
}

#[test]
fn toy_manifest_lists_every_joint_state_once() {
    let cfg = ExperimentConfig::load(&configs().join("toy_k2_p4.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_discover(&cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("options.csv")).unwrap();
    assert_eq!(text, report.manifest);
    let targets: Vec<String> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().to_string())
        .collect();
    let unique: BTreeSet<_> = targets.iter().cloned().collect();
    assert_eq!(targets.len(), 8);
    assert_eq!(unique.len(), 8);
    let shown = report.to_string();
    assert!(
        shown.contains("modes (1,1)") && shown.contains("modes (2,4)"),
        "{shown}"
    );
}

#[test]
fn zero_options_give_an_empty_manifest() {
    let mut cfg = quick("");
    cfg.options.tot_num = 0;
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_discover(&cfg, dir.path()).unwrap();
    assert_eq!(report.manifest, "group,option,target,actions\n");
}

#[test]
fn unreadable_map_is_reported() {
    let cfg = ExperimentConfig::from_toml("[task]\nmap = \"no/such/map.txt\"\n", ".").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_discover(&cfg, dir.path()).unwrap_err();
    assert!(matches!(err, HarnessError::Config(ref m) if m.contains("no/such/map.txt")));
}

#[test]
fn training_twice_writes_identical_bytes() {
    let cfg = quick("");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_train(&cfg, a.path()).unwrap();
    cmd_train(&cfg, b.path()).unwrap();
    let names = ["seed_0.csv", "seed_1.csv", "seed_2.csv", "aggregate.csv", "summary.csv"];
    for n in names {
        let x = std::fs::read(a.path().join(n)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.path().join(n)).unwrap(), "{n}");
    }
}

#[test]
fn one_seed_one_episode_gives_one_row() {
    let mut cfg = quick("");
    cfg.learner.kind = macov::learners::LearnerKind::Random;
    cfg.run.seeds = vec![1];
    cfg.run.episodes = 1;
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("seed_1.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "episode,seed,cumulative_reward,steps");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,1,"));
}

#[test]
fn aggregate_is_recomputable_from_seed_files() {
    let cfg = quick("");
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&cfg, dir.path()).unwrap();
    let mut per_seed: Vec<Vec<f64>> = Vec::new();
    for s in &cfg.run.seeds {
        let mut r = csv::Reader::from_path(dir.path().join(format!("seed_{s}.csv"))).unwrap();
        per_seed.push(r.records().map(|rec| rec.unwrap()[2].parse().unwrap()).collect());
    }
    let agg = read_aggregate(&dir.path().join("aggregate.csv"), "x").unwrap();
    let k = per_seed.len() as f64;
    for e in 0..cfg.run.episodes {
        let mean = per_seed.iter().map(|r| r[e]).sum::<f64>() / k;
        let var = per_seed.iter().map(|r| (r[e] - mean).powi(2)).sum::<f64>() / k;
        assert!((agg.mean[e] - mean).abs() < 1e-12);
        assert!((agg.std[e] - var.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn plot_has_one_band_and_line_per_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut inputs = Vec::new();
    for (i, extra) in ["", "[learner]\nkind = \"iql\"\n"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        cmd_train(&quick(extra), &out).unwrap();
        inputs.push(out.join("aggregate.csv"));
    }
    let svg_path = dir.path().join("curve.svg");
    cmd_plot(&inputs, &["multi".into(), "iql".into()], &svg_path).unwrap();
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 2);
    assert_eq!(svg.matches("<polyline").count(), 2);
    for line in svg.lines().filter(|l| l.contains("<polygon")) {
        let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split_whitespace().count(), 2 * 40);
    }
    assert!(svg.contains(">multi<") && svg.contains(">iql<"));
}

#[test]
fn plot_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "episode,value\n0,1\n").unwrap();
    let out = dir.path().join("x.svg");
    assert!(matches!(
        cmd_plot(&[bad], &[], &out),
        Err(HarnessError::SchemaMismatch { .. })
    ));
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, format!("{}\n", AGGREGATE_HEADER.join(","))).unwrap();
    assert!(matches!(cmd_plot(&[empty], &[], &out), Err(HarnessError::EmptyCsv(_))));
    assert!(!out.exists());
}

#[test]
fn shipped_configs_load() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        cfg.load_task().unwrap();
    }
}

#[cfg(feature = "cli")]
mod cli {
    use std::process::Command;

    use super::*;

    fn macov() -> Command {
        Command::new(env!("CARGO_BIN_EXE_macov"))
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let ok = macov()
            .args(["discover", "--config"])
            .arg(configs().join("toy_k2_p4.toml"))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(ok.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&ok.stdout).contains("round 1"));

        let missing = macov()
            .args(["train", "--config", "/no/such/config.toml"])
            .output()
            .unwrap();
        assert_eq!(missing.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&missing.stderr).contains("/no/such/config.toml"));

        let unknown = macov().args(["reproduce", "fourroom-99agent"]).output().unwrap();
        assert_eq!(unknown.status.code(), Some(1));

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        let plot = macov()
            .arg("plot")
            .arg(&empty)
            .arg("--out")
            .arg(dir.path().join("p.svg"))
            .output()
            .unwrap();
        assert_ne!(plot.status.code(), Some(0));
    }

    #[test]
    fn train_with_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let out = macov()
            .args(["train", "--config"])
            .arg(configs().join("fourroom_2agent.toml"))
            .args(["--seeds", "2,3", "--episodes", "5", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join("seed_3.csv").exists());
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.lines().nth(1).unwrap().starts_with("centq_force+multi,2 3,5,"));
    }
}
