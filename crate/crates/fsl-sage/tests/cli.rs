use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fsl_sage::config_file::{emit_config, load_config};
use fsl_sage::output::METRICS_HEADER;
use fsl_sage_core::RunConfig;
use tempfile::TempDir;

fn small_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.data.samples = 400;
    c.data.eval_samples = 80;
    c.schedule.rounds = 5;
    c.schedule.local_steps = 4;
    c.schedule.uplinks_per_round = 2;
    c.schedule.align_interval = 2;
    c.optim.batch_size = 16;
    c.optim.align_steps = 4;
    c.protocol.probe_size = 48;
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsl-sage"))
        .arg("--quiet")
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn data_rows(metrics: &Path) -> Vec<String> {
    let text = fs::read_to_string(metrics).unwrap();
    let mut lines = text.lines().map(String::from);
    assert_eq!(lines.next().unwrap(), METRICS_HEADER.join(","));
    lines.collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn q_not_dividing_k_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let text = emit_config(&small_config())
        .unwrap()
        .replace("local_steps = 4", "local_steps = 10")
        .replace("uplinks_per_round = 2", "uplinks_per_round = 3");
    let config = write(tmp.path(), "bad.toml", &text);
    let out = run(&["run", s(&config), s(&tmp.path().join("out"))]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Q must divide K"), "{stderr}");
    assert!(!tmp.path().join("out").join("metrics.csv").exists());
}

#[test]
fn missing_and_malformed_configs_fail() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["run", s(&tmp.path().join("absent.toml")), s(tmp.path())]);
    assert!(!out.status.success());
    let config = write(tmp.path(), "junk.toml", "algorithm = \"sgd\"\n");
    let out = run(&["run", s(&config), s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("junk.toml"));
}

#[test]
fn run_writes_one_row_per_round_and_replays_exactly() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "run.toml", &emit_config(&small_config()).unwrap());
    let first = tmp.path().join("first");
    ok(run(&["run", s(&config), s(&first)]));
    let rows = data_rows(&first.join("metrics.csv"));
    assert_eq!(rows.len(), 5);
    for (t, row) in rows.iter().enumerate() {
        assert!(row.starts_with(&format!("{t},")), "{row}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "fsl_sage");
    assert_eq!(summary["rounds_run"], 5);

    let echo = first.join("config.toml");
    assert_eq!(load_config(&echo).unwrap(), small_config());
    let second = tmp.path().join("second");
    ok(run(&["run", s(&echo), s(&second)]));
    assert_eq!(
        fs::read(first.join("metrics.csv")).unwrap(),
        fs::read(second.join("metrics.csv")).unwrap()
    );
    assert_eq!(fs::read(&echo).unwrap(), fs::read(second.join("config.toml")).unwrap());
}

#[test]
fn seed_override_changes_the_run_and_is_echoed() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "run.toml", &emit_config(&small_config()).unwrap());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(run(&["run", s(&config), s(&a)]));
    ok(run(&["--seed-override", "7", "run", s(&config), s(&b)]));
    assert_ne!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
    let echoed = load_config(&b.join("config.toml")).unwrap();
    assert_eq!(echoed.seeds.init, 7);
    assert_eq!(echoed.seeds.streams, 7);
}

#[test]
fn sweep_over_all_algorithms_shares_data() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "base.toml", &emit_config(&small_config()).unwrap());
    let spec = write(
        tmp.path(),
        "sweep.toml",
        "target_accuracy = 0.3\n[[axis]]\nname = \"algorithm\"\n\
         values = [\"fsl_sage\", \"fedavg\", \"splitfed_ms\", \"splitfed_ss\", \"cse_fsl\"]\n",
    );
    let out = tmp.path().join("grid");
    ok(run(&["sweep", s(&config), s(&spec), s(&out)]));

    let mut reader = csv::Reader::from_path(out.join("comparison.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "point",
            "dir",
            "algorithm",
            "best_accuracy",
            "best_round",
            "bytes_to_target",
            "total_bytes",
            "final_eval_accuracy"
        ]
    );
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 5);
    for r in &records {
        let dir = out.join(&r[1]);
        assert_eq!(data_rows(&dir.join("metrics.csv")).len(), 5);
        let echo = load_config(&dir.join("config.toml")).unwrap();
        assert_eq!(echo.algorithm.name(), &r[2]);
        assert_eq!(echo.data, small_config().data);
        assert_eq!(echo.seeds, small_config().seeds);
    }
}

#[test]
fn alignment_interval_sweep() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "base.toml", &emit_config(&small_config()).unwrap());
    let spec = write(
        tmp.path(),
        "sweep.toml",
        "[[axis]]\nname = \"l\"\nvalues = [2, 5, 10]\n",
    );
    let out = tmp.path().join("grid");
    ok(run(&["sweep", s(&config), s(&spec), s(&out)]));
    let mut reader = csv::Reader::from_path(out.join("comparison.csv")).unwrap();
    let ls: Vec<String> = reader.records().map(|r| r.unwrap()[2].to_owned()).collect();
    assert_eq!(ls, ["2", "5", "10"]);
    for (dir, l) in ["000_l=2", "001_l=5", "002_l=10"].iter().zip([2, 5, 10]) {
        assert_eq!(
            load_config(&out.join(dir).join("config.toml"))
                .unwrap()
                .schedule
                .align_interval,
            l
        );
    }
}

#[test]
fn bad_sweeps_fail() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "base.toml", &emit_config(&small_config()).unwrap());
    let empty = write(tmp.path(), "empty.toml", "target_accuracy = 0.5\n");
    let out = run(&["sweep", s(&config), s(&empty), s(&tmp.path().join("a"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty grid"));

    let unknown = write(tmp.path(), "unknown.toml", "[[axis]]\nname = \"gamma\"\nvalues = [1]\n");
    let out = run(&["sweep", s(&config), s(&unknown), s(&tmp.path().join("b"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown parameter name"));
}

#[test]
fn dataset_file_replays_generated_data() {
    let tmp = TempDir::new().unwrap();
    let config = write(tmp.path(), "base.toml", &emit_config(&small_config()).unwrap());
    let data = tmp.path().join("data.bin");
    ok(run(&["gen-data", s(&config), s(&data)]));

    let mut from_file = small_config();
    from_file.data.dataset_file = Some(s(&data).to_owned());
    let file_config = write(tmp.path(), "file.toml", &emit_config(&from_file).unwrap());
    let a = tmp.path().join("generated");
    let b = tmp.path().join("loaded");
    ok(run(&["run", s(&config), s(&a)]));
    ok(run(&["run", s(&file_config), s(&b)]));
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );

    fs::write(&data, b"truncated").unwrap();
    let out = run(&["run", s(&file_config), s(&tmp.path().join("c"))]);
    assert!(!out.status.success());
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let base = load_config(&root.join("mixture.toml")).unwrap();
    assert_eq!(base, RunConfig::default());
    for name in ["sweep_algorithms.toml", "sweep_alpha.toml", "sweep_interval.toml"] {
        let spec = fsl_sage::sweep::load_sweep(&root.join(name)).unwrap();
        assert!(
            !fsl_sage::sweep::expand_grid(&base, &spec).unwrap().is_empty(),
            "{name}"
        );
    }
}
