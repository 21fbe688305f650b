use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qhier(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhier"))
        .current_dir(dir)
        .args(args)
        .env_remove("QHIER_CONFIG")
        .env_remove("QHIER_CHECK")
        .env_remove("QHIER_SEED")
        .env_remove("QHIER_THREADS")
        .env_remove("QHIER_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("qhier-out/report.json")).unwrap()).unwrap()
}

#[test]
fn list_checks_prints_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhier(dir.path(), &["list-checks"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("stirling-identity ")));
    assert!(text.lines().any(|l| l.starts_with("bbgky-oracle-exactness ")));
    let count = text.lines().filter(|l| l.contains("  ")).count();
    assert!(count >= 30, "{count}");
}

#[test]
fn over_capacity_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("big.toml"), "[truncation]\nmax_particles = 12\n").unwrap();
    let o = qhier(dir.path(), &["run", "big.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("capacity exceeded for `truncation.max_particles` (line 2): 12 > 6"), "{err}");
    assert!(!dir.path().join("qhier-out").exists());
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "experiment = \"verify\"\n[model\n").unwrap();
    let o = qhier(dir.path(), &["--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = qhier(dir.path(), &["--check", "no-such-check"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_check_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhier(dir.path(), &["--check", "stirling-identity", "--seed", "7"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS stirling-identity"));
    let r = report(dir.path());
    assert_eq!(r["experiment"], "check:stirling-identity");
    assert_eq!(r["seed"], 7);
    assert_eq!(r["passed"], true);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["checks"].as_array().unwrap().len(), 1);
}

#[test]
fn meanfield_study_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("meanfield.toml"),
        "experiment = \"meanfield\"\n[study]\nepsilons = [0.4, 0.2, 0.1]\n[output]\ndir = \"mf\"\n",
    )
    .unwrap();
    let o = qhier(dir.path(), &["run", "meanfield.toml", "--check", "meanfield-state-limit"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = fs::read_to_string(dir.path().join("mf/tables/meanfield-state-limit.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epsilon,time,quantity,value,fitted_order"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        assert_eq!(row[1], "0.5");
        let order: f64 = row[4].parse().unwrap();
        assert!(order > 0.5 && order < 1.5, "{row:?}");
    }
}

#[test]
fn failing_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("strict.toml"), "[tolerances]\ndual-finite-difference = 1e6\n").unwrap();
    let o = qhier(dir.path(), &["--config", "strict.toml", "--check", "dual-finite-difference"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL dual-finite-difference"));
    assert_eq!(report(dir.path())["passed"], false);
}

#[test]
fn env_overrides_and_reproducible_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_qhier"))
            .current_dir(dir.path())
            .env("QHIER_CHECK", "bbgky-oracle-exactness")
            .env("QHIER_SEED", "11")
            .env("QHIER_THREADS", "2")
            .env("QHIER_OUT", "env-out")
            .env_remove("QHIER_CONFIG")
            .output()
            .unwrap()
    };
    assert!(run().status.success());
    let first = fs::read(dir.path().join("env-out/report.json")).unwrap();
    assert!(run().status.success());
    let second = fs::read(dir.path().join("env-out/report.json")).unwrap();
    assert_eq!(first, second);
    let r: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(r["seed"], 11);
    assert_eq!(r["threads"], 2);
}

fn shipped(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_configs_parse() {
    let verify = qhier_cli::ExperimentConfig::load(&shipped("verify.toml")).unwrap();
    assert_eq!(verify.context().spec, qhier::checks::CheckContext::default().spec);
    let mf = qhier_cli::ExperimentConfig::load(&shipped("meanfield.toml")).unwrap();
    assert_eq!(mf.experiment, qhier_cli::Experiment::Meanfield);
}

#[test]
fn verify_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shipped("verify.toml");
    let o = qhier(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(dir.path());
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"bbgky-oracle-exactness"));
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
}
