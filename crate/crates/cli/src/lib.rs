//! Orchestration behind the `qhier` binary: check selection, execution,
//! JSON reports and CSV study tables.

pub mod config;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use qhier::checks::{self, CheckContext, CheckOutcome, CheckSpec};
use serde::Serialize;

pub use config::{ConfigError, Experiment, ExperimentConfig};

pub const CSV_HEADER: [&str; 5] = ["epsilon", "time", "quantity", "value", "fitted_order"];

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub passed: bool,
    pub failures: usize,
    pub checks: Vec<CheckOutcome>,
}

/// Checks of the configured experiment, or the single named check.
pub fn select(cfg: &ExperimentConfig, check: Option<&str>) -> Result<Vec<&'static CheckSpec>, ConfigError> {
    match check {
        Some(name) => checks::find(name).map(|c| vec![c]).ok_or_else(|| ConfigError::Invalid {
            field: "--check".into(),
            line: None,
            message: format!("no check named `{name}` (see `qhier list-checks`)"),
        }),
        None => {
            let groups = cfg.experiment.groups();
            Ok(checks::catalog().iter().filter(|c| groups.contains(&c.group)).collect())
        }
    }
}

/// Runs `specs` on `threads` workers; outcomes keep the order of `specs`.
pub fn run_checks(specs: &[&'static CheckSpec], ctx: &CheckContext, threads: usize) -> Vec<CheckOutcome> {
    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(specs.len()));
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, specs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = specs.get(i) else { break };
                let outcome = spec.run(ctx);
                done.lock().expect("worker panicked").push((i, outcome));
            });
        }
    });
    let mut done = done.into_inner().expect("worker panicked");
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, o)| o).collect()
}

pub fn report(cfg: &ExperimentConfig, check: Option<&str>, threads: usize, outcomes: Vec<CheckOutcome>) -> Report {
    let failures = outcomes.iter().filter(|o| !o.passed).count();
    Report {
        experiment: check.map_or_else(|| cfg.experiment.name().to_string(), |c| format!("check:{c}")),
        config_hash: cfg.hash.clone(),
        seed: cfg.seed,
        threads,
        passed: failures == 0,
        failures,
        checks: outcomes,
    }
}

fn number(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        String::new()
    }
}

/// Writes the study tables of `outcome`, if any, to `dir/<check>.csv`.
pub fn write_tables(outcome: &CheckOutcome, dir: &Path) -> io::Result<Option<PathBuf>> {
    if outcome.studies.is_empty() {
        return Ok(None);
    }
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.csv", outcome.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(CSV_HEADER)?;
    for study in &outcome.studies {
        for (eps, t, q, v, order) in study.table() {
            w.write_record([number(eps), number(t), q, number(v), number(order)])?;
        }
    }
    w.flush()?;
    Ok(Some(path))
}

/// Writes the JSON report and every study table; returns the paths written.
pub fn write_outputs(cfg: &ExperimentConfig, report: &Report) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.report_path();
    let json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    fs::write(&path, json + "\n")?;
    let mut written = vec![path];
    for o in &report.checks {
        written.extend(write_tables(o, &cfg.output.tables_dir())?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiments_select_their_groups() {
        let mut cfg = ExperimentConfig::default();
        let verify = select(&cfg, None).unwrap();
        assert!(verify.iter().any(|c| c.name == "stirling-identity"));
        assert!(verify.iter().all(|c| c.group != qhier::checks::Group::Meanfield));
        cfg.experiment = Experiment::All;
        assert_eq!(select(&cfg, None).unwrap().len(), checks::catalog().len());
        assert_eq!(select(&cfg, Some("hartree-vlasov")).unwrap().len(), 1);
        assert!(select(&cfg, Some("nope")).is_err());
    }

    #[test]
    fn outcomes_keep_order_across_threads() {
        let cfg = ExperimentConfig::default();
        let specs = select(&cfg, None).unwrap()[..6].to_vec();
        let one = run_checks(&specs, &cfg.context(), 1);
        let four = run_checks(&specs, &cfg.context(), 4);
        let names: Vec<_> = specs.iter().map(|c| c.name).collect();
        assert_eq!(one.iter().map(|o| o.name.as_str()).collect::<Vec<_>>(), names);
        let a = serde_json::to_string(&report(&cfg, None, 1, one)).unwrap();
        let b = serde_json::to_string(&report(&cfg, None, 1, four)).unwrap();
        assert_eq!(a, b);
    }
}
