use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qhier::checks::{self, Comparison};
use qhier_cli::{report, run_checks, select, write_outputs, ExperimentConfig};

#[derive(Parser)]
#[command(name = "qhier", version, about = "Verification suites and scaling studies for quantum many-particle hierarchies")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, env = "QHIER_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Run only the named check.
    #[arg(long, env = "QHIER_CHECK", global = true)]
    check: Option<String>,
    /// Seed for random fixtures; overrides the config.
    #[arg(long, env = "QHIER_SEED", global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "QHIER_THREADS", global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, env = "QHIER_OUT", global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment (the default).
    Run {
        /// Configuration file; same as --config.
        path: Option<PathBuf>,
    },
    /// Print every named check with what it verifies.
    ListChecks,
}

fn list_checks() {
    for c in checks::catalog() {
        let crit = c.criterion.map(|k| format!("criterion {k}")).unwrap_or_default();
        println!("{:<36} {:<13} {:<12} {}", c.name, c.group.name(), crit, c.anchor);
    }
    println!("{} checks", checks::catalog().len());
}

fn symbol(c: Comparison) -> &'static str {
    match c {
        Comparison::AtMost => "<=",
        Comparison::Below => "<",
        Comparison::AtLeast => ">=",
    }
}

fn run(cli: Cli, path: Option<PathBuf>) -> ExitCode {
    let loaded = match path.or(cli.config) {
        Some(p) => ExperimentConfig::load(&p),
        None => Ok(ExperimentConfig::default()),
    };
    let mut cfg = match loaded {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output.dir = out;
    }
    let specs = match select(&cfg, cli.check.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);

    let outcomes = run_checks(&specs, &cfg.context(), threads);
    for o in &outcomes {
        println!(
            "{} {:<36} {:.3e} {} {:.1e}  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.measured,
            symbol(o.comparison),
            o.tolerance,
            o.detail
        );
    }
    let rep = report(&cfg, cli.check.as_deref(), threads, outcomes);
    println!("{}: {}/{} checks passed", rep.experiment, rep.checks.len() - rep.failures, rep.checks.len());
    match write_outputs(&cfg, &rep) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: cannot write outputs: {e}");
            return ExitCode::from(2);
        }
    }
    if rep.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    match cli.command.take() {
        Some(Command::ListChecks) => {
            list_checks();
            ExitCode::SUCCESS
        }
        Some(Command::Run { path }) => run(cli, path),
        None => run(cli, None),
    }
}
