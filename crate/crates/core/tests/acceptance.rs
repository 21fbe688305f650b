use std::thread;

use qhier::checks::{for_criterion, CheckContext, CheckOutcome};

const CRITERIA: [(u8, &str); 13] = [
    (1, "Stirling/Mobius identity"),
    (2, "Exp/Ln star round trip"),
    (3, "cluster expansion of groups"),
    (4, "cumulant bounds"),
    (5, "BBGKY oracle exactness"),
    (6, "dual hierarchy"),
    (7, "von Neumann hierarchy"),
    (8, "nonlinear BBGKY"),
    (9, "kinetic cluster expansion"),
    (10, "kinetic equation equivalence"),
    (11, "mean-field convergence"),
    (12, "Vlasov and Hartree"),
    (13, "correlated initial data"),
];

fn main() {
    let ctx = CheckContext::default();
    let results: Vec<(u8, &str, Vec<CheckOutcome>)> = thread::scope(|scope| {
        let handles: Vec<_> = CRITERIA
            .iter()
            .map(|&(k, title)| {
                let ctx = &ctx;
                let checks: Vec<_> = for_criterion(k).collect();
                let handles: Vec<_> = checks.into_iter().map(|c| scope.spawn(move || c.run(ctx))).collect();
                (k, title, handles)
            })
            .collect();
        handles
            .into_iter()
            .map(|(k, title, hs)| (k, title, hs.into_iter().map(|h| h.join().expect("check panicked")).collect()))
            .collect()
    });

    let mut failed = Vec::new();
    for (k, title, outcomes) in &results {
        let pass = !outcomes.is_empty() && outcomes.iter().all(|o| o.passed);
        println!("criterion {k:>2} {}: {title}", if pass { "PASS" } else { "FAIL" });
        for o in outcomes {
            println!(
                "    {} {}: measured {:.3e}, tolerance {:.1e} ({:?}); {}",
                if o.passed { "ok  " } else { "FAIL" },
                o.name,
                o.measured,
                o.tolerance,
                o.comparison,
                o.detail
            );
        }
        if !pass {
            failed.push(*k);
        }
    }
    println!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
