//! One line per acceptance criterion, followed by its individual checks.
//!
//! A criterion passes when none of its checks fail and it finishes within its
//! runtime limit. Criteria with a documented deviation are listed in
//! `KNOWN_FAILURES` together with the check ids that fail; the target exits
//! non-zero only when the outcome differs from this table.

use std::process::ExitCode;

use gpwave::verify::*;

/// Criterion number and the check ids expected to fail.
const KNOWN_FAILURES: &[(usize, &[&str])] = &[
    // each parity chain of D_k decreases, the full sequence does not
    // the 10x critical datum converges: ε only enters the diagnostic norms
    (11, &["3d.monotone", "3d.critical_10x_diverges"]),
];

struct Criterion {
    number: usize,
    name: &'static str,
    limit_s: Option<f64>,
    run: Box<dyn FnOnce() -> gpwave::Result<Vec<CheckResult>>>,
}

fn criterion(
    number: usize,
    name: &'static str,
    limit_s: Option<f64>,
    run: impl FnOnce() -> gpwave::Result<Vec<CheckResult>> + 'static,
) -> Criterion {
    Criterion {
        number,
        name,
        limit_s,
        run: Box::new(run),
    }
}

fn main() -> ExitCode {
    let setup = ScatterSetup::contraction();
    let criteria = vec![
        criterion(1, "operator identities", Some(5.0), || operator_identity_checks(20, 1)),
        criterion(2, "symbol derivatives", Some(1.0), || Ok(symbol_derivative_checks(1.0))),
        criterion(3, "linear decay rates", Some(300.0), || linear_decay_checks(Budget::Full)),
        criterion(4, "conservation", Some(180.0), || conservation_checks(Budget::Full)),
        criterion(5, "normal-form consistency", Some(300.0), normal_form_order_checks),
        criterion(6, "scattering contraction", Some(600.0), {
            let setup = setup.clone();
            move || Ok(contraction_checks(&setup.run()?))
        }),
        criterion(7, "forward/backward consistency", Some(300.0), {
            let setup = setup.clone();
            move || forward_backward_checks(&setup.run()?, 0.02)
        }),
        criterion(8, "correction rates", None, || {
            let rates = ScatterSetup::correction_rates(Budget::Full);
            correction_rate_checks(&rates.run()?, &rates, gpwave::scattering::DEFAULT_EPS_2D)
        }),
        criterion(9, "oscillatory-integral oracle", Some(120.0), || {
            oracle_checks().map(|r| r.into_iter().filter(|c| c.check_id == "oracle.u1sq").collect())
        }),
        criterion(10, "phase lower-bound scans", Some(60.0), || {
            phase_scan_checks(100_000, 0.05, 1).map(|r| r.into_iter().filter(|c| c.check_id != "scan.phiplus_time").collect())
        }),
        criterion(11, "3D wave operator", None, || wave_operator_3d_checks(Budget::Full)),
    ];

    println!("acceptance, tolerance table v{TOLERANCE_TABLE_VERSION}");
    let mut mismatches = Vec::new();
    for c in criteria {
        let (out, secs) = timed(c.run);
        let results = match out {
            Ok(r) => r,
            Err(e) => {
                println!("criterion {:>2} {:<30} FAIL  error: {e}", c.number, c.name);
                mismatches.push(c.number);
                continue;
            }
        };
        let failing: Vec<&str> = results.iter().filter(|r| r.status == Status::Fail).map(|r| r.check_id.as_str()).collect();
        let slow = c.limit_s.is_some_and(|l| secs > l);
        let pass = failing.is_empty() && !slow;
        let limit = c.limit_s.map_or(String::new(), |l| format!(" (limit {l} s)"));
        let skipped = results.iter().filter(|r| r.status == Status::Skip).count();
        let skipped = if skipped > 0 { format!(", {skipped} skipped") } else { String::new() };
        println!(
            "criterion {:>2} {:<30} {}  {:.1} s{limit}{skipped}",
            c.number,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            secs
        );
        for r in &results {
            println!("    {r}");
        }
        let known: &[&str] = KNOWN_FAILURES.iter().find(|(n, _)| *n == c.number).map_or(&[], |(_, ids)| ids);
        if slow || failing != known {
            mismatches.push(c.number);
        }
    }
    if mismatches.is_empty() {
        println!("all criteria match the expected outcomes");
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {mismatches:?}");
        ExitCode::FAILURE
    }
}
