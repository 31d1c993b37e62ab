//! Runner for the acceptance target.
//!
//! The checks live in `tests/acceptance.rs`; this crate only provides the
//! reporting, so a failing criterion prints its line like every other one and
//! turns into a non-zero exit status at the end.

use std::process::ExitCode;
use std::time::Instant;

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    /// Measured values, printed after the name.
    pub detail: String,
}

pub fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// A named check.
pub type Criterion = (&'static str, fn() -> Outcome);

/// Formats one report line.
pub fn report_line(name: &str, o: &Outcome, seconds: f64) -> String {
    format!(
        "{} {name}: {} [{seconds:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    )
}

/// Runs every criterion in order, prints one line each plus a tally, and
/// fails if any criterion failed.
pub fn run_criteria(criteria: &[Criterion]) -> ExitCode {
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        println!("{}", report_line(name, &o, start.elapsed().as_secs_f64()));
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_lead_with_the_verdict() {
        let line = report_line("x", &outcome(false, "0.69 vs 0.70".into()), 1.25);
        assert_eq!(line, "FAIL x: 0.69 vs 0.70 [1.2s]");
        assert!(report_line("y", &outcome(true, String::new()), 0.0).starts_with("PASS y"));
    }
}
