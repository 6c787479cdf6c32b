//! Prints one line per acceptance criterion and exits non-zero if any fails.

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use rateless_validation::*;

fn emit(v: &Verdict) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{v}");
    let _ = out.flush();
}

fn main() -> ExitCode {
    let start = Instant::now();
    println!("acceptance: running criteria 1-9");
    let mut verdicts = Vec::new();
    let mut record = |v: Verdict| {
        emit(&v);
        verdicts.push(v);
    };

    match Scenarios::run() {
        Ok(s) => {
            record(criterion_1(&s));
            record(criterion_2(&s));
            record(criterion_3(&s));
            record(criterion_4(&s));
            record(criterion_5(&s));
            record(criterion_6());
            record(criterion_7());
            record(criterion_8());
            match criterion_9(&s) {
                Ok(v) => record(v),
                Err(e) => println!("criterion 9 [FAIL] determinism: {e}"),
            }
        }
        Err(e) => {
            println!("acceptance: scenario runs failed: {e}");
            return ExitCode::FAILURE;
        }
    }
    match supplementary_bsc_scaling(5) {
        Ok(v) => emit(&v),
        Err(e) => println!("supplementary: {e}"),
    }

    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.passed).map(|v| v.id).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.0} s",
        verdicts.len() - failed.len(),
        9,
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() && verdicts.len() == 9 {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
