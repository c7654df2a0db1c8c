//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per check and
//! exits non-zero if any fails.

mod learning;
mod records;
mod service;
mod simulation;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Outcome of one check: a short detail line, or the reason it failed.
pub type Check = Result<String, String>;

/// `Err(msg)` unless `cond` holds.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let checks: &[(&str, fn() -> Check)] = &[
        ("conservation", simulation::conservation),
        ("hand trace, idempotence and symmetry", simulation::hand_trace_and_symmetry),
        ("gap scaling", simulation::gap_scaling),
        ("rasterizer oracle", simulation::rasterizer),
        ("gradient check", learning::gradient_check),
        ("metric fixtures", records::metric_fixtures),
        ("dataset determinism", records::dataset_determinism),
        ("service contract", service::contract),
        ("speed ordering", learning::speed_ordering),
        ("desk-scale surrogate quality", learning::desk_quality),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {reason}");
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
