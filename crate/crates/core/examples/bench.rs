//! Per-step wall time and operation counts on the 33-bus feeder.
//!
//!     cargo run --release --example bench

use std::path::PathBuf;

use gridtrack::engine::commands::bench;

fn main() -> gridtrack::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/normal.json");
    let report = bench(&path)?;
    println!(
        "{} nodes, {} steps: median {:.3} ms, p95 {:.3} ms, max {:.3} ms",
        report.nodes, report.steps, report.timing.median_step_ms, report.timing.p95_step_ms, report.timing.max_step_ms
    );
    println!(
        "{:.2} factorizations per substep, {:.3} least-squares solves per interval",
        report.factorizations_per_substep, report.solves_per_interval
    );
    Ok(())
}
