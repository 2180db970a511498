//! Continuous tracking against the exact solutions and the two iterative
//! baselines on the ramp scenario.
//!
//!     cargo run --release --example compare [scenario.json]

use std::path::PathBuf;

use gridtrack::engine::commands::compare_prepared;
use gridtrack::engine::Scenario;

fn main() -> gridtrack::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/ramp.json"));
    let cmp = compare_prepared(&Scenario::prepare_file(&path)?)?;
    println!(
        "{:>22} {:>12} {:>12} {:>10}",
        "method", "mean error", "max error", "tracked at"
    );
    for m in &cmp.report.methods {
        let at = m.time_to_track_s.map_or("never".into(), |t| format!("{t:.2} s"));
        println!(
            "{:>22} {:>12.3e} {:>12.3e} {at:>10}",
            m.method, m.mean_control_error, m.max_control_error
        );
    }
    Ok(())
}
