//! Runs the normal scenario and prints how the setpoint of the large PV unit
//! and the storage evolve.
//!
//!     cargo run --release --example simulate [scenario.json]

use std::path::PathBuf;

use gridtrack::engine::{run, RunOptions, Scenario};

fn main() -> gridtrack::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/normal.json"));
    let prepared = Scenario::prepare_file(&path)?;
    let out = run(&prepared, &RunOptions::default())?;
    println!("{} rows, counters {:?}", out.record.len(), out.counters);
    let pv = out.real_setpoint(28);
    let ess = out.real_setpoint(31);
    for k in (0..pv.len()).step_by(500) {
        println!("t = {:>5.1} s  PV28 {:+.5}  ESS31 {:+.5}", pv[k].0, pv[k].1, ess[k].1);
    }
    println!("median step {:.3} ms", 1e3 * out.median_step_seconds());
    Ok(())
}
