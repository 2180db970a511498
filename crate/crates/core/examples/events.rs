//! PV outage and feeder reconfiguration: how the storage and the tracking
//! error respond to each event.
//!
//!     cargo run --release --example events

use std::path::PathBuf;

use gridtrack::engine::{run, RunOptions, Scenario};

fn main() -> gridtrack::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");

    let outage = run(
        &Scenario::prepare_file(&dir.join("pv_outage.json"))?,
        &RunOptions::default(),
    )?;
    for e in &outage.events {
        println!("{:>6.2} s  {}", e.applied_at, e.description);
    }
    let ess = outage.real_setpoint(31);
    for (t, p) in ess.iter().filter(|(t, _)| ((t * 50.0).round() as i64) % 250 == 0) {
        println!("  t = {t:>5.1} s  ESS31 {p:+.5}");
    }
    println!("  min interior margin {:.1e}", outage.min_interior_margin);

    let opts = RunOptions {
        with_oracle: true,
        ..Default::default()
    };
    let prepared = Scenario::prepare_file(&dir.join("reconfiguration.json"))?;
    let swap = run(&prepared, &opts)?;
    let event = &swap.events[0];
    println!(
        "{:>6.2} s  {} (window length {})",
        event.applied_at, event.description, event.window_len
    );
    let m = swap.metrics.as_ref().expect("oracle requested");
    match m.time_to_track_after(event.applied_at, &prepared.scenario.thresholds) {
        Some(t) => println!("  back in the tracking band {:.2} s later", t - event.applied_at),
        None => println!("  did not return to the tracking band"),
    }
    Ok(())
}
