//! Solves one snapshot of the dispatch problem exactly and prints the KKT
//! residuals and the binding constraints.
//!
//!     cargo run --release --example oracle

use std::path::PathBuf;
use std::sync::Arc;

use gridtrack::engine::Scenario;
use gridtrack::feeder::SensitivityModel;
use gridtrack::oracle::solve_sampled_qp;
use gridtrack::problem::StorageLevels;

fn main() -> gridtrack::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/normal.json");
    let prepared = Scenario::prepare_file(&path)?;
    let sens = Arc::new(SensitivityModel::from_topology(&prepared.feeder.topology)?);
    let halted = vec![false; prepared.data.devices().len()];
    let qp = prepared
        .data
        .assemble(sens, 30.0, &StorageLevels::at_rest(prepared.soc0.clone()), &halted)?;
    let sol = solve_sampled_qp(&qp, None)?;
    println!(
        "f* = {:.6} after {} iterations; residuals {:.1e} / {:.1e} / {:.1e}",
        sol.objective, sol.iterations, sol.stationarity, sol.primal_infeasibility, sol.complementarity
    );
    let slack = qp.constraint_values(&sol.u)?;
    let active: Vec<usize> = slack
        .iter()
        .enumerate()
        .filter(|(_, f)| **f > -1e-7)
        .map(|(i, _)| i)
        .collect();
    println!(
        "{} of {} constraint rows binding: {active:?}",
        active.len(),
        slack.len()
    );
    let v = qp.voltage(&sol.u);
    println!("voltage range [{:.4}, {:.4}] p.u.", v.min(), v.max());
    Ok(())
}
