//! Grid search over primal-dual gains on the ramp scenario.
//!
//! Prints the mean post-burn-in tracking error of every gain combination next
//! to the discrete prediction-correction baseline, which is what the frozen
//! defaults in `scenarios/ramp.json` were picked from.
//!
//!     cargo run --release --example baseline_gains [scenario.json]

use std::path::PathBuf;
use std::sync::Arc;

use gridtrack::dynamics::initial_control;
use gridtrack::engine::Scenario;
use gridtrack::feeder::GroundTruth;
use gridtrack::metrics::compute_metrics;
use gridtrack::oracle::{discrete_pc_track, oracle_trajectory, primal_dual_track, PrimalDualConfig};
use gridtrack::problem::{ScenarioQp, StorageLevels};

fn main() -> gridtrack::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/ramp.json"));
    let prepared = Scenario::prepare_file(&path)?;
    let sc = &prepared.scenario;
    let truth = GroundTruth::new(&prepared.feeder.topology, &sc.noise, sc.seed)?;
    let halted = vec![false; prepared.data.devices().len()];
    let provider = ScenarioQp {
        data: &prepared.data,
        sensitivity: Arc::new(truth.model().clone()),
        halted: &halted,
    };
    let storage0 = StorageLevels::at_rest(prepared.soc0.clone());
    let qp0 = provider
        .data
        .assemble(provider.sensitivity.clone(), prepared.grid.start, &storage0, &halted)?;
    let u0 = initial_control(&qp0);

    let dpc = discrete_pc_track(
        &provider,
        &prepared.grid,
        &u0,
        storage0.clone(),
        &sc.baselines.discrete_pc,
    )?;
    let (oracle, _) = oracle_trajectory(&provider, &prepared.grid, &dpc.storage)?;
    let dpc_err = compute_metrics(&dpc.record, &oracle, &sc.thresholds)?.mean_control_error(sc.burn_in_s);
    println!("discrete PC mean error {dpc_err:.4e}");

    println!(
        "{:>10} {:>8} {:>8} {:>12}",
        "iterations", "beta_p", "beta_d", "mean error"
    );
    for iterations in [1, 2, 3, 5, 10, 20] {
        for primal_step in [0.02, 0.05, 0.1] {
            for dual_step in [0.1, 1.0] {
                let cfg = PrimalDualConfig {
                    iterations,
                    primal_step,
                    dual_step,
                    ..sc.baselines.primal_dual
                };
                let pd = primal_dual_track(&provider, &prepared.grid, &u0, storage0.clone(), &cfg)?;
                let err = compute_metrics(&pd.record, &oracle, &sc.thresholds)?.mean_control_error(sc.burn_in_s);
                let mark = if err > dpc_err { "" } else { "  (below discrete PC)" };
                println!("{iterations:>10} {primal_step:>8} {dual_step:>8} {err:>12.4e}{mark}");
            }
        }
    }
    Ok(())
}
