//! Linearized voltage sensitivities of the 33-bus feeder, and the drift
//! caused by perturbing the line reactances.
//!
//!     cargo run --release --example feeder_sensitivity

use gridtrack::feeder::{Feeder, GroundTruth, MeasurementNoiseSpec, SensitivityModel};
use nalgebra::DVector;

fn main() -> gridtrack::Result<()> {
    let feeder = Feeder::ieee33();
    let topo = &feeder.topology;
    let model = SensitivityModel::from_topology(topo)?;
    let n = model.node_count();
    println!("{n} nodes, {} lines", topo.lines().len());

    // 0.01 p.u. real and 0.005 p.u. reactive load at every node
    let p = DVector::from_element(n, -0.01);
    let q = DVector::from_element(n, -0.005);
    let v = model.voltage(&p, &q)?;
    let (lowest, vmin) = v.argmin();
    println!("uniform load: lowest voltage {vmin:.5} p.u. at node {}", lowest + 1);

    let truth = GroundTruth::new(
        topo,
        &MeasurementNoiseSpec {
            reactance_variance: 0.001,
            ..Default::default()
        },
        7,
    )?;
    let x_rated = topo.reactances();
    let x_true = truth.topology().reactances();
    println!(
        "reactance perturbation: {:.2}% relative",
        100.0 * (&x_true - &x_rated).norm() / x_rated.norm()
    );
    let v_true = truth.model().voltage(&p, &q)?;
    println!(
        "voltage difference from the perturbation: {:.2e} p.u. max",
        (&v_true - &v).amax()
    );
    Ok(())
}
