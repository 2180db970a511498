//! Recovers perturbed line reactances from voltage and injection snapshots.
//!
//!     cargo run --release --example estimator

use gridtrack::estimator::{EstimatorConfig, OnlineEstimator, Snapshot};
use gridtrack::feeder::{Feeder, GroundTruth, MeasurementNoiseSpec};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gridtrack::Result<()> {
    let feeder = Feeder::ieee33();
    let n = feeder.topology.node_count();
    let noise = MeasurementNoiseSpec {
        reactance_variance: 0.001,
        ..Default::default()
    };
    let mut truth = GroundTruth::new(&feeder.topology, &noise, 11)?;
    let mut est = OnlineEstimator::new(&feeder.topology, EstimatorConfig::default())?;
    let x = truth.topology().reactances();
    let rel = |e: &DVector<f64>| (e - &x).norm() / x.norm();
    println!(
        "rated data: relative reactance error {:.2e}",
        rel(&feeder.topology.reactances())
    );

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..4 {
        let p = DVector::from_fn(n, |_, _| rng.random_range(-0.05..0.02));
        let q = DVector::from_fn(n, |_, _| rng.random_range(-0.03..0.01));
        let v = truth.measure(&p, &q)?;
        let updated = est.observe(Snapshot { t: k as f64, p, q, v })?;
        println!("snapshot {k}: updated {updated:?}, error {:.2e}", rel(est.reactances()));
    }
    Ok(())
}
