//! Seeded synthetic profiles standing in for measured irradiance, wind and
//! load data.
//!
//! Every profile is a slow base shape plus a band-limited fluctuation (a
//! short sum of sinusoids below `MAX_FREQUENCY_HZ`), sampled once per second.
//! Renewable profiles are normalized to their rating; the load profile is a
//! multiplier on the nominal feeder loads.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::signals::SampledSeries;

pub const PROFILE_SPAN_S: f64 = 600.0;
pub const PROFILE_SPACING_S: f64 = 1.0;
pub const MAX_FREQUENCY_HZ: f64 = 0.05;

/// Band-limited zero-mean fluctuation with peak amplitude at most `amplitude`.
fn fluctuation(rng: &mut ChaCha8Rng, amplitude: f64, components: usize) -> impl Fn(f64) -> f64 {
    let terms: Vec<(f64, f64, f64)> = (0..components)
        .map(|_| {
            (
                rng.random_range(0.1..1.0),
                rng.random_range(0.005..MAX_FREQUENCY_HZ),
                rng.random_range(0.0..TAU),
            )
        })
        .collect();
    let total: f64 = terms.iter().map(|t| t.0).sum();
    move |t: f64| amplitude / total * terms.iter().map(|(a, f, p)| a * (TAU * f * t + p).sin()).sum::<f64>()
}

fn sample(f: impl Fn(f64) -> f64) -> SampledSeries {
    let count = (PROFILE_SPAN_S / PROFILE_SPACING_S) as usize + 1;
    let values = (0..count).map(|k| f(k as f64 * PROFILE_SPACING_S)).collect();
    SampledSeries::uniform(0.0, PROFILE_SPACING_S, values).expect("profile grid is valid")
}

/// The named profiles written by `gen-profiles`.
pub fn generate_profiles(seed: u64) -> Vec<(&'static str, SampledSeries)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pv_fluct = fluctuation(&mut rng, 0.06, 6);
    let pv_phase = rng.random_range(0.0..TAU);
    let pv = sample(|t| (0.82 + 0.05 * (TAU * t / PROFILE_SPAN_S + pv_phase).sin() + pv_fluct(t)).clamp(0.0, 1.0));

    let wt_fluct = fluctuation(&mut rng, 0.12, 6);
    let wt = sample(|t| (0.55 + wt_fluct(t)).clamp(0.0, 1.0));

    let load_fluct = fluctuation(&mut rng, 0.02, 4);
    let load_phase = rng.random_range(0.0..TAU);
    let load = sample(|t| 0.55 + 0.03 * (TAU * t / PROFILE_SPAN_S + load_phase).sin() + load_fluct(t));

    // linear ramp of available power for the tracking-lag comparison
    let ramp = sample(|t| (0.1 + 0.01 * t).min(1.0));
    let flat = sample(|_| 1.0);

    vec![
        ("pv.csv", pv),
        ("wt.csv", wt),
        ("load.csv", load),
        ("ramp.csv", ramp),
        ("flat.csv", flat),
    ]
}

pub fn write_profiles(seed: u64, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, series) in generate_profiles(seed) {
        let path = dir.join(name);
        series.write_csv(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_bounded() {
        let a = generate_profiles(7);
        assert_eq!(a, generate_profiles(7));
        assert_ne!(a[0].1, generate_profiles(8)[0].1);
        for (name, s) in &a {
            assert_eq!(s.len(), 601, "{name}");
            assert!(s.values().iter().all(|v| (0.0..=1.0).contains(v)), "{name}");
        }
    }
}
