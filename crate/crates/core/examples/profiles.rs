//! Generates the seeded synthetic profiles and evaluates their Hermite
//! interpolants at a few off-grid times.
//!
//!     cargo run --release --example profiles [seed]

use gridtrack::engine::profiles::generate_profiles;
use gridtrack::signals::hermite_fit;

fn main() -> gridtrack::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2024);
    for (name, series) in generate_profiles(seed) {
        let f = hermite_fit(&series)?;
        let (v, dv) = f.eval_with_derivative(30.5);
        println!(
            "{name:>5}: {} samples over [{}, {}] s, value {v:.4} and slope {dv:+.2e} at 30.5 s",
            series.len(),
            f.start(),
            f.end()
        );
    }
    Ok(())
}
