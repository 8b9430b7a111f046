//! Theoretical `χ(ε)`: the small-`ε` closed form next to the full formula fed
//! by Monte Carlo curvature statistics.
//!
//! ```text
//! cargo run --release --example theory_estimates -- gamma-delta
//! ```

use fpu_lyapunov::model::ModelSpec;
use fpu_lyapunov::theory::{asymptotic_chi, constrained_gaussian_stats, van_kampen_chi};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "pure-beta".into());
    let model = ModelSpec::named(&name, 256, 1).unwrap();
    println!("{:>8} {:>12} {:>12} {:>9} {:>11} {:>7}", "eps", "asymptotic", "full", "Omega0", "sigma2", "tau");
    for eps in [1e-3, 3e-3, 1e-2, 3e-2, 1e-1] {
        let small = asymptotic_chi(&model, eps).map_or(f64::NAN, |a| a.chi);
        let g = constrained_gaussian_stats(&model, eps, 20_000, 1).unwrap();
        let full = van_kampen_chi(&g.stats);
        println!(
            "{eps:>8.0e} {small:>12.4e} {:>12.4e} {:>9.5} {:>11.4e} {:>7.4}",
            full.chi, g.stats.omega0, g.stats.sigma2, g.stats.tau
        );
    }
}
