//! A single Benettin run: the finite-time exponent `χ̂(t)` at a few times.
//!
//! ```text
//! cargo run --release --example lyapunov_run -- alpha-beta 64 5e-2
//! ```

use fpu_lyapunov::lyapunov::{benettin_run, initial_tangent, BenettinConfig};
use fpu_lyapunov::model::ModelSpec;
use fpu_lyapunov::sampler::{sample_state, SamplerConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "alpha-beta".into());
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(64);
    let eps: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5e-2);

    let model = ModelSpec::named(&name, n, 1).unwrap();
    let x0 = sample_state(&model, &SamplerConfig::new(eps, 3), 0).unwrap();
    let xi0 = initial_tangent(model.n_particles(), 3, 0);
    let series = benettin_run(&model, x0, xi0, &BenettinConfig::default(), 2e4).unwrap();
    for (t, chi) in series.times.iter().zip(&series.chi_hat).step_by(25) {
        println!("t = {t:>10.1}   chi_hat = {chi:.5e}");
    }
    println!("final chi_hat = {:.5e} after {} steps", series.final_chi(), series.steps);
}
