//! Draws an equilibrium initial condition at specific energy `ε` and follows
//! the energy error of the fourth-order integrator for a few step sizes.
//!
//! ```text
//! cargo run --release --example sample_and_integrate -- pure-beta 256 1e-2
//! ```

use fpu_lyapunov::chain::{specific_energy, total_energy};
use fpu_lyapunov::integrator::{integrate, IntegratorConfig};
use fpu_lyapunov::model::ModelSpec;
use fpu_lyapunov::sampler::{mode_energies, sample_state, SamplerConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "alpha-beta".into());
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(128);
    let eps: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-2);

    let model = ModelSpec::named(&name, n, 1).unwrap();
    let x0 = sample_state(&model, &SamplerConfig::new(eps, 7), 0).unwrap();
    let modes = mode_energies(&x0).unwrap();
    let harmonic: f64 = modes.iter().sum();
    println!("{name}, N = {n}: eps = {:.6e}, harmonic share {:.4}", specific_energy(&model, &x0).unwrap(), harmonic / (eps * n as f64));

    let e0 = total_energy(&model, &x0).unwrap();
    for dt in [0.2, 0.1, 0.05] {
        let mut x = x0.clone();
        let mut worst: f64 = 0.0;
        integrate(&model, &mut x, None, &IntegratorConfig::yoshida(dt), 1000.0, 10, |_, s, _| {
            worst = worst.max((total_energy(&model, s).unwrap() / e0 - 1.0).abs());
        })
        .unwrap();
        println!("dt = {dt:<5} max relative energy error over t = 1000: {worst:.3e}");
    }
}
