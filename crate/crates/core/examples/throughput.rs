//! Steps per second of the tangent-carrying fourth-order integrator.
//!
//! ```text
//! cargo run --release --example throughput -- 256
//! ```

use std::time::Instant;

use fpu_lyapunov::chain::{ChainState, TangentState};
use fpu_lyapunov::integrator::{Integrator, IntegratorConfig};
use fpu_lyapunov::model::{ModelSpec, Preset};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let steps = 200_000_000 / n as u64;
    for preset in [Preset::Linear, Preset::PureBeta, Preset::GammaT, Preset::VarAlphaA, Preset::Toda] {
        let model = ModelSpec::preset(preset, n, 1).unwrap();
        let mut state = ChainState::rest(&model);
        for (j, q) in state.q.iter_mut().enumerate() {
            *q = 0.01 * (j as f64).sin();
        }
        let mut tangent = TangentState::zeros(model.n_particles());
        tangent.dq[0] = 1.0;
        let mut integ = Integrator::new(IntegratorConfig::default().tangent(true)).unwrap();
        let start = Instant::now();
        integ.advance(&model, &mut state, Some(&mut tangent), steps, 0).unwrap();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{:<12} N = {n}: {:.3} µs/step, {:.2} ns per bond-step",
            preset.name(),
            1e6 * secs / steps as f64,
            1e9 * secs / (steps as f64 * n as f64)
        );
    }
}
