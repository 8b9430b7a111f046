//! Traces of powers of the Lax matrix along a periodic Toda trajectory.
//!
//! ```text
//! cargo run --release --example toda_invariants
//! ```

use fpu_lyapunov::chain::ChainState;
use fpu_lyapunov::integrator::{integrate, IntegratorConfig};
use fpu_lyapunov::model::{Boundary, ModelSpec, Preset};
use fpu_lyapunov::toda::toda_invariants;

fn main() {
    let n = 32;
    let model = ModelSpec::preset(Preset::Toda, n, 0).unwrap().with_boundary(Boundary::Periodic);
    let q = (0..n).map(|i| 0.3 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect();
    let p = (0..n).map(|i| 0.2 * (6.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect();
    let mut x = ChainState::new(&model, q, p).unwrap();
    let start = toda_invariants(&model, &x, 4).unwrap();
    println!("t = 0      tr L^k = {start:.12?}");
    let mut drift = vec![0.0f64; start.len()];
    integrate(&model, &mut x, None, &IntegratorConfig::yoshida(0.05), 5000.0, 1000, |_, s, _| {
        let now = toda_invariants(&model, s, 4).unwrap();
        for (d, (a, b)) in drift.iter_mut().zip(now.iter().zip(&start)) {
            *d = d.max((a - b).abs());
        }
    })
    .unwrap();
    let drift: Vec<String> = drift.iter().map(|d| format!("{d:.2e}")).collect();
    println!("t = 5000   max absolute drift per invariant = [{}]", drift.join(", "));
}
