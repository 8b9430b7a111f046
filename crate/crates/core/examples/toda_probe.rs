//! Integrator-error probe on a short Toda chain: the level reached by `χ̄`
//! against the step size, and its power law in `ε` at a coarse step.
//!
//! ```text
//! cargo run --release --example toda_probe
//! ```

use fpu_lyapunov::harness::{toda_check, SweepOptions, TodaCheckConfig};

fn main() {
    let cfg = TodaCheckConfig {
        n: 32,
        eps: 0.05,
        dt_list: vec![0.1, 0.2, 0.4],
        sweep_dt: 0.3,
        sweep_eps: vec![0.01, 0.02, 0.05],
        t_max: 1e4,
        ensemble: 3,
        seed: 1,
    };
    let out = std::env::temp_dir().join("fpu-toda-probe-example");
    let (_, report) = toda_check(&cfg, &out, &SweepOptions::default()).unwrap();
    let report = report.expect("no budget set, so every run finishes");
    for r in &report.dt_scan {
        println!("dt = {:<4} level {:.4e} (plateau found: {})", r.dt, r.level, r.plateau_found);
    }
    println!("increasing in dt: {}", report.increasing);
    if let Some(fit) = report.fit {
        println!("at dt = {}: chi ~ eps^{:.3}", cfg.sweep_dt, fit.a);
    }
}
