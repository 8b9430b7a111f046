//! A small sweep from a TOML configuration, stopped part way by a step
//! budget and finished from its checkpoints.
//!
//! ```text
//! cargo run --release --example sweep_resume -- /tmp/fpu-sweep
//! ```

use std::path::PathBuf;

use fpu_lyapunov::harness::{execute_runs, ExperimentConfig, SweepOptions};

const CONFIG: &str = r#"
model = "alpha-beta"
N = [16, 32]
eps = [0.02, 0.05]
t_max = 5000.0
ensemble = 4
seed = 11
"#;

fn main() {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("fpu-sweep-example"), PathBuf::from);
    let cfg = ExperimentConfig::from_toml_str(CONFIG).unwrap();
    let specs = cfg.plan().unwrap();
    let mut opts = SweepOptions {
        step_budget: Some(60_000),
        slice_steps: 2_000,
        ..SweepOptions::from_config(&cfg)
    };
    let mut pass = 1;
    loop {
        let report = execute_runs(&specs, &out, &opts).unwrap();
        if !report.interrupted() {
            for r in report.records() {
                println!("{} N={} eps={:e}: chi = {:.4e} flags {:?}", r.model, r.n, r.eps, r.level(), r.flags);
            }
            break;
        }
        println!("pass {pass}: budget spent, resuming from checkpoints");
        opts.resume = true;
        pass += 1;
    }
    println!("results under {}", out.display());
}
