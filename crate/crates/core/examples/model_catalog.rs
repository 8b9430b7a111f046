//! Every preset with its coefficients, its potential near the origin and
//! the small-`ε` row of the theory table that applies to it.
//!
//! ```text
//! cargo run --release --example model_catalog
//! ```

use fpu_lyapunov::model::{ModelSpec, Preset};
use fpu_lyapunov::theory::asymptotic_chi;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() {
    let n = 64;
    println!("{:<12} {:>8} {:>8} {:>8} {:>8}  {:>12}  small-eps row", "preset", "<alpha>", "<beta>", "<gamma>", "<delta>", "V(0.1)");
    for preset in Preset::ALL {
        let m = ModelSpec::preset(preset, n, 1).unwrap();
        let v = m.potential_value(0, 0.1).unwrap();
        let row = match asymptotic_chi(&m, 1e-3) {
            Ok(a) => format!("{:?}, chi = {:.3e} eps^{}", a.row, a.coefficient, a.exponent.unwrap_or(0)),
            Err(e) => e.to_string(),
        };
        println!(
            "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4}  {:>12.6e}  {row}",
            preset.name(),
            mean(m.alpha()),
            mean(m.beta()),
            mean(m.gamma()),
            mean(m.delta()),
            v
        );
    }
}
