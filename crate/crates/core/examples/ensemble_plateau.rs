//! Ensemble average `χ̄(t)` and the final-decade plateau test, for a chaotic
//! chain and for the integrable Toda lattice at the same energy.
//!
//! ```text
//! cargo run --release --example ensemble_plateau
//! ```

use fpu_lyapunov::lyapunov::{ensemble_chi, BenettinConfig, EnsembleConfig};
use fpu_lyapunov::model::{ModelSpec, Preset};

fn main() {
    let n = 64;
    let eps = 2e-2;
    for preset in [Preset::AlphaBeta, Preset::Toda] {
        let model = ModelSpec::preset(preset, n, 1).unwrap();
        let cfg = EnsembleConfig::new(BenettinConfig::with_dt(0.05), 6, 1, 3e4);
        let r = ensemble_chi(&model, eps, &cfg).unwrap();
        println!(
            "{:<10} plateau found: {:<5}  window mean {:.4e} ± {:.1e}  final {:.4e}",
            preset.name(),
            r.plateau_found,
            r.plateau,
            r.err,
            r.final_chi()
        );
    }
}
