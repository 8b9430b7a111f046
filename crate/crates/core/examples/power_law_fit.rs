//! Plateaus over a range of `ε` and the fitted power law `χ = C ε^a`.
//!
//! ```text
//! cargo run --release --example power_law_fit
//! ```

use fpu_lyapunov::fit::{powerlaw_fit, EpsWindow, Point};
use fpu_lyapunov::lyapunov::{ensemble_chi, BenettinConfig, EnsembleConfig};
use fpu_lyapunov::model::{ModelSpec, Preset};

fn main() {
    let model = ModelSpec::preset(Preset::PureBeta, 32, 1).unwrap();
    let mut points = Vec::new();
    for eps in [0.1, 0.2, 0.4, 0.8] {
        let r = ensemble_chi(&model, eps, &EnsembleConfig::new(BenettinConfig::default(), 4, 1, 2e4)).unwrap();
        println!("eps = {eps:<4} chi = {:.4e} ± {:.1e} (plateau found: {})", r.plateau, r.err, r.plateau_found);
        points.push(Point::new(eps, r.plateau, r.err));
    }
    let fit = powerlaw_fit(&points, EpsWindow::ALL).unwrap();
    println!("chi = {:.3e} eps^{:.3} (± {:.3}), rms {:.3}", fit.c, fit.a, fit.a_stderr, fit.residual_rms);
}
