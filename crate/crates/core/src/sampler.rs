//! Random initial data on a constant-energy surface.
//!
//! Each normal mode of the fixed-end chain gets independent Gaussian
//! `(P_k, Q_k)` with the same expected harmonic energy; the whole state is
//! then scaled by one factor `λ` so that the full nonlinear energy hits
//! `N·ε`. The generator is ChaCha20 keyed by the seed, with the sample index
//! as the stream number, so any sample can be reproduced on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{kinetic_energy, total_energy, ChainError, ChainState};
use crate::model::{Boundary, ModelSpec};

/// Mixed into the seed so sampler streams never coincide with the site
/// pattern stream of the same seed.
const SAMPLER_SALT: u64 = 0x5a3e_17c0_9b42_d861;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error("mode sampling needs fixed ends")]
    Boundary,
    #[error("cannot rescale to E = {target}: no bracket up to λ = {lambda_max}")]
    Rescale { target: f64, lambda_max: f64 },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub eps: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub rescale_tol: f64,
}

impl SamplerConfig {
    pub fn new(eps: f64, seed: u64) -> Self {
        SamplerConfig {
            eps,
            n_samples: 24,
            seed,
            rescale_tol: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(SampleError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.n_samples == 0 {
            return Err(SampleError::Config("n_samples must be at least 1".into()));
        }
        if !(self.rescale_tol > 0.0 && self.rescale_tol < 1e-3) {
            return Err(SampleError::Config(format!("bad rescale_tol {}", self.rescale_tol)));
        }
        Ok(())
    }
}

/// `ω_k = 2 sin(kπ/2N)` for `k = 1..N−1`.
pub fn mode_frequencies(n_springs: usize) -> Vec<f64> {
    let n = n_springs as f64;
    (1..n_springs)
        .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / (2.0 * n)).sin())
        .collect()
}

/// Orthonormal sine transform `X_k = √(2/N) Σ_j x_j sin(πjk/N)` over the
/// `N − 1` moving particles. It is its own inverse.
pub fn mode_transform(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let n = m + 1;
    let table: Vec<f64> = (0..2 * n)
        .map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin())
        .collect();
    let norm = (2.0 / n as f64).sqrt();
    (1..=m)
        .map(|k| {
            let mut acc = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                acc += xj * table[((j + 1) * k) % (2 * n)];
            }
            norm * acc
        })
        .collect()
}

pub fn inverse_mode_transform(modes: &[f64]) -> Vec<f64> {
    mode_transform(modes)
}

/// Harmonic energy `(P_k² + ω_k² Q_k²)/2` of each mode.
pub fn mode_energies(state: &ChainState) -> Result<Vec<f64>, SampleError> {
    if state.boundary() != Boundary::FixedEnds {
        return Err(SampleError::Boundary);
    }
    let qk = mode_transform(&state.q);
    let pk = mode_transform(&state.p);
    let w = mode_frequencies(state.n_springs());
    Ok(qk
        .iter()
        .zip(&pk)
        .zip(&w)
        .map(|((q, p), w)| 0.5 * (p * p + w * w * q * q))
        .collect())
}

/// Draws sample `index` of the ensemble described by `config`.
pub fn sample_state(
    model: &ModelSpec,
    config: &SamplerConfig,
    index: u64,
) -> Result<ChainState, SampleError> {
    config.validate()?;
    if model.boundary() != Boundary::FixedEnds {
        return Err(SampleError::Boundary);
    }
    let n = model.n_springs();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed ^ SAMPLER_SALT);
    rng.set_stream(index);
    let s = (config.eps * n as f64 / (n - 1) as f64).sqrt();
    let omega = mode_frequencies(n);
    let mut qk = Vec::with_capacity(n - 1);
    let mut pk = Vec::with_capacity(n - 1);
    for w in &omega {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        pk.push(s * a);
        qk.push(s * b / w);
    }
    let raw = ChainState::new(model, inverse_mode_transform(&qk), inverse_mode_transform(&pk))?;
    rescale_to_energy(model, &raw, config.eps * n as f64, config.rescale_tol)
}

/// Finds `λ` with `H(λ·state) = target` by bisection, starting from
/// `[0, 2]` and doubling the upper end while it stays below the target.
pub fn rescale_to_energy(
    model: &ModelSpec,
    state: &ChainState,
    target: f64,
    rel_tol: f64,
) -> Result<ChainState, SampleError> {
    let energy = |lambda: f64| -> f64 {
        total_energy(model, &state.scaled(lambda)).unwrap_or(f64::INFINITY)
    };
    let fail = |lambda_max| SampleError::Rescale { target, lambda_max };
    if kinetic_energy(state) == 0.0 && state.q.iter().all(|&q| q == 0.0) {
        return Err(fail(0.0));
    }
    let mut hi = 2.0;
    while energy(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(fail(hi));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let e = energy(mid);
        if (e - target).abs() <= 0.5 * rel_tol * target {
            return Ok(state.scaled(mid));
        }
        if e < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let out = state.scaled(0.5 * (lo + hi));
    let e = total_energy(model, &out)?;
    if (e - target).abs() <= rel_tol * target {
        Ok(out)
    } else {
        Err(fail(hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::specific_energy;
    use crate::integrator::{Integrator, IntegratorConfig};
    use crate::model::Preset;

    #[test]
    fn transform_round_trip_and_parseval() {
        for m in [1usize, 2, 7, 31, 64] {
            for j in 0..m {
                let mut x = vec![0.0; m];
                x[j] = 1.0;
                let back = inverse_mode_transform(&mode_transform(&x));
                for (a, b) in back.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
            let x: Vec<f64> = (0..m).map(|i| ((i * 7 + 3) as f64).sin()).collect();
            let n2: f64 = x.iter().map(|v| v * v).sum();
            let k2: f64 = mode_transform(&x).iter().map(|v| v * v).sum();
            assert!((n2 - k2).abs() < 1e-12 * n2.max(1.0));
        }
    }

    #[test]
    fn harmonic_energy_is_sum_of_mode_energies() {
        let model = ModelSpec::linear(17).unwrap();
        let cfg = SamplerConfig::new(0.3, 11);
        let s = sample_state(&model, &cfg, 0).unwrap();
        let e: f64 = mode_energies(&s).unwrap().iter().sum();
        assert!((e - total_energy(&model, &s).unwrap()).abs() < 1e-12 * e);
    }

    #[test]
    fn single_mode_stays_single_under_linear_flow() {
        let n = 16;
        let model = ModelSpec::linear(n).unwrap();
        let k = 3;
        let mut qk = vec![0.0; n - 1];
        qk[k] = 0.7;
        let mut pk = vec![0.0; n - 1];
        pk[k] = -0.2;
        let mut s = ChainState::new(&model, inverse_mode_transform(&qk), inverse_mode_transform(&pk)).unwrap();
        let mut integ = Integrator::new(IntegratorConfig::yoshida(0.1)).unwrap();
        for _ in 0..50 {
            integ.advance(&model, &mut s, None, 200, 0).unwrap();
            let e = mode_energies(&s).unwrap();
            for (j, ej) in e.iter().enumerate() {
                if j != k {
                    assert!(*ej < 1e-20, "mode {j}: {ej}");
                }
            }
        }
    }

    #[test]
    fn energy_is_exact_for_every_preset() {
        for preset in Preset::ALL {
            let model = ModelSpec::preset(preset, 32, 5).unwrap();
            for eps in [1e-5, 1e-3, 2e-2, 0.5] {
                let cfg = SamplerConfig::new(eps, 99);
                for idx in 0..4 {
                    let s = sample_state(&model, &cfg, idx).unwrap();
                    let got = specific_energy(&model, &s).unwrap();
                    assert!((got - eps).abs() <= cfg.rescale_tol * eps, "{preset} {eps}: {got}");
                }
            }
        }
    }

    #[test]
    fn deterministic_in_seed_and_index() {
        let model = ModelSpec::preset(Preset::AlphaBeta, 20, 0).unwrap();
        let cfg = SamplerConfig::new(1e-3, 42);
        let a = sample_state(&model, &cfg, 7).unwrap();
        let b = sample_state(&model, &cfg, 7).unwrap();
        let c = sample_state(&model, &cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    /// Mean energy per mode and correlation of normalized mode energies over
    /// many samples of the harmonic chain.
    #[test]
    fn equipartition_and_isotropy() {
        let n = 8;
        let m = n - 1;
        let eps = 0.01;
        let model = ModelSpec::linear(n).unwrap();
        let cfg = SamplerConfig::new(eps, 2024);
        let samples = 10_000;
        let mut energies = Vec::with_capacity(samples);
        for i in 0..samples {
            let s = sample_state(&model, &cfg, i as u64).unwrap();
            energies.push(mode_energies(&s).unwrap());
        }
        let expected = eps * n as f64 / m as f64;
        let mean: Vec<f64> = (0..m)
            .map(|k| energies.iter().map(|e| e[k]).sum::<f64>() / samples as f64)
            .collect();
        for k in 0..m {
            let var = energies.iter().map(|e| (e[k] - mean[k]).powi(2)).sum::<f64>() / (samples - 1) as f64;
            let se = (var / samples as f64).sqrt();
            assert!((mean[k] - expected).abs() < 3.0 * se, "mode {k}: {} vs {expected} (se {se})", mean[k]);
        }
        // The sum is pinned, so each pair has correlation −1/(m−1) exactly
        // by symmetry; the deviation from that must be noise.
        let z: Vec<Vec<f64>> = energies.iter().map(|e| e.iter().map(|v| v / expected).collect()).collect();
        let sd: Vec<f64> = (0..m)
            .map(|k| (z.iter().map(|e| (e[k] - 1.0).powi(2)).sum::<f64>() / samples as f64).sqrt())
            .collect();
        let target = -1.0 / (m as f64 - 1.0);
        for a in 0..m {
            for b in a + 1..m {
                let cov = z.iter().map(|e| (e[a] - 1.0) * (e[b] - 1.0)).sum::<f64>() / samples as f64;
                let corr = cov / (sd[a] * sd[b]);
                assert!((corr - target).abs() < 4.0 / (samples as f64).sqrt(), "({a},{b}): {corr}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = ModelSpec::linear(8).unwrap();
        assert!(sample_state(&model, &SamplerConfig::new(-1.0, 0), 0).is_err());
        let periodic = ModelSpec::linear(8).unwrap().with_boundary(Boundary::Periodic);
        assert_eq!(sample_state(&periodic, &SamplerConfig::new(0.1, 0), 0), Err(SampleError::Boundary));
        let rest = ChainState::rest(&model);
        assert!(rescale_to_energy(&model, &rest, 1.0, 1e-12).is_err());
    }
}
