//! Conserved quantities of the periodic Toda chain from its Lax matrix.
//!
//! With `V(r) = (e^{cr} − 1 − cr)/c²` the Flaschka variables are
//! `b_i = (c/2) p_i` on the diagonal and `a_i = ½ e^{c r_{i+1}/2}` coupling
//! particles `i` and `i + 1 (mod N)`. The traces `tr L^k` are invariant;
//! `tr L² = (c²/2)(H + N/c²)`.

use thiserror::Error;

use crate::chain::{bond_strains, ChainError, ChainState};
use crate::model::{Boundary, ModelSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TodaError {
    #[error("Lax invariants need a Toda model, got {0}")]
    NotToda(String),
    #[error("Lax invariants are implemented for the periodic chain only")]
    Boundary,
    #[error("periodic Lax matrix needs at least 3 particles, got {0}")]
    TooShort(usize),
    #[error("need at least 3 invariants, asked for {0}")]
    TooFew(usize),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Diagonal `b` and cyclic off-diagonal `a` of the Lax matrix.
pub fn lax_matrix(model: &ModelSpec, state: &ChainState) -> Result<(Vec<f64>, Vec<f64>), TodaError> {
    if !model.is_toda() {
        return Err(TodaError::NotToda(model.label()));
    }
    if model.boundary() != Boundary::Periodic {
        return Err(TodaError::Boundary);
    }
    state.check(model)?;
    let n = state.n_particles();
    if n < 3 {
        return Err(TodaError::TooShort(n));
    }
    let c = model.toda_c();
    let r = bond_strains(state);
    let b = state.p.iter().map(|p| 0.5 * c * p).collect();
    let a = (0..n).map(|i| 0.5 * (0.5 * c * r[(i + 1) % n]).exp()).collect();
    Ok((b, a))
}

/// `tr L^k` for `k = 1..=k_max`.
pub fn toda_invariants(
    model: &ModelSpec,
    state: &ChainState,
    k_max: usize,
) -> Result<Vec<f64>, TodaError> {
    if k_max < 3 {
        return Err(TodaError::TooFew(k_max));
    }
    let (b, a) = lax_matrix(model, state)?;
    let n = b.len();
    let mut traces = vec![0.0; k_max];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for j in 0..n {
        v.fill(0.0);
        v[j] = 1.0;
        for t in traces.iter_mut() {
            for i in 0..n {
                let up = (i + 1) % n;
                let down = (i + n - 1) % n;
                w[i] = b[i] * v[i] + a[i] * v[up] + a[down] * v[down];
            }
            std::mem::swap(&mut v, &mut w);
            *t += v[j];
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::total_energy;
    use crate::integrator::{Integrator, IntegratorConfig};
    use crate::model::TODA_C;

    fn periodic_toda(n: usize) -> ModelSpec {
        ModelSpec::toda(TODA_C, n).unwrap().with_boundary(Boundary::Periodic)
    }

    fn wave(model: &ModelSpec, amp: f64) -> ChainState {
        let n = model.n_particles();
        let q = (0..n)
            .map(|i| amp * ((2.0 * std::f64::consts::PI * i as f64 / n as f64).sin() + 0.3 * (i as f64 * 1.7).cos()))
            .collect();
        let p = (0..n).map(|i| 0.05 + amp * (i as f64 * 0.9).sin()).collect();
        ChainState::new(model, q, p).unwrap()
    }

    fn binomial(n: u64, k: u64) -> f64 {
        (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
    }

    #[test]
    fn rest_state_counts_closed_walks() {
        for n in [3usize, 5, 8, 13] {
            let m = periodic_toda(n);
            let inv = toda_invariants(&m, &ChainState::rest(&m), 6).unwrap();
            for (idx, v) in inv.iter().enumerate() {
                let k = idx + 1;
                // L = A/2 with A the cycle adjacency; eigenvalues cos(2πj/N)
                let spectral: f64 = (0..n)
                    .map(|j| (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos().powi(k as i32))
                    .sum();
                assert!((v - spectral).abs() < 1e-12, "N={n} k={k}");
                if k < n {
                    let walks = if k % 2 == 0 { n as f64 * binomial(k as u64, k as u64 / 2) } else { 0.0 };
                    assert!((v - walks / 2f64.powi(k as i32)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn second_invariant_is_affine_in_energy() {
        let m = periodic_toda(12);
        let c = m.toda_c();
        for amp in [0.01, 0.1, 0.4] {
            let s = wave(&m, amp);
            let t2 = toda_invariants(&m, &s, 3).unwrap()[1];
            let h = total_energy(&m, &s).unwrap();
            let affine = 0.5 * c * c * (h + 12.0 / (c * c));
            assert!((t2 - affine).abs() < 1e-12 * affine);
        }
    }

    #[test]
    fn rejects_other_models() {
        let fixed = ModelSpec::toda(TODA_C, 8).unwrap();
        assert_eq!(toda_invariants(&fixed, &ChainState::rest(&fixed), 3), Err(TodaError::Boundary));
        let lin = ModelSpec::linear(8).unwrap().with_boundary(Boundary::Periodic);
        assert!(matches!(toda_invariants(&lin, &ChainState::rest(&lin), 3), Err(TodaError::NotToda(_))));
        let m = periodic_toda(8);
        assert_eq!(toda_invariants(&m, &ChainState::rest(&m), 2), Err(TodaError::TooFew(2)));
    }

    fn max_drift(model: &ModelSpec, s0: &ChainState, dt: f64, steps: u64, every: u64, k: usize) -> Vec<f64> {
        let i0 = toda_invariants(model, s0, k).unwrap();
        let mut s = s0.clone();
        let mut worst = vec![0.0f64; k];
        let mut integ = Integrator::new(IntegratorConfig::yoshida(dt)).unwrap();
        let mut done = 0;
        while done < steps {
            integ.advance(model, &mut s, None, every, done).unwrap();
            done += every;
            let i = toda_invariants(model, &s, k).unwrap();
            for (w, (a, b)) in worst.iter_mut().zip(i.iter().zip(&i0)) {
                *w = w.max((a - b).abs() / b.abs());
            }
        }
        worst
    }

    #[test]
    fn invariants_hold_along_long_trajectory() {
        let m = periodic_toda(8);
        let s0 = wave(&m, 0.05);
        let drift = max_drift(&m, &s0, 0.05, 1_000_000, 10_000, 4);
        for (k, d) in drift.iter().enumerate() {
            assert!(*d < 1e-6, "tr L^{} drifts by {d}", k + 1);
        }
    }

    #[test]
    fn invariant_error_is_fourth_order() {
        let m = periodic_toda(8);
        let s0 = wave(&m, 0.3);
        let t_end = 50.0;
        let errs: Vec<Vec<f64>> = [0.2, 0.1]
            .iter()
            .map(|&dt| max_drift(&m, &s0, dt, (t_end / dt) as u64, 5, 4))
            .collect();
        for k in 1..4 {
            let ratio = errs[0][k] / errs[1][k];
            assert!((8.0..=32.0).contains(&ratio), "tr L^{}: ratio {ratio}", k + 1);
        }
    }
}
