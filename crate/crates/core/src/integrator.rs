//! Symplectic leapfrog and its fourth-order triple-jump composition, with the
//! tangent vector advanced by the exact linearization of the discrete map.
//!
//! One leapfrog step of size `h` is kick(h/2) · drift(h) · kick(h/2). The
//! fourth-order scheme composes three of them with weights `w1, w0, w1`,
//! `w1 = 1/(2 − 2^{1/3})`, `w0 = 1 − 2 w1 < 0`. Every tangent kick uses the
//! linearized force at the configuration of that same kick, so the tangent
//! map is the Jacobian of the numerical map itself.
//!
//! The force at the end of a step is cached and reused by the first kick of
//! the next one. Kicks are never merged across step boundaries, so results do
//! not depend on how a run is chunked into calls.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, ChainState, TangentState};
use crate::model::{Boundary, Family, ModelSpec};

/// Any `|q_i|` or `|p_i|` above this aborts the run.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

/// Default step size, and the smaller one needed for `gamma-T` and
/// `pure-delta` at small specific energy.
pub const DEFAULT_DT: f64 = 0.1;
pub const FINE_DT: f64 = 0.05;

const BLOWUP_CHECK_EVERY: u64 = 64;

pub fn yoshida_weights() -> (f64, f64) {
    let w1 = 1.0 / (2.0 - 2f64.powf(1.0 / 3.0));
    (w1, 1.0 - 2.0 * w1)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("time step must be finite and positive, got {0}")]
    BadStep(f64),
    #[error("tangent vector {0} but integrator configured with with_tangent = {1}")]
    TangentMismatch(&'static str, bool),
    #[error("blow-up at step {step} (t = {time}): max |q|,|p| = {max_abs}")]
    BlowUp { step: u64, time: f64, max_abs: f64 },
    #[error("tangent vector became non-finite at step {step} (t = {time})")]
    TangentOverflow { step: u64, time: f64 },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Leapfrog2,
    Yoshida4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub with_tangent: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: DEFAULT_DT,
            scheme: Scheme::Yoshida4,
            with_tangent: false,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, scheme: Scheme, with_tangent: bool) -> Result<Self, IntegrationError> {
        let c = IntegratorConfig {
            dt,
            scheme,
            with_tangent,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn yoshida(dt: f64) -> Self {
        IntegratorConfig {
            dt,
            ..Default::default()
        }
    }

    pub fn tangent(mut self, on: bool) -> Self {
        self.with_tangent = on;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        if self.dt.is_finite() && self.dt > 0.0 {
            Ok(())
        } else {
            Err(IntegrationError::BadStep(self.dt))
        }
    }
}

/// Per-bond `(V′, V″)` evaluation over a whole strain array, monomorphized
/// into the kernels. On entry `d1` holds the strains; on exit `(V′, V″)`.
trait Bonds {
    fn eval_all(&self, d1: &mut [f64], d2: &mut [f64]);
}

struct Harmonic;

impl Bonds for Harmonic {
    #[inline(always)]
    fn eval_all(&self, _d1: &mut [f64], d2: &mut [f64]) {
        d2.fill(1.0);
    }
}

struct UniformPoly([f64; 4]);

impl Bonds for UniformPoly {
    #[inline(always)]
    fn eval_all(&self, d1: &mut [f64], d2: &mut [f64]) {
        for (o1, o2) in d1.iter_mut().zip(d2.iter_mut()) {
            (*o1, *o2) = poly(self.0, *o1);
        }
    }
}

struct SitePoly<'a>(&'a [[f64; 4]]);

impl Bonds for SitePoly<'_> {
    #[inline(always)]
    fn eval_all(&self, d1: &mut [f64], d2: &mut [f64]) {
        for ((o1, o2), &c) in d1.iter_mut().zip(d2.iter_mut()).zip(self.0) {
            (*o1, *o2) = poly(c, *o1);
        }
    }
}

struct Toda {
    c: f64,
    inv_c: f64,
}

impl Bonds for Toda {
    #[inline(always)]
    fn eval_all(&self, d1: &mut [f64], d2: &mut [f64]) {
        let c = self.c;
        let mut widest = 0.0f64;
        for (r, x) in d1.iter().zip(d2.iter_mut()) {
            *x = c * r;
            widest = widest.max(x.abs());
        }
        if widest <= EXPM1_POLY_RANGE {
            for (o1, o2) in d1.iter_mut().zip(d2.iter_mut()) {
                let em1 = expm1_poly(*o2);
                *o1 = em1 * self.inv_c;
                *o2 = em1 + 1.0;
            }
        } else {
            for (o1, o2) in d1.iter_mut().zip(d2.iter_mut()) {
                let em1 = o2.exp_m1();
                *o1 = em1 * self.inv_c;
                *o2 = em1 + 1.0;
            }
        }
    }
}

/// `|x|` bound of [`expm1_poly`].
const EXPM1_POLY_RANGE: f64 = 0.5;

/// `e^x − 1` for `|x| ≤ 0.5` by its Taylor series through `x^16/16!`
/// (truncation below 2e-18 relative), in Estrin form so the loop vectorizes.
#[inline(always)]
fn expm1_poly(x: f64) -> f64 {
    const C: [f64; 16] = [
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362880.0,
        1.0 / 3628800.0,
        1.0 / 39916800.0,
        1.0 / 479001600.0,
        1.0 / 6227020800.0,
        1.0 / 87178291200.0,
        1.0 / 1307674368000.0,
        1.0 / 20922789888000.0,
    ];
    let x2 = x * x;
    let x4 = x2 * x2;
    let x8 = x4 * x4;
    let p = |k: usize| C[k] + C[k + 1] * x;
    let q0 = p(0) + p(2) * x2;
    let q1 = p(4) + p(6) * x2;
    let q2 = p(8) + p(10) * x2;
    let q3 = p(12) + p(14) * x2;
    let s = (q0 + q1 * x4) + (q2 + q3 * x4) * x8;
    x * s
}

#[inline(always)]
fn poly([a, b, g, d]: [f64; 4], r: f64) -> (f64, f64) {
    let d1 = r * (1.0 + r * (a + r * (b + r * (g + r * d))));
    let d2 = 1.0 + r * (2.0 * a + r * (3.0 * b + r * (4.0 * g + r * (5.0 * d))));
    (d1, d2)
}

/// Reusable stepping engine; owns the per-bond scratch buffers.
#[derive(Debug, Clone)]
pub struct Integrator {
    config: IntegratorConfig,
    d1: Vec<f64>,
    d2: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
}

/// Position of a sub-step sequence: kick weights `a` (one more than drifts)
/// and drift weights `b`, both multiplying `dt`.
struct Sequence {
    kicks: Vec<f64>,
    drifts: Vec<f64>,
}

impl Sequence {
    fn new(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Leapfrog2 => Sequence {
                kicks: vec![0.5, 0.5],
                drifts: vec![1.0],
            },
            Scheme::Yoshida4 => {
                let (w1, w0) = yoshida_weights();
                Sequence {
                    kicks: vec![0.5 * w1, 0.5 * (w1 + w0), 0.5 * (w0 + w1), 0.5 * w1],
                    drifts: vec![w1, w0, w1],
                }
            }
        }
    }
}

impl Integrator {
    pub fn new(config: IntegratorConfig) -> Result<Self, IntegrationError> {
        config.validate()?;
        Ok(Integrator {
            config,
            d1: Vec::new(),
            d2: Vec::new(),
            coeffs: Vec::new(),
        })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    /// Advances `n_steps` steps of size `dt`. `first_step` only labels errors.
    pub fn advance(
        &mut self,
        model: &ModelSpec,
        state: &mut ChainState,
        tangent: Option<&mut TangentState>,
        n_steps: u64,
        first_step: u64,
    ) -> Result<(), IntegrationError> {
        self.run(model, state, tangent, n_steps, first_step, self.config.dt)
    }

    /// One step of size `−dt`; undoes [`Integrator::advance`] by one step up
    /// to round-off.
    pub fn step_backward(
        &mut self,
        model: &ModelSpec,
        state: &mut ChainState,
        tangent: Option<&mut TangentState>,
    ) -> Result<(), IntegrationError> {
        self.run(model, state, tangent, 1, 0, -self.config.dt)
    }

    fn run(
        &mut self,
        model: &ModelSpec,
        state: &mut ChainState,
        mut tangent: Option<&mut TangentState>,
        n_steps: u64,
        first_step: u64,
        dt: f64,
    ) -> Result<(), IntegrationError> {
        state.check(model)?;
        match (&tangent, self.config.with_tangent) {
            (Some(_), false) => return Err(IntegrationError::TangentMismatch("given", false)),
            (None, true) => return Err(IntegrationError::TangentMismatch("missing", true)),
            _ => {}
        }
        if let Some(t) = &tangent {
            if t.dq.len() != state.q.len() || t.dp.len() != state.q.len() {
                return Err(ChainError::Shape {
                    expected: state.q.len(),
                    got: t.dq.len(),
                }
                .into());
            }
        }
        if n_steps == 0 {
            return Ok(());
        }
        let n = model.n_springs();
        self.d1.resize(n, 0.0);
        self.d2.resize(n, 0.0);
        let seq = Sequence::new(self.config.scheme);
        let mut done = 0;
        while done < n_steps {
            let chunk = (n_steps - done).min(BLOWUP_CHECK_EVERY);
            let tan = tangent.as_deref_mut();
            match model.family() {
                Family::Linear => self.chunk(&Harmonic, model, state, tan, &seq, dt, chunk),
                Family::Toda => {
                    let c = model.toda_c();
                    self.chunk(&Toda { c, inv_c: 1.0 / c }, model, state, tan, &seq, dt, chunk)
                }
                Family::Polynomial => {
                    let site0 = [model.alpha()[0], model.beta()[0], model.gamma()[0], model.delta()[0]];
                    let uniform = (0..n).all(|i| {
                        [model.alpha()[i], model.beta()[i], model.gamma()[i], model.delta()[i]] == site0
                    });
                    if uniform {
                        self.chunk(&UniformPoly(site0), model, state, tan, &seq, dt, chunk)
                    } else {
                        let mut coeffs = std::mem::take(&mut self.coeffs);
                        coeffs.clear();
                        coeffs.extend((0..n).map(|i| {
                            [model.alpha()[i], model.beta()[i], model.gamma()[i], model.delta()[i]]
                        }));
                        self.chunk(&SitePoly(&coeffs), model, state, tan, &seq, dt, chunk);
                        self.coeffs = coeffs;
                    }
                }
            }
            done += chunk;
            let step = first_step + done;
            let max_abs = state.max_abs();
            if !(max_abs <= BLOWUP_THRESHOLD) {
                return Err(IntegrationError::BlowUp {
                    step,
                    time: step as f64 * self.config.dt,
                    max_abs,
                });
            }
            if let Some(t) = &tangent {
                if !t.is_finite() {
                    return Err(IntegrationError::TangentOverflow {
                        step,
                        time: step as f64 * self.config.dt,
                    });
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    #[inline(never)]
    fn chunk<B: Bonds>(
        &mut self,
        bonds: &B,
        model: &ModelSpec,
        state: &mut ChainState,
        mut tangent: Option<&mut TangentState>,
        seq: &Sequence,
        dt: f64,
        n_steps: u64,
    ) {
        let boundary = model.boundary();
        let (d1, d2) = (&mut self.d1[..], &mut self.d2[..]);
        evaluate(bonds, &state.q, boundary, d1, d2);
        for _ in 0..n_steps {
            for (k, &a) in seq.kicks.iter().enumerate() {
                kick(a * dt, d1, d2, &mut state.p, tangent.as_deref_mut(), boundary);
                if let Some(&b) = seq.drifts.get(k) {
                    let h = b * dt;
                    drift(h, &mut state.q, &state.p);
                    if let Some(t) = tangent.as_deref_mut() {
                        drift(h, &mut t.dq, &t.dp);
                    }
                    evaluate(bonds, &state.q, boundary, d1, d2);
                }
            }
        }
    }
}

#[inline(always)]
fn drift(h: f64, x: &mut [f64], v: &[f64]) {
    for (x, v) in x.iter_mut().zip(v) {
        *x += h * v;
    }
}

#[inline(always)]
fn evaluate<B: Bonds>(bonds: &B, q: &[f64], boundary: Boundary, d1: &mut [f64], d2: &mut [f64]) {
    crate::chain::fill_bond_strains(q, boundary, d1);
    bonds.eval_all(d1, d2);
}

/// `p_j += h (V′_{j+1} − V′_j)`, and the linearized kick on the tangent.
#[inline(always)]
fn kick(
    h: f64,
    d1: &[f64],
    d2: &[f64],
    p: &mut [f64],
    tangent: Option<&mut TangentState>,
    boundary: Boundary,
) {
    let m = p.len();
    // bond j joins particles j − 1 and j; particle j feels bonds j and j + 1
    let (last_d1, last_d2) = match boundary {
        Boundary::FixedEnds => (d1[m], d2[m]),
        Boundary::Periodic => (d1[0], d2[0]),
    };
    for ((pj, &right), &left) in p[..m - 1].iter_mut().zip(&d1[1..m]).zip(&d1[..m - 1]) {
        *pj += h * (right - left);
    }
    p[m - 1] += h * (last_d1 - d1[m - 1]);

    if let Some(t) = tangent {
        let (dq, dp) = (&t.dq[..], &mut t.dp[..]);
        let (wrap_left, wrap_right) = match boundary {
            Boundary::FixedEnds => (0.0, 0.0),
            Boundary::Periodic => (dq[m - 1], dq[0]),
        };
        if m == 1 {
            dp[0] += h * (last_d2 * (wrap_right - dq[0]) - d2[0] * (dq[0] - wrap_left));
            return;
        }
        dp[0] += h * (d2[1] * (dq[1] - dq[0]) - d2[0] * (dq[0] - wrap_left));
        let inner = dp[1..m - 1]
            .iter_mut()
            .zip(&dq[2..])
            .zip(&dq[1..m - 1])
            .zip(&dq[..m - 2])
            .zip(&d2[2..m])
            .zip(&d2[1..m - 1]);
        for (((((dpj, &right), &mid), &left), &k_right), &k_left) in inner {
            *dpj += h * (k_right * (right - mid) - k_left * (mid - left));
        }
        dp[m - 1] += h * (last_d2 * (wrap_right - dq[m - 1]) - d2[m - 1] * (dq[m - 1] - dq[m - 2]));
    }
}

/// Functional single step: returns the advanced state and tangent.
pub fn step(
    model: &ModelSpec,
    state: &ChainState,
    tangent: Option<&TangentState>,
    config: &IntegratorConfig,
) -> Result<(ChainState, Option<TangentState>), IntegrationError> {
    let mut s = state.clone();
    let mut t = tangent.cloned();
    Integrator::new(*config)?.advance(model, &mut s, t.as_mut(), 1, 0)?;
    Ok((s, t))
}

/// Outcome of [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration {
    pub steps: u64,
    pub t_end: f64,
    /// `true` when the requested end time was not a whole number of steps
    /// and was rounded down.
    pub rounded: bool,
}

/// Number of whole steps in `t_end`; returns `(steps, rounded_down)`.
pub fn steps_for(t_end: f64, dt: f64) -> (u64, bool) {
    let ratio = t_end / dt;
    let k = (ratio * (1.0 + 1e-12)).floor().max(0.0);
    (k as u64, (ratio - k).abs() > 1e-9 * ratio.max(1.0))
}

/// Integrates to `t_end` (rounded down to a whole number of steps), calling
/// `observer(step, state, tangent)` after every `observe_every` steps and at
/// the final step. The observer may mutate the tangent (e.g. renormalize).
pub fn integrate<F>(
    model: &ModelSpec,
    state: &mut ChainState,
    mut tangent: Option<&mut TangentState>,
    config: &IntegratorConfig,
    t_end: f64,
    observe_every: u64,
    mut observer: F,
) -> Result<Integration, IntegrationError>
where
    F: FnMut(u64, &ChainState, Option<&mut TangentState>),
{
    let (steps, rounded) = steps_for(t_end, config.dt);
    let every = observe_every.max(1);
    let mut integ = Integrator::new(*config)?;
    let mut done = 0;
    while done < steps {
        let chunk = every.min(steps - done);
        integ.advance(model, state, tangent.as_deref_mut(), chunk, done)?;
        done += chunk;
        observer(done, state, tangent.as_deref_mut());
    }
    Ok(Integration {
        steps,
        t_end: steps as f64 * config.dt,
        rounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{force, hessian_action, total_energy};
    use crate::model::Preset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(model: &ModelSpec, amp: f64, seed: u64) -> ChainState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = model.n_particles();
        let q = (0..n).map(|_| amp * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let p = (0..n).map(|_| amp * (2.0 * rng.random::<f64>() - 1.0)).collect();
        ChainState::new(model, q, p).unwrap()
    }

    fn models(n: usize) -> Vec<ModelSpec> {
        let mut v: Vec<ModelSpec> = Preset::ALL
            .iter()
            .map(|&p| ModelSpec::preset(p, n, 1).unwrap())
            .collect();
        v.push(ModelSpec::preset(Preset::Toda, n, 0).unwrap().with_boundary(Boundary::Periodic));
        v.push(ModelSpec::preset(Preset::VarAlphaC, n, 2).unwrap().with_boundary(Boundary::Periodic));
        v
    }

    /// Plain, unfused KDK step built from the reference force and Hessian action.
    fn reference_leapfrog(model: &ModelSpec, s: &mut ChainState, t: &mut TangentState, h: f64) {
        let kick = |s: &mut ChainState, t: &mut TangentState, a: f64| {
            let f = force(model, s).unwrap();
            let df = hessian_action(model, s, &t.dq).unwrap();
            for j in 0..f.len() {
                s.p[j] += a * f[j];
                t.dp[j] += a * df[j];
            }
        };
        kick(s, t, h / 2.0);
        for j in 0..s.q.len() {
            s.q[j] += h * s.p[j];
            t.dq[j] += h * t.dp[j];
        }
        kick(s, t, h / 2.0);
    }

    #[test]
    fn fused_kernel_matches_reference_composition() {
        let (w1, w0) = yoshida_weights();
        for m in models(11) {
            let s0 = random_state(&m, 0.3, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let t0 = TangentState::random_unit(m.n_particles(), &mut rng);
            let (s1, t1) = step(&m, &s0, Some(&t0), &IntegratorConfig::yoshida(0.1).tangent(true)).unwrap();
            let t1 = t1.unwrap();
            let (mut s2, mut t2) = (s0.clone(), t0.clone());
            for w in [w1, w0, w1] {
                reference_leapfrog(&m, &mut s2, &mut t2, w * 0.1);
            }
            for j in 0..s1.q.len() {
                assert!((s1.q[j] - s2.q[j]).abs() < 1e-14, "{}", m.label());
                assert!((s1.p[j] - s2.p[j]).abs() < 1e-14, "{}", m.label());
                assert!((t1.dq[j] - t2.dq[j]).abs() < 1e-13, "{}", m.label());
                assert!((t1.dp[j] - t2.dp[j]).abs() < 1e-13, "{}", m.label());
            }
        }
    }

    #[test]
    fn tiny_step_is_consistent() {
        let m = ModelSpec::preset(Preset::AlphaBeta, 16, 0).unwrap();
        let s0 = random_state(&m, 0.2, 9);
        let (s1, _) = step(&m, &s0, None, &IntegratorConfig::yoshida(1e-8)).unwrap();
        let pmax = s0.p.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for j in 0..s0.q.len() {
            assert!((s1.q[j] - s0.q[j]).abs() < 1e-7 * pmax);
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let m = ModelSpec::preset(Preset::PureBeta, 8, 0).unwrap();
        let mut s = random_state(&m, 0.2, 1);
        let s0 = s.clone();
        let out = integrate(&m, &mut s, None, &IntegratorConfig::default(), 0.0, 10, |_, _, _| {}).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(s, s0);
    }

    #[test]
    fn integrate_rounds_down_and_reports() {
        let m = ModelSpec::linear(4).unwrap();
        let mut s = random_state(&m, 0.2, 1);
        let out = integrate(&m, &mut s, None, &IntegratorConfig::yoshida(0.1), 1.05, 3, |_, _, _| {}).unwrap();
        assert_eq!(out.steps, 10);
        assert!(out.rounded);
        let out = integrate(&m, &mut s, None, &IntegratorConfig::yoshida(0.1), 1.0, 3, |_, _, _| {}).unwrap();
        assert_eq!(out.steps, 10);
        assert!(!out.rounded);
    }

    #[test]
    fn chunking_does_not_change_bits() {
        let m = ModelSpec::preset(Preset::VarAlphaA, 32, 4).unwrap();
        let s0 = random_state(&m, 0.1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t0 = TangentState::random_unit(m.n_particles(), &mut rng);
        let cfg = IntegratorConfig::yoshida(0.1).tangent(true);
        let (mut a, mut ta) = (s0.clone(), t0.clone());
        Integrator::new(cfg).unwrap().advance(&m, &mut a, Some(&mut ta), 1000, 0).unwrap();
        let (mut b, mut tb) = (s0, t0);
        let mut integ = Integrator::new(cfg).unwrap();
        for k in 0..10 {
            integ.advance(&m, &mut b, Some(&mut tb), 100, k * 100).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn leapfrog_one_step_matrix_is_symplectic() {
        // two-particle linear chain (N = 3) for a full 2×2 block check,
        // and the N = 2 single oscillator
        for n in [2usize, 3] {
            let m = ModelSpec::linear(n).unwrap();
            let dim = m.n_particles();
            let cfg = IntegratorConfig::new(0.3, Scheme::Leapfrog2, false).unwrap();
            // columns of the one-step matrix on (q, p)
            let mut cols = Vec::new();
            for k in 0..2 * dim {
                let mut x = vec![0.0; 2 * dim];
                x[k] = 1.0;
                let s = ChainState::new(&m, x[..dim].to_vec(), x[dim..].to_vec()).unwrap();
                let (s1, _) = step(&m, &s, None, &cfg).unwrap();
                cols.push([s1.q, s1.p].concat());
            }
            let mat: Vec<Vec<f64>> = (0..2 * dim).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
            assert!((determinant(mat) - 1.0).abs() < 1e-12);
        }
    }

    fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
        let n = a.len();
        let mut det = 1.0;
        for c in 0..n {
            let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            if piv != c {
                a.swap(piv, c);
                det = -det;
            }
            det *= a[c][c];
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        det
    }

    #[test]
    fn time_reversible() {
        for m in models(16) {
            let s0 = random_state(&m, 0.3, 6);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let t0 = TangentState::random_unit(m.n_particles(), &mut rng);
            let cfg = IntegratorConfig::yoshida(0.1).tangent(true);
            let mut integ = Integrator::new(cfg).unwrap();
            let (mut s, mut t) = (s0.clone(), t0.clone());
            integ.advance(&m, &mut s, Some(&mut t), 1, 0).unwrap();
            integ.step_backward(&m, &mut s, Some(&mut t)).unwrap();
            for j in 0..s.q.len() {
                assert!((s.q[j] - s0.q[j]).abs() < 1e-12, "{}", m.label());
                assert!((s.p[j] - s0.p[j]).abs() < 1e-12, "{}", m.label());
                assert!((t.dq[j] - t0.dq[j]).abs() < 1e-12, "{}", m.label());
            }
        }
    }

    fn max_energy_error_over(m: &ModelSpec, s0: &ChainState, dt: f64, t_end: f64) -> f64 {
        let e0 = total_energy(m, s0).unwrap();
        let mut s = s0.clone();
        let mut worst = 0.0f64;
        integrate(m, &mut s, None, &IntegratorConfig::yoshida(dt), t_end, 1, |_, st, _| {
            worst = worst.max((total_energy(m, st).unwrap() - e0).abs());
        })
        .unwrap();
        worst / e0
    }

    #[test]
    fn fourth_order_energy_error_on_single_oscillator() {
        // N = 2 linear chain: one particle, frequency √2, period π√2.
        let m = ModelSpec::linear(2).unwrap();
        let s0 = ChainState::new(&m, vec![0.3], vec![0.1]).unwrap();
        let period = std::f64::consts::PI * 2f64.sqrt();
        // step counts chosen so each dt divides the period exactly
        let mut prev = None;
        for k in [16u32, 32, 64] {
            let dt = period / f64::from(k);
            let err = max_energy_error_over(&m, &s0, dt, period);
            if let Some(p) = prev {
                let ratio: f64 = p / err;
                assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
            }
            prev = Some(err);
        }
    }

    #[test]
    fn tangent_matches_shadow_trajectory() {
        let m = ModelSpec::preset(Preset::AlphaBeta, 16, 0).unwrap();
        let s0 = random_state(&m, 0.1, 7);
        let h = 1e-8;
        let mut shadow = s0.clone();
        shadow.q[3] += h;
        let mut t = TangentState::zeros(m.n_particles());
        t.dq[3] = 1.0;
        let cfg = IntegratorConfig::yoshida(0.1);
        let steps = 1000; // t = 100
        let mut a = s0.clone();
        Integrator::new(cfg.tangent(true)).unwrap().advance(&m, &mut a, Some(&mut t), steps, 0).unwrap();
        Integrator::new(cfg).unwrap().advance(&m, &mut shadow, None, steps, 0).unwrap();
        let diff: Vec<f64> = shadow.q.iter().zip(&a.q).chain(shadow.p.iter().zip(&a.p)).map(|(x, y)| (x - y) / h).collect();
        let tan: Vec<f64> = t.dq.iter().chain(&t.dp).copied().collect();
        let num: f64 = diff.iter().zip(&tan).map(|(d, t)| (d - t).powi(2)).sum::<f64>().sqrt();
        let den: f64 = tan.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(num / den < 1e-4, "relative {}", num / den);
    }

    #[test]
    fn blow_up_is_detected() {
        // γ < 0 quintic without stabilizing sextic would be rejected; use a
        // Toda chain pushed into overflow instead.
        let m = ModelSpec::preset(Preset::Toda, 4, 0).unwrap();
        let mut s = ChainState::new(&m, vec![0.0, 0.0, 0.0], vec![0.0, 200.0, 0.0]).unwrap();
        let err = Integrator::new(IntegratorConfig::yoshida(0.4))
            .unwrap()
            .advance(&m, &mut s, None, 10_000, 0)
            .unwrap_err();
        assert!(matches!(err, IntegrationError::BlowUp { .. }), "{err}");
    }

    #[test]
    fn tangent_flag_is_enforced() {
        let m = ModelSpec::linear(4).unwrap();
        let s = ChainState::rest(&m);
        let t = TangentState::zeros(3);
        assert!(step(&m, &s, Some(&t), &IntegratorConfig::default()).is_err());
        assert!(step(&m, &s, None, &IntegratorConfig::default().tangent(true)).is_err());
        assert!(IntegratorConfig::new(0.0, Scheme::Yoshida4, false).is_err());
    }

    #[test]
    fn polynomial_expm1_matches_libm() {
        for k in -5000..=5000 {
            let x = EXPM1_POLY_RANGE * k as f64 / 5000.0;
            let (a, b) = (expm1_poly(x), x.exp_m1());
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs(), "x = {x}: {a} vs {b}");
        }
        let mut d1 = vec![0.01, 0.4, -0.3];
        let mut d2 = vec![0.0; 3];
        Toda { c: -2.0, inv_c: -0.5 }.eval_all(&mut d1, &mut d2);
        assert!((d2[1] - (-0.8f64).exp()).abs() < 1e-15);
    }
}
