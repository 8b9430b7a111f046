//! Curvature-fluctuation estimate of the Lyapunov exponent.
//!
//! The Laplacian `ΔV` of the configuration-space potential is treated as a
//! stochastic process with mean `N Ω₀`, variance `N σ²` and correlation time
//! `τ`; the exponent of the resulting stochastic oscillator is the positive
//! root of
//!
//! ```text
//! χ³ + Ω₀ χ = τ σ² / 4
//! ```
//!
//! written below in the closed (Cardano) form with `Λ`. Its small-`σ` limit
//! `χ ≈ τσ²/(4Ω₀)` becomes `σ²/8` at `Ω₀ = 2, τ = 1`.
//!
//! `Ω₀` and `σ²` come either from time averages along a trajectory or from
//! Monte Carlo over the fixed-sum Gaussian strain measure followed by the
//! canonical-to-microcanonical variance correction
//! `σ² = σ²_can − ε² (d⟨ΔV⟩_can/N / dε)²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{laplacian_from_strains, ChainError, ChainState};
use crate::integrator::{IntegrationError, Integrator, IntegratorConfig};
use crate::model::{Boundary, Family, ModelError, ModelSpec, Preset};

const MC_SALT: u64 = 0x3c1d_94e2_5f08_b7a6;
const MC_SHARDS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("theory not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsSource {
    TimeAverage,
    ConstrainedGaussian,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureStats {
    pub omega0: f64,
    pub sigma2: f64,
    pub tau: f64,
    pub source: StatsSource,
}

impl CurvatureStats {
    /// Uses `τ` from [`tau_combine`] of the two dimensional candidates.
    pub fn new(omega0: f64, sigma2: f64, source: StatsSource) -> Result<Self, TheoryError> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(TheoryError::Input(format!("omega0 must be positive, got {omega0}")));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(TheoryError::Input(format!("sigma2 must be non-negative, got {sigma2}")));
        }
        Ok(CurvatureStats {
            omega0,
            sigma2,
            tau: tau_combine(tau1(omega0), tau2(omega0, sigma2)),
            source,
        })
    }
}

pub fn tau1(omega0: f64) -> f64 {
    (2.0 / omega0).sqrt()
}

/// Infinite when `σ² = 0`.
pub fn tau2(omega0: f64, sigma2: f64) -> f64 {
    (omega0 / (2.0 * sigma2)).sqrt()
}

/// `τ = 1/(1/τ₁ + 1/τ₂)`.
pub fn tau_combine(tau1: f64, tau2: f64) -> f64 {
    1.0 / (1.0 / tau1 + 1.0 / tau2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    FullVanKampen,
    SmallEpsAsymptotic,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::FullVanKampen => "full-van-kampen",
            Regime::SmallEpsAsymptotic => "small-eps-asymptotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryEstimate {
    pub chi: f64,
    pub lambda: f64,
    pub regime: Regime,
}

/// Positive root of `χ³ + Ω₀χ = τσ²/4` via
/// `Λ = [x + √((4Ω₀/3)³ + x²)]^{1/3}`, `x = τσ²`, `χ = (Λ − 4Ω₀/(3Λ))/2`.
/// The difference is evaluated as `x / (u² + uv + v²)` with `u = Λ`,
/// `v = 4Ω₀/(3Λ)`, which is exact at `σ² = 0` and free of cancellation.
pub fn van_kampen_chi(stats: &CurvatureStats) -> TheoryEstimate {
    let x = stats.tau * stats.sigma2;
    let a = 4.0 * stats.omega0 / 3.0;
    let a3 = a * a * a;
    let s = (a3 + x * x).sqrt();
    let u = (x + s).cbrt();
    let v = (a3 / (x + s)).cbrt();
    TheoryEstimate {
        chi: x / (u * u + u * v + v * v),
        lambda: u,
        regime: Regime::FullVanKampen,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAverageStats {
    pub stats: CurvatureStats,
    pub samples: usize,
    /// Relative change of the running mean of `ΔV/N` over the second half.
    pub drift: f64,
    pub converged: bool,
}

/// Running-mean tolerance used by [`curvature_stats_timeavg`].
pub const TIMEAVG_TOL: f64 = 1e-3;

/// Time averages of `ΔV` sampled every `sample_every` steps along the
/// trajectory from `state` over `t_total`. The state is advanced in place.
pub fn curvature_stats_timeavg(
    model: &ModelSpec,
    state: &mut ChainState,
    config: &IntegratorConfig,
    t_total: f64,
    sample_every: u64,
) -> Result<TimeAverageStats, TheoryError> {
    let mut cfg = *config;
    cfg.with_tangent = false;
    let mut integ = Integrator::new(cfg)?;
    let (steps, _) = crate::integrator::steps_for(t_total, cfg.dt);
    let every = sample_every.max(1);
    let n = model.n_springs() as f64;
    let mut values = Vec::with_capacity((steps / every) as usize + 1);
    let mut r = vec![0.0; model.n_springs()];
    let mut done = 0;
    while done < steps {
        let chunk = every.min(steps - done);
        integ.advance(model, state, None, chunk, done)?;
        done += chunk;
        crate::chain::fill_bond_strains(&state.q, state.boundary(), &mut r);
        values.push(laplacian_from_strains(model, &r)?);
    }
    if values.len() < 4 {
        return Err(TheoryError::Input("too few samples for time averages".into()));
    }
    let (mean, var) = mean_var(&values);
    let (half, _) = mean_var(&values[..values.len() / 2]);
    let drift = ((mean - half) / mean).abs();
    Ok(TimeAverageStats {
        stats: CurvatureStats::new(mean / n, var / n, StatsSource::TimeAverage)?,
        samples: values.len(),
        drift,
        converged: drift < TIMEAVG_TOL,
    })
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStats {
    /// Microcanonical `Ω₀, σ²` and the combined `τ`.
    pub stats: CurvatureStats,
    pub omega0_stderr: f64,
    pub sigma2_stderr: f64,
    /// Canonical variance per spring before the correction.
    pub sigma2_canonical: f64,
    /// The subtracted term `ε² (d⟨ΔV⟩/N/dε)²`.
    pub lpv_correction: f64,
    pub n_mc: usize,
}

/// `d(⟨ΔV⟩_can/N)/dε` at leading order. Each bond carries weight 2 (1 for
/// the two end bonds of a fixed chain) and contributes
/// `2α_i⟨r_i⟩ + 3β_i⟨r_i²⟩ + 5δ_i⟨r_i⁴⟩` with `⟨r_i⟩ ≈ −(α_i − ᾱ)ε`,
/// `⟨r_i²⟩ ≈ ε`, `⟨r_i⁴⟩ ≈ 3ε²`.
pub fn mean_laplacian_slope(model: &ModelSpec, eps: f64) -> f64 {
    let n = model.n_springs();
    let abar = model.alpha().iter().sum::<f64>() / n as f64;
    let weight = |i: usize| match model.boundary() {
        Boundary::FixedEnds if i == 0 || i == n - 1 => 1.0,
        _ => 2.0,
    };
    let total: f64 = (0..n)
        .map(|i| {
            let (a, b, d) = (model.alpha()[i], model.beta()[i], model.delta()[i]);
            weight(i) * (-2.0 * a * (a - abar) + 3.0 * b + 30.0 * d * eps)
        })
        .sum();
    total / n as f64
}

/// Strains with covariance `ε(δ_ij − 1/N)`: i.i.d. `N(0, ε)` minus their mean.
#[derive(Debug, Clone, Copy)]
pub struct ConstrainedGaussian {
    normal: Normal<f64>,
}

impl ConstrainedGaussian {
    pub fn new(eps: f64) -> Result<Self, TheoryError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(TheoryError::Input(format!("eps must be positive, got {eps}")));
        }
        let normal = Normal::new(0.0, eps.sqrt()).map_err(|e| TheoryError::Input(e.to_string()))?;
        Ok(ConstrainedGaussian { normal })
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, r: &mut [f64]) {
        r.iter_mut().for_each(|x| *x = self.normal.sample(rng));
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        r.iter_mut().for_each(|x| *x -= mean);
    }
}

/// Monte Carlo over strains `r = g − mean(g)`, `g_i ~ N(0, ε)` i.i.d., in 64
/// fixed shards (ChaCha20, one stream per shard), reduced in shard order.
pub fn constrained_gaussian_stats(
    model: &ModelSpec,
    eps: f64,
    n_mc: usize,
    seed: u64,
) -> Result<GaussianStats, TheoryError> {
    if model.family() == Family::Toda {
        return Err(TheoryError::NotApplicable("Toda potential is not polynomial".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(TheoryError::Input(format!("eps must be positive, got {eps}")));
    }
    if n_mc < 2 {
        return Err(TheoryError::Input("n_mc must be at least 2".into()));
    }
    let n = model.n_springs();
    let measure = ConstrainedGaussian::new(eps)?;
    let shards: Result<Vec<Vec<f64>>, ModelError> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|s| {
            let count = n_mc / MC_SHARDS + usize::from(s < n_mc % MC_SHARDS);
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ MC_SALT);
            rng.set_stream(s as u64);
            let mut r = vec![0.0; n];
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                measure.fill(&mut rng, &mut r);
                out.push(laplacian_from_strains(model, &r)?);
            }
            Ok(out)
        })
        .collect();
    let values: Vec<f64> = shards?.concat();
    let m = values.len() as f64;
    let (mean, var) = mean_var(&values);
    let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / m;
    let nf = n as f64;
    let sigma2_canonical = var / nf;
    let slope = mean_laplacian_slope(model, eps);
    let lpv_correction = eps * eps * slope * slope;
    let sigma2 = (sigma2_canonical - lpv_correction).max(0.0);
    Ok(GaussianStats {
        stats: CurvatureStats::new(mean / nf, sigma2, StatsSource::ConstrainedGaussian)?,
        omega0_stderr: (var / m).sqrt() / nf,
        sigma2_stderr: ((m4 - var * var) / m).max(0.0).sqrt() / nf,
        sigma2_canonical,
        lpv_correction,
        n_mc: values.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticRow {
    Linear,
    VariableAlpha,
    PureBeta,
    GammaDelta,
    PureDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticChi {
    pub chi: f64,
    /// `χ = coefficient · ε^exponent`.
    pub coefficient: f64,
    pub exponent: Option<u32>,
    pub row: AsymptoticRow,
}

/// Arithmetic mean and population variance.
fn mean_and_variance(v: &[f64]) -> (f64, f64) {
    mean_var(v)
}

fn mean_square(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

/// Small-`ε` closed form for the linear hierarchy. The leading nonlinear
/// order decides the row; a constant `α` drops out and leaves the quartic
/// row. Toda and the Toda-tangent polynomial models (constant `α ≠ 0` with
/// `β = 2α²/3`) are refused.
pub fn asymptotic_chi(model: &ModelSpec, eps: f64) -> Result<AsymptoticChi, TheoryError> {
    if model.family() == Family::Toda {
        return Err(TheoryError::NotApplicable("Toda lattice (integrable)".into()));
    }
    if let Some(p @ (Preset::BetaT | Preset::GammaT)) = model.preset_name() {
        return Err(TheoryError::NotApplicable(format!("{p} is tangent to Toda")));
    }
    let (abar, var_a) = mean_and_variance(model.alpha());
    let nonzero = |v: &[f64]| v.iter().any(|&x| x != 0.0);
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    let mk = |coefficient: f64, s: u32, row| AsymptoticChi {
        chi: coefficient * eps.powi(s as i32),
        coefficient,
        exponent: Some(s),
        row,
    };
    if !constant(model.alpha()) {
        return Ok(mk(2.0 * var_a, 1, AsymptoticRow::VariableAlpha));
    }
    if abar != 0.0 && constant(model.beta()) {
        let bt = 2.0 * abar * abar / 3.0;
        if (model.beta()[0] - bt).abs() <= 1e-12 * bt {
            return Err(TheoryError::NotApplicable("constant α with β = 2α²/3 is tangent to Toda".into()));
        }
    }
    if nonzero(model.beta()) {
        let (_, var) = mean_and_variance(model.beta());
        return Ok(mk(4.5 * (mean_square(model.beta()) + var), 2, AsymptoticRow::PureBeta));
    }
    if nonzero(model.gamma()) {
        let (_, var) = mean_and_variance(model.gamma());
        return Ok(mk(48.0 * (mean_square(model.gamma()) + 1.5 * var), 3, AsymptoticRow::GammaDelta));
    }
    if nonzero(model.delta()) {
        let (_, var) = mean_and_variance(model.delta());
        return Ok(mk(750.0 * (mean_square(model.delta()) + 0.6 * var), 4, AsymptoticRow::PureDelta));
    }
    if abar != 0.0 {
        return Err(TheoryError::NotApplicable("constant cubic term only".into()));
    }
    Ok(AsymptoticChi {
        chi: 0.0,
        coefficient: 0.0,
        exponent: None,
        row: AsymptoticRow::Linear,
    })
}

/// One line of the theory table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub eps: f64,
    pub chi_theory: f64,
    pub regime: Regime,
    pub omega0: f64,
    pub sigma2: f64,
    pub tau: f64,
}

/// Asymptotic estimate at `eps`, with `Ω₀ = 2`, `τ = 1`, `σ² = 8χ`.
pub fn asymptotic_point(model: &ModelSpec, eps: f64) -> Result<TheoryPoint, TheoryError> {
    let a = asymptotic_chi(model, eps)?;
    Ok(TheoryPoint {
        eps,
        chi_theory: a.chi,
        regime: Regime::SmallEpsAsymptotic,
        omega0: 2.0,
        sigma2: 8.0 * a.chi,
        tau: 1.0,
    })
}

/// Full formula fed by the Monte Carlo statistics at `eps`.
pub fn full_point(model: &ModelSpec, eps: f64, n_mc: usize, seed: u64) -> Result<TheoryPoint, TheoryError> {
    let g = constrained_gaussian_stats(model, eps, n_mc, seed)?;
    let est = van_kampen_chi(&g.stats);
    Ok(TheoryPoint {
        eps,
        chi_theory: est.chi,
        regime: est.regime,
        omega0: g.stats.omega0,
        sigma2: g.stats.sigma2,
        tau: g.stats.tau,
    })
}
