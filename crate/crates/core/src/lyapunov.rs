//! Finite-time maximal Lyapunov exponent by tangent-vector renormalization,
//! ensemble averaging, plateau detection and the crossover profile
//! `χ̄(t) = log[1 + ht + c(e^{χt} − 1)] / t`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, ChainState, TangentState};
use crate::fit::linear_fit;
use crate::integrator::{IntegrationError, Integrator, IntegratorConfig, Scheme, DEFAULT_DT};
use crate::model::ModelSpec;
use crate::sampler::{sample_state, SampleError, SamplerConfig};

pub const DEFAULT_RENORM_EVERY: u64 = 100;
pub const POINTS_PER_DECADE: f64 = 50.0;

/// Plateau detector thresholds.
pub const PLATEAU_MAX_SLOPE: f64 = 0.05;
pub const PLATEAU_MAX_VARIATION: f64 = 0.10;

const TANGENT_SALT: u64 = 0x7a9c_3b51_e0f4_2d68;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapError {
    #[error("invalid Lyapunov config: {0}")]
    Config(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("series mismatch: {0}")]
    Mismatch(String),
    #[error("crossover fit needs a detected plateau")]
    NoPlateau,
    #[error("crossover fit did not converge: {0}")]
    FitDiverged(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenettinConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub renorm_every: u64,
    pub points_per_decade: f64,
}

impl Default for BenettinConfig {
    fn default() -> Self {
        BenettinConfig {
            dt: DEFAULT_DT,
            scheme: Scheme::Yoshida4,
            renorm_every: DEFAULT_RENORM_EVERY,
            points_per_decade: POINTS_PER_DECADE,
        }
    }
}

impl BenettinConfig {
    pub fn with_dt(dt: f64) -> Self {
        BenettinConfig {
            dt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), LyapError> {
        self.integrator().validate()?;
        if self.renorm_every == 0 {
            return Err(LyapError::Config("renorm_every must be at least 1".into()));
        }
        if !(self.points_per_decade >= 1.0 && self.points_per_decade <= 1000.0) {
            return Err(LyapError::Config(format!(
                "points_per_decade out of range: {}",
                self.points_per_decade
            )));
        }
        Ok(())
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.dt,
            scheme: self.scheme,
            with_tangent: true,
        }
    }
}

/// Geometric grid of step indices `round(10^{i/ppd})`, deduplicated, ending
/// exactly at `total`.
pub fn sample_steps(total: u64, points_per_decade: f64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    if total == 0 {
        return out;
    }
    let mut i = 0u32;
    loop {
        let s = 10f64.powf(i as f64 / points_per_decade).round() as u64;
        if s >= total {
            break;
        }
        if out.last() != Some(&s) {
            out.push(s);
        }
        i += 1;
    }
    out.push(total);
    out
}

/// `χ̂(x, t)` on the sampling grid of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapSeries {
    pub times: Vec<f64>,
    pub chi_hat: Vec<f64>,
    /// Σ log of renormalization factors at the final time.
    pub log_accum: f64,
    pub steps: u64,
}

impl LyapSeries {
    pub fn final_chi(&self) -> f64 {
        *self.chi_hat.last().unwrap_or(&f64::NAN)
    }
}

/// Resumable progress of a single tangent-vector run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenettinRun {
    pub config: BenettinConfig,
    pub total_steps: u64,
    pub step: u64,
    pub state: ChainState,
    pub tangent: TangentState,
    pub log_accum: f64,
    pub times: Vec<f64>,
    pub chi_hat: Vec<f64>,
}

impl BenettinRun {
    /// `xi0` is normalized to unit length.
    pub fn new(
        config: BenettinConfig,
        state: ChainState,
        mut xi0: TangentState,
        t_max: f64,
    ) -> Result<Self, LyapError> {
        config.validate()?;
        if !(t_max.is_finite() && t_max >= config.dt) {
            return Err(LyapError::Config(format!("t_max = {t_max} shorter than one step")));
        }
        if xi0.dq.len() != state.q.len() || xi0.dp.len() != state.q.len() {
            return Err(ChainError::Shape {
                expected: state.q.len(),
                got: xi0.dq.len(),
            }
            .into());
        }
        let n0 = xi0.normalize();
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(LyapError::Config("initial tangent vector must be non-zero".into()));
        }
        let (total_steps, _) = crate::integrator::steps_for(t_max, config.dt);
        Ok(BenettinRun {
            config,
            total_steps,
            step: 0,
            state,
            tangent: xi0,
            log_accum: 0.0,
            times: Vec::new(),
            chi_hat: Vec::new(),
        })
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.total_steps
    }

    /// Advances by at most `budget` steps; returns `true` once finished.
    pub fn advance(&mut self, model: &ModelSpec, budget: u64) -> Result<bool, LyapError> {
        let grid = sample_steps(self.total_steps, self.config.points_per_decade);
        let mut next_sample = grid.partition_point(|&s| s <= self.step);
        let stop = self.step.saturating_add(budget).min(self.total_steps);
        let every = self.config.renorm_every;
        let mut integ = Integrator::new(self.config.integrator())?;
        while self.step < stop {
            let next_renorm = (self.step / every + 1) * every;
            let next_event = grid.get(next_sample).copied().unwrap_or(u64::MAX).min(next_renorm).min(stop);
            integ.advance(model, &mut self.state, Some(&mut self.tangent), next_event - self.step, self.step)?;
            self.step = next_event;
            if self.step.is_multiple_of(every) {
                self.log_accum += self.tangent.normalize().ln();
            }
            if grid.get(next_sample) == Some(&self.step) {
                let t = self.step as f64 * self.config.dt;
                self.times.push(t);
                self.chi_hat.push((self.log_accum + self.tangent.norm().ln()) / t);
                next_sample += 1;
            }
        }
        Ok(self.is_done())
    }

    pub fn into_series(self) -> LyapSeries {
        LyapSeries {
            times: self.times,
            chi_hat: self.chi_hat,
            log_accum: self.log_accum,
            steps: self.step,
        }
    }
}

/// Single trajectory from `x0` with initial tangent `xi0`.
pub fn benettin_run(
    model: &ModelSpec,
    x0: ChainState,
    xi0: TangentState,
    config: &BenettinConfig,
    t_max: f64,
) -> Result<LyapSeries, LyapError> {
    let mut run = BenettinRun::new(*config, x0, xi0, t_max)?;
    run.advance(model, u64::MAX)?;
    Ok(run.into_series())
}

/// Random unit tangent vector number `index` for seed `seed`.
pub fn initial_tangent(n_particles: usize, seed: u64, index: u64) -> TangentState {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ TANGENT_SALT);
    rng.set_stream(index);
    TangentState::random_unit(n_particles, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub benettin: BenettinConfig,
    pub members: usize,
    /// Seeds the initial states.
    pub seed: u64,
    /// Seeds the initial tangent vectors.
    pub xi_seed: u64,
    pub t_max: f64,
}

impl EnsembleConfig {
    pub fn new(benettin: BenettinConfig, members: usize, seed: u64, t_max: f64) -> Self {
        EnsembleConfig {
            benettin,
            members,
            seed,
            xi_seed: seed,
            t_max,
        }
    }
}

/// Builds the run for ensemble member `index` at specific energy `eps`.
pub fn member_run(
    model: &ModelSpec,
    eps: f64,
    config: &EnsembleConfig,
    index: usize,
) -> Result<BenettinRun, LyapError> {
    let x0 = sample_state(model, &SamplerConfig::new(eps, config.seed), index as u64)?;
    let xi0 = initial_tangent(model.n_particles(), config.xi_seed, index as u64);
    BenettinRun::new(config.benettin, x0, xi0, config.t_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub value: f64,
    pub found: bool,
    /// Time range of the window examined.
    pub window: (f64, f64),
    pub slope: f64,
    pub variation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub chi_bar: Vec<f64>,
    /// Standard deviation across members at each time.
    pub spread: Vec<f64>,
    pub n: usize,
    pub plateau: f64,
    /// `3σ/√(n−1)` at the final time.
    pub err: f64,
    pub plateau_found: bool,
    pub plateau_window: (f64, f64),
    pub members: Vec<LyapSeries>,
}

impl EnsembleResult {
    /// Averages member series in the given order; all must share one grid.
    pub fn from_series(members: Vec<LyapSeries>) -> Result<Self, LyapError> {
        let n = members.len();
        if n < 2 {
            return Err(LyapError::Mismatch(format!("ensemble needs at least 2 members, got {n}")));
        }
        let times = members[0].times.clone();
        if let Some(bad) = members.iter().position(|m| m.times != times) {
            return Err(LyapError::Mismatch(format!("member {bad} sampled on a different grid")));
        }
        let nf = n as f64;
        let mut chi_bar = vec![0.0; times.len()];
        let mut spread = vec![0.0; times.len()];
        for (k, (cb, sp)) in chi_bar.iter_mut().zip(spread.iter_mut()).enumerate() {
            let mean = members.iter().map(|m| m.chi_hat[k]).sum::<f64>() / nf;
            let var = members.iter().map(|m| (m.chi_hat[k] - mean).powi(2)).sum::<f64>() / nf;
            *cb = mean;
            *sp = var.sqrt();
        }
        let err = 3.0 * spread.last().copied().unwrap_or(f64::NAN) / (nf - 1.0).sqrt();
        let p = plateau_estimate(&times, &chi_bar);
        Ok(EnsembleResult {
            times,
            chi_bar,
            spread,
            n,
            plateau: p.value,
            err,
            plateau_found: p.found,
            plateau_window: p.window,
            members,
        })
    }

    pub fn final_chi(&self) -> f64 {
        *self.chi_bar.last().unwrap_or(&f64::NAN)
    }
}

/// Runs `config.members` trajectories in parallel at specific energy `eps`.
/// The result does not depend on thread count or scheduling.
pub fn ensemble_chi(model: &ModelSpec, eps: f64, config: &EnsembleConfig) -> Result<EnsembleResult, LyapError> {
    if config.members < 2 {
        return Err(LyapError::Config(format!("ensemble needs n ≥ 2, got {}", config.members)));
    }
    let series: Result<Vec<LyapSeries>, LyapError> = (0..config.members)
        .into_par_iter()
        .map(|i| {
            let mut run = member_run(model, eps, config, i)?;
            run.advance(model, u64::MAX)?;
            Ok(run.into_series())
        })
        .collect();
    EnsembleResult::from_series(series?)
}

/// Slope of `log χ̄` against `log t` over `t ∈ [t_lo, t_hi]`. `None` when
/// fewer than 3 samples fall inside or any value is non-positive.
pub fn loglog_slope(times: &[f64], values: &[f64], t_lo: f64, t_hi: f64) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .map(|(t, v)| (t.ln(), v.ln()))
        .unzip();
    if x.len() < 3 || y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    linear_fit(&x, &y).ok().map(|f| f.slope)
}

/// Examines the final one-decade window `[t_end/10, t_end]`: a plateau is
/// declared when the log-log slope there is below 0.05 in magnitude and
/// `(max − min)/mean < 10%`; the value is the window mean. The window mean is
/// also returned (with `found = false`) when the test fails.
pub fn plateau_estimate(times: &[f64], chi_bar: &[f64]) -> Plateau {
    let miss = |window, value, slope, variation| Plateau {
        value,
        found: false,
        window,
        slope,
        variation,
    };
    let Some(&t_end) = times.last() else {
        return miss((f64::NAN, f64::NAN), f64::NAN, f64::NAN, f64::NAN);
    };
    let t_lo = t_end / 10.0;
    let window = (t_lo, t_end);
    if times[0] > t_end / 100.0 * (1.0 + 1e-9) {
        return miss(window, f64::NAN, f64::NAN, f64::NAN);
    }
    let vals: Vec<f64> = times
        .iter()
        .zip(chi_bar)
        .filter(|(t, _)| **t >= t_lo)
        .map(|(_, v)| *v)
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = (max - min) / mean;
    let slope = if min > 0.0 {
        loglog_slope(times, chi_bar, t_lo, t_end).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let found = min > 0.0 && slope.abs() < PLATEAU_MAX_SLOPE && variation < PLATEAU_MAX_VARIATION;
    Plateau {
        value: mean,
        found,
        window,
        slope,
        variation,
    }
}

/// `(1/t) log[1 + ht + c(e^{χt} − 1)]`, stable for small and large `χt`.
pub fn crossover_model(h: f64, c: f64, chi: f64, t: f64) -> f64 {
    let x = chi * t;
    if x < 30.0 {
        (h * t + c * x.exp_m1()).ln_1p() / t
    } else {
        // c e^{χt} dominates; factor it out
        let rest = (1.0 + h * t - c) * (-x).exp() / c;
        (x + c.ln() + rest.ln_1p()) / t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverFit {
    pub h: f64,
    pub c: f64,
    pub chi: f64,
    /// RMS residual of `ln χ̄`.
    pub rms: f64,
    pub iterations: usize,
}

/// Levenberg–Marquardt on `(ln h, ln c, ln χ)` minimizing the squared
/// residuals of `ln χ̄`. Requires the series to show a plateau.
pub fn crossover_fit(times: &[f64], chi_bar: &[f64]) -> Result<CrossoverFit, LyapError> {
    let plateau = plateau_estimate(times, chi_bar);
    if !plateau.found {
        return Err(LyapError::NoPlateau);
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(chi_bar)
        .filter(|(t, v)| **t > 0.0 && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let residuals = |p: &[f64; 3]| -> Vec<f64> {
        let (h, c, chi) = (p[0].exp(), p[1].exp(), p[2].exp());
        pts.iter().map(|&(t, ly)| crossover_model(h, c, chi, t).ln() - ly).collect()
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let h0 = chi_bar[0].max(plateau.value);
    let mut best: Option<([f64; 3], f64, usize)> = None;
    for c0 in [1e-3f64, 1e-1, 1.0, 10.0, 1e3] {
        let start = [h0.ln(), c0.ln(), plateau.value.ln()];
        if let Some((p, f, it)) = levenberg_marquardt(start, &residuals, &cost) {
            if best.as_ref().is_none_or(|b| f < b.1) {
                best = Some((p, f, it));
            }
        }
    }
    let (p, f, iterations) = best.ok_or_else(|| LyapError::FitDiverged("no start converged".into()))?;
    if !f.is_finite() {
        return Err(LyapError::FitDiverged(format!("cost {f}")));
    }
    Ok(CrossoverFit {
        h: p[0].exp(),
        c: p[1].exp(),
        chi: p[2].exp(),
        rms: (f / pts.len() as f64).sqrt(),
        iterations,
    })
}

fn levenberg_marquardt<R, C>(start: [f64; 3], residuals: &R, cost: &C) -> Option<([f64; 3], f64, usize)>
where
    R: Fn(&[f64; 3]) -> Vec<f64>,
    C: Fn(&[f64]) -> f64,
{
    let mut p = start;
    let mut r = residuals(&p);
    let mut f = cost(&r);
    if !f.is_finite() {
        return None;
    }
    let mut lambda = 1e-3;
    for it in 0..500 {
        // central-difference Jacobian
        let mut jac = vec![[0.0; 3]; r.len()];
        for k in 0..3 {
            let h = 1e-6 * (1.0 + p[k].abs());
            let (mut up, mut dn) = (p, p);
            up[k] += h;
            dn[k] -= h;
            let (ru, rd) = (residuals(&up), residuals(&dn));
            for (row, (a, b)) in jac.iter_mut().zip(ru.iter().zip(&rd)) {
                row[k] = (a - b) / (2.0 * h);
            }
        }
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..3 {
                jtr[a] += row[a] * ri;
                for b in 0..3 {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-12);
            }
            let Some(step) = solve3(m, jtr.map(|v| -v)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let rt = residuals(&trial);
            let ft = cost(&rt);
            if ft.is_finite() && ft < f {
                let rel = (f - ft) / f.max(1e-300);
                p = trial;
                r = rt;
                f = ft;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-12 {
                    return Some((p, f, it + 1));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return Some((p, f, it + 1));
        }
    }
    Some((p, f, 500))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;

    fn grid(t_end: f64, ppd: f64) -> Vec<f64> {
        sample_steps((t_end * 10.0) as u64, ppd).iter().map(|&s| s as f64 * 0.1).collect()
    }

    #[test]
    fn grid_is_geometric_and_ends_at_total() {
        let g = sample_steps(1_000_000, 50.0);
        assert_eq!(g[0], 1);
        assert_eq!(*g.last().unwrap(), 1_000_000);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let late = g.iter().filter(|&&s| s >= 100_000).count();
        assert!((50..=52).contains(&late), "{late}");
        assert_eq!(sample_steps(7, 50.0).last(), Some(&7));
        assert!(sample_steps(0, 50.0).is_empty());
    }

    #[test]
    fn constant_series_is_a_plateau() {
        let t = grid(1e4, 50.0);
        let v = vec![3.5e-3; t.len()];
        let p = plateau_estimate(&t, &v);
        assert!(p.found);
        assert!((p.value - 3.5e-3).abs() < 1e-15 * 3.5e-3);
    }

    #[test]
    fn integrable_decay_is_not_a_plateau() {
        let t = grid(1e6, 50.0);
        for h in [1e-3, 1e-1, 10.0] {
            let v: Vec<f64> = t.iter().map(|t| (1.0 + h * t).ln() / t).collect();
            assert!(!plateau_estimate(&t, &v).found, "h = {h}");
        }
    }

    #[test]
    fn plateau_value_lies_within_final_decade() {
        let t = grid(1e5, 50.0);
        let v: Vec<f64> = t.iter().map(|t| 1e-3 * (1.0 + 0.02 * (t * 0.001).sin())).collect();
        let p = plateau_estimate(&t, &v);
        assert!(p.found);
        let last: Vec<f64> = t.iter().zip(&v).filter(|(t, _)| **t >= 1e4).map(|(_, v)| *v).collect();
        let (lo, hi) = last.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(p.value >= lo && p.value <= hi);
    }

    #[test]
    fn crossover_model_limits() {
        let (h, c, chi) = (1e-2, 10.0, 2e-5);
        let small = crossover_model(h, c, chi, 1e-9);
        assert!((small - (h + c * chi)).abs() < 1e-9 * (h + c * chi));
        // far beyond the crossover: χ + log(c)/t
        let t = 1e8;
        assert!((crossover_model(h, c, chi, t) - (chi + c.ln() / t)).abs() < 1e-15);
        assert!(crossover_model(h, c, chi, 1e9).is_finite());
        // c > 1 approaches from above, c < 1 from below
        let upper: Vec<f64> = [1e6, 1e7, 1e8].iter().map(|&t| crossover_model(h, c, chi, t)).collect();
        assert!(upper.iter().all(|v| *v > chi) && upper.windows(2).all(|w| w[1] < w[0]));
        let lower: Vec<f64> = [3e6, 3e7, 3e8].iter().map(|&t| crossover_model(h, 1e-2, 4e-6, t)).collect();
        assert!(lower.iter().all(|v| *v < 4e-6) && lower.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn synthetic_crossover_plateau_is_recovered() {
        let (h, c, chi) = (1e-2, 10.0, 2e-5);
        let at = |t_max: f64| {
            let t = grid(t_max, 50.0);
            let v: Vec<f64> = t.iter().map(|&t| crossover_model(h, c, chi, t)).collect();
            (t, v)
        };
        // three decades past the crossover: within 5%
        let (t, v) = at(1000.0 / chi);
        let p = plateau_estimate(&t, &v);
        assert!(p.found);
        assert!((p.value / chi - 1.0).abs() < 0.05, "{}", p.value / chi);
        // at 100/χ the last decade still carries the log(c)/t tail: a
        // plateau, if declared, must already be within 5%
        let (t, v) = at(100.0 / chi);
        let p = plateau_estimate(&t, &v);
        assert!(!p.found || (p.value / chi - 1.0).abs() < 0.05);

        let (t, v) = at(1000.0 / chi);
        let fit = crossover_fit(&t, &v).unwrap();
        assert!((fit.chi / chi - 1.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.c / c - 1.0).abs() < 1e-2, "{fit:?}");
        assert!((fit.h / h - 1.0).abs() < 1e-2, "{fit:?}");
    }

    #[test]
    fn crossover_fit_requires_plateau() {
        let t = grid(1e6, 50.0);
        let v: Vec<f64> = t.iter().map(|t| (1.0 + 0.1 * t).ln() / t).collect();
        assert_eq!(crossover_fit(&t, &v), Err(LyapError::NoPlateau));
    }

    #[test]
    fn series_matches_definition() {
        let model = ModelSpec::preset(Preset::AlphaBeta, 16, 0).unwrap();
        let x0 = sample_state(&model, &SamplerConfig::new(0.05, 3), 0).unwrap();
        let xi0 = initial_tangent(model.n_particles(), 3, 0);
        let cfg = BenettinConfig::default();
        let s = benettin_run(&model, x0.clone(), xi0.clone(), &cfg, 1000.0).unwrap();
        assert_eq!(s.steps, 10_000);
        assert_eq!(s.times.len(), s.chi_hat.len());
        assert!(s.chi_hat.iter().all(|v| v.is_finite()));
        // without renormalization the same number is log ‖ξ(t)‖ / t
        let mut st = x0;
        let mut t = xi0;
        let mut integ = Integrator::new(cfg.integrator()).unwrap();
        integ.advance(&model, &mut st, Some(&mut t), 10_000, 0).unwrap();
        let direct = t.norm().ln() / 1000.0;
        assert!((s.final_chi() - direct).abs() < 1e-9 * direct.abs().max(1e-6));
        assert!((s.log_accum / 1000.0 - direct).abs() < 1e-9 * direct.abs().max(1e-6));
    }

    #[test]
    fn chunked_run_is_bit_identical() {
        let model = ModelSpec::preset(Preset::PureBeta, 12, 0).unwrap();
        let cfg = EnsembleConfig::new(BenettinConfig::default(), 2, 5, 500.0);
        let mut a = member_run(&model, 0.01, &cfg, 1).unwrap();
        let mut b = a.clone();
        a.advance(&model, u64::MAX).unwrap();
        for budget in [1, 7, 100, 333, 64, 10_000] {
            b.advance(&model, budget).unwrap();
        }
        assert!(b.is_done());
        assert_eq!(a, b);
    }

    #[test]
    fn ensemble_is_deterministic() {
        let model = ModelSpec::preset(Preset::AlphaBeta, 16, 0).unwrap();
        let cfg = EnsembleConfig::new(BenettinConfig::default(), 4, 11, 200.0);
        let a = ensemble_chi(&model, 1e-2, &cfg).unwrap();
        let b = ensemble_chi(&model, 1e-2, &cfg).unwrap();
        assert_eq!(a, b);
        let serial: Vec<LyapSeries> = (0..4)
            .map(|i| {
                let mut r = member_run(&model, 1e-2, &cfg, i).unwrap();
                r.advance(&model, u64::MAX).unwrap();
                r.into_series()
            })
            .collect();
        assert_eq!(EnsembleResult::from_series(serial).unwrap(), a);
        assert!(a.err >= 0.0);
        assert!(ensemble_chi(&model, 1e-2, &EnsembleConfig { members: 1, ..cfg }).is_err());
    }

    #[test]
    fn harmonic_chain_log_norm_stays_bounded() {
        // each normal mode maps (Q, P) by a matrix of norm max(ω, 1/ω)
        let n = 32;
        let model = ModelSpec::linear(n).unwrap();
        let cfg = EnsembleConfig::new(BenettinConfig::default(), 8, 1, 1e4);
        let e = ensemble_chi(&model, 1e-3, &cfg).unwrap();
        let bound = (1.0 / crate::sampler::mode_frequencies(n)[0]).ln() * 1.001;
        for m in &e.members {
            for (t, c) in m.times.iter().zip(&m.chi_hat) {
                assert!((t * c).abs() <= bound, "t = {t}: {}", t * c);
            }
        }
        assert!(!e.plateau_found);
    }
}
