//! Least-squares fits over result sets: power laws `χ = C ε^a` in log10
//! space, the exponent as a function of `N`, and the logarithmic-in-`N`
//! diagnostic with a small-exponent power law reported next to it.
//!
//! All fits are unweighted; the measurement error of each point is carried
//! for reporting only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Preset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("non-positive value in log fit: x = {x}, y = {y}")]
    NonPositive { x: f64, y: f64 },
    #[error("all abscissae equal; slope undefined")]
    Degenerate,
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// Root mean square residual.
    pub rms: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit, FitError> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return Err(FitError::TooFewPoints { need: 2, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let s2 = ssr / (nf - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        rms: (ssr / nf).sqrt(),
        n,
    })
}

/// One measured `χ(ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub eps: f64,
    pub chi: f64,
    pub err: f64,
}

impl Point {
    pub fn new(eps: f64, chi: f64, err: f64) -> Self {
        Point { eps, chi, err }
    }
}

/// Inclusive `ε` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsWindow {
    pub min: f64,
    pub max: f64,
}

impl EpsWindow {
    pub const ALL: EpsWindow = EpsWindow {
        min: 0.0,
        max: f64::INFINITY,
    };

    pub fn new(min: f64, max: f64) -> Self {
        EpsWindow { min, max }
    }

    pub fn contains(&self, eps: f64) -> bool {
        eps >= self.min && eps <= self.max
    }

    /// `ε ≤ 2e-2` for α+β, `1e-4..1e-3` for β_T, everything otherwise.
    pub fn default_for(preset: Option<Preset>) -> Self {
        match preset {
            Some(Preset::AlphaBeta) => EpsWindow::new(0.0, 2e-2),
            Some(Preset::BetaT) => EpsWindow::new(1e-4, 1e-3),
            _ => EpsWindow::ALL,
        }
    }
}

impl Default for EpsWindow {
    fn default() -> Self {
        EpsWindow::new(0.0, 2e-2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "C")]
    pub c: f64,
    pub a: f64,
    pub a_stderr: f64,
    /// Smallest and largest `ε` actually used.
    pub eps_window: (f64, f64),
    pub n_points: usize,
    /// In log10 units.
    pub residual_rms: f64,
}

impl FitResult {
    pub fn predict(&self, eps: f64) -> f64 {
        self.c * eps.powf(self.a)
    }
}

/// `log10 χ = log10 C + a log10 ε` over the points inside `window`.
pub fn powerlaw_fit(points: &[Point], window: EpsWindow) -> Result<FitResult, FitError> {
    let used: Vec<&Point> = points.iter().filter(|p| window.contains(p.eps)).collect();
    if used.len() < 3 {
        return Err(FitError::TooFewPoints {
            need: 3,
            got: used.len(),
        });
    }
    if let Some(p) = used.iter().find(|p| !(p.eps > 0.0 && p.chi > 0.0)) {
        return Err(FitError::NonPositive { x: p.eps, y: p.chi });
    }
    let x: Vec<f64> = used.iter().map(|p| p.eps.log10()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.chi.log10()).collect();
    let line = linear_fit(&x, &y)?;
    let lo = used.iter().map(|p| p.eps).fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|p| p.eps).fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        c: 10f64.powf(line.intercept),
        a: line.slope,
        a_stderr: line.slope_stderr,
        eps_window: (lo, hi),
        n_points: used.len(),
        residual_rms: line.rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Single,
    Increasing,
    Decreasing,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEntry {
    #[serde(rename = "N")]
    pub n: usize,
    pub a: f64,
    pub a_stderr: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub entries: Vec<SlopeEntry>,
    pub trend: Trend,
}

/// Fits every `N` separately (sorted by `N`) and reports whether `a(N)` is
/// monotone. Groups with too few points in the window are skipped.
pub fn slope_vs_n(groups: &[(usize, Vec<Point>)], window: EpsWindow) -> SlopeSummary {
    let mut sorted: Vec<&(usize, Vec<Point>)> = groups.iter().collect();
    sorted.sort_by_key(|g| g.0);
    let entries: Vec<SlopeEntry> = sorted
        .into_iter()
        .filter_map(|(n, pts)| {
            powerlaw_fit(pts, window).ok().map(|fit| SlopeEntry {
                n: *n,
                a: fit.a,
                a_stderr: fit.a_stderr,
                fit,
            })
        })
        .collect();
    let trend = if entries.len() < 2 {
        Trend::Single
    } else if entries.windows(2).all(|w| w[1].a > w[0].a) {
        Trend::Increasing
    } else if entries.windows(2).all(|w| w[1].a < w[0].a) {
        Trend::Decreasing
    } else {
        Trend::Mixed
    };
    SlopeSummary { entries, trend }
}

/// Default lower cutoff on `N` for [`log_n_fit`].
pub const LOG_N_CUTOFF: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNFit {
    /// `dχ / d log10 N`.
    pub slope_per_decade: f64,
    pub intercept: f64,
    pub rms: f64,
    pub n_points: usize,
    /// The alternative `χ = K N^b` over the same points.
    pub power_exponent: f64,
    pub power_prefactor: f64,
    /// In log10 units.
    pub power_rms: f64,
    pub note: String,
}

/// `χ = intercept + slope·log10 N` over the points with `N ≥ cutoff`.
pub fn log_n_fit(points: &[(usize, f64)], cutoff: usize) -> Result<LogNFit, FitError> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, _)| *n >= cutoff)
        .map(|&(n, chi)| (n as f64, chi))
        .collect();
    if used.len() < 3 {
        return Err(FitError::TooFewPoints {
            need: 3,
            got: used.len(),
        });
    }
    let lx: Vec<f64> = used.iter().map(|p| p.0.log10()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.1).collect();
    let line = linear_fit(&lx, &y)?;
    let (power_exponent, power_prefactor, power_rms) = if used.iter().all(|p| p.1 > 0.0) {
        let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
        let pw = linear_fit(&lx, &ly)?;
        (pw.slope, 10f64.powf(pw.intercept), pw.rms)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let note = format!(
        "a power law with a small exponent also fits: chi ~ N^{power_exponent:.4} (rms {power_rms:.3e} in log10)"
    );
    Ok(LogNFit {
        slope_per_decade: line.slope,
        intercept: line.intercept,
        rms: line.rms,
        n_points: used.len(),
        power_exponent,
        power_prefactor,
        power_rms,
        note,
    })
}
