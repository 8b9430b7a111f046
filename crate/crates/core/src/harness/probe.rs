//! Integrator-error probe: the Toda lattice is integrable, so any plateau it
//! shows is produced by the finite step. Scans `dt` at fixed `ε`, then `ε` at
//! a fixed large step and fits the spurious power law.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunSpec;
use super::output::{atomic_write, write_json};
use super::sweep::{execute_runs, SweepOptions, SweepReport};
use super::HarnessError;
use crate::fit::{powerlaw_fit, EpsWindow, FitResult, Point};
use crate::lyapunov::{BenettinConfig, EnsembleConfig};
use crate::model::{ModelSpec, Preset};

pub const PROBE_CSV: &str = "toda-check.csv";
pub const PROBE_JSON: &str = "toda-check.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TodaCheckConfig {
    pub n: usize,
    pub eps: f64,
    pub dt_list: Vec<f64>,
    pub sweep_dt: f64,
    /// Empty skips the `ε` scan.
    pub sweep_eps: Vec<f64>,
    pub t_max: f64,
    pub ensemble: usize,
    pub seed: u64,
}

impl Default for TodaCheckConfig {
    fn default() -> Self {
        TodaCheckConfig {
            n: 256,
            eps: 8e-4,
            dt_list: vec![0.05, 0.1, 0.2, 0.4],
            sweep_dt: 0.24,
            sweep_eps: vec![8e-4, 2e-3, 5e-3, 1e-2],
            t_max: 1e5,
            ensemble: 8,
            seed: 1,
        }
    }
}

impl TodaCheckConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.n < 4 {
            return bad("N must be at least 4");
        }
        if self.dt_list.is_empty() {
            return bad("dt list must be non-empty");
        }
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(self.dt_list.iter().all(|&d| pos(d)) && pos(self.sweep_dt)) {
            return bad("time steps must be positive");
        }
        if !(pos(self.eps) && self.sweep_eps.iter().all(|&e| pos(e))) {
            return bad("eps values must be positive");
        }
        if self.ensemble < 2 {
            return bad("ensemble needs at least 2 members");
        }
        if !(self.t_max >= self.dt_list.iter().chain([&self.sweep_dt]).copied().fold(0.0, f64::max)) {
            return bad("t_max shorter than one step");
        }
        Ok(())
    }

    fn spec(&self, model: &ModelSpec, dt: f64, eps: f64) -> RunSpec {
        let ens = EnsembleConfig::new(BenettinConfig::with_dt(dt), self.ensemble, self.seed, self.t_max);
        RunSpec::explicit(model.clone(), eps, ens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub dt: f64,
    pub eps: f64,
    /// Plateau when found, else the final `χ̄`.
    pub level: f64,
    pub plateau_found: bool,
    pub final_chi: f64,
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TodaCheckReport {
    pub dt_scan: Vec<ProbeRow>,
    /// Level strictly increasing along the sorted `dt` list.
    pub increasing: bool,
    pub eps_scan: Vec<ProbeRow>,
    pub fit: Option<FitResult>,
    pub fit_error: Option<String>,
}

/// Runs (or resumes) every probe ensemble under `out/toda/`; the report is
/// `None` while runs remain unfinished.
pub fn toda_check(
    cfg: &TodaCheckConfig,
    out: &Path,
    opts: &SweepOptions,
) -> Result<(SweepReport, Option<TodaCheckReport>), HarnessError> {
    cfg.validate()?;
    let model = ModelSpec::preset(Preset::Toda, cfg.n, cfg.seed)?;
    let mut dts = cfg.dt_list.clone();
    dts.sort_by(f64::total_cmp);
    let mut specs: Vec<RunSpec> = dts.iter().map(|&dt| cfg.spec(&model, dt, cfg.eps)).collect();
    let n_dt = specs.len();
    specs.extend(cfg.sweep_eps.iter().map(|&e| cfg.spec(&model, cfg.sweep_dt, e)));
    let sweep = execute_runs(&specs, out, opts)?;
    if sweep.interrupted() {
        return Ok((sweep, None));
    }
    let rows: Vec<ProbeRow> = sweep
        .records()
        .map(|r| ProbeRow {
            dt: r.dt,
            eps: r.eps,
            level: r.level(),
            plateau_found: r.plateau_found,
            final_chi: r.final_chi,
            err: r.err,
        })
        .collect();
    let (dt_scan, eps_scan) = rows.split_at(n_dt);
    let increasing = dt_scan.windows(2).all(|w| w[1].level > w[0].level);
    let points: Vec<Point> = eps_scan.iter().map(|r| Point::new(r.eps, r.level, r.err)).collect();
    let (fit, fit_error) = if points.is_empty() {
        (None, None)
    } else {
        match powerlaw_fit(&points, EpsWindow::ALL) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let report = TodaCheckReport {
        dt_scan: dt_scan.to_vec(),
        increasing,
        eps_scan: eps_scan.to_vec(),
        fit,
        fit_error,
    };
    let csv_path = out.join(PROBE_CSV);
    atomic_write(&csv_path, probe_csv(cfg, &report).as_bytes()).map_err(HarnessError::io(&csv_path))?;
    write_json(&out.join(PROBE_JSON), &report)?;
    Ok((sweep, Some(report)))
}

fn probe_csv(cfg: &TodaCheckConfig, report: &TodaCheckReport) -> String {
    let mut s = format!(
        "# model=toda N={} eps={:e} seed={} ensemble={} t_max={}\n",
        cfg.n, cfg.eps, cfg.seed, cfg.ensemble, cfg.t_max
    );
    s.push_str("scan,dt,eps,level,plateau_found,final_chi,err\n");
    for (scan, rows) in [("dt", &report.dt_scan), ("eps", &report.eps_scan)] {
        for r in rows.iter() {
            writeln!(
                s,
                "{scan},{},{:e},{:.16e},{},{:.16e},{:.16e}",
                r.dt, r.eps, r.level, r.plateau_found, r.final_chi, r.err
            )
            .unwrap();
        }
    }
    s
}
