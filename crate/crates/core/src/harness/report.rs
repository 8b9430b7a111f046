//! Plot-ready tables: theory curves over an `ε` grid and power-law fits
//! over a results directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::output::{read_record, RunRecord, SUMMARY_FILE};
use super::HarnessError;
use crate::fit::{powerlaw_fit, slope_vs_n, EpsWindow, FitResult, Point, SlopeSummary};
use crate::model::{ModelSpec, Preset};
use crate::theory::{asymptotic_point, full_point, TheoryError, TheoryPoint};

/// Asymptotic and full-formula points at each `ε`, whichever apply.
pub fn theory_table(model: &ModelSpec, eps: &[f64], n_mc: usize, seed: u64) -> Result<Vec<TheoryPoint>, HarnessError> {
    let mut rows = Vec::new();
    let mut refusal = None;
    for &e in eps {
        for point in [asymptotic_point(model, e), full_point(model, e, n_mc, seed)] {
            match point {
                Ok(p) => rows.push(p),
                Err(TheoryError::NotApplicable(why)) => refusal = Some(why),
                Err(other) => return Err(other.into()),
            }
        }
    }
    match (rows.is_empty(), refusal) {
        (true, Some(why)) => Err(TheoryError::NotApplicable(why).into()),
        _ => Ok(rows),
    }
}

pub fn theory_csv(model: &ModelSpec, seed: u64, rows: &[TheoryPoint]) -> String {
    let mut s = format!("# model={} N={} seed={seed}\n", model.label(), model.n_springs());
    s.push_str("eps,chi_theory,regime,omega0,sigma2,tau\n");
    for r in rows {
        writeln!(
            s,
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
            r.eps,
            r.chi_theory,
            r.regime.name(),
            r.omega0,
            r.sigma2,
            r.tau
        )
        .unwrap();
    }
    s
}

/// Every `summary.json` two levels below `out`, in path order.
pub fn collect_records(out: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut paths: Vec<PathBuf> = Vec::new();
    let list = |p: &Path| -> Result<Vec<PathBuf>, HarnessError> {
        let mut v: Vec<PathBuf> = fs::read_dir(p)
            .map_err(HarnessError::io(p))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        v.sort();
        Ok(v)
    };
    for model_dir in list(out)? {
        for run in list(&model_dir)? {
            let s = run.join(SUMMARY_FILE);
            if s.exists() {
                paths.push(s);
            }
        }
    }
    paths.iter().map(|p| read_record(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub model: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub dt: f64,
    pub window: EpsWindow,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitReport {
    pub rows: Vec<FitRow>,
    /// `a(N)` per model and `dt`, for models run at several sizes.
    pub slopes: Vec<(String, f64, SlopeSummary)>,
    /// Groups that could not be fitted, with the reason.
    pub skipped: Vec<(String, usize, f64, String)>,
    /// Records left out for lack of a plateau.
    pub no_plateau: usize,
}

type GroupKey = (String, usize, u64);

/// Power-law fit per `(model, N, dt)` over records with a plateau. Without
/// an explicit window each preset uses its default.
pub fn fit_records(records: &[RunRecord], window: Option<EpsWindow>) -> FitReport {
    let mut groups: BTreeMap<GroupKey, (Option<String>, Vec<Point>)> = BTreeMap::new();
    let mut report = FitReport::default();
    for r in records {
        if !r.plateau_found {
            report.no_plateau += 1;
            continue;
        }
        let g = groups
            .entry((r.model.clone(), r.n, r.dt.to_bits()))
            .or_insert_with(|| (r.preset.clone(), Vec::new()));
        g.1.push(Point::new(r.eps, r.level(), r.err));
    }
    let window_for = |preset: &Option<String>| {
        window.unwrap_or_else(|| EpsWindow::default_for(preset.as_deref().and_then(|p| p.parse::<Preset>().ok())))
    };
    let mut by_model: BTreeMap<(String, u64), (EpsWindow, Vec<(usize, Vec<Point>)>)> = BTreeMap::new();
    for ((model, n, dt_bits), (preset, points)) in groups {
        let dt = f64::from_bits(dt_bits);
        let w = window_for(&preset);
        match powerlaw_fit(&points, w) {
            Ok(fit) => report.rows.push(FitRow {
                model: model.clone(),
                n,
                dt,
                window: w,
                fit,
            }),
            Err(e) => report.skipped.push((model.clone(), n, dt, e.to_string())),
        }
        by_model.entry((model, dt_bits)).or_insert((w, Vec::new())).1.push((n, points));
    }
    for ((model, dt_bits), (w, groups)) in by_model {
        if groups.len() > 1 {
            report.slopes.push((model, f64::from_bits(dt_bits), slope_vs_n(&groups, w)));
        }
    }
    report
}

pub fn fit_csv(rows: &[FitRow]) -> String {
    let mut s = String::from("model,N,dt,C,a,a_stderr,eps_min,eps_max,n_points,rms\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{:.16e},{:.16e},{:.16e},{:e},{:e},{},{:.16e}",
            r.model,
            r.n,
            r.dt,
            r.fit.c,
            r.fit.a,
            r.fit.a_stderr,
            r.fit.eps_window.0,
            r.fit.eps_window.1,
            r.fit.n_points,
            r.fit.residual_rms
        )
        .unwrap();
    }
    s
}
