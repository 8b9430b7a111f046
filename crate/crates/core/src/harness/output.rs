//! Result files of a run directory and the record that summarizes them.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{RunSpec, TMaxRule};
use super::HarnessError;
use crate::lyapunov::EnsembleResult;

pub const SUMMARY_FILE: &str = "summary.json";
pub const SERIES_FILE: &str = "series.csv";
pub const ENSEMBLE_FILE: &str = "ensemble.csv";
/// Wall time lives apart from the summary so that summaries stay reproducible.
pub const TIMING_FILE: &str = "timing.json";

/// Writes to a sibling temp file, syncs, then renames over `path`.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// `<out>/<model>/N<N>_eps<eps>_dt<dt>`.
pub fn run_dir(out: &Path, spec: &RunSpec) -> PathBuf {
    run_dir_for(out, &spec.model.label(), spec.n(), spec.eps, spec.dt())
}

pub fn run_dir_for(out: &Path, label: &str, n: usize, eps: f64, dt: f64) -> PathBuf {
    out.join(label).join(format!("N{n}_eps{eps:e}_dt{dt}"))
}

fn header(spec: &RunSpec) -> String {
    format!(
        "# model={} N={} eps={:e} dt={} seed={} xi_seed={} config_hash={}\n",
        spec.model.label(),
        spec.n(),
        spec.eps,
        spec.dt(),
        spec.ensemble.seed,
        spec.ensemble.xi_seed,
        spec.config_hash
    )
}

/// Every member's `χ̂(t)`, long format.
pub fn series_csv(spec: &RunSpec, result: &EnsembleResult) -> String {
    let mut s = header(spec);
    s.push_str("member,t,chi_hat\n");
    for (i, m) in result.members.iter().enumerate() {
        for (t, c) in m.times.iter().zip(&m.chi_hat) {
            writeln!(s, "{i},{t:.16e},{c:.16e}").unwrap();
        }
    }
    s
}

pub fn ensemble_csv(spec: &RunSpec, result: &EnsembleResult) -> String {
    let mut s = header(spec);
    s.push_str("t,chi_bar,sigma,n\n");
    for ((t, c), sd) in result.times.iter().zip(&result.chi_bar).zip(&result.spread) {
        writeln!(s, "{t:.16e},{c:.16e},{sd:.16e},{}", result.n).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub preset: Option<String>,
    #[serde(rename = "N")]
    pub n: usize,
    pub eps: f64,
    pub dt: f64,
    pub t_max: f64,
    pub t_max_rule: TMaxRule,
    pub chi_estimate: Option<f64>,
    pub ensemble: usize,
    pub seed: u64,
    pub xi_seed: u64,
    pub pattern_seed: Option<u64>,
    pub renorm_every: u64,
    /// Mean of `χ̄` over the final decade; `None` if undefined.
    pub plateau: Option<f64>,
    pub plateau_found: bool,
    pub plateau_window: (f64, f64),
    pub err: f64,
    pub final_chi: f64,
    /// Toda spurious level at the same `(N, ε, dt)` when one was available.
    pub floor: Option<f64>,
    pub flags: Vec<String>,
    pub config_hash: String,
    pub code_version: String,
}

impl RunRecord {
    pub fn new(spec: &RunSpec, result: &EnsembleResult, floor: Option<f64>, flags: Vec<String>) -> Self {
        RunRecord {
            model: spec.model.label(),
            preset: spec.model.preset_name().map(|p| p.name().to_string()),
            n: spec.n(),
            eps: spec.eps,
            dt: spec.dt(),
            t_max: spec.ensemble.t_max,
            t_max_rule: spec.t_max_rule,
            chi_estimate: spec.chi_estimate,
            ensemble: result.n,
            seed: spec.ensemble.seed,
            xi_seed: spec.ensemble.xi_seed,
            pattern_seed: spec.model.pattern_seed(),
            renorm_every: spec.ensemble.benettin.renorm_every,
            plateau: Some(result.plateau).filter(|v| v.is_finite()),
            plateau_found: result.plateau_found,
            plateau_window: result.plateau_window,
            err: result.err,
            final_chi: result.final_chi(),
            floor,
            flags,
            config_hash: spec.config_hash.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// The plateau when found, else the last ensemble value.
    pub fn level(&self) -> f64 {
        match self.plateau {
            Some(p) if self.plateau_found => p,
            _ => self.final_chi,
        }
    }

    pub fn is_flagged(&self) -> bool {
        self.flags.iter().any(|f| f == "algorithm-limited" || f == "no-plateau")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| HarnessError::Json {
        path: path.into(),
        source,
    })?;
    bytes.push(b'\n');
    atomic_write(path, &bytes).map_err(HarnessError::io(path))
}

pub fn read_record(path: &Path) -> Result<RunRecord, HarnessError> {
    let bytes = fs::read(path).map_err(HarnessError::io(path))?;
    serde_json::from_slice(&bytes).map_err(|source| HarnessError::Json {
        path: path.into(),
        source,
    })
}

/// Writes series, ensemble and summary files of a finished run.
pub fn write_run(dir: &Path, spec: &RunSpec, result: &EnsembleResult, record: &RunRecord) -> Result<(), HarnessError> {
    let put = |name: &str, text: String| {
        let p = dir.join(name);
        atomic_write(&p, text.as_bytes()).map_err(HarnessError::io(p))
    };
    put(SERIES_FILE, series_csv(spec, result))?;
    put(ENSEMBLE_FILE, ensemble_csv(spec, result))?;
    write_json(&dir.join(SUMMARY_FILE), record)
}
