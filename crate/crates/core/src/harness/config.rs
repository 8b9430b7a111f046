//! TOML experiment description and its expansion into concrete runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::integrator::{DEFAULT_DT, FINE_DT};
use crate::lyapunov::{ensemble_chi, BenettinConfig, EnsembleConfig, DEFAULT_RENORM_EVERY, POINTS_PER_DECADE};
use crate::model::{Boundary, ModelSpec, Overrides, Preset};
use crate::theory::asymptotic_chi;

pub const DEFAULT_ENSEMBLE: usize = 24;
pub const MIN_T_MAX: f64 = 1e6;
/// Decades past the crossover time `1/χ` that the default `t_max` covers.
pub const T_MAX_FACTOR: f64 = 200.0;
pub const PILOT_T_MAX: f64 = 1e4;
pub const PILOT_MEMBERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FloorCheck {
    /// Compare with an existing Toda record at the same `(N, ε, dt)`.
    #[default]
    Lookup,
    Off,
}

/// How `t_max` was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TMaxRule {
    Explicit,
    Asymptotic,
    Pilot,
}

fn default_ensemble() -> usize {
    DEFAULT_ENSEMBLE
}
fn default_seed() -> u64 {
    1
}
fn default_renorm() -> u64 {
    DEFAULT_RENORM_EVERY
}
fn default_ppd() -> f64 {
    POINTS_PER_DECADE
}
fn default_interval() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toda_c: Option<f64>,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub eps: Vec<f64>,
    /// Defaults to 0.05 for gamma-T and pure-delta, 0.1 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_chi: Option<f64>,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_renorm")]
    pub renorm_every: u64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: f64,
    /// Wall-clock seconds between checkpoint writes of a running member.
    #[serde(default = "default_interval")]
    pub checkpoint_interval: f64,
    /// 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub floor_check: FloorCheck,
}

impl ExperimentConfig {
    pub fn new(model: &str, n: Vec<usize>, eps: Vec<f64>) -> Self {
        ExperimentConfig {
            model: model.to_string(),
            alpha: None,
            beta: None,
            gamma: None,
            delta: None,
            toda_c: None,
            boundary: Boundary::FixedEnds,
            n,
            eps,
            dt: None,
            t_max: None,
            t_max_cap: None,
            expected_chi: None,
            ensemble: DEFAULT_ENSEMBLE,
            seed: 1,
            xi_seed: None,
            pattern_seed: None,
            out: None,
            renorm_every: DEFAULT_RENORM_EVERY,
            points_per_decade: POINTS_PER_DECADE,
            checkpoint_interval: 60.0,
            workers: 0,
            floor_check: FloorCheck::Lookup,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        Self::from_toml_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn overrides(&self) -> Overrides {
        Overrides {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            toda_c: self.toda_c,
        }
    }

    pub fn build_model(&self, n: usize) -> Result<ModelSpec, HarnessError> {
        let seed = self.pattern_seed.unwrap_or(self.seed);
        Ok(ModelSpec::named(&self.model, n, seed)?
            .with_boundary(self.boundary)
            .with_overrides(&self.overrides())?)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(&self.model))
    }

    /// Checks every field before any compute; returns warnings.
    pub fn validate(&self) -> Result<Vec<String>, HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n.is_empty() || self.eps.is_empty() {
            return bad("N and eps lists must be non-empty".into());
        }
        if let Some(n) = self.n.iter().find(|&&n| n < 4) {
            return bad(format!("N = {n}; every N must be at least 4"));
        }
        if let Some(e) = self.eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("eps = {e}; every eps must be positive"));
        }
        let dt = self.dt();
        if !(dt.is_finite() && dt > 0.0) {
            return bad(format!("dt = {dt} must be positive"));
        }
        if self.ensemble < 2 {
            return bad(format!("ensemble = {}; need at least 2 members", self.ensemble));
        }
        if self.renorm_every == 0 {
            return bad("renorm_every must be at least 1".into());
        }
        if !(self.points_per_decade.is_finite() && self.points_per_decade > 0.0) {
            return bad("points_per_decade must be positive".into());
        }
        if !(self.checkpoint_interval.is_finite() && self.checkpoint_interval > 0.0) {
            return bad("checkpoint_interval must be positive".into());
        }
        for (name, v) in [("t_max", self.t_max), ("t_max_cap", self.t_max_cap), ("expected_chi", self.expected_chi)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("{name} = {v} must be positive"));
                }
            }
        }
        if let Some(t) = self.t_max {
            if t < dt {
                return bad(format!("t_max = {t} is shorter than one step"));
            }
        }
        if self.boundary == Boundary::Periodic {
            return bad("ensemble initial data are sampled for fixed ends only".into());
        }
        for &n in &self.n {
            self.build_model(n)?;
        }
        let mut warnings = Vec::new();
        if let (Some(t), Some(chi)) = (self.t_max, self.expected_chi) {
            if t < 100.0 / chi {
                warnings.push(format!("t_max = {t} is below 100/expected_chi = {}", 100.0 / chi));
            }
        }
        Ok(warnings)
    }

    /// Expands the `N × eps` product into runs, choosing `t_max` per run.
    pub fn plan(&self) -> Result<Vec<RunSpec>, HarnessError> {
        self.validate()?;
        let mut specs = Vec::new();
        let benettin = BenettinConfig {
            dt: self.dt(),
            renorm_every: self.renorm_every,
            points_per_decade: self.points_per_decade,
            ..BenettinConfig::default()
        };
        for &n in &self.n {
            let model = self.build_model(n)?;
            for &eps in &self.eps {
                let (mut t_max, rule, estimate) = match self.t_max {
                    Some(t) => (t, TMaxRule::Explicit, self.expected_chi),
                    None => {
                        let (chi, rule) = chi_estimate(&model, eps, &benettin, self.seed)?;
                        let t = if chi > 0.0 { MIN_T_MAX.max(T_MAX_FACTOR / chi) } else { MIN_T_MAX };
                        (t, rule, Some(chi))
                    }
                };
                let mut flags = Vec::new();
                if let Some(cap) = self.t_max_cap {
                    if t_max > cap {
                        t_max = cap;
                        flags.push("t-max-capped".to_string());
                    }
                }
                if let Some(chi) = self.expected_chi {
                    if t_max < 100.0 / chi {
                        flags.push("t-max-short".to_string());
                    }
                }
                let mut ens = EnsembleConfig::new(benettin, self.ensemble, self.seed, t_max);
                ens.xi_seed = self.xi_seed.unwrap_or(self.seed);
                specs.push(RunSpec::new(model.clone(), eps, ens, rule, estimate, flags));
            }
        }
        Ok(specs)
    }
}

/// Default step: the finer step for the models with sextic leading terms.
pub fn default_dt(model: &str) -> f64 {
    match model.parse::<Preset>() {
        Ok(Preset::GammaT | Preset::PureDelta) => FINE_DT,
        _ => DEFAULT_DT,
    }
}

/// Small-`ε` table when it applies, else a short pilot ensemble.
fn chi_estimate(model: &ModelSpec, eps: f64, benettin: &BenettinConfig, seed: u64) -> Result<(f64, TMaxRule), HarnessError> {
    if let Ok(a) = asymptotic_chi(model, eps) {
        return Ok((a.chi, TMaxRule::Asymptotic));
    }
    let cfg = EnsembleConfig::new(*benettin, PILOT_MEMBERS, seed, PILOT_T_MAX);
    let pilot = ensemble_chi(model, eps, &cfg)?;
    Ok((pilot.final_chi(), TMaxRule::Pilot))
}

/// One `(model, N, eps)` ensemble, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: ModelSpec,
    pub eps: f64,
    pub ensemble: EnsembleConfig,
    pub t_max_rule: TMaxRule,
    pub chi_estimate: Option<f64>,
    /// Flags known before running.
    pub flags: Vec<String>,
    /// SHA-256 over model, `eps` and ensemble settings.
    pub config_hash: String,
}

#[derive(Serialize)]
struct HashKey<'a> {
    model: &'a ModelSpec,
    eps: f64,
    ensemble: &'a EnsembleConfig,
}

impl RunSpec {
    pub fn new(
        model: ModelSpec,
        eps: f64,
        ensemble: EnsembleConfig,
        t_max_rule: TMaxRule,
        chi_estimate: Option<f64>,
        flags: Vec<String>,
    ) -> Self {
        let key = HashKey {
            model: &model,
            eps,
            ensemble: &ensemble,
        };
        let config_hash = sha256_hex(&serde_json::to_vec(&key).expect("hash key serializes"));
        RunSpec {
            model,
            eps,
            ensemble,
            t_max_rule,
            chi_estimate,
            flags,
            config_hash,
        }
    }

    /// Run with an explicit `t_max`.
    pub fn explicit(model: ModelSpec, eps: f64, ensemble: EnsembleConfig) -> Self {
        Self::new(model, eps, ensemble, TMaxRule::Explicit, None, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.model.n_springs()
    }

    pub fn dt(&self) -> f64 {
        self.ensemble.benettin.dt
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
