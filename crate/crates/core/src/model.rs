//! The FPU model catalog.
//!
//! Every model is a chain of unit masses coupled by nearest-neighbour springs
//! with potential `V_i(r)`, harmonic at the origin:
//!
//! ```text
//! polynomial:  V_i(r) = r²/2 + α_i r³/3 + β_i r⁴/4 + γ_i r⁵/5 + δ_i r⁶/6
//! Toda:        V(r)   = (e^{cr} − 1 − cr) / c²
//! ```
//!
//! Coefficients are stored per site for every order, so constant models are
//! just constant sequences.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cubic coefficient used by every Toda-hierarchy preset. Other constants
/// follow from it: `c = 2α`, `β_T = 2α²/3`, `γ_T = α³/3`, `δ_T = 2α⁴/15`.
pub const ALPHA: f64 = -1.0;
pub const TODA_C: f64 = 2.0 * ALPHA;
pub const BETA_T: f64 = 2.0 * ALPHA * ALPHA / 3.0;
pub const GAMMA_T: f64 = ALPHA * ALPHA * ALPHA / 3.0;
pub const DELTA_T: f64 = 2.0 * ALPHA * ALPHA * ALPHA * ALPHA / 15.0;

/// Sextic coefficient of the `gamma-T` preset; any positive value other than
/// `DELTA_T` keeps the model stable and off the Toda curve.
pub const GAMMA_T_DELTA: f64 = 0.5;

/// Quartic coefficient shared by the variable-α presets.
pub const VAR_ALPHA_BETA: f64 = 2.0;

/// Seed stream reserved for drawing variable-α site patterns.
const ALPHA_PATTERN_STREAM: u64 = 0xa1fa;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("chain needs at least 2 springs, got {0}")]
    TooShort(usize),
    #[error("coefficient `{name}` has length {got}, expected {expected}")]
    Length {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("site {site}: potential has no single minimum (need δ > 0, or δ = γ = 0 and β > 0, or a purely harmonic site)")]
    Unstable { site: usize },
    #[error("non-finite coefficient at site {site}")]
    NonFinite { site: usize },
    #[error("Toda stiffness c must be finite and non-zero, got {0}")]
    BadTodaC(f64),
    #[error("potential overflow at r = {r}")]
    Overflow { r: f64 },
    #[error("unknown model preset `{0}`")]
    UnknownPreset(String),
    #[error("override `{0}` does not apply to this model family")]
    BadOverride(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Linear,
    Toda,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// `q_0 = q_N = 0`; `N − 1` moving particles.
    #[default]
    FixedEnds,
    /// `q_0 ≡ q_N`; `N` moving particles.
    Periodic,
}

impl Boundary {
    /// Number of moving particles for a chain of `n_springs` bonds.
    pub fn n_particles(self, n_springs: usize) -> usize {
        match self {
            Boundary::FixedEnds => n_springs - 1,
            Boundary::Periodic => n_springs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Linear,
    Toda,
    AlphaBeta,
    #[serde(rename = "beta-T")]
    BetaT,
    #[serde(rename = "gamma-T")]
    GammaT,
    GammaDelta,
    PureDelta,
    PureBeta,
    VarAlphaA,
    VarAlphaB,
    VarAlphaC,
    VarAlphaD,
}

impl Preset {
    pub const ALL: [Preset; 12] = [
        Preset::Linear,
        Preset::Toda,
        Preset::AlphaBeta,
        Preset::BetaT,
        Preset::GammaT,
        Preset::GammaDelta,
        Preset::PureDelta,
        Preset::PureBeta,
        Preset::VarAlphaA,
        Preset::VarAlphaB,
        Preset::VarAlphaC,
        Preset::VarAlphaD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Linear => "linear",
            Preset::Toda => "toda",
            Preset::AlphaBeta => "alpha-beta",
            Preset::BetaT => "beta-T",
            Preset::GammaT => "gamma-T",
            Preset::GammaDelta => "gamma-delta",
            Preset::PureDelta => "pure-delta",
            Preset::PureBeta => "pure-beta",
            Preset::VarAlphaA => "var-alpha-a",
            Preset::VarAlphaB => "var-alpha-b",
            Preset::VarAlphaC => "var-alpha-c",
            Preset::VarAlphaD => "var-alpha-d",
        }
    }

    /// `(mean, half-spread)` of the two α values of a variable-α preset.
    pub fn alpha_pattern(self) -> Option<(f64, f64)> {
        match self {
            Preset::VarAlphaA => Some((0.0, 1.0)),
            Preset::VarAlphaB => Some((0.5, 1.0)),
            Preset::VarAlphaC => Some((1.0, 0.5)),
            Preset::VarAlphaD => Some((1.0, 1.0 / 3.0)),
            _ => None,
        }
    }

    /// Uniform `(α, β, γ, δ)` of the polynomial presets.
    fn uniform_coefficients(self) -> Option<[f64; 4]> {
        Some(match self {
            Preset::AlphaBeta => [ALPHA, 2.0, 0.0, 0.0],
            Preset::BetaT => [ALPHA, BETA_T, 0.0, 0.0],
            Preset::GammaT => [ALPHA, BETA_T, GAMMA_T, GAMMA_T_DELTA],
            Preset::GammaDelta => [0.0, 0.0, 1.0, 0.8],
            Preset::PureDelta => [0.0, 0.0, 0.0, 1.0],
            Preset::PureBeta => [0.0, 1.0, 0.0, 0.0],
            _ => return None,
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownPreset(s.to_string()))
    }
}

/// Constant coefficient overrides applied on top of a preset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub toda_c: Option<f64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Overrides::default()
    }
}

/// Potential of a single bond, cheap to copy into hot loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SitePotential {
    Poly {
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
    },
    Toda {
        c: f64,
    },
}

impl SitePotential {
    pub const HARMONIC: SitePotential = SitePotential::Poly {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
        delta: 0.0,
    };

    /// `V(r)` without overflow checking.
    #[inline]
    pub fn value_unchecked(self, r: f64) -> f64 {
        match self {
            SitePotential::Poly {
                alpha,
                beta,
                gamma,
                delta,
            } => {
                let r2 = r * r;
                r2 * (0.5
                    + r * (alpha / 3.0 + r * (beta / 4.0 + r * (gamma / 5.0 + r * (delta / 6.0)))))
            }
            SitePotential::Toda { c } => expm1_minus_x(c * r) / (c * c),
        }
    }

    /// `(V′(r), V″(r))` without overflow checking.
    #[inline(always)]
    pub fn d1_d2_unchecked(self, r: f64) -> (f64, f64) {
        match self {
            SitePotential::Poly {
                alpha,
                beta,
                gamma,
                delta,
            } => {
                let d1 = r * (1.0 + r * (alpha + r * (beta + r * (gamma + r * delta))));
                let d2 =
                    1.0 + r * (2.0 * alpha + r * (3.0 * beta + r * (4.0 * gamma + r * 5.0 * delta)));
                (d1, d2)
            }
            SitePotential::Toda { c } => {
                let em1 = (c * r).exp_m1();
                (em1 / c, em1 + 1.0)
            }
        }
    }

    pub fn value(self, r: f64) -> Result<f64, ModelError> {
        finite(self.value_unchecked(r), r)
    }

    pub fn d1(self, r: f64) -> Result<f64, ModelError> {
        finite(self.d1_d2_unchecked(r).0, r)
    }

    pub fn d2(self, r: f64) -> Result<f64, ModelError> {
        finite(self.d1_d2_unchecked(r).1, r)
    }
}

fn finite(v: f64, r: f64) -> Result<f64, ModelError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::Overflow { r })
    }
}

/// `e^x − 1 − x` without cancellation near `x = 0`.
pub fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Horner on x²(1/2! + x/3! + ... + x^14/16!); truncation < 1e-17 relative.
        let mut acc = 0.0;
        let mut k = 16u32;
        while k >= 2 {
            acc = acc * x + 1.0 / factorial(k);
            k -= 1;
        }
        acc * x * x
    } else {
        x.exp_m1() - x
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// A fully specified chain model: family, per-site coefficients, boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    family: Family,
    toda_c: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    delta: Vec<f64>,
    boundary: Boundary,
    preset_name: Option<Preset>,
    /// Seed of the site pattern, for the variable-α presets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pattern_seed: Option<u64>,
}

impl ModelSpec {
    pub fn linear(n_springs: usize) -> Result<Self, ModelError> {
        let mut m = Self::polynomial(
            vec![0.0; n_springs],
            vec![0.0; n_springs],
            vec![0.0; n_springs],
            vec![0.0; n_springs],
        )?;
        m.family = Family::Linear;
        Ok(m)
    }

    pub fn toda(c: f64, n_springs: usize) -> Result<Self, ModelError> {
        if !c.is_finite() || c == 0.0 {
            return Err(ModelError::BadTodaC(c));
        }
        let mut m = Self::linear(n_springs)?;
        m.family = Family::Toda;
        m.toda_c = c;
        Ok(m)
    }

    /// General polynomial model from per-site coefficient sequences.
    pub fn polynomial(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        gamma: Vec<f64>,
        delta: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = alpha.len();
        if n < 2 {
            return Err(ModelError::TooShort(n));
        }
        for (name, seq) in [("beta", &beta), ("gamma", &gamma), ("delta", &delta)] {
            if seq.len() != n {
                return Err(ModelError::Length {
                    name,
                    expected: n,
                    got: seq.len(),
                });
            }
        }
        let m = ModelSpec {
            family: Family::Polynomial,
            toda_c: TODA_C,
            alpha,
            beta,
            gamma,
            delta,
            boundary: Boundary::FixedEnds,
            preset_name: None,
            pattern_seed: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// Uniform polynomial model.
    pub fn uniform(
        n_springs: usize,
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
    ) -> Result<Self, ModelError> {
        Self::polynomial(
            vec![alpha; n_springs],
            vec![beta; n_springs],
            vec![gamma; n_springs],
            vec![delta; n_springs],
        )
    }

    /// Builds a named preset with fixed ends. `seed` only matters for the
    /// variable-α presets, whose signs are drawn from a seeded fair coin per site.
    pub fn preset(preset: Preset, n_springs: usize, seed: u64) -> Result<Self, ModelError> {
        let mut m = match preset {
            Preset::Linear => Self::linear(n_springs)?,
            Preset::Toda => Self::toda(TODA_C, n_springs)?,
            p if p.alpha_pattern().is_some() => {
                let (mean, spread) = p.alpha_pattern().unwrap_or_default();
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                rng.set_stream(ALPHA_PATTERN_STREAM);
                let alpha = (0..n_springs)
                    .map(|_| {
                        if rng.next_u64() & 1 == 0 {
                            mean + spread
                        } else {
                            mean - spread
                        }
                    })
                    .collect();
                let mut m = Self::polynomial(
                    alpha,
                    vec![VAR_ALPHA_BETA; n_springs],
                    vec![0.0; n_springs],
                    vec![0.0; n_springs],
                )?;
                m.pattern_seed = Some(seed);
                m
            }
            p => {
                let [a, b, g, d] = p.uniform_coefficients().unwrap_or_default();
                Self::uniform(n_springs, a, b, g, d)?
            }
        };
        m.preset_name = Some(preset);
        Ok(m)
    }

    /// Looks up a preset by name.
    pub fn named(name: &str, n_springs: usize, seed: u64) -> Result<Self, ModelError> {
        Self::preset(name.parse()?, n_springs, seed)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Replaces coefficients by constants. Overriding any coefficient of a
    /// linear model turns it into a polynomial model.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self, ModelError> {
        if o.is_empty() {
            return Ok(self);
        }
        match self.family {
            Family::Toda => {
                if o.alpha.or(o.beta).or(o.gamma).or(o.delta).is_some() {
                    return Err(ModelError::BadOverride("alpha/beta/gamma/delta"));
                }
                if let Some(c) = o.toda_c {
                    if !c.is_finite() || c == 0.0 {
                        return Err(ModelError::BadTodaC(c));
                    }
                    self.toda_c = c;
                }
            }
            Family::Linear | Family::Polynomial => {
                if o.toda_c.is_some() {
                    return Err(ModelError::BadOverride("toda_c"));
                }
                let n = self.n_springs();
                for (seq, v) in [
                    (&mut self.alpha, o.alpha),
                    (&mut self.beta, o.beta),
                    (&mut self.gamma, o.gamma),
                    (&mut self.delta, o.delta),
                ] {
                    if let Some(v) = v {
                        *seq = vec![v; n];
                    }
                }
                self.family = if self.is_harmonic() {
                    Family::Linear
                } else {
                    Family::Polynomial
                };
                if o.alpha.is_some() {
                    self.pattern_seed = None;
                }
                self.validate()?;
            }
        }
        Ok(self)
    }

    fn is_harmonic(&self) -> bool {
        [&self.alpha, &self.beta, &self.gamma, &self.delta]
            .iter()
            .all(|s| s.iter().all(|&x| x == 0.0))
    }

    fn validate(&self) -> Result<(), ModelError> {
        for i in 0..self.n_springs() {
            let (a, b, g, d) = (self.alpha[i], self.beta[i], self.gamma[i], self.delta[i]);
            if ![a, b, g, d].iter().all(|x| x.is_finite()) {
                return Err(ModelError::NonFinite { site: i });
            }
            let stable = d > 0.0
                || (d == 0.0 && g == 0.0 && b > 0.0)
                || (a == 0.0 && b == 0.0 && g == 0.0 && d == 0.0);
            if !stable {
                return Err(ModelError::Unstable { site: i });
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn preset_name(&self) -> Option<Preset> {
        self.preset_name
    }

    pub fn pattern_seed(&self) -> Option<u64> {
        self.pattern_seed
    }

    pub fn toda_c(&self) -> f64 {
        self.toda_c
    }

    /// Number of springs `N`; the specific energy is `H / N`.
    pub fn n_springs(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_particles(&self) -> usize {
        self.boundary.n_particles(self.n_springs())
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn is_toda(&self) -> bool {
        self.family == Family::Toda
    }

    /// Potential of bond `i` (0-based, `r_{i+1}` in 1-based notation).
    #[inline]
    pub fn site(&self, i: usize) -> SitePotential {
        match self.family {
            Family::Toda => SitePotential::Toda { c: self.toda_c },
            _ => SitePotential::Poly {
                alpha: self.alpha[i],
                beta: self.beta[i],
                gamma: self.gamma[i],
                delta: self.delta[i],
            },
        }
    }

    /// `V_i(r)`, reporting overflow instead of saturating.
    pub fn potential_value(&self, i: usize, r: f64) -> Result<f64, ModelError> {
        self.site(i).value(r)
    }

    pub fn potential_d1(&self, i: usize, r: f64) -> Result<f64, ModelError> {
        self.site(i).d1(r)
    }

    pub fn potential_d2(&self, i: usize, r: f64) -> Result<f64, ModelError> {
        self.site(i).d2(r)
    }

    /// Short label used in output paths and summaries.
    pub fn label(&self) -> String {
        match self.preset_name {
            Some(p) => p.name().to_string(),
            None => match self.family {
                Family::Linear => "linear".into(),
                Family::Toda => "toda-custom".into(),
                Family::Polynomial => "custom".into(),
            },
        }
    }
}
