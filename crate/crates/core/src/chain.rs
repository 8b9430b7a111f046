//! Chain state and the reference (unfused) evaluations of energy, force,
//! linearized force and the configuration-space Laplacian.
//!
//! Bonds are indexed `0..N` here; bond `i` joins particles `i` and `i + 1`
//! in the 1-based notation `r_{i+1} = q_{i+1} − q_i`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Boundary, ModelError, ModelSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("state has {got} particles, model expects {expected}")]
    Shape { expected: usize, got: usize },
    #[error("state boundary {state:?} does not match model boundary {model:?}")]
    Boundary { state: Boundary, model: Boundary },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    n_springs: usize,
    boundary: Boundary,
}

impl ChainState {
    pub fn rest(model: &ModelSpec) -> Self {
        let n = model.n_particles();
        ChainState {
            q: vec![0.0; n],
            p: vec![0.0; n],
            n_springs: model.n_springs(),
            boundary: model.boundary(),
        }
    }

    pub fn new(model: &ModelSpec, q: Vec<f64>, p: Vec<f64>) -> Result<Self, ChainError> {
        let expected = model.n_particles();
        for got in [q.len(), p.len()] {
            if got != expected {
                return Err(ChainError::Shape { expected, got });
            }
        }
        Ok(ChainState {
            q,
            p,
            n_springs: model.n_springs(),
            boundary: model.boundary(),
        })
    }

    pub fn n_springs(&self) -> usize {
        self.n_springs
    }

    pub fn n_particles(&self) -> usize {
        self.q.len()
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }

    /// Largest `|q_i|` or `|p_i|`; NaN if any entry is NaN.
    pub fn max_abs(&self) -> f64 {
        self.q
            .iter()
            .chain(&self.p)
            .fold(0.0, |m: f64, &x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x.abs()) })
    }

    /// Multiplies both `q` and `p` by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut s = self.clone();
        s.q.iter_mut().chain(s.p.iter_mut()).for_each(|x| *x *= lambda);
        s
    }

    pub(crate) fn check(&self, model: &ModelSpec) -> Result<(), ChainError> {
        if self.boundary != model.boundary() {
            return Err(ChainError::Boundary {
                state: self.boundary,
                model: model.boundary(),
            });
        }
        if self.n_springs != model.n_springs() || self.q.len() != model.n_particles() {
            return Err(ChainError::Shape {
                expected: model.n_particles(),
                got: self.q.len(),
            });
        }
        Ok(())
    }
}

/// Variation `(δq, δp)` carried by the linearized flow. Its norm is the
/// Euclidean norm of the concatenated vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentState {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
}

impl TangentState {
    pub fn zeros(n_particles: usize) -> Self {
        TangentState {
            dq: vec![0.0; n_particles],
            dp: vec![0.0; n_particles],
        }
    }

    /// Isotropic random unit vector.
    pub fn random_unit<R: Rng + ?Sized>(n_particles: usize, rng: &mut R) -> Self {
        let mut t = TangentState {
            dq: (0..n_particles).map(|_| rng.sample(StandardNormal)).collect(),
            dp: (0..n_particles).map(|_| rng.sample(StandardNormal)).collect(),
        };
        t.normalize();
        t
    }

    pub fn norm(&self) -> f64 {
        self.dq
            .iter()
            .chain(&self.dp)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales to unit norm and returns the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        let inv = 1.0 / n;
        self.dq
            .iter_mut()
            .chain(self.dp.iter_mut())
            .for_each(|x| *x *= inv);
        n
    }

    pub fn is_finite(&self) -> bool {
        self.dq.iter().chain(&self.dp).all(|x| x.is_finite())
    }
}

/// Bond strains `r_i = q_i − q_{i−1}` with the boundary closure.
pub fn bond_strains(state: &ChainState) -> Vec<f64> {
    let mut r = vec![0.0; state.n_springs];
    fill_bond_strains(&state.q, state.boundary, &mut r);
    r
}

pub(crate) fn fill_bond_strains(q: &[f64], boundary: Boundary, r: &mut [f64]) {
    let m = q.len();
    r[0] = match boundary {
        Boundary::FixedEnds => q[0],
        Boundary::Periodic => q[0] - q[m - 1],
    };
    for ((ri, &qi), &qprev) in r[1..m].iter_mut().zip(&q[1..]).zip(&q[..m - 1]) {
        *ri = qi - qprev;
    }
    if boundary == Boundary::FixedEnds {
        r[m] = -q[m - 1];
    }
}

/// `(dq_{j} − dq_{j−1})` per bond with the same closure as the strains.
fn bond_differences(dq: &[f64], boundary: Boundary, n_springs: usize) -> Vec<f64> {
    let mut d = vec![0.0; n_springs];
    fill_bond_strains(dq, boundary, &mut d);
    d
}

pub fn kinetic_energy(state: &ChainState) -> f64 {
    0.5 * state.p.iter().map(|p| p * p).sum::<f64>()
}

pub fn potential_energy(model: &ModelSpec, state: &ChainState) -> Result<f64, ChainError> {
    state.check(model)?;
    let r = bond_strains(state);
    let mut v = 0.0;
    for (i, &ri) in r.iter().enumerate() {
        v += model.potential_value(i, ri)?;
    }
    Ok(v)
}

/// `H = Σ p²/2 + Σ V(r_i)`.
pub fn total_energy(model: &ModelSpec, state: &ChainState) -> Result<f64, ChainError> {
    Ok(kinetic_energy(state) + potential_energy(model, state)?)
}

/// `H / N` with `N` the number of springs, not of moving particles.
pub fn specific_energy(model: &ModelSpec, state: &ChainState) -> Result<f64, ChainError> {
    Ok(total_energy(model, state)? / model.n_springs() as f64)
}

/// `−∂H/∂q_j = V′(r_{j+1}) − V′(r_j)`.
pub fn force(model: &ModelSpec, state: &ChainState) -> Result<Vec<f64>, ChainError> {
    state.check(model)?;
    let r = bond_strains(state);
    let d1: Vec<f64> = r
        .iter()
        .enumerate()
        .map(|(i, &ri)| model.potential_d1(i, ri))
        .collect::<Result<_, _>>()?;
    Ok(bond_divergence(&d1, state.boundary))
}

/// `out_j = b_{j+1} − b_j` over particles, `b` indexed by bond.
fn bond_divergence(b: &[f64], boundary: Boundary) -> Vec<f64> {
    let n = b.len();
    match boundary {
        Boundary::FixedEnds => (0..n - 1).map(|j| b[j + 1] - b[j]).collect(),
        Boundary::Periodic => (0..n).map(|j| b[(j + 1) % n] - b[j]).collect(),
    }
}

/// Linearized force `δF = −∇²𝒱(q)·δq`; symmetric in its tangent argument.
/// `(δF)_j = V″(r_{j+1})(δq_{j+1} − δq_j) − V″(r_j)(δq_j − δq_{j−1})`.
pub fn hessian_action(
    model: &ModelSpec,
    state: &ChainState,
    dq: &[f64],
) -> Result<Vec<f64>, ChainError> {
    state.check(model)?;
    if dq.len() != state.q.len() {
        return Err(ChainError::Shape {
            expected: state.q.len(),
            got: dq.len(),
        });
    }
    let r = bond_strains(state);
    let dr = bond_differences(dq, state.boundary, state.n_springs);
    let flux: Vec<f64> = r
        .iter()
        .zip(&dr)
        .enumerate()
        .map(|(i, (&ri, &dri))| model.potential_d2(i, ri).map(|k| k * dri))
        .collect::<Result<_, _>>()?;
    Ok(bond_divergence(&flux, state.boundary))
}

/// Trace of the Hessian of `𝒱(q) = Σ V_i(r_i)`: `2 Σ V″(r_i) − V″(r_1) − V″(r_N)`
/// with fixed ends, `2 Σ V″(r_i)` with periodic closure.
pub fn laplacian_potential(model: &ModelSpec, state: &ChainState) -> Result<f64, ChainError> {
    state.check(model)?;
    Ok(laplacian_from_strains(model, &bond_strains(state))?)
}

/// [`laplacian_potential`] evaluated directly on a strain vector.
pub fn laplacian_from_strains(model: &ModelSpec, r: &[f64]) -> Result<f64, ModelError> {
    let bulk = laplacian_bulk_from_strains(model, r)?;
    Ok(match model.boundary() {
        Boundary::FixedEnds => {
            let n = r.len();
            bulk - model.potential_d2(0, r[0])? - model.potential_d2(n - 1, r[n - 1])?
        }
        Boundary::Periodic => bulk,
    })
}

/// Bulk part `2 Σ V″(r_i)`, without the fixed-end corrections.
pub fn laplacian_bulk_from_strains(model: &ModelSpec, r: &[f64]) -> Result<f64, ModelError> {
    let mut s = 0.0;
    for (i, &ri) in r.iter().enumerate() {
        s += model.potential_d2(i, ri)?;
    }
    Ok(2.0 * s)
}
