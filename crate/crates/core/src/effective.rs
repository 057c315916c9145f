//! Adiabatically eliminated chain dynamics.
//!
//! After the cavity photon and the excited levels are eliminated, a transit
//! of the whole chain acts on the single-excitation manifold as
//! `exp(-i M)`, where `M` collects the accumulated pairwise exchange action
//! of every atom pair. Lengths are in units of `w`, velocities in units of
//! `v0` (see [`crate::units`]).

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm tolerance for a [`ChainState`].
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Gaussian cavity profile `g(z) / g0 = exp(-z^2)`.
pub fn coupling_profile(z: f64) -> f64 {
    (-z * z).exp()
}

fn check_velocity(v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("velocity must be > 0, got {v}")))
    }
}

/// Asymptotic pair action `sqrt(pi/2) exp(-d^2/2) / v` for two atoms moving
/// together at velocity `v` with separation `d`.
pub fn theta(v: f64, d: f64) -> Result<f64> {
    check_velocity(v)?;
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::domain(format!("distance must be >= 0, got {d}")));
    }
    Ok(FRAC_PI_2.sqrt() / v * (-0.5 * d * d).exp())
}

/// Pair action for atoms on independent trajectories `z_a + v_a t`,
/// `z_b + v_b t`: the closed form of
/// `∫ exp(-(z_a + v_a t)^2) exp(-(z_b + v_b t)^2) dt`.
pub fn theta_pair(z_a: f64, v_a: f64, z_b: f64, v_b: f64) -> Result<f64> {
    check_velocity(v_a)?;
    check_velocity(v_b)?;
    if v_a == v_b {
        return theta(v_a, (z_a - z_b).abs());
    }
    let s = v_a * v_a + v_b * v_b;
    let cross = z_a * v_b - z_b * v_a;
    Ok(PI.sqrt() * (-cross * cross / s).exp() / s.sqrt())
}

/// Velocity-only action `sqrt(pi/8) / v`, equal to `theta(v, 0) / 2`.
pub fn chi(v: f64) -> Result<f64> {
    check_velocity(v)?;
    Ok((PI / 8.0).sqrt() / v)
}

/// Initial coordinates and velocities of the chain. Atom 1 (index 0) has the
/// smallest coordinate, i.e. it is the last atom to cross the cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    positions: Vec<f64>,
    velocities: Vec<f64>,
}

impl ChainSpec {
    /// Coinciding positions are accepted so the `d -> 0` limit can be
    /// evaluated; decreasing ones are not.
    pub fn new(positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if positions.len() != velocities.len() {
            return Err(Error::domain(format!(
                "{} positions but {} velocities",
                positions.len(),
                velocities.len()
            )));
        }
        if positions.len() < 2 {
            return Err(Error::domain("a chain needs at least two atoms"));
        }
        if positions.iter().any(|z| !z.is_finite()) {
            return Err(Error::domain("positions must be finite"));
        }
        if let Some(i) = positions.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::domain(format!(
                "positions must be non-decreasing (atom {} at {} precedes atom {} at {})",
                i + 1,
                positions[i],
                i + 2,
                positions[i + 1]
            )));
        }
        for &v in &velocities {
            check_velocity(v)?;
        }
        Ok(ChainSpec {
            positions,
            velocities,
        })
    }

    /// Equally spaced chain starting at the origin.
    pub fn uniform(n_atoms: usize, v: f64, d: f64) -> Result<Self> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::domain(format!("spacing must be >= 0, got {d}")));
        }
        let positions = (0..n_atoms).map(|i| i as f64 * d).collect();
        Self::new(positions, vec![v; n_atoms])
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }
}

/// Real symmetric action matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    entries: DMatrix<f64>,
}

impl CouplingMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n != entries.ncols() || n < 1 {
            return Err(Error::domain(
                "coupling matrix must be square and non-empty",
            ));
        }
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(Error::domain(format!("non-zero diagonal at {i}")));
            }
            for j in 0..i {
                if entries[(i, j)] != entries[(j, i)] || !entries[(i, j)].is_finite() {
                    return Err(Error::domain(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(CouplingMatrix { entries })
    }

    pub fn zeros(n: usize) -> Self {
        CouplingMatrix {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Multiplies every action by `factor`, e.g. the interaction sign or the
    /// square of a mean-coupling rescaling.
    pub fn scaled(&self, factor: f64) -> Self {
        CouplingMatrix {
            entries: &self.entries * factor,
        }
    }
}

pub fn coupling_matrix(chain: &ChainSpec) -> Result<CouplingMatrix> {
    let n = chain.n_atoms();
    let (z, v) = (chain.positions(), chain.velocities());
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let t = theta_pair(z[i], v[i], z[j], v[j])?;
            m[(i, j)] = t;
            m[(j, i)] = t;
        }
    }
    Ok(CouplingMatrix { entries: m })
}

/// Single-excitation amplitudes `C_1..C_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    amplitudes: Vec<Complex64>,
}

impl ChainState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::domain("empty state"));
        }
        let norm = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!("state norm {norm} differs from 1")));
        }
        Ok(ChainState { amplitudes })
    }

    /// Rescales to unit norm; fails only for the zero vector.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::domain("cannot normalize a zero state"));
        }
        for c in &mut amplitudes {
            *c /= norm;
        }
        Ok(ChainState { amplitudes })
    }

    /// The initial product state `|1>'`.
    pub fn initial(n: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        ChainState { amplitudes }
    }

    pub fn n(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm()).collect()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &ChainState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// `exp(-i M) |1>'` through the eigendecomposition `M = V diag(λ) V^T`.
pub fn propagate(m: &CouplingMatrix) -> ChainState {
    let n = m.n();
    let eig = SymmetricEigen::new(m.entries.clone());
    let v = &eig.eigenvectors;
    let weights: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(v[(0, k)], -eig.eigenvalues[k]))
        .collect();
    let amplitudes = (0..n)
        .map(|i| (0..n).map(|k| weights[k] * v[(i, k)]).sum())
        .collect();
    ChainState { amplitudes }
}

/// Final state of a chain that has fully crossed the cavity.
pub fn final_state(chain: &ChainSpec) -> Result<ChainState> {
    Ok(propagate(&coupling_matrix(chain)?))
}
