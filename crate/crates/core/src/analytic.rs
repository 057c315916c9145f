//! Closed-form final states, target W states and the velocities at which a
//! chain reproduces them.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::effective::{theta, ChainState};
use crate::error::{Error, Result};
use crate::metrics::fidelity;

/// Sign of the relative phase on `|1>'` for N = 2 and N = 3 targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchSelection {
    Plus,
    Minus,
    Both,
}

impl BranchSelection {
    fn admits(self, b: Branch) -> bool {
        match self {
            BranchSelection::Both => true,
            BranchSelection::Plus => b == Branch::Plus,
            BranchSelection::Minus => b == Branch::Minus,
        }
    }
}

/// `(e^{i phi} |1>' + |2>' + ... + |N>') / sqrt(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    n: usize,
    phase: f64,
}

impl ReferenceState {
    /// W state of the given size; the branch matters for N = 2 and 3 only,
    /// larger chains use the phase `pi`.
    pub fn w(n: usize, branch: Branch) -> Result<Self> {
        let phase = match n {
            0 | 1 => return Err(Error::domain(format!("W state needs N >= 2, got {n}"))),
            2 => branch.sign() * FRAC_PI_2,
            3 => branch.sign() * 2.0 * PI / 3.0,
            _ => PI,
        };
        Ok(ReferenceState { n, phase })
    }

    pub fn w_n(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::domain(format!(
                "the phase-pi reference is defined for N >= 4, got {n}"
            )));
        }
        Ok(ReferenceState { n, phase: PI })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        let s = 1.0 / (self.n as f64).sqrt();
        let mut a = vec![Complex64::new(s, 0.0); self.n];
        a[0] = Complex64::from_polar(s, self.phase);
        a
    }

    pub fn to_state(&self) -> ChainState {
        ChainState::normalized(self.amplitudes()).expect("reference states are non-zero")
    }
}

/// Two-atom final state `(cos θ, -i sin θ)`.
pub fn state_n2(theta: f64) -> ChainState {
    ChainState::normalized(vec![
        Complex64::new(theta.cos(), 0.0),
        Complex64::new(0.0, -theta.sin()),
    ])
    .expect("non-zero for every theta")
}

/// Three-atom final state for a uniform chain with `xi = exp(-d^2/2)`.
pub fn state_n3(chi: f64, xi: f64) -> Result<ChainState> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::domain(format!("xi must lie in (0, 1], got {xi}")));
    }
    let i = Complex64::i();
    let xi3 = xi.powi(3);
    let root = (8.0 + xi3 * xi3).sqrt();
    let rotor = (i * (2.0 * xi * chi * root)).exp();
    let lambda_minus = rotor - 1.0;
    let lambda_plus = rotor + 1.0;
    // `kappa` here is a phase, not the cavity loss rate
    let kappa = xi * chi * (3.0 * xi3 + root);
    let zeta = xi * chi * (xi3 + root);
    let global = (-i * zeta).exp();
    let side = 2.0 * (i * kappa).exp();

    let c1 = (-xi3 * lambda_minus + root * (lambda_plus + side)) / (4.0 * root) * global;
    let c2 = -lambda_minus / root * global;
    let c3 = (-xi3 * lambda_minus + root * (lambda_plus - side)) / (4.0 * root) * global;
    ChainState::normalized(vec![c1, c2, c3])
}

/// Final state of N coinciding atoms, `C_k = [1 + (δ_k1 N - 1) e^{i 2 N χ}] / N`
/// (global phase dropped).
pub fn limit_state_d0(n_atoms: usize, chi: f64) -> Result<ChainState> {
    if n_atoms < 2 {
        return Err(Error::domain(format!("need N >= 2, got {n_atoms}")));
    }
    let n = n_atoms as f64;
    let rotor = Complex64::from_polar(1.0, 2.0 * n * chi);
    let first = (1.0 + (n - 1.0) * rotor) / n;
    let rest = (1.0 - rotor) / n;
    let mut amplitudes = vec![rest; n_atoms];
    amplitudes[0] = first;
    ChainState::normalized(amplitudes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagicPoint {
    /// Order `n` of the condition.
    pub order: u32,
    /// Sub-index `m` (N = 3 only).
    pub sub: Option<u32>,
    /// Velocity in units of `v0`.
    pub velocity: f64,
    /// `θ(v, d)` for N = 2, `χ(v)` otherwise.
    pub action: f64,
    /// Which W branch is reached; `None` for the phase-pi family.
    pub branch: Option<Branch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagicVelocityFamily {
    pub n_atoms: usize,
    pub d: f64,
    /// Sorted by decreasing velocity.
    pub points: Vec<MagicPoint>,
}

impl MagicVelocityFamily {
    pub fn velocities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.velocity).collect()
    }
}

/// Velocities that turn `|1>'` into a W state (or, for N >= 5, its closest
/// d = 0 approximation), for the first `count` orders.
///
/// Every velocity comes from inverting `θ` (N = 2) or `χ = sqrt(pi/8)/v`
/// (N >= 3) at the required action.
pub fn magic_velocities(
    n_atoms: usize,
    d: f64,
    branch: BranchSelection,
    count: u32,
) -> Result<MagicVelocityFamily> {
    if n_atoms < 2 {
        return Err(Error::domain(format!("need N >= 2, got {n_atoms}")));
    }
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::domain(format!("distance must be >= 0, got {d}")));
    }
    if n_atoms >= 3 && d > 0.0 {
        return Err(Error::Unsupported(format!(
            "exact W_{n_atoms} conditions exist only at d = 0 (got d = {d})"
        )));
    }
    let chi_unit = (PI / 8.0).sqrt();
    let mut points = Vec::new();
    match n_atoms {
        2 => {
            // θ at unit velocity
            let theta_1 = theta(1.0, d)?;
            for n in 0..count {
                let action = f64::from(2 * n + 1) * FRAC_PI_4;
                let b = if n % 2 == 0 {
                    Branch::Plus
                } else {
                    Branch::Minus
                };
                if branch.admits(b) {
                    points.push(MagicPoint {
                        order: n,
                        sub: None,
                        velocity: theta_1 / action,
                        action,
                        branch: Some(b),
                    });
                }
            }
        }
        3 => {
            for n in 0..count {
                for (m, b) in [(1, Branch::Plus), (2, Branch::Minus)] {
                    if branch.admits(b) {
                        let action = f64::from(3 * n + m) * PI / 9.0;
                        points.push(MagicPoint {
                            order: n,
                            sub: Some(m),
                            velocity: chi_unit / action,
                            action,
                            branch: Some(b),
                        });
                    }
                }
            }
        }
        _ => {
            for n in 0..count {
                let action = f64::from(2 * n + 1) * PI / (2.0 * n_atoms as f64);
                points.push(MagicPoint {
                    order: n,
                    sub: None,
                    velocity: chi_unit / action,
                    action,
                    branch: None,
                });
            }
        }
    }
    Ok(MagicVelocityFamily { n_atoms, d, points })
}

/// Largest magic velocity, i.e. the broadest maximum (order 0).
pub fn first_magic_velocity(n_atoms: usize, d: f64) -> Result<f64> {
    let fam = magic_velocities(n_atoms, d, BranchSelection::Both, 1)?;
    Ok(fam.points[0].velocity)
}

/// Fidelity of the best d = 0 approximation with the phase-pi W_N target,
/// computed from the states themselves.
pub fn limit_fidelity(n_atoms: usize) -> Result<f64> {
    if n_atoms < 4 {
        return Err(Error::domain(format!(
            "limit fidelity is defined for N >= 4, got {n_atoms}"
        )));
    }
    let state = limit_state_d0(n_atoms, PI / (2.0 * n_atoms as f64))?;
    fidelity(&state, &ReferenceState::w_n(n_atoms)?)
}
