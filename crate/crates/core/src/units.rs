//! Physical parameters, the dimensionless unit system and regime checks.
//!
//! All figures and CLI values use lengths in units of the cavity waist `w`,
//! velocities in units of `v0 = Omega^2 g0^2 w / (|delta| Delta^2)` and rates
//! in units of the vacuum Rabi frequency `g0`. [`PhysicalParams`] may hold SI
//! values or values already expressed in those units; only ratios enter the
//! dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Factor by which the adiabatic-elimination inequalities must hold.
pub const DEFAULT_REGIME_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Vacuum Rabi frequency (rad/s).
    pub g0: f64,
    /// Cavity mode waist (m).
    pub w: f64,
    /// Laser coupling strength (rad/s).
    pub omega: f64,
    /// Cavity detuning (rad/s), signed.
    pub delta: f64,
    /// Laser detuning (rad/s), signed.
    pub big_delta: f64,
    /// Cavity loss rate (rad/s).
    pub kappa: Option<f64>,
    /// Atomic decay rate (rad/s).
    pub gamma: Option<f64>,
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be finite and > 0, got {x}"),
        ))
    }
}

fn nonzero(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x != 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be finite and non-zero, got {x}"),
        ))
    }
}

impl PhysicalParams {
    pub fn new(g0: f64, w: f64, omega: f64, delta: f64, big_delta: f64) -> Result<Self> {
        let p = PhysicalParams {
            g0,
            w,
            omega,
            delta,
            big_delta,
            kappa: None,
            gamma: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters given directly in units of `g0` and `w`.
    pub fn dimensionless(omega: f64, delta: f64, big_delta: f64) -> Result<Self> {
        Self::new(1.0, 1.0, omega, delta, big_delta)
    }

    pub fn with_losses(mut self, kappa: f64, gamma: f64) -> Result<Self> {
        self.kappa = Some(kappa);
        self.gamma = Some(gamma);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        positive("g0", self.g0)?;
        positive("w", self.w)?;
        positive("omega", self.omega)?;
        nonzero("delta", self.delta)?;
        nonzero("Delta", self.big_delta)?;
        if let Some(k) = self.kappa {
            positive("kappa", k)?;
        }
        if let Some(g) = self.gamma {
            positive("gamma", g)?;
        }
        Ok(())
    }

    /// The same setup with rates divided by `g0` and lengths by `w`.
    pub fn rate_units(&self) -> Self {
        PhysicalParams {
            g0: 1.0,
            w: 1.0,
            omega: self.omega / self.g0,
            delta: self.delta / self.g0,
            big_delta: self.big_delta / self.g0,
            kappa: self.kappa.map(|k| k / self.g0),
            gamma: self.gamma.map(|g| g / self.g0),
        }
    }

    /// Sign of `delta * Delta^2`, carried by every pairwise action.
    pub fn interaction_sign(&self) -> f64 {
        self.delta.signum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub length_unit: f64,
    pub velocity_unit: f64,
    pub rate_unit: f64,
    pub interaction_sign: f64,
}

impl UnitSystem {
    pub fn new(params: &PhysicalParams) -> Result<Self> {
        Ok(UnitSystem {
            length_unit: params.w,
            velocity_unit: velocity_unit(params)?,
            rate_unit: params.g0,
            interaction_sign: params.interaction_sign(),
        })
    }

    pub fn velocity_to_si(&self, v: f64) -> f64 {
        v * self.velocity_unit
    }

    pub fn velocity_from_si(&self, v: f64) -> f64 {
        v / self.velocity_unit
    }

    pub fn length_to_si(&self, z: f64) -> f64 {
        z * self.length_unit
    }

    pub fn length_from_si(&self, z: f64) -> f64 {
        z / self.length_unit
    }
}

/// `Omega^2 g0^2 w / (|delta| Delta^2)`.
pub fn velocity_unit(params: &PhysicalParams) -> Result<f64> {
    params.validate()?;
    let PhysicalParams {
        g0,
        w,
        omega,
        delta,
        big_delta,
        ..
    } = *params;
    Ok(omega * omega * g0 * g0 * w / (delta.abs() * big_delta * big_delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// `|Delta| / Omega`
    pub ratio_laser: f64,
    /// `|delta| / g0`
    pub ratio_cavity: f64,
    /// `|delta Delta| / Omega^2`
    pub ratio_cross1: f64,
    /// `|delta Delta| / g0^2`
    pub ratio_cross2: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl RegimeReport {
    pub fn min_ratio(&self) -> f64 {
        self.ratio_laser
            .min(self.ratio_cavity)
            .min(self.ratio_cross1)
            .min(self.ratio_cross2)
    }
}

/// Evaluates the four adiabatic-elimination inequalities at peak coupling.
///
/// A failing regime is reported through `pass`, not as an error; only a
/// threshold that does not express "much greater than" is rejected.
pub fn validate_regime(params: &PhysicalParams, threshold: f64) -> Result<RegimeReport> {
    params.validate()?;
    if !(threshold.is_finite() && threshold > 1.0) {
        return Err(Error::param(
            "regime_threshold",
            format!("must be > 1, got {threshold}"),
        ));
    }
    let dd = (params.delta * params.big_delta).abs();
    let mut report = RegimeReport {
        ratio_laser: params.big_delta.abs() / params.omega,
        ratio_cavity: params.delta.abs() / params.g0,
        ratio_cross1: dd / (params.omega * params.omega),
        ratio_cross2: dd / (params.g0 * params.g0),
        threshold,
        pass: false,
    };
    report.pass = report.min_ratio() >= threshold;
    Ok(report)
}

/// Largest inter-atomic distance (in units of `w`) for which two atoms both
/// stay strongly coupled, `sqrt(2 ln(2 g0^2 / (kappa gamma)))`.
///
/// `g0`, `kappa` and `gamma` only need to share a unit.
pub fn max_interatomic_distance(g0: f64, kappa: f64, gamma: f64) -> Result<f64> {
    positive("g0", g0)?;
    positive("kappa", kappa)?;
    positive("gamma", gamma)?;
    let two_g0_sq = 2.0 * g0 * g0;
    let kappa_gamma = kappa * gamma;
    if two_g0_sq < kappa_gamma {
        return Err(Error::StrongCouplingViolated {
            two_g0_sq,
            kappa_gamma,
        });
    }
    // max() keeps the equality boundary at +0 despite rounding in the ratio
    Ok((2.0 * (two_g0_sq / kappa_gamma).ln()).max(0.0).sqrt())
}
