//! W-state generation in a chain of four-level atoms conveyed through a
//! detuned optical cavity.
//!
//! Each atom crosses a Gaussian cavity mode while a laser drives it; after
//! adiabatic elimination of the excited states and the cavity photon, a
//! single excitation hops between atoms through a real symmetric coupling
//! matrix. [`effective`] builds and exponentiates that matrix,
//! [`analytic`] holds the closed forms and magic velocities, [`metrics`]
//! scores the outcome and [`full_dynamics`] integrates the un-eliminated
//! system as an oracle.
//!
//! Lengths are in units of the mode waist `w`, velocities in
//! `v0 = Omega^2 g0^2 w / (|delta| Delta^2)`.

pub mod analytic;
pub mod config;
pub mod effective;
pub mod error;
pub mod full_dynamics;
pub mod metrics;
pub mod ode;
pub mod sweep;
pub mod units;

pub use analytic::{Branch, BranchSelection, MagicPoint, MagicVelocityFamily, ReferenceState};
pub use effective::{ChainSpec, ChainState, CouplingMatrix};
pub use error::{Error, Result};
pub use full_dynamics::{FullState, FullSystem, OracleReport};
pub use metrics::{MetricKind, MetricValue};
pub use sweep::{JitterConfig, Metric, OraclePreset, Range, SweepGrid, SweepRecord};
pub use units::{PhysicalParams, RegimeReport, UnitSystem};
