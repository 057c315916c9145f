//! Entanglement and fidelity measures on single-excitation chain states.

use serde::{Deserialize, Serialize};

use crate::analytic::ReferenceState;
use crate::effective::ChainState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    Entropy,
    Fidelity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub value: f64,
    pub target: Option<ReferenceState>,
}

/// `-p log2 p - (1-p) log2 (1-p)`, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    (term(p) + term(1.0 - p)).clamp(0.0, 1.0)
}

/// Von Neumann entropy of qubit `atom` (1-based) with the rest of the chain.
///
/// For a single-excitation state the reduced density matrix of one qubit is
/// diagonal with eigenvalues `|C_i|^2` and `1 - |C_i|^2`.
pub fn qubit_entropy(state: &ChainState, atom: usize) -> Result<f64> {
    if atom == 0 || atom > state.n() {
        return Err(Error::domain(format!(
            "atom index {atom} out of range 1..={}",
            state.n()
        )));
    }
    Ok(binary_entropy(state.amplitudes()[atom - 1].norm_sqr()))
}

/// `|<reference|state>|^2`, invariant under global phases of either side.
pub fn fidelity(state: &ChainState, reference: &ReferenceState) -> Result<f64> {
    if state.n() != reference.n() {
        return Err(Error::domain(format!(
            "state has {} atoms, reference has {}",
            state.n(),
            reference.n()
        )));
    }
    let overlap = state.inner(&reference.to_state());
    Ok(overlap.norm_sqr().min(1.0))
}

pub fn entropy_value(state: &ChainState, atom: usize) -> Result<MetricValue> {
    Ok(MetricValue {
        kind: MetricKind::Entropy,
        value: qubit_entropy(state, atom)?,
        target: None,
    })
}

pub fn fidelity_value(state: &ChainState, reference: &ReferenceState) -> Result<MetricValue> {
    Ok(MetricValue {
        kind: MetricKind::Fidelity,
        value: fidelity(state, reference)?,
        target: Some(*reference),
    })
}
