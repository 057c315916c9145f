//! Reference integration of the complete `2N + 1` amplitude system.
//!
//! The basis is the cavity-excited state `|0>`, the chain states
//! `|1>..|N>` and the excited-atom states `|N+1>..|2N>`. With
//! `s = Omega^2 / Delta` the amplitudes obey
//!
//! ```text
//! i C0'     = (s - delta) C0 + sum_j g_j(t) C_{N+j}
//! i C_i'    = s C_i + Omega C_{N+i}
//! i C_{N+i}' = (s + Delta) C_{N+i} + Omega C_i + g_i(t) C0
//! ```
//!
//! with `g_i(t) = g0 exp(-(z_i + v_i t)^2)`. Nothing is eliminated, so the
//! comparison in [`compare_models`] measures the error of the effective
//! single-exponential propagator directly.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::effective::{propagate, theta_pair, ChainSpec, ChainState, CouplingMatrix};
use crate::error::{Error, Result};
use crate::ode::{self, Method, Options, StepStats, Tolerance};
use crate::units::{velocity_unit, PhysicalParams};

/// Atoms start and end at least this far (in `w`) outside the cavity centre.
pub const Z_MARGIN: f64 = 5.0;

/// Rates in a common unit (time is measured in its inverse), positions in
/// `w`, velocities in `w` per time unit.
///
/// Unlike [`PhysicalParams`], a vanishing laser or cavity coupling is
/// allowed here so that the decoupled limits can be integrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullSystem {
    pub g0: f64,
    pub omega: f64,
    pub delta: f64,
    pub big_delta: f64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl FullSystem {
    pub fn new(
        g0: f64,
        omega: f64,
        delta: f64,
        big_delta: f64,
        positions: Vec<f64>,
        velocities: Vec<f64>,
    ) -> Result<Self> {
        let sys = FullSystem {
            g0,
            omega,
            delta,
            big_delta,
            positions,
            velocities,
        };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be >= 0, got {x}")))
            }
        };
        nonneg("g0", self.g0)?;
        nonneg("omega", self.omega)?;
        for (name, x) in [("delta", self.delta), ("Delta", self.big_delta)] {
            if !(x.is_finite() && x != 0.0) {
                return Err(Error::param(name, format!("must be non-zero, got {x}")));
            }
        }
        // reuse the chain invariants
        ChainSpec::new(self.positions.clone(), self.velocities.clone())?;
        Ok(())
    }

    /// Builds the system from dimensional parameters and a chain given in
    /// units of `w` and `v0`; rates are expressed in units of `g0`.
    pub fn from_chain(params: &PhysicalParams, chain: &ChainSpec) -> Result<Self> {
        let r = params.rate_units();
        let v0 = velocity_unit(&r)?;
        Self::new(
            r.g0,
            r.omega,
            r.delta,
            r.big_delta,
            chain.positions().to_vec(),
            chain.velocities().iter().map(|v| v * v0).collect(),
        )
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    /// `(t_start, t_end)` such that every atom travels from `z <= -margin`
    /// to `z >= +margin`, with `margin = max(5, |z_1 - z_N|/2 + 5)`.
    pub fn window(&self) -> (f64, f64) {
        let first = self.positions[0];
        let last = self.positions[self.n_atoms() - 1];
        let margin = Z_MARGIN.max((first - last).abs() / 2.0 + Z_MARGIN);
        let mut t0 = f64::INFINITY;
        let mut t1 = f64::NEG_INFINITY;
        for (z, v) in self.positions.iter().zip(&self.velocities) {
            t0 = t0.min((-margin - z) / v);
            t1 = t1.max((margin - z) / v);
        }
        (t0, t1)
    }

    /// Action matrix of the adiabatically eliminated model for the same
    /// trajectories, `Omega^2 g0^2 / (delta Delta^2)` times the overlap
    /// integral of the two coupling envelopes.
    pub fn effective_matrix(&self) -> Result<CouplingMatrix> {
        let n = self.n_atoms();
        let scale = self.omega * self.omega * self.g0 * self.g0
            / (self.delta * self.big_delta * self.big_delta);
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let t = scale
                    * theta_pair(
                        self.positions[i],
                        self.velocities[i],
                        self.positions[j],
                        self.velocities[j],
                    )?;
                m[(i, j)] = t;
                m[(j, i)] = t;
            }
        }
        CouplingMatrix::from_matrix(m)
    }

    fn rhs(&self) -> impl Fn(f64, &[Complex64], &mut [Complex64]) + '_ {
        let n = self.n_atoms();
        let shift = self.omega * self.omega / self.big_delta;
        let minus_i = Complex64::new(0.0, -1.0);
        move |t, y, dy| {
            let c0 = y[0];
            let mut sum = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let z = self.positions[i] + self.velocities[i] * t;
                let g = self.g0 * (-z * z).exp();
                let main = y[1 + i];
                let exc = y[1 + n + i];
                sum += g * exc;
                dy[1 + i] = minus_i * (shift * main + self.omega * exc);
                dy[1 + n + i] =
                    minus_i * ((shift + self.big_delta) * exc + self.omega * main + g * c0);
            }
            dy[0] = minus_i * ((shift - self.delta) * c0 + sum);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub c0: Complex64,
    pub c_main: Vec<Complex64>,
    pub c_excited: Vec<Complex64>,
    pub time: f64,
}

impl FullState {
    /// `C_1 = 1`, everything else empty.
    pub fn initial(n_atoms: usize, time: f64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let mut c_main = vec![zero; n_atoms];
        c_main[0] = Complex64::new(1.0, 0.0);
        FullState {
            c0: zero,
            c_main,
            c_excited: vec![zero; n_atoms],
            time,
        }
    }

    /// `[c0, c_main.., c_excited..]`
    pub fn to_vec(&self) -> Vec<Complex64> {
        let mut y = Vec::with_capacity(1 + 2 * self.c_main.len());
        y.push(self.c0);
        y.extend_from_slice(&self.c_main);
        y.extend_from_slice(&self.c_excited);
        y
    }

    fn from_slice(y: &[Complex64], time: f64) -> Self {
        let n = (y.len() - 1) / 2;
        FullState {
            c0: y[0],
            c_main: y[1..=n].to_vec(),
            c_excited: y[n + 1..].to_vec(),
            time,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.main_weight() + self.leak_excited()
    }

    pub fn main_weight(&self) -> f64 {
        self.c_main.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn leak_cavity(&self) -> f64 {
        self.c0.norm_sqr()
    }

    pub fn leak_excited(&self) -> f64 {
        self.c_excited.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Chain amplitudes, renormalized onto the single-excitation manifold.
    pub fn chain_state(&self) -> Result<ChainState> {
        ChainState::normalized(self.c_main.clone())
    }

    /// `t, p0, p1..pN, pN1..p2N`
    pub fn populations_row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(2 + 2 * self.c_main.len());
        row.push(self.time);
        row.push(self.c0.norm_sqr());
        row.extend(self.c_main.iter().map(|c| c.norm_sqr()));
        row.extend(self.c_excited.iter().map(|c| c.norm_sqr()));
        row
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record populations every this many accepted steps.
    pub record_every: Option<usize>,
    pub max_steps: Option<usize>,
    pub method: Method,
}

#[derive(Debug, Clone)]
pub struct FullRun {
    pub state: FullState,
    pub max_leak_cavity: f64,
    pub max_leak_excited: f64,
    /// Largest `| |psi|^2 - 1 |` seen along the trajectory.
    pub max_norm_error: f64,
    pub stats: StepStats,
    pub trajectory: Vec<FullState>,
}

/// Evolves `state` to `t_end` (either direction).
pub fn evolve(
    system: &FullSystem,
    state: &FullState,
    t_end: f64,
    tolerance: Tolerance,
    run: &RunOptions,
) -> Result<FullRun> {
    let n = system.n_atoms();
    if state.c_main.len() != n || state.c_excited.len() != n {
        return Err(Error::domain(format!(
            "state has {} atoms, system has {n}",
            state.c_main.len()
        )));
    }
    let mut y = state.to_vec();
    let options = Options {
        method: run.method,
        tolerance,
        max_steps: run.max_steps.unwrap_or(Options::default().max_steps),
        max_step: None,
    };
    let mut out = FullRun {
        state: state.clone(),
        max_leak_cavity: state.leak_cavity(),
        max_leak_excited: state.leak_excited(),
        max_norm_error: (state.norm_sqr() - 1.0).abs(),
        stats: StepStats::default(),
        trajectory: Vec::new(),
    };
    if run.record_every.is_some() {
        out.trajectory.push(state.clone());
    }
    let every = run.record_every.unwrap_or(0);
    let mut step = 0usize;
    let stats = ode::integrate(system.rhs(), state.time, t_end, &mut y, &options, |t, y| {
        let cav = y[0].norm_sqr();
        let main: f64 = y[1..=n].iter().map(|c| c.norm_sqr()).sum();
        let exc: f64 = y[n + 1..].iter().map(|c| c.norm_sqr()).sum();
        out.max_leak_cavity = out.max_leak_cavity.max(cav);
        out.max_leak_excited = out.max_leak_excited.max(exc);
        out.max_norm_error = out.max_norm_error.max((cav + main + exc - 1.0).abs());
        step += 1;
        if every > 0 && (step.is_multiple_of(every) || t == t_end) {
            out.trajectory.push(FullState::from_slice(y, t));
        }
    })?;
    out.stats = stats;
    out.state = FullState::from_slice(&y, t_end);
    Ok(out)
}

/// Integrates the whole transit of `system` starting from `C_1 = 1`.
pub fn run_system(system: &FullSystem, tolerance: Tolerance, run: &RunOptions) -> Result<FullRun> {
    let (t0, t1) = system.window();
    evolve(
        system,
        &FullState::initial(system.n_atoms(), t0),
        t1,
        tolerance,
        run,
    )
}

/// Final amplitudes after the chain (units of `w`, `v0`) has crossed the
/// cavity, integrated in rate units of `g0`.
pub fn integrate_full(
    params: &PhysicalParams,
    chain: &ChainSpec,
    tolerance: Tolerance,
) -> Result<FullState> {
    let system = FullSystem::from_chain(params, chain)?;
    Ok(run_system(&system, tolerance, &RunOptions::default())?.state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub final_full: ChainState,
    pub final_effective: ChainState,
    /// `max_i | |C_i|^2_full - |C_i|^2_eff |`, full amplitudes renormalized.
    pub population_gap: f64,
    pub cross_fidelity: f64,
    pub max_leak_cavity: f64,
    pub max_leak_excited: f64,
    /// Population left outside the chain manifold at the end of the run.
    pub final_leak: f64,
    pub max_norm_error: f64,
    pub accepted_steps: usize,
    pub start_time: f64,
    pub end_time: f64,
}

fn report(system: &FullSystem, run: &FullRun) -> Result<OracleReport> {
    let full = run.state.chain_state()?;
    let effective = propagate(&system.effective_matrix()?);
    let population_gap = full
        .populations()
        .iter()
        .zip(effective.populations())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let cross_fidelity = full.inner(&effective).norm_sqr().min(1.0);
    let (t0, t1) = system.window();
    Ok(OracleReport {
        population_gap,
        cross_fidelity,
        max_leak_cavity: run.max_leak_cavity,
        max_leak_excited: run.max_leak_excited,
        final_leak: (run.state.norm_sqr() - run.state.main_weight()).max(0.0),
        max_norm_error: run.max_norm_error,
        accepted_steps: run.stats.accepted,
        start_time: t0,
        end_time: t1,
        final_full: full,
        final_effective: effective,
    })
}

/// Runs the full and the effective model on the same trajectories.
pub fn compare_system(
    system: &FullSystem,
    tolerance: Tolerance,
    run: &RunOptions,
) -> Result<(OracleReport, FullRun)> {
    let full = run_system(system, tolerance, run)?;
    Ok((report(system, &full)?, full))
}

pub fn compare_models(
    params: &PhysicalParams,
    chain: &ChainSpec,
    tolerance: Tolerance,
) -> Result<OracleReport> {
    let system = FullSystem::from_chain(params, chain)?;
    Ok(compare_system(&system, tolerance, &RunOptions::default())?.0)
}

/// Writes `t, p0, p1..pN, pN1..p2N` rows.
pub fn write_trajectory_csv<W: Write>(
    mut out: W,
    n_atoms: usize,
    rows: &[FullState],
) -> Result<()> {
    let mut header = vec!["t".to_string(), "p0".to_string()];
    header.extend((1..=n_atoms).map(|i| format!("p{i}")));
    header.extend((1..=n_atoms).map(|i| format!("pN{i}")));
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row
            .populations_row()
            .iter()
            .map(|x| crate::sweep::format_sig12(*x))
            .collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> Tolerance {
        Tolerance::new(1e-9, 1e-11).unwrap()
    }

    #[test]
    fn laser_off_keeps_initial_state() {
        let sys = FullSystem::new(1.0, 0.0, 8.0, 15.0, vec![0.0, 0.5], vec![0.05, 0.05]).unwrap();
        let (report, run) = compare_system(&sys, quick(), &RunOptions::default()).unwrap();
        assert!((run.state.c_main[0].norm() - 1.0).abs() < 1e-9);
        assert!(run.state.c_main[1].norm() < 1e-12);
        assert!(run.max_leak_cavity < 1e-20);
        assert_eq!(report.population_gap, 0.0);
    }

    #[test]
    fn uncoupled_cavity_gives_detuned_rabi() {
        let (omega, big_delta) = (1.0, 15.0);
        let sys =
            FullSystem::new(0.0, omega, 8.0, big_delta, vec![0.0, 0.5], vec![1.0, 1.0]).unwrap();
        let run = run_system(
            &sys,
            Tolerance::new(1e-10, 1e-12).unwrap(),
            &RunOptions::default(),
        )
        .unwrap();
        let bound = 4.0 * omega * omega / (big_delta * big_delta + 4.0 * omega * omega);
        assert!((bound - 0.0175).abs() < 1e-4);
        assert!(
            run.max_leak_excited <= bound + 1e-8,
            "{}",
            run.max_leak_excited
        );
        assert!(
            run.max_leak_excited > 0.9 * bound,
            "{}",
            run.max_leak_excited
        );
        assert_eq!(run.max_leak_cavity, 0.0);
        // only atom 1 takes part
        assert!(run.state.c_main[1].norm() == 0.0);
        assert!(run.max_norm_error < 1e-8);

        // closed-form two-level evolution at the end time
        let t = sys.window().1 - sys.window().0;
        let gen = (big_delta * big_delta + 4.0 * omega * omega).sqrt();
        let p_exc = bound * (gen * t / 2.0).sin().powi(2);
        let got = run.state.c_excited[0].norm_sqr();
        assert!((got - p_exc).abs() < 1e-6, "{got} vs {p_exc}");
    }

    #[test]
    fn window_covers_margins() {
        let sys = FullSystem::new(1.0, 1.0, 8.0, 15.0, vec![0.0, 12.0], vec![2.0, 1.0]).unwrap();
        let (t0, t1) = sys.window();
        let margin = 11.0;
        for (z, v) in sys.positions.iter().zip(&sys.velocities) {
            assert!(z + v * t0 <= -margin + 1e-12);
            assert!(z + v * t1 >= margin - 1e-12);
        }
    }

    #[test]
    fn effective_matrix_matches_dimensionless_route() {
        let params = PhysicalParams::dimensionless(1.0, -8.0, 15.0).unwrap();
        let chain = ChainSpec::uniform(3, 1.4, 0.5).unwrap();
        let sys = FullSystem::from_chain(&params, &chain).unwrap();
        let a = sys.effective_matrix().unwrap();
        let b = crate::effective::coupling_matrix(&chain)
            .unwrap()
            .scaled(-1.0);
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-12 * b.get(0, 1).abs());
            }
        }
    }

    #[test]
    fn rejects_bad_systems() {
        assert!(FullSystem::new(-1.0, 1.0, 1.0, 1.0, vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(FullSystem::new(1.0, 1.0, 0.0, 1.0, vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(FullSystem::new(1.0, 1.0, 1.0, 1.0, vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        let sys = FullSystem::new(1.0, 1.0, 1.0, 1.0, vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let bad = FullState::initial(3, 0.0);
        assert!(evolve(&sys, &bad, 1.0, quick(), &RunOptions::default()).is_err());
    }

    #[test]
    fn step_budget_exhaustion_is_an_integration_error() {
        let sys = FullSystem::new(1.0, 1.0, 8.0, 15.0, vec![0.0, 0.5], vec![0.01, 0.01]).unwrap();
        let run = RunOptions {
            max_steps: Some(100),
            ..RunOptions::default()
        };
        assert!(matches!(
            run_system(&sys, quick(), &run),
            Err(Error::Integration { .. })
        ));
    }

    #[test]
    fn trajectory_csv_layout() {
        let sys = FullSystem::new(1.0, 1.0, 8.0, 15.0, vec![0.0, 0.5], vec![0.5, 0.5]).unwrap();
        let run = run_system(
            &sys,
            quick(),
            &RunOptions {
                record_every: Some(50),
                ..RunOptions::default()
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, 2, &run.trajectory).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,p0,p1,p2,pN1,pN2");
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), run.trajectory.len());
        assert!(rows.iter().all(|r| r.split(',').count() == 6));
        assert_eq!(run.trajectory.last().unwrap().time, sys.window().1);
    }
}
