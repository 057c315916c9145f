//! Parameter sweeps, jitter averaging, magic-velocity tables and oracle
//! presets, with the CSV/JSON output used by the command-line tool.
//!
//! Grid points are evaluated in parallel but always emitted in row-major
//! order (`d` outer, `v` inner). Every Monte-Carlo point draws from its own
//! ChaCha8 stream selected by the grid index, so results do not depend on
//! thread scheduling.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    first_magic_velocity, limit_fidelity, magic_velocities, Branch, BranchSelection, ReferenceState,
};
use crate::effective::{coupling_matrix, propagate, theta, ChainSpec, ChainState};
use crate::error::{Error, Result};
use crate::full_dynamics::{compare_system, FullRun, FullSystem, OracleReport, RunOptions};
use crate::metrics::{fidelity, qubit_entropy};
use crate::ode::Tolerance;
use crate::units::{velocity_unit, PhysicalParams};

pub const GENERATOR: &str = "wchain-sim";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RNG_ALGORITHM: &str = "ChaCha8";

/// Formats with 12 significant digits, like C's `%.12g`.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Range {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Range { min, max, steps }
    }

    pub fn single(x: f64) -> Self {
        Range::new(x, x, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.max
                } else {
                    self.min + span * i as f64 / last
                }
            })
            .collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config(format!("{name}: steps must be >= 1")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.max < self.min {
            return Err(Error::Config(format!(
                "{name}: need finite min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Entropy of one qubit (1-based atom index).
    Entropy(usize),
    FidelityMinus,
    FidelityPlus,
    /// Fidelity with the phase-pi W_N target (N >= 4).
    FidelityWn,
    /// Moduli `|C_1|..|C_N|`.
    Amplitudes,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fidelity_w-" => Ok(Metric::FidelityMinus),
            "fidelity_w+" => Ok(Metric::FidelityPlus),
            "fidelity_wn" => Ok(Metric::FidelityWn),
            "amplitudes" => Ok(Metric::Amplitudes),
            _ => s
                .strip_prefix("entropy_")
                .and_then(|i| i.parse().ok())
                .map(Metric::Entropy)
                .ok_or_else(|| Error::Config(format!("unknown metric `{s}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Entropy(i) => write!(f, "entropy_{i}"),
            Metric::FidelityMinus => f.write_str("fidelity_w-"),
            Metric::FidelityPlus => f.write_str("fidelity_w+"),
            Metric::FidelityWn => f.write_str("fidelity_wn"),
            Metric::Amplitudes => f.write_str("amplitudes"),
        }
    }
}

impl Metric {
    /// The natural metric for a chain: entropy of qubit 2 for N = 2, the
    /// W_3 fidelity on the `+` branch for N = 3, the W_N fidelity beyond.
    pub fn default_for(n_atoms: usize) -> Metric {
        match n_atoms {
            2 => Metric::Entropy(2),
            3 => Metric::FidelityPlus,
            _ => Metric::FidelityWn,
        }
    }

    fn check(&self, n_atoms: usize) -> Result<()> {
        match *self {
            Metric::Entropy(i) if i == 0 || i > n_atoms => Err(Error::Config(format!(
                "entropy_{i}: atom index out of range 1..={n_atoms}"
            ))),
            Metric::FidelityMinus | Metric::FidelityPlus if !(2..=3).contains(&n_atoms) => {
                Err(Error::Config(format!(
                    "{self} is defined for N = 2 and N = 3 only (N = {n_atoms}); use fidelity_wn"
                )))
            }
            Metric::FidelityWn if n_atoms < 4 => Err(Error::Config(format!(
                "fidelity_wn needs N >= 4 (N = {n_atoms}); use fidelity_w- / fidelity_w+"
            ))),
            _ => Ok(()),
        }
    }

    pub fn columns(&self, n_atoms: usize) -> Vec<String> {
        match self {
            Metric::Amplitudes => (1..=n_atoms).map(|i| format!("abs_c{i}")).collect(),
            m => vec![m.to_string()],
        }
    }

    fn evaluate(&self, state: &ChainState, out: &mut Vec<f64>) -> Result<()> {
        let n = state.n();
        match *self {
            Metric::Entropy(i) => out.push(qubit_entropy(state, i)?),
            Metric::FidelityMinus => {
                out.push(fidelity(state, &ReferenceState::w(n, Branch::Minus)?)?)
            }
            Metric::FidelityPlus => {
                out.push(fidelity(state, &ReferenceState::w(n, Branch::Plus)?)?)
            }
            Metric::FidelityWn => out.push(fidelity(state, &ReferenceState::w_n(n)?)?),
            Metric::Amplitudes => out.extend(state.moduli()),
        }
        Ok(())
    }
}

fn metric_columns(metrics: &[Metric], n_atoms: usize) -> Vec<String> {
    metrics.iter().flat_map(|m| m.columns(n_atoms)).collect()
}

fn evaluate_all(metrics: &[Metric], state: &ChainState) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for m in metrics {
        m.evaluate(state, &mut out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub v_range: Range,
    pub d_range: Range,
    pub n_atoms: usize,
    pub metrics: Vec<Metric>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        self.v_range.validate("velocity range")?;
        self.d_range.validate("distance range")?;
        if self.v_range.min <= 0.0 {
            return Err(Error::Config(format!(
                "velocities must be > 0, got v_min = {}",
                self.v_range.min
            )));
        }
        if self.d_range.min < 0.0 {
            return Err(Error::Config(format!(
                "distances must be >= 0, got d_min = {}",
                self.d_range.min
            )));
        }
        if self.n_atoms < 2 {
            return Err(Error::Config(format!("need N >= 2, got {}", self.n_atoms)));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("no metrics requested".into()));
        }
        for m in &self.metrics {
            m.check(self.n_atoms)?;
        }
        Ok(())
    }

    /// Row-major points: `d` outer, `v` inner.
    pub fn points(&self) -> Vec<GridPoint> {
        let vs = self.v_range.values();
        let ds = self.d_range.values();
        let mut points = Vec::with_capacity(vs.len() * ds.len());
        for &d in &ds {
            for &v in &vs {
                points.push(GridPoint {
                    v,
                    d,
                    index: points.len() as u64,
                });
            }
        }
        points
    }

    pub fn columns(&self) -> Vec<String> {
        metric_columns(&self.metrics, self.n_atoms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub v: f64,
    pub d: f64,
    /// Row-major index, also the random stream of the point.
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub v: f64,
    pub d: f64,
    pub values: Vec<(String, f64)>,
    pub mc: bool,
    pub n_samples: usize,
    pub rejected: usize,
}

impl SweepRecord {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

fn point_state(n_atoms: usize, v: f64, d: f64) -> Result<ChainState> {
    Ok(propagate(&coupling_matrix(&ChainSpec::uniform(
        n_atoms, v, d,
    )?)?))
}

pub fn evaluate_point(grid: &SweepGrid, v: f64, d: f64) -> Result<SweepRecord> {
    let state = point_state(grid.n_atoms, v, d)?;
    let values = evaluate_all(&grid.metrics, &state)?;
    Ok(SweepRecord {
        v,
        d,
        values: grid.columns().into_iter().zip(values).collect(),
        mc: false,
        n_samples: 1,
        rejected: 0,
    })
}

pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRecord>> {
    grid.validate()?;
    grid.points()
        .par_iter()
        .map(|p| evaluate_point(grid, p.v, p.d))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterConfig {
    pub samples: usize,
    /// Spacing defects are drawn from `[0, d_fraction * d)`.
    pub d_fraction: f64,
    /// Velocity defects are drawn from `[0, v_fraction * v)`.
    pub v_fraction: f64,
    pub seed: u64,
    /// Mean-coupling factor `g0_mean / g0`; actions scale with its square.
    pub g0_scale: f64,
}

impl Default for JitterConfig {
    fn default() -> Self {
        JitterConfig {
            samples: 20,
            d_fraction: 0.2,
            v_fraction: 0.1,
            seed: 0,
            g0_scale: 1.0,
        }
    }
}

impl JitterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be >= 1".into()));
        }
        for (name, f) in [
            ("d_fraction", self.d_fraction),
            ("v_fraction", self.v_fraction),
        ] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {f}")));
            }
        }
        if !(self.g0_scale.is_finite() && self.g0_scale > 0.0) {
            return Err(Error::Config(format!(
                "g0_scale must be > 0, got {}",
                self.g0_scale
            )));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

const MAX_REJECTIONS_PER_SAMPLE: usize = 1000;

/// One jittered chain: spacing `i` becomes `d - dd_i`, velocity `i` becomes
/// `v - dv_i`, with `dd_i`, `dv_i` uniform in `[0, f d)`, `[0, f v)`.
fn draw_chain<R: Rng>(
    rng: &mut R,
    n_atoms: usize,
    v: f64,
    d: f64,
    config: &JitterConfig,
) -> Result<ChainSpec> {
    let mut positions = Vec::with_capacity(n_atoms);
    let mut z = 0.0;
    positions.push(z);
    for _ in 1..n_atoms {
        let defect: f64 = rng.random::<f64>() * config.d_fraction * d;
        z += d - defect;
        positions.push(z);
    }
    let velocities = (0..n_atoms)
        .map(|_| v - rng.random::<f64>() * config.v_fraction * v)
        .collect();
    ChainSpec::new(positions, velocities)
}

/// Averages the metrics over `config.samples` jittered copies of the
/// uniform chain at `point`.
pub fn monte_carlo_average(
    point: GridPoint,
    n_atoms: usize,
    config: &JitterConfig,
    metrics: &[Metric],
) -> Result<SweepRecord> {
    config.validate()?;
    if !(point.v > 0.0 && point.v * (1.0 - config.v_fraction) > 0.0) {
        return Err(Error::Config(format!(
            "jittered velocities must stay > 0 (v = {})",
            point.v
        )));
    }
    if point.d < 0.0 {
        return Err(Error::Config(format!(
            "distance must be >= 0, got {}",
            point.d
        )));
    }
    for m in metrics {
        m.check(n_atoms)?;
    }
    let columns = metric_columns(metrics, n_atoms);
    let mut rng = config.rng(point.index);
    let mut sums = vec![0.0; columns.len()];
    let mut rejected = 0usize;
    let action_scale = config.g0_scale * config.g0_scale;
    for _ in 0..config.samples {
        let chain = loop {
            match draw_chain(&mut rng, n_atoms, point.v, point.d, config) {
                Ok(c) => break c,
                Err(_) if rejected < MAX_REJECTIONS_PER_SAMPLE * config.samples => rejected += 1,
                Err(e) => return Err(e),
            }
        };
        let state = propagate(&coupling_matrix(&chain)?.scaled(action_scale));
        for (s, x) in sums.iter_mut().zip(evaluate_all(metrics, &state)?) {
            *s += x;
        }
    }
    let n = config.samples as f64;
    Ok(SweepRecord {
        v: point.v,
        d: point.d,
        values: columns
            .into_iter()
            .zip(sums.into_iter().map(|s| s / n))
            .collect(),
        mc: true,
        n_samples: config.samples,
        rejected,
    })
}

pub fn mc_sweep(grid: &SweepGrid, config: &JitterConfig) -> Result<Vec<SweepRecord>> {
    grid.validate()?;
    config.validate()?;
    grid.points()
        .par_iter()
        .map(|p| monte_carlo_average(*p, grid.n_atoms, config, &grid.metrics))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagicRow {
    /// `false` for the N = 2 curves along which the pair ends up disentangled.
    pub entangled: bool,
    pub n_atoms: usize,
    pub order: u32,
    pub sub: Option<u32>,
    pub branch: Option<Branch>,
    pub d: f64,
    pub action: f64,
    pub v: f64,
}

/// Magic velocities for the first `count` orders. For N = 2 one curve
/// point per entry of `distances`; larger chains only admit `d = 0`.
pub fn tabulate_magic(
    n_atoms: usize,
    branches: BranchSelection,
    count: u32,
    distances: &[f64],
) -> Result<Vec<MagicRow>> {
    let mut rows = Vec::new();
    for &d in distances {
        let fam = magic_velocities(n_atoms, d, branches, count)?;
        rows.extend(fam.points.iter().map(|p| MagicRow {
            entangled: true,
            n_atoms,
            order: p.order,
            sub: p.sub,
            branch: p.branch,
            d,
            action: p.action,
            v: p.velocity,
        }));
    }
    Ok(rows)
}

/// N = 2 velocities with `theta(v, d) = (n + 1) pi / 2`, where the
/// excitation sits wholly on one atom again.
pub fn tabulate_product_n2(count: u32, distances: &[f64]) -> Result<Vec<MagicRow>> {
    let mut rows = Vec::new();
    for &d in distances {
        let theta_1 = theta(1.0, d)?;
        for n in 0..count {
            let action = f64::from(n + 1) * FRAC_PI_2;
            rows.push(MagicRow {
                entangled: false,
                n_atoms: 2,
                order: n,
                sub: None,
                branch: None,
                d,
                action,
                v: theta_1 / action,
            });
        }
    }
    Ok(rows)
}

pub fn write_magic_csv<W: Write>(mut out: W, seed: u64, rows: &[MagicRow]) -> Result<()> {
    write_banner(&mut out, seed)?;
    writeln!(out, "kind,n_atoms,n,m,branch,d,action,v")?;
    for r in rows {
        let branch = match r.branch {
            Some(Branch::Plus) => "+",
            Some(Branch::Minus) => "-",
            None if r.entangled => "pi",
            None => "",
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            if r.entangled { "w" } else { "product" },
            r.n_atoms,
            r.order,
            r.sub.map(|m| m.to_string()).unwrap_or_default(),
            branch,
            format_sig12(r.d),
            format_sig12(r.action),
            format_sig12(r.v)
        )?;
    }
    Ok(())
}

/// `N, F(N), (3N-4)^2/N^3` for `N = 4..=n_max`.
pub fn write_limit_fidelity_csv<W: Write>(mut out: W, seed: u64, n_max: usize) -> Result<()> {
    write_banner(&mut out, seed)?;
    writeln!(out, "n_atoms,fidelity_limit,closed_form")?;
    for n in 4..=n_max {
        let nf = n as f64;
        writeln!(
            out,
            "{n},{},{}",
            format_sig12(limit_fidelity(n)?),
            format_sig12((3.0 * nf - 4.0).powi(2) / nf.powi(3))
        )?;
    }
    Ok(())
}

fn write_banner<W: Write>(out: &mut W, seed: u64) -> Result<()> {
    writeln!(out, "# {GENERATOR} v{VERSION} seed={seed} units=v0,w")?;
    Ok(())
}

pub fn write_csv<W: Write>(
    mut out: W,
    seed: u64,
    columns: &[String],
    records: &[SweepRecord],
) -> Result<()> {
    write_banner(&mut out, seed)?;
    let mut header = vec!["v".to_string(), "d".to_string()];
    header.extend(columns.iter().cloned());
    header.extend(["mc", "n_samples", "rejected"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut cells = vec![format_sig12(r.v), format_sig12(r.d)];
        for c in columns {
            let x = r
                .get(c)
                .ok_or_else(|| Error::Config(format!("record lacks column `{c}`")))?;
            cells.push(format_sig12(x));
        }
        cells.push(u8::from(r.mc).to_string());
        cells.push(r.n_samples.to_string());
        cells.push(r.rejected.to_string());
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonDocument<'a, T: Serialize> {
    generator: &'static str,
    version: &'static str,
    seed: u64,
    rng: &'static str,
    units: &'static str,
    records: &'a T,
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, seed: u64, records: &T) -> Result<()> {
    let doc = JsonDocument {
        generator: GENERATOR,
        version: VERSION,
        seed,
        rng: RNG_ALGORITHM,
        units: "v0,w",
        records,
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

/// Parameter sets for the oracle, rates in units of `g0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OraclePreset {
    /// `Omega = 1, Delta = 15, delta = 8`: every elimination ratio >= 8.
    Deep,
    /// As `Deep` but `delta = 2`, violating `|delta| >> g0`.
    Shallow,
    /// Laser switched off; nothing can happen.
    LaserOff,
}

impl FromStr for OraclePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deep" => Ok(OraclePreset::Deep),
            "shallow" => Ok(OraclePreset::Shallow),
            "laser-off" => Ok(OraclePreset::LaserOff),
            _ => Err(Error::Config(format!(
                "unknown preset `{s}` (expected deep, shallow or laser-off)"
            ))),
        }
    }
}

impl OraclePreset {
    /// `(g0, Omega, delta, Delta)`
    pub fn rates(&self) -> (f64, f64, f64, f64) {
        match self {
            OraclePreset::Deep => (1.0, 1.0, 8.0, 15.0),
            OraclePreset::Shallow => (1.0, 1.0, 2.0, 15.0),
            OraclePreset::LaserOff => (1.0, 0.0, 8.0, 15.0),
        }
    }

    /// Parameters for presets with the laser on.
    pub fn params(&self) -> Option<PhysicalParams> {
        let (g0, omega, delta, big_delta) = self.rates();
        PhysicalParams::new(g0, 1.0, omega, delta, big_delta).ok()
    }

    /// Builds the system for a uniform chain whose velocity is given in
    /// units of `v0` of the preset; with the laser off the deep preset's
    /// `v0` is used instead.
    pub fn system(&self, n_atoms: usize, v: f64, d: f64) -> Result<FullSystem> {
        let chain = ChainSpec::uniform(n_atoms, v, d)?;
        match self.params() {
            Some(p) => FullSystem::from_chain(&p, &chain),
            None => {
                let (g0, omega, delta, big_delta) = self.rates();
                let v0 = velocity_unit(&OraclePreset::Deep.params().expect("laser on"))?;
                FullSystem::new(
                    g0,
                    omega,
                    delta,
                    big_delta,
                    chain.positions().to_vec(),
                    chain.velocities().iter().map(|v| v * v0).collect(),
                )
            }
        }
    }
}

/// Default chain velocity for oracle runs: the broadest magic point
/// (order 0) at spacing `d`, or its `d = 0` value for N >= 3.
pub fn default_oracle_velocity(n_atoms: usize, d: f64) -> Result<f64> {
    if n_atoms == 2 {
        first_magic_velocity(2, d)
    } else {
        first_magic_velocity(n_atoms, 0.0)
    }
}

pub fn run_oracle(
    system: &FullSystem,
    tolerance: Tolerance,
    record_every: Option<usize>,
) -> Result<(OracleReport, FullRun)> {
    compare_system(
        system,
        tolerance,
        &RunOptions {
            record_every,
            ..RunOptions::default()
        },
    )
}
