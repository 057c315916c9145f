use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wchain::analytic::BranchSelection;
use wchain::config::ParamFile;
use wchain::effective::ChainSpec;
use wchain::full_dynamics::{write_trajectory_csv, FullSystem};
use wchain::ode::Tolerance;
use wchain::sweep::{self, JitterConfig, Metric, OraclePreset, Range, SweepGrid};
use wchain::units::{max_interatomic_distance, validate_regime, PhysicalParams};
use wchain::{Error, OracleReport};

#[derive(Parser)]
#[command(
    name = "wchain-sim",
    version,
    about = "W-state generation in a conveyed atom chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate metrics of the effective model over a (v, d) grid.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Entropy of every qubit over a (v, d) grid.
    Entropy {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Grid sweep averaged over randomly jittered spacings and velocities.
    Mc {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        jitter: JitterArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Tabulate magic velocities.
    Magic(MagicArgs),
    /// Compare the effective model against the full amplitude equations.
    Oracle(OracleArgs),
    /// Largest inter-atomic distance keeping both atoms strongly coupled.
    Bound(BoundArgs),
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 2)]
    n_atoms: usize,
    /// Velocities in units of v0.
    #[arg(long, default_value_t = 0.2)]
    v_min: f64,
    #[arg(long, default_value_t = 5.0)]
    v_max: f64,
    #[arg(long, default_value_t = 100)]
    v_steps: usize,
    /// Distances in units of the waist w.
    #[arg(long, default_value_t = 0.0)]
    d_min: f64,
    #[arg(long, default_value_t = 3.0)]
    d_max: f64,
    #[arg(long, default_value_t = 31)]
    d_steps: usize,
    /// entropy_<i>, fidelity_w-, fidelity_w+, fidelity_wn or amplitudes;
    /// repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    metric: Vec<String>,
    /// Parameter file; its regime is checked and reported on stderr.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct JitterArgs {
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0.2)]
    d_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    v_fraction: f64,
    /// Mean coupling in units of g0; actions scale with its square.
    #[arg(long, default_value_t = 1.0)]
    g0_scale: f64,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Plus,
    Minus,
    Both,
}

#[derive(Args)]
struct MagicArgs {
    #[arg(long, default_value_t = 2)]
    n_atoms: usize,
    #[arg(long, value_enum, default_value_t = BranchArg::Both)]
    branch: BranchArg,
    /// Number of orders n.
    #[arg(long, default_value_t = 4)]
    count: u32,
    #[arg(long, default_value_t = 0.0)]
    d_min: f64,
    #[arg(long, default_value_t = 0.0)]
    d_max: f64,
    #[arg(long, default_value_t = 1)]
    d_steps: usize,
    /// Also list the N = 2 velocities where the pair is disentangled.
    #[arg(long)]
    product: bool,
    /// Write the d = 0 limit fidelity for N = 4..=N_MAX instead.
    #[arg(long, value_name = "N_MAX")]
    limit_fidelity: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Deep,
    Shallow,
    LaserOff,
}

impl From<PresetArg> for OraclePreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Deep => OraclePreset::Deep,
            PresetArg::Shallow => OraclePreset::Shallow,
            PresetArg::LaserOff => OraclePreset::LaserOff,
        }
    }
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value_t = PresetArg::Deep)]
    preset: PresetArg,
    /// Explicit parameters; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    n_atoms: usize,
    /// Chain velocity in units of v0; defaults to the first magic velocity.
    #[arg(long)]
    v: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    d: f64,
    /// Largest acceptable population gap; exit status 1 above it.
    #[arg(long, default_value_t = 0.05)]
    bound: f64,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    /// Write populations along the trajectory to this CSV file.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Keep every this many accepted steps in the trajectory.
    #[arg(long, default_value_t = 1000)]
    record_every: usize,
    /// JSON report; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    /// Rates share any one unit.
    #[arg(long)]
    g0: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Take g0, kappa and gamma from a parameter file.
    #[arg(long)]
    config: Option<PathBuf>,
}

enum Failure {
    Lib(Error),
    GapAboveBound { gap: f64, bound: f64 },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::GapAboveBound { gap, bound }) => {
            eprintln!("population gap {gap:e} exceeds bound {bound:e}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Integration { .. } => 3,
                Error::Io(_) | Error::Json(_) => 1,
                _ => 2,
            })
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Sweep { grid, out } => {
            let grid = build_grid(&grid, false)?;
            let records = sweep::sweep(&grid)?;
            emit(&out, |w| write_records(w, &out, &grid, &records))
        }
        Command::Entropy { grid, out } => {
            let grid = build_grid(&grid, true)?;
            let records = sweep::sweep(&grid)?;
            emit(&out, |w| write_records(w, &out, &grid, &records))
        }
        Command::Mc { grid, jitter, out } => {
            let grid = build_grid(&grid, false)?;
            let config = JitterConfig {
                samples: jitter.samples,
                d_fraction: jitter.d_fraction,
                v_fraction: jitter.v_fraction,
                seed: out.seed,
                g0_scale: jitter.g0_scale,
            };
            let records = sweep::mc_sweep(&grid, &config)?;
            emit(&out, |w| write_records(w, &out, &grid, &records))
        }
        Command::Magic(args) => magic(args),
        Command::Oracle(args) => oracle(args),
        Command::Bound(args) => bound(args),
    }
}

fn build_grid(args: &GridArgs, all_entropies: bool) -> Result<SweepGrid, Error> {
    if let Some(path) = &args.config {
        report_regime(path)?;
    }
    let metrics = if all_entropies {
        (1..=args.n_atoms).map(Metric::Entropy).collect()
    } else if args.metric.is_empty() {
        vec![Metric::default_for(args.n_atoms)]
    } else {
        args.metric
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<_>, _>>()?
    };
    let grid = SweepGrid {
        v_range: Range::new(args.v_min, args.v_max, args.v_steps),
        d_range: Range::new(args.d_min, args.d_max, args.d_steps),
        n_atoms: args.n_atoms,
        metrics,
    };
    grid.validate()?;
    Ok(grid)
}

fn base_params() -> PhysicalParams {
    OraclePreset::Deep
        .params()
        .expect("deep preset has the laser on")
}

fn report_regime(path: &Path) -> Result<(), Error> {
    let file = ParamFile::load(path)?;
    let params = file.params(&base_params())?;
    let report = validate_regime(&params, file.regime_threshold())
        .map_err(|e| Error::Config(e.to_string()))?;
    if !report.pass {
        eprintln!(
            "warning: adiabatic elimination is marginal (smallest ratio {:.3} < {})",
            report.min_ratio(),
            report.threshold
        );
    }
    Ok(())
}

fn write_records<W: Write>(
    w: W,
    out: &OutArgs,
    grid: &SweepGrid,
    records: &[sweep::SweepRecord],
) -> Result<(), Error> {
    match out.format {
        Format::Csv => sweep::write_csv(w, out.seed, &grid.columns(), records),
        Format::Json => sweep::write_json(w, out.seed, &records),
    }
}

fn emit<F>(out: &OutArgs, write: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> Result<(), Error>,
{
    write_to(out.out.as_deref(), write)
}

fn write_to<F>(path: Option<&Path>, write: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> Result<(), Error>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn magic(args: MagicArgs) -> Result<(), Failure> {
    if let Some(n_max) = args.limit_fidelity {
        if n_max < 4 {
            return Err(
                Error::Config(format!("--limit-fidelity needs N_MAX >= 4, got {n_max}")).into(),
            );
        }
        return emit(&args.out, |w| match args.out.format {
            Format::Csv => sweep::write_limit_fidelity_csv(w, args.out.seed, n_max),
            Format::Json => {
                let rows: Vec<_> = (4..=n_max)
                    .map(|n| wchain::analytic::limit_fidelity(n).map(|f| (n, f)))
                    .collect::<Result<_, _>>()?;
                sweep::write_json(w, args.out.seed, &rows)
            }
        });
    }
    let branches = match args.branch {
        BranchArg::Plus => BranchSelection::Plus,
        BranchArg::Minus => BranchSelection::Minus,
        BranchArg::Both => BranchSelection::Both,
    };
    let range = Range::new(args.d_min, args.d_max, args.d_steps);
    if range.steps == 0 || range.max < range.min || range.min < 0.0 {
        return Err(Error::Config(
            "distance range needs 0 <= d_min <= d_max and d_steps >= 1".into(),
        )
        .into());
    }
    let distances = range.values();
    let mut rows = sweep::tabulate_magic(args.n_atoms, branches, args.count, &distances)
        .map_err(|e| Error::Config(e.to_string()))?;
    if args.product {
        if args.n_atoms != 2 {
            return Err(Error::Config("--product applies to N = 2 only".into()).into());
        }
        rows.extend(sweep::tabulate_product_n2(args.count, &distances)?);
    }
    emit(&args.out, |w| match args.out.format {
        Format::Csv => sweep::write_magic_csv(w, args.out.seed, &rows),
        Format::Json => sweep::write_json(w, args.out.seed, &rows),
    })
}

#[derive(Serialize)]
struct OracleOutput {
    source: String,
    n_atoms: usize,
    v: f64,
    d: f64,
    rtol: f64,
    atol: f64,
    bound: f64,
    pass: bool,
    report: OracleReport,
}

fn oracle(args: OracleArgs) -> Result<(), Failure> {
    let tolerance =
        Tolerance::new(args.rtol, args.atol).map_err(|e| Error::Config(e.to_string()))?;
    if !(args.bound.is_finite() && args.bound >= 0.0) {
        return Err(Error::Config(format!("--bound must be >= 0, got {}", args.bound)).into());
    }
    if args.record_every == 0 {
        return Err(Error::Config("--record-every must be >= 1".into()).into());
    }
    let v = match args.v {
        Some(v) => v,
        None => sweep::default_oracle_velocity(args.n_atoms, args.d)
            .map_err(|e| Error::Config(e.to_string()))?,
    };
    let (system, source) = match &args.config {
        Some(path) => {
            let params = ParamFile::load(path)?.params(&base_params())?;
            let chain = ChainSpec::uniform(args.n_atoms, v, args.d)
                .map_err(|e| Error::Config(e.to_string()))?;
            let system = FullSystem::from_chain(&params, &chain)
                .map_err(|e| Error::Config(e.to_string()))?;
            (system, path.display().to_string())
        }
        None => {
            let preset = OraclePreset::from(args.preset);
            let system = preset
                .system(args.n_atoms, v, args.d)
                .map_err(|e| Error::Config(e.to_string()))?;
            let name = args.preset.to_possible_value().expect("named preset");
            (system, name.get_name().to_string())
        }
    };
    let record = args.trajectory.as_ref().map(|_| args.record_every);
    let (report, run) = sweep::run_oracle(&system, tolerance, record)?;
    if let Some(path) = &args.trajectory {
        write_to(Some(path), |w| {
            write_trajectory_csv(w, args.n_atoms, &run.trajectory)
        })?;
    }
    let gap = report.population_gap;
    let output = OracleOutput {
        source,
        n_atoms: args.n_atoms,
        v,
        d: args.d,
        rtol: args.rtol,
        atol: args.atol,
        bound: args.bound,
        pass: gap <= args.bound,
        report,
    };
    write_to(args.out.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &output)?;
        writeln!(w)?;
        Ok(())
    })?;
    if gap > args.bound {
        return Err(Failure::GapAboveBound {
            gap,
            bound: args.bound,
        });
    }
    Ok(())
}

fn bound(args: BoundArgs) -> Result<(), Failure> {
    let (g0, kappa, gamma) = match &args.config {
        Some(path) => {
            let p = ParamFile::load(path)?.params(&base_params())?;
            let missing =
                |name: &str| Error::Config(format!("{}: `{name}` is required", path.display()));
            (
                args.g0.unwrap_or(p.g0),
                args.kappa.or(p.kappa).ok_or_else(|| missing("kappa"))?,
                args.gamma.or(p.gamma).ok_or_else(|| missing("gamma"))?,
            )
        }
        None => {
            let need = |x: Option<f64>, name: &str| {
                x.ok_or_else(|| Error::Config(format!("--{name} is required without --config")))
            };
            (
                need(args.g0, "g0")?,
                need(args.kappa, "kappa")?,
                need(args.gamma, "gamma")?,
            )
        }
    };
    let d = max_interatomic_distance(g0, kappa, gamma).map_err(|e| Error::Config(e.to_string()))?;
    println!("{}", sweep::format_sig12(d));
    Ok(())
}
