//! `ggmfdr`: edge discovery for Gaussian graphical models with FDR control.
//!
//! Exit status: 0 on success, 2 for bad input or arguments, 3 when a solver
//! or other numerical step fails.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ggmfdr::experiment::{run_calibration, run_simulation, CalibrationConfig, ExperimentConfig};
use ggmfdr::gfc::{run_gfc, tune_delta, DEFAULT_GRID};
use ggmfdr::{DataMatrix, GraphFamily, SolverKind};

#[derive(Parser)]
#[command(name = "ggmfdr", version, about = "Gaussian graphical model edge discovery with FDR control")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "GGMFDR_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select edges from a data file (rows are observations, columns variables).
    Estimate(EstimateArgs),
    /// Simulate replications from a known graph and report FDP and power.
    Simulate(SimulateArgs),
    /// Pool null statistics over replications and compare them with N(0, 1).
    Calibrate(CalibrateArgs),
    /// Choose the penalty level for a data file.
    Tune(TuneArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Lasso,
    Dantzig,
}

impl From<Solver> for SolverKind {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Lasso => SolverKind::Lasso,
            Solver::Dantzig => SolverKind::Dantzig,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Band,
    Hub,
    #[value(alias = "erdos-renyi")]
    Er,
}

impl From<Family> for GraphFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Band => GraphFamily::Band,
            Family::Hub => GraphFamily::Hub,
            Family::Er => GraphFamily::ErdosRenyi,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,

    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// CSV file, one observation per row.
    data: PathBuf,

    /// The first row holds column names.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,

    #[arg(long, default_value_t = 0.1)]
    alpha: f64,

    #[arg(long, value_enum, default_value = "lasso")]
    solver: Solver,

    /// Fixed penalty level; tuned from the data when omitted.
    #[arg(long)]
    delta: Option<f64>,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    input: InputArgs,

    #[arg(long, value_enum, default_value = "lasso")]
    solver: Solver,

    /// Grid resolution: candidates are j/N for j = 0..=2N.
    #[arg(long = "grid", default_value_t = DEFAULT_GRID)]
    grid: usize,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "band")]
    family: Family,

    #[arg(long, default_value_t = 50)]
    p: usize,

    #[arg(long, default_value_t = 100)]
    n: usize,

    #[arg(long, value_enum, default_value = "lasso")]
    solver: Solver,

    #[arg(long)]
    delta: Option<f64>,

    #[arg(long, default_value_t = 1)]
    reps: usize,

    /// Base seed; replication r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Use one Erdős–Rényi graph (from the base seed) for all replications.
    #[arg(long)]
    fix_model: bool,

    #[arg(long = "grid", default_value_t = DEFAULT_GRID)]
    grid: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,

    #[arg(long, default_value_t = 0.1)]
    alpha: f64,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    model: ModelArgs,

    #[command(flatten)]
    output: OutputArgs,
}

fn read_data(input: &InputArgs) -> Result<DataMatrix> {
    let file = File::open(&input.data).map_err(ggmfdr::Error::from).with_context(|| format!("cannot open {}", input.data.display()))?;
    let x = DataMatrix::read_csv(BufReader::new(file), input.header).with_context(|| format!("reading {}", input.data.display()))?;
    Ok(x)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(ggmfdr::Error::from).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(out: &OutputArgs, value: &T) -> Result<()> {
    let mut w = sink(out.output.as_deref())?;
    serde_json::to_writer_pretty(&mut w, value).map_err(ggmfdr::Error::from)?;
    writeln!(w).map_err(ggmfdr::Error::from)?;
    w.flush().map_err(ggmfdr::Error::from)?;
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let x = read_data(&args.input)?;
    let run = run_gfc(&x, args.solver.into(), args.alpha, args.delta)?;
    let sel = &run.selection;
    let delta = match (&run.tuning, args.delta) {
        (Some(t), _) => format!("delta_hat {}", t.delta_hat),
        (None, Some(d)) => format!("delta {d}"),
        (None, None) => unreachable!("delta is either given or tuned"),
    };
    eprintln!(
        "p {} n {} {delta} t_hat {:.6}{} edges {}",
        x.p(),
        x.n(),
        sel.t_hat,
        if sel.fallback_used { " (fallback)" } else { "" },
        sel.edge_count()
    );
    match args.output.format {
        Format::Json => write_json(&args.output, &sel.to_json()),
        Format::Csv => {
            let mut w = sink(args.output.output.as_deref())?;
            writeln!(w, "i,j,t_hat").map_err(ggmfdr::Error::from)?;
            for &(i, j, t) in &sel.edges {
                writeln!(w, "{},{},{:.16e}", i + 1, j + 1, t).map_err(ggmfdr::Error::from)?;
            }
            w.flush().map_err(ggmfdr::Error::from)?;
            Ok(())
        }
    }
}

fn tune(args: TuneArgs) -> Result<()> {
    let x = read_data(&args.input)?;
    let t = tune_delta(&x, args.solver.into(), args.grid)?;
    eprintln!("p {} n {} delta_hat {} (j = {}, N = {})", x.p(), x.n(), t.delta_hat, t.j_hat, t.grid);
    for (j, why) in &t.failed {
        eprintln!("grid point j={j} failed: {why}");
    }
    match args.output.format {
        Format::Json => write_json(&args.output, &t),
        Format::Csv => {
            let mut w = sink(args.output.output.as_deref())?;
            writeln!(w, "j,delta,loss").map_err(ggmfdr::Error::from)?;
            for (j, loss) in t.losses.iter().enumerate() {
                let loss = if loss.is_finite() { format!("{loss:.16e}") } else { String::new() };
                writeln!(w, "{j},{},{loss}", j as f64 / t.grid as f64).map_err(ggmfdr::Error::from)?;
            }
            w.flush().map_err(ggmfdr::Error::from)?;
            Ok(())
        }
    }
}

fn experiment_config(m: &ModelArgs, alpha: f64) -> ExperimentConfig {
    ExperimentConfig {
        family: m.family.into(),
        p: m.p,
        n: m.n,
        alpha,
        solver: m.solver.into(),
        delta: m.delta,
        replications: m.reps,
        base_seed: m.seed,
        fix_model: m.fix_model,
        grid: m.grid,
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let config = experiment_config(&args.model, args.alpha);
    let report = run_simulation(&config)?;
    let a = &report.aggregates;
    eprintln!(
        "{} p {} n {} {} alpha {}: mean FDP {:.4} (sd {:.4}), mean power {:.4} (sd {:.4}) over {} replications",
        config.family,
        config.p,
        config.n,
        config.solver,
        config.alpha,
        a.mean_fdp,
        a.sd_fdp,
        a.mean_power,
        a.sd_power,
        report.records.len()
    );
    match args.output.format {
        Format::Json => write_json(&args.output, &report),
        Format::Csv => {
            let w = sink(args.output.output.as_deref())?;
            report.write_csv(w)?;
            Ok(())
        }
    }
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let m = &args.model;
    let config = CalibrationConfig {
        family: m.family.into(),
        p: m.p,
        n: m.n,
        solver: m.solver.into(),
        delta: m.delta,
        replications: m.reps,
        base_seed: m.seed,
        fix_model: m.fix_model,
        grid: m.grid,
    };
    let report = run_calibration(&config)?;
    eprintln!(
        "{} null statistics: mean {:.4}, sd {:.4}, |T| > 1.96 fraction {:.4} (nominal 0.05)",
        report.count, report.mean, report.sd, report.exceedance
    );
    match args.output.format {
        Format::Json => write_json(&args.output, &report),
        Format::Csv => {
            let w = sink(args.output.output.as_deref())?;
            report.write_csv(w)?;
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ggmfdr::Error>() {
        Some(e) if !e.is_input_error() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Tune(a) => tune(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
