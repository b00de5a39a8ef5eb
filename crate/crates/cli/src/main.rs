//! `dlpp`: simulate thin-grid last-passage percolation, run reproducible
//! experiments from JSON configs, and draw their plots.
//!
//! Exit codes: 0 on success, 1 on any runtime error, 2 when `run --check`
//! finds a failed acceptance check.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dlpp::coupling::{CoupledTrajectory, LipschitzConfig, LipschitzConstants, TrajectoryMode, TrajectoryTable};
use dlpp::distributions::{ModelLiteral, WeightModel};
use dlpp::experiments::{self, ExperimentKind, ExperimentSpec, Overrides, RunOptions};
use dlpp::lattice::{geodesics, hi_mode_max, last_passage, GridShape, TieBreak, WeightGrid};
use dlpp::plot::{self, PlotKind, PlotSpec};
use dlpp::stream::{domain, stream};

#[derive(Parser)]
#[command(name = "dlpp", version, about = "Last-passage percolation on thin n x floor(n^alpha) grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one grid and print L, M_n and the geodesic summary.
    Simulate(SimulateArgs),
    /// Run an experiment config and persist its record.
    Run(RunArgs),
    /// Draw a standalone SVG from a record or trajectory export.
    Plot(PlotArgs),
    /// Build one coupled flipping trajectory and export k, L(k), M(k).
    Couple(CoupleArgs),
    /// Report how often the reversed Lipschitz event holds.
    Lipschitz(LipschitzArgs),
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Number of columns.
    #[arg(long)]
    n: usize,
    /// Aspect exponent; the grid has floor(n^alpha) rows.
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Weight law as a JSON literal, e.g. '{"atoms": [[0, 0.5], [1, 0.5]], "m": 0}'.
    #[arg(long, conflicts_with = "p")]
    model: Option<String>,
    /// Shorthand for the two-point law on {0, 1} with P(w = 1) = p and m = 0.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl GridArgs {
    fn model(&self) -> Result<WeightModel> {
        let literal = match (&self.model, self.p) {
            (Some(text), _) => serde_json::from_str::<ModelLiteral>(text)
                .with_context(|| format!("invalid model literal {text}"))?,
            (None, p) => ModelLiteral::two_point(p.unwrap_or(0.5)),
        };
        Ok(WeightModel::try_from(literal)?)
    }

    fn shape(&self) -> Result<GridShape> {
        Ok(GridShape::thin(self.n, self.alpha)?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Write the scaled weight matrix (top row first) to this file, or `-` for stdout.
    #[arg(long)]
    dump_grid: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    config: PathBuf,
    /// Record directory; defaults to `records/<config stem>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = default_parallelism())]
    parallel: usize,
    /// Continue a partial record instead of refusing to overwrite it.
    #[arg(long)]
    resume: bool,
    /// Exit with status 2 if any acceptance check fails.
    #[arg(long)]
    check: bool,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print summary.json instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKindArg {
    LoglogMoments,
    Trajectory,
    DecayCurve,
    ShapeCurve,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKindArg,
    /// Record directory or summary.json; a `couple` export for trajectory plots.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Moment order for loglog plots.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Incremental,
    FullRecompute,
}

#[derive(Args, Clone)]
struct ConstantArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c5: Option<f64>,
    /// Gap coefficient: l(n) = c_ell * sqrt(rows * n).
    #[arg(long)]
    c_ell: Option<f64>,
}

impl ConstantArgs {
    fn config(&self) -> LipschitzConfig {
        LipschitzConfig {
            epsilon: self.epsilon,
            c1: self.c1,
            c5: self.c5,
            c_ell: self.c_ell,
        }
    }
}

#[derive(Args)]
struct CoupleArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    constants: ConstantArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Incremental)]
    mode: ModeArg,
    /// Export file; the table goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LipschitzArgs {
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long, conflicts_with = "p")]
    model: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Trajectories per grid size.
    #[arg(long, default_value_t = 100)]
    trajectories: usize,
    #[command(flatten)]
    constants: ConstantArgs,
    #[arg(long, default_value_t = default_parallelism())]
    parallel: usize,
    /// Persist the frequency curve as a record directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let model = args.grid.model()?;
    let shape = args.grid.shape()?;
    let mut rng = stream(args.grid.seed, domain::SINGLE, args.grid.n as u64, 0);
    let grid = WeightGrid::sample(shape, &model, &mut rng);
    let result = last_passage(&grid);
    let set = geodesics(&grid, &result, TieBreak::default());
    let m = hi_mode_max(&grid);
    let n = shape.columns();
    println!("grid          {n} x {} (alpha = {}), seed {}", shape.rows(), args.grid.alpha, args.grid.seed);
    println!("p             {}", model.p());
    println!("L             {}", model.to_real(result.value()));
    println!("M_n           {m}");
    println!("M_n / n       {:.6}", m as f64 / n as f64);
    println!("Card(G)       {}", set.intersection.len());
    println!("geodesic      {} vertices", set.canonical.len());
    println!("hi sites      {} of {}", grid.hi_count(), shape.sites());
    if let Some(path) = &args.dump_grid {
        let scale = if model.scale() == 1 {
            String::new()
        } else {
            format!("# weights scaled by {}\n", model.scale())
        };
        let text = scale + &grid.dump();
        if path.as_os_str() == "-" {
            print!("{text}");
        } else {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

fn default_record_dir(config: &Path) -> PathBuf {
    let stem = config.file_stem().map_or("record".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from("records").join(stem)
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let mut spec = ExperimentSpec::from_json(&text)
        .with_context(|| format!("in config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let out = args.out.clone().unwrap_or_else(|| default_record_dir(&args.config));
    let record = experiments::run(
        &spec,
        &RunOptions {
            parallelism: args.parallel,
            out_dir: Some(out.clone()),
            resume: args.resume,
            stop_after: None,
        },
    )?;
    if args.json {
        print!("{}", record.summary.to_json());
    } else {
        report::print_summary(&record.summary);
        println!();
        println!(
            "record {} ({} replicates, {} resumed, {:.1}s)",
            out.display(),
            record.replicates.len(),
            record.resumed,
            record.wall_clock_seconds
        );
    }
    if args.check && !record.summary.all_passed() {
        eprintln!("acceptance check failed");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn plot(args: &PlotArgs) -> Result<()> {
    let kind = match args.kind {
        PlotKindArg::LoglogMoments => PlotKind::LoglogMoments,
        PlotKindArg::Trajectory => PlotKind::Trajectory,
        PlotKindArg::DecayCurve => PlotKind::DecayCurve,
        PlotKindArg::ShapeCurve => PlotKind::ShapeCurve,
    };
    plot::render(&PlotSpec {
        kind,
        input: args.input.clone(),
        output: args.output.clone(),
        r: args.r,
    })?;
    println!("wrote {}", args.output.display());
    Ok(())
}

fn couple(args: &CoupleArgs) -> Result<()> {
    let model = args.grid.model()?;
    let shape = args.grid.shape()?;
    let constants = LipschitzConstants::resolve(&model, &args.constants.config())?;
    let mode = match args.mode {
        ModeArg::Incremental => TrajectoryMode::Incremental,
        ModeArg::FullRecompute => TrajectoryMode::FullRecompute,
    };
    let mut rng = stream(args.grid.seed, domain::SINGLE, args.grid.n as u64, 1);
    let trajectory = CoupledTrajectory::build(shape, &model, &mut rng, mode);
    let table = TrajectoryTable::new(&trajectory, &constants);
    match &args.out {
        Some(path) => {
            fs::write(path, table.to_text()).with_context(|| format!("writing {}", path.display()))?;
            let report = trajectory.check_reversed_lipschitz(&constants)?;
            println!("wrote {} ({} rows)", path.display(), table.rows.len());
            println!(
                "window I = ({:.3}, {:.3}); gap {:.3}; slope {:.5}",
                report.window.center - report.window.half_width,
                report.window.center + report.window.half_width,
                report.gap,
                report.slope
            );
            println!(
                "O_n {}; {} violating pairs; A_n {}",
                if report.o_n_holds { "holds" } else { "fails" },
                report.violations.len(),
                report.a_n_holds.map_or("n/a", |a| if a { "holds" } else { "fails" })
            );
        }
        None => print!("{}", table.to_text()),
    }
    Ok(())
}

fn lipschitz(args: &LipschitzArgs) -> Result<ExitCode> {
    let grid = GridArgs {
        n: 1,
        alpha: args.alpha,
        model: args.model.clone(),
        p: args.p,
        seed: args.seed,
    };
    if args.trajectories < 2 {
        bail!("--trajectories must be at least 2");
    }
    let spec = ExperimentSpec {
        kind: ExperimentKind::LipschitzFrequency,
        model: grid.model()?,
        alpha: args.alpha,
        r: vec![1.0],
        n: args.n.clone(),
        replicates: args.trajectories,
        seed: args.seed,
        constants: Overrides {
            epsilon: args.constants.epsilon,
            c1: args.constants.c1,
            c5: args.constants.c5,
            c_ell: args.constants.c_ell,
            ..Default::default()
        },
    };
    spec.validate()?;
    let record = experiments::run(
        &spec,
        &RunOptions {
            parallelism: args.parallel,
            out_dir: args.out.clone(),
            ..Default::default()
        },
    )?;
    report::print_summary(&record.summary);
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Simulate(args) => simulate(args).map(|_| ExitCode::SUCCESS),
        Command::Run(args) => run(args),
        Command::Plot(args) => plot(args).map(|_| ExitCode::SUCCESS),
        Command::Couple(args) => couple(args).map(|_| ExitCode::SUCCESS),
        Command::Lipschitz(args) => lipschitz(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
