//! `polymatrix`: build, analyse and simulate polymatrix games from the shell.
//!
//! Every command that writes a file also writes `<file>.manifest.json` with
//! the fully resolved arguments; `polymatrix replay <manifest>` reruns it.
//!
//! Exit codes: 0 success, 2 invalid input, 3 no equilibrium where one is
//! required.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use polymatrix::constructions::{construct, verify_construction, ConstructionKind, ConstructionSpec};
use polymatrix::dynamics::{diagnose, write_trajectory_csv, FitWindow};
use polymatrix::equilibrium::{equilibrium_set, Verdict};
use polymatrix::io::{read_game, write_game};
use polymatrix::leibniz::{leibniz_det, LEIBNIZ_CAP};
use polymatrix::plot::{render_svg, PlotData};
use polymatrix::sampling::{mc_unique_fraction_with_workers, sample_game, sample_profile};
use polymatrix::{
    affine_reduce, classify, convergence_report, nash_residual, simulate, uniqueness_preconditions, AgentPartition,
    EquilibriumOutcome, GameClass, IntegratorConfig, Method, MonteCarloReport, SamplerConfig, StrategyProfile,
};

#[derive(Parser)]
#[command(name = "polymatrix", version, about = "Polymatrix games: uniqueness, equilibria and gradient dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
enum Command {
    /// Build a unique-equilibrium witness game.
    Construct(ConstructArgs),
    /// Draw one Gaussian game.
    Sample(SampleArgs),
    /// Report the class tag and the class detected from the matrix.
    Classify(ClassifyArgs),
    /// Solve `A x = b` and describe the equilibrium set.
    Solve(SolveArgs),
    /// Substitute out one coordinate using a linear constraint.
    Reduce(ReduceArgs),
    /// Estimate the fraction of sampled games with a unique equilibrium.
    Montecarlo(MonteCarloArgs),
    /// Integrate the gradient flow and write the trajectory.
    Simulate(SimulateArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct ConstructArgs {
    /// coord-even, coord-odd or zs-even.
    #[arg(long)]
    kind: ConstructionKind,
    /// Strategy dimensions per agent, e.g. 2,2,2.
    #[arg(long)]
    dims: AgentPartition,
    /// Cost vector b (defaults to zero).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    costs: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct SampleArgs {
    #[arg(long)]
    class: GameClass,
    #[arg(long)]
    dims: AgentPartition,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample index within the seed's ensemble.
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Draw b from the same Gaussian instead of b = 0.
    #[arg(long)]
    sample_costs: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct ClassifyArgs {
    game: PathBuf,
    /// Symmetry tolerance; defaults to 1e-12 * max(1, max |A_ij|).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct SolveArgs {
    game: PathBuf,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct ReduceArgs {
    game: PathBuf,
    /// Constrained agent (0-based).
    #[arg(long)]
    agent: usize,
    /// Constraint coefficients a in a^T x_i = c.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Vec<f64>,
    /// Constraint right-hand side c.
    #[arg(long, allow_hyphen_values = true)]
    rhs: f64,
    /// Coordinate to eliminate (0-based); defaults to the largest |a_w|.
    #[arg(long)]
    pivot: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct MonteCarloArgs {
    #[arg(long)]
    class: GameClass,
    #[arg(long)]
    dims: AgentPartition,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    sample_costs: bool,
    /// Worker threads; the report does not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Append a summary row to this CSV file (header written if new).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Exact,
    Rk4,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => Method::ExactFlow,
            MethodArg::Rk4 => Method::RungeKutta4,
        }
    }
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct SimulateArgs {
    game: PathBuf,
    /// Starting point; drawn from a standard Gaussian with --seed if absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    #[arg(long, default_value_t = 1000.0)]
    horizon: f64,
    /// RK4 step.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 0.1)]
    record_every: f64,
    /// Decay-fit window start; defaults to 10.
    #[arg(long)]
    fit_from: Option<f64>,
    /// Decay-fit window end; defaults to horizon / 2.
    #[arg(long)]
    fit_to: Option<f64>,
    /// Coordinates (0-based) for the SVG trajectory panel.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    project: Vec<usize>,
    /// Trajectory CSV; the convergence report goes next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write outputs into this directory instead of their recorded paths.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    version: String,
    outputs: Vec<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Construct(_) => "construct",
            Command::Sample(_) => "sample",
            Command::Classify(_) => "classify",
            Command::Solve(_) => "solve",
            Command::Reduce(_) => "reduce",
            Command::Montecarlo(_) => "montecarlo",
            Command::Simulate(_) => "simulate",
            Command::Replay(_) => "replay",
        }
    }

    fn output_paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            Command::Construct(a) => a.out.iter_mut().collect(),
            Command::Sample(a) => vec![&mut a.out],
            Command::Classify(_) | Command::Replay(_) => vec![],
            Command::Solve(a) => a.out.iter_mut().collect(),
            Command::Reduce(a) => vec![&mut a.out],
            Command::Montecarlo(a) => a.out.iter_mut().chain(a.csv.iter_mut()).collect(),
            Command::Simulate(a) => std::iter::once(&mut a.out).chain(a.svg.iter_mut()).collect(),
        }
    }
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Records `command` next to its first output.
fn write_manifest(command: &Command, outputs: &[PathBuf]) -> Result<()> {
    let Some(first) = outputs.first() else {
        return Ok(());
    };
    let tagged = serde_json::to_value(command)?;
    let manifest = RunManifest {
        command: command.name().to_string(),
        config: tagged["config"].clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outputs.to_vec(),
    };
    let path = manifest_path(first);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<polymatrix::PolymatrixGame> {
    read_game(path).with_context(|| format!("reading game {}", path.display()))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_construct(args: &ConstructArgs) -> Result<Vec<PathBuf>> {
    let spec = ConstructionSpec::new(args.kind, args.dims.clone())?;
    let mut game = construct(&spec)?;
    if let Some(costs) = &args.costs {
        game = game.with_costs(costs.clone())?;
    }
    let report = verify_construction(&spec)?;
    let k = game.dimension();
    println!("{} dims {} K = {k} class {}", args.kind, args.dims, game.class());
    if k <= LEIBNIZ_CAP {
        let det = leibniz_det(&game.consolidate())?;
        println!("det = {det} (|det| = {}, Leibniz)", det.abs());
    } else {
        let d = report.determinant;
        println!(
            "det sign {} log|det| = {} (|det| = {})",
            d.sign,
            d.log_abs.map_or("-inf".to_string(), |l| format!("{l}")),
            d.magnitude()
        );
    }
    println!("rank {}/{k}, verdict {:?}", report.rank, report.verdict);
    match &args.out {
        Some(path) => {
            write_game(path, &game)?;
            Ok(vec![path.clone()])
        }
        None => Ok(vec![]),
    }
}

fn cmd_sample(args: &SampleArgs) -> Result<Vec<PathBuf>> {
    let mut config = SamplerConfig::new(args.class, args.dims.clone(), args.seed, 1);
    config.scale = args.scale;
    config.sample_costs = args.sample_costs;
    let game = sample_game(&config, args.index)?;
    write_game(&args.out, &game)?;
    println!(
        "sampled {} game dims {} K = {} (seed {}, index {})",
        args.class,
        args.dims,
        game.dimension(),
        args.seed,
        args.index
    );
    Ok(vec![args.out.clone()])
}

fn cmd_classify(args: &ClassifyArgs) -> Result<Vec<PathBuf>> {
    let game = load(&args.game)?;
    let detected = classify(&game.consolidate(), game.partition(), args.tol)?;
    println!("tag {}, detected {}", game.class(), detected);
    Ok(vec![])
}

#[derive(Serialize)]
struct SolveReport {
    verdict: Verdict,
    uniqueness: polymatrix::UniquenessReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    equilibria: Option<polymatrix::EquilibriumSet>,
    #[serde(with = "polymatrix::format::opt_real")]
    nash_residual: Option<f64>,
}

fn cmd_solve(args: &SolveArgs) -> Result<Vec<PathBuf>> {
    let game = load(&args.game)?;
    let report = uniqueness_preconditions(&game);
    let outcome = equilibrium_set(&game);
    let mut residual = None;
    match (&report.verdict, &outcome) {
        (Verdict::Unique, EquilibriumOutcome::Set(set)) => {
            let x = StrategyProfile::new(set.particular().clone());
            let r = nash_residual(&game, &x)?;
            println!("Unique");
            println!("x* = {}", fmt_vec(x.as_slice()));
            println!("nash_residual = {r:e}");
            residual = Some(r);
        }
        (_, EquilibriumOutcome::Set(set)) => {
            let x = StrategyProfile::new(set.particular().clone());
            let r = nash_residual(&game, &x)?;
            println!("NonUnique(W={})", set.nullity());
            println!("particular = {}", fmt_vec(x.as_slice()));
            for (w, d) in set.basis().iter().enumerate() {
                println!("d_{} = {}", w + 1, fmt_vec(d.as_slice()));
            }
            println!("nash_residual = {r:e}");
            residual = Some(r);
        }
        (_, EquilibriumOutcome::NoEquilibrium { residual: r }) => {
            println!("NoEquilibrium");
            println!("least-squares residual = {r:e}");
        }
    }
    let Some(path) = &args.out else {
        return Ok(vec![]);
    };
    let full = SolveReport {
        verdict: report.verdict,
        uniqueness: report,
        equilibria: outcome.set(),
        nash_residual: residual,
    };
    write_text(path, &(serde_json::to_string_pretty(&full)? + "\n"))?;
    Ok(vec![path.clone()])
}

fn cmd_reduce(args: &ReduceArgs) -> Result<Vec<PathBuf>> {
    let game = load(&args.game)?;
    let pivot = match args.pivot {
        Some(p) => p,
        None => polymatrix::reduce::default_pivot(&args.coeffs)
            .ok_or_else(|| anyhow!("every constraint coefficient is zero"))?,
    };
    let red = affine_reduce(&game, args.agent, &args.coeffs, args.rhs, pivot)?;
    println!(
        "reduced agent {} pivot {}: dims {} -> {}",
        args.agent,
        pivot,
        game.partition(),
        red.game().partition()
    );
    if let EquilibriumOutcome::Set(set) = equilibrium_set(red.game()) {
        if set.is_unique() {
            let lifted = red.lift(&StrategyProfile::new(set.particular().clone()))?;
            println!("lifted equilibrium = {}", fmt_vec(lifted.as_slice()));
        }
    }
    write_game(&args.out, red.game())?;
    Ok(vec![args.out.clone()])
}

fn cmd_montecarlo(args: &MonteCarloArgs) -> Result<Vec<PathBuf>> {
    let mut config = SamplerConfig::new(args.class, args.dims.clone(), args.seed, args.samples);
    config.scale = args.scale;
    config.sample_costs = args.sample_costs;
    let report: MonteCarloReport = mc_unique_fraction_with_workers(&config, args.workers)?;
    println!(
        "{} {} samples {}: unique fraction {} ({} unique, {} without equilibrium), min singular value {:e}",
        args.class,
        args.dims,
        args.samples,
        report.unique_fraction,
        report.unique_count,
        report.no_equilibrium_count,
        report.min_singular_value.min
    );
    let mut outputs = Vec::new();
    if let Some(path) = &args.out {
        write_text(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
        outputs.push(path.clone());
    }
    if let Some(path) = &args.csv {
        let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let mut w = csv::Writer::from_writer(file);
        if fresh {
            w.write_record(MonteCarloReport::csv_header())?;
        }
        w.write_record(report.csv_record())?;
        w.flush()?;
        outputs.push(path.clone());
    }
    Ok(outputs)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let game = load(&args.game)?;
    let k = game.dimension();
    let x0 = match &args.x0 {
        Some(v) if v.len() == k => StrategyProfile::from_slice(v),
        Some(v) => bail!("--x0 has {} entries, the game has K = {k}", v.len()),
        None => sample_profile(args.seed, k, 1.0),
    };
    let config = IntegratorConfig {
        method: args.method.into(),
        step: args.step,
        horizon: args.horizon,
        record_every: args.record_every,
    };
    let traj = simulate(&game, &x0, &config)?;
    for w in &traj.warnings {
        eprintln!("warning: {}", serde_json::to_value(w)?.as_str().unwrap_or_default());
    }
    let diag = diagnose(&game, &traj);
    let file = fs::File::create(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    write_trajectory_csv(std::io::BufWriter::new(file), &traj, &diag)?;
    let mut outputs = vec![args.out.clone()];

    let window = FitWindow {
        from: args.fit_from.unwrap_or(10.0),
        to: args.fit_to.unwrap_or(args.horizon / 2.0),
    };
    match convergence_report(&game, &traj, window) {
        Ok(report) => {
            let path = args.out.with_extension("convergence.json");
            write_text(&path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            outputs.push(path);
            println!("closest equilibrium = {}", fmt_vec(&report.closest_equilibrium));
            println!(
                "final |xbar - x*| = {:e}, max energy drift = {:e}, max hyperplane drift = {:e}",
                report.final_distance, report.max_energy_drift, report.max_hyperplane_drift
            );
            match report.decay_slope {
                Some(s) => println!("decay slope on [{}, {}] = {s}", window.from, window.to),
                None => println!("decay slope on [{}, {}] = n/a", window.from, window.to),
            }
        }
        Err(e) => {
            let last = diag.average_residual.last().copied().unwrap_or(0.0);
            println!("no convergence report ({e}); final |A xbar - b| = {last:e}");
        }
    }

    if let Some(svg) = &args.svg {
        let (i, j) = match args.project[..] {
            [i, j] if i < k && j < k => (i, j),
            _ => bail!("--project needs two coordinates below K = {k}"),
        };
        let data = PlotData {
            times: &traj.times,
            projection: (i, j),
            xs: traj.states.iter().map(|x| x[i]).collect(),
            ys: traj.states.iter().map(|x| x[j]).collect(),
            energy: diag.energy.as_deref(),
            average_residual: &diag.average_residual,
        };
        write_text(svg, &render_svg(&data))?;
        outputs.push(svg.clone());
    }
    Ok(outputs)
}

fn cmd_replay(args: &ReplayArgs) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let manifest: RunManifest = serde_json::from_str(&text).context("parsing manifest")?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by version {}, running {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let tagged = serde_json::json!({ "command": manifest.command, "config": manifest.config });
    let mut command: Command = serde_json::from_value(tagged).context("manifest does not describe a command")?;
    if matches!(command, Command::Replay(_)) {
        bail!("a manifest cannot replay another manifest");
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
        for path in command.output_paths_mut() {
            let name = path.file_name().ok_or_else(|| anyhow!("output without a file name"))?;
            *path = dir.join(name);
        }
    }
    execute(&command)
}

fn execute(command: &Command) -> Result<Vec<PathBuf>> {
    let outputs = match command {
        Command::Construct(a) => cmd_construct(a)?,
        Command::Sample(a) => cmd_sample(a)?,
        Command::Classify(a) => cmd_classify(a)?,
        Command::Solve(a) => cmd_solve(a)?,
        Command::Reduce(a) => cmd_reduce(a)?,
        Command::Montecarlo(a) => cmd_montecarlo(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Replay(a) => return cmd_replay(a),
    };
    write_manifest(command, &outputs)?;
    Ok(outputs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = matches!(e.downcast_ref::<polymatrix::Error>(), Some(polymatrix::Error::NoEquilibrium));
            ExitCode::from(if infeasible { 3 } else { 2 })
        }
    }
}
