use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use stodyn::bench::{
    generate_testbed, heterogeneous_process, run_gap_study, write_rows_csv, write_summary_csv,
    StudyConfig, TestBedConfig,
};
use stodyn::evaluate::{exact_policy_cost, simulate_policy, EvaluationReport};
use stodyn::io::{parse_partition, InstanceFile, PartitionSpec, SearchSpec, StrategyName};
use stodyn::linloss::{optimize_partition, LinearizationSet, SearchConfig};
use stodyn::models::{solver_from_env, BoundDirection, LotSizingInstance, Policy, SolveStatus, SolverConfig};
use stodyn::probdist::{ConvolutionTable, Distribution};
use stodyn::workflow::{
    convolution_table, linearization_set, solve_bound, solve_bounds, PartitionStrategy, SolvedBound,
};
use stodyn::{Error, Result};

#[derive(Parser)]
#[command(name = "stodyn", version, about = "Lot sizing under static-dynamic uncertainty with bounded MILP models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one or both bound models and print the prescribed policy.
    Solve(SolveArgs),
    /// Solve both bound models and evaluate the pessimistic policy exactly.
    Bounds(ModelArgs),
    /// Exact expected cost or profit of a given policy.
    Evaluate(EvaluateArgs),
    /// Monte Carlo statistics of a given policy.
    Simulate(SimulateArgs),
    /// Search a partition minimizing the worst breakpoint error over some laws.
    Partition(PartitionArgs),
    /// Run the gap-versus-segments study over a generated test bed.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Lb,
    Ub,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Uniform,
    Search,
    NormalTable,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Kv,
    Csv,
    Json,
}

#[derive(Args)]
struct ModelArgs {
    /// Instance file (JSON).
    #[arg(long)]
    instance: PathBuf,
    /// Number of segments W; defaults to the file's partition.W or 11.
    #[arg(long)]
    segments: Option<usize>,
    /// Partition strategy; defaults to the file's choice, else the normal table
    /// for all-normal demand and uniform masses otherwise.
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    /// Fixed partition masses read from a file; overrides --strategy.
    #[arg(long)]
    partition: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "both")]
    direction: Direction,
    /// Write each solved model in LP format to PREFIX_{lb,ub}.lp.
    #[arg(long)]
    lp: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Policy such as "{1: 400, 3: 116.4}" or its JSON form.
    #[arg(long)]
    policy: String,
    #[arg(long, value_enum, default_value = "kv")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "kv")]
    format: Format,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long, default_value_t = 11)]
    segments: usize,
    /// Distribution literals such as '{"kind":"normal","mean":100,"stdev":30}',
    /// or instance files whose range sums are all included.
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<String>,
    /// Random candidates before the descent; defaults to 500·W.
    #[arg(long)]
    population: Option<usize>,
    #[arg(long, default_value_t = 0.002)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the dump here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Study configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Per-cell rows (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Per-(W, strategy) quartiles (CSV); printed to stdout when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DemandKind {
    #[default]
    Normal,
    Heterogeneous,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    #[serde(default)]
    testbed: TestBedConfig,
    #[serde(default)]
    demand: DemandKind,
    #[serde(default = "default_segments")]
    segments: Vec<usize>,
    #[serde(default = "default_strategies")]
    strategies: Vec<StrategyName>,
    #[serde(default)]
    search: Option<SearchSpec>,
}

fn default_segments() -> Vec<usize> {
    vec![2, 3, 4, 7, 11]
}

fn default_strategies() -> Vec<StrategyName> {
    vec![StrategyName::Uniform]
}

/// Outcome that maps onto the process exit status.
enum Outcome {
    Done,
    Infeasible,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bounds(a) => bounds(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Simulate(a) => simulate(a),
        Command::Partition(a) => partition(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(2),
        Err(Error::ServiceInfeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &Path) -> Result<(InstanceFile, LotSizingInstance)> {
    let file = InstanceFile::read(path)?;
    let inst = file.to_instance()?;
    Ok((file, inst))
}

fn strategy_of(args: &ModelArgs, file: &InstanceFile, inst: &LotSizingInstance, w: usize) -> Result<PartitionStrategy> {
    if let Some(path) = &args.partition {
        let p = parse_partition(&std::fs::read_to_string(path)?)?;
        if p.segments() != w && args.segments.is_some() {
            return Err(Error::Config(format!(
                "partition file has {} segments, --segments is {w}",
                p.segments()
            )));
        }
        return Ok(PartitionStrategy::Fixed(p));
    }
    Ok(match args.strategy {
        Some(Strategy::Uniform) => PartitionStrategy::Uniform,
        Some(Strategy::NormalTable) => PartitionStrategy::NormalTable,
        Some(Strategy::Search) => {
            let spec = file.partition.as_ref().and_then(|p| p.search.clone());
            PartitionSpec { strategy: StrategyName::Search, w: None, search: spec }.strategy()
        }
        None => match &file.partition {
            Some(p) => p.strategy(),
            None => PartitionStrategy::default_for(inst),
        },
    })
}

fn segments_of(args: &ModelArgs, file: &InstanceFile) -> usize {
    args.segments
        .or_else(|| file.partition.as_ref().and_then(|p| p.w))
        .unwrap_or(11)
}

/// Builds convolutions and linearizations shared by both bound models.
fn prepare(args: &ModelArgs) -> Result<(LotSizingInstance, ConvolutionTable, LinearizationSet)> {
    let (file, inst) = load(&args.instance)?;
    let mut w = segments_of(args, &file);
    let strategy = strategy_of(args, &file, &inst, w)?;
    if let PartitionStrategy::Fixed(p) = &strategy {
        w = p.segments();
    }
    let table = convolution_table(&inst)?;
    let lins = linearization_set(&table, &strategy, w)?;
    Ok((inst, table, lins))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn print_bound(out: &mut impl Write, b: &SolvedBound) -> io::Result<()> {
    let tag = b.direction.as_str();
    writeln!(out, "{tag}_status = {}", b.status())?;
    writeln!(out, "{tag}_objective = {}", fmt_opt(b.objective()))?;
    if let Some(p) = &b.policy {
        writeln!(out, "{tag}_policy = {p}")?;
    }
    writeln!(out, "{tag}_build_ms = {:.1}", b.build_ms)?;
    writeln!(out, "{tag}_solve_ms = {:.1}", b.solve_ms)
}

fn status_outcome(statuses: &[SolveStatus]) -> Result<Outcome> {
    if statuses.contains(&SolveStatus::Infeasible) {
        return Ok(Outcome::Infeasible);
    }
    if statuses.contains(&SolveStatus::Limit) {
        return Err(Error::Solver("time limit reached before proving optimality".into()));
    }
    Ok(Outcome::Done)
}

fn solve(args: SolveArgs) -> Result<Outcome> {
    let (inst, table, lins) = prepare(&args.model)?;
    let solver = solver_from_env()?;
    let cfg = SolverConfig::from_env()?;
    let dirs: &[BoundDirection] = match args.direction {
        Direction::Lb => &[BoundDirection::LowerBound],
        Direction::Ub => &[BoundDirection::UpperBound],
        Direction::Both => &[BoundDirection::LowerBound, BoundDirection::UpperBound],
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut statuses = Vec::new();
    for &dir in dirs {
        let b = solve_bound(&inst, &table, &lins, dir, Default::default(), solver.as_ref(), &cfg)?;
        if let Some(prefix) = &args.lp {
            let path = PathBuf::from(format!("{}_{}.lp", prefix.display(), dir.as_str()));
            std::fs::write(path, b.model.to_lp_format())?;
        }
        print_bound(&mut out, &b)?;
        statuses.push(b.status());
    }
    status_outcome(&statuses)
}

fn bounds(args: ModelArgs) -> Result<Outcome> {
    let (inst, table, lins) = prepare(&args)?;
    let solver = solver_from_env()?;
    let cfg = SolverConfig::from_env()?;
    let b = solve_bounds(&inst, &table, &lins, Default::default(), solver.as_ref(), &cfg)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "segments = {}", lins.segments())?;
    print_bound(&mut out, &b.lower)?;
    print_bound(&mut out, &b.upper)?;
    writeln!(out, "gap = {}", fmt_opt(b.gap))?;
    if let Some(exact) = &b.exact {
        writeln!(out, "evaluated_policy = {}", b.pessimistic().direction.as_str())?;
        writeln!(out, "exact_{} = {}", exact.kind.as_str(), exact.value)?;
    }
    status_outcome(&[b.lower.status(), b.upper.status()])
}

fn print_report(report: &EvaluationReport, format: Format) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Kv => write!(out, "{}", report.to_key_value())?,
        Format::Csv => {
            writeln!(out, "{}", report.csv_header().join(","))?;
            writeln!(out, "{}", report.csv_row().join(","))?;
        }
        Format::Json => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?
        )?,
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<Outcome> {
    let (_, inst) = load(&args.instance)?;
    let policy = Policy::parse(&args.policy)?;
    print_report(&exact_policy_cost(&policy, &inst)?, args.format)?;
    Ok(Outcome::Done)
}

fn simulate(args: SimulateArgs) -> Result<Outcome> {
    let (_, inst) = load(&args.instance)?;
    let policy = Policy::parse(&args.policy)?;
    print_report(&simulate_policy(&policy, &inst, args.reps, args.seed)?, args.format)?;
    Ok(Outcome::Done)
}

fn partition_inputs(inputs: &[String]) -> Result<Vec<Distribution>> {
    let mut laws = Vec::new();
    for input in inputs {
        if input.trim_start().starts_with('{') {
            let d: Distribution = serde_json::from_str(input)
                .map_err(|e| Error::Parse(format!("distribution {input:?}: {e}")))?;
            laws.push(d);
        } else {
            let (_, inst) = load(Path::new(input))?;
            laws.extend(convolution_table(&inst)?.iter().map(|c| c.law.clone()));
        }
    }
    Ok(laws)
}

fn partition(args: PartitionArgs) -> Result<Outcome> {
    let laws = partition_inputs(&args.inputs)?;
    let cfg = SearchConfig {
        population_size: args.population,
        step_size: args.step,
        seed: args.seed,
        ..SearchConfig::default()
    };
    let found = optimize_partition(&laws, args.segments, &cfg)?;
    for w in &found.warnings {
        eprintln!("warning: {w}");
    }
    let mut dump = format!(
        "# minimax_error = {}\n# uniform_error = {}\n",
        found.error, found.uniform_error
    );
    for p in found.partition.probs() {
        dump.push_str(&format!("{p}\n"));
    }
    match &args.out {
        Some(path) => std::fs::write(path, dump)?,
        None => print!("{dump}"),
    }
    Ok(Outcome::Done)
}

fn bench(args: BenchArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&args.config)?;
    let file: BenchFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", args.config.display())))?;
    let mut instances = generate_testbed(&file.testbed)?;
    if let DemandKind::Heterogeneous = file.demand {
        for b in &mut instances {
            b.instance.demand = heterogeneous_process(&b.instance.demand.means())?;
        }
    }
    let strategies = file
        .strategies
        .iter()
        .map(|&s| PartitionSpec { strategy: s, w: None, search: file.search.clone() }.strategy())
        .collect();
    let cfg = StudyConfig {
        segments: file.segments,
        strategies,
        solver: SolverConfig::from_env()?,
        ..StudyConfig::default()
    };
    let study = run_gap_study(&instances, &cfg, solver_from_env()?.as_ref())?;
    write_rows_csv(&study.rows, BufWriter::new(File::create(&args.out)?))?;
    match &args.summary {
        Some(path) => write_summary_csv(&study.summary, BufWriter::new(File::create(path)?))?,
        None => write_summary_csv(&study.summary, io::stdout().lock())?,
    }
    Ok(Outcome::Done)
}
