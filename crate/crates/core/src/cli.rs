//! Command-line front end. Exit codes: 0 success, 1 domain error (invalid
//! schedule, unsolvable model, scheduler failure), 2 input error.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::conflict::validate;
use crate::metrics::{model_variant, Variant};
use crate::multihop::{evaluate_network, NetworkError, NetworkResult, NetworkScenario};
use crate::schedule::Schedule;
use crate::schedulers::{generate, Algorithm, SchedulerError};
use crate::sim::{
    simulate_network, simulate_queue, Estimate, NetworkSimConfig, QueueSimConfig, QueueSpec,
};
use crate::stationary::SolverOptions;
use crate::sweep::{run_sweep, write_csv, SweepSpec};
use crate::topology::{NodeId, Topology, ROOT};
use crate::traffic::TrafficSpec;

#[derive(Debug, Parser)]
#[command(name = "tsch-model", version, about = "Analytical queue model for TSCH schedules")]
pub struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a schedule against a topology.
    Validate(ValidateArgs),
    /// Generate a schedule for a topology.
    Schedule(ScheduleArgs),
    /// Evaluate the analytical model.
    Analyze(AnalyzeArgs),
    /// Evaluate the model over a parameter grid.
    Sweep(SweepArgs),
    /// Run the slot-level simulation.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long)]
    pub topology: PathBuf,
    /// Print the full report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Sbd,
    TaSc,
    TaMc,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Sbd => Algorithm::Sbd,
            AlgorithmArg::TaSc => Algorithm::TaSingle,
            AlgorithmArg::TaMc => Algorithm::TaMulti,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(value_enum)]
    pub algorithm: AlgorithmArg,
    #[arg(long, conflicts_with = "rings", required_unless_present = "rings")]
    pub topology: Option<PathBuf>,
    /// Use a generated concentric network with this many rings.
    #[arg(long)]
    pub rings: Option<usize>,
    /// Schedule output file (default: stdout, summary goes to stderr).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the topology used, e.g. a generated one.
    #[arg(long)]
    pub topology_out: Option<PathBuf>,
    /// Write the message trace, one line per message.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Md1k,
    Distributed,
    Full,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Md1k => Variant::Md1k,
            VariantArg::Distributed => Variant::Distributed,
            VariantArg::Full => Variant::Full,
        }
    }
}

/// Network given by files, or a single node given by its slots and traffic.
#[derive(Debug, Args)]
pub struct Target {
    #[arg(long, requires = "topology")]
    pub schedule: Option<PathBuf>,
    #[arg(long, requires = "schedule")]
    pub topology: Option<PathBuf>,
    /// Generation rate in packets per slot per node.
    #[arg(long, conflicts_with = "interval")]
    pub rate: Option<f64>,
    /// Mean generation interval per node in seconds.
    #[arg(long)]
    pub interval: Option<f64>,
    /// Single-node mode: slotframe length.
    #[arg(long, conflicts_with = "schedule")]
    pub slots: Option<usize>,
    /// Single-node mode: TX slots.
    #[arg(long, value_delimiter = ',', requires = "slots")]
    pub tx: Vec<usize>,
    /// Single-node mode: Poisson rate per slot, one value or one per slot.
    #[arg(long, value_delimiter = ',', requires = "slots")]
    pub poisson: Vec<f64>,
    /// Single-node mode: Bernoulli probability per slot, one value or one
    /// per slot.
    #[arg(long, value_delimiter = ',', requires = "slots")]
    pub bernoulli: Vec<f64>,
    /// Maximum queue length K.
    #[arg(long = "queue", default_value_t = 16)]
    pub queue_limit: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub target: Target,
    #[arg(long, value_enum, default_value = "full")]
    pub variant: VariantArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write queue-level probabilities (node, q, probability).
    #[arg(long)]
    pub marginals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep description (JSON).
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Track {
    /// Packets generated in the outer ring.
    Outer,
    /// Packets generated anywhere.
    All,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub target: Target,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Independent runs (default 5 for networks, 10 for a single node).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Packets observed per run (default 100 tracked packets for networks,
    /// 10000 arrivals for a single node).
    #[arg(long)]
    pub packets: Option<usize>,
    /// Network warm-up in seconds.
    #[arg(long, default_value_t = 900.0)]
    pub warmup: f64,
    #[arg(long, value_enum, default_value = "outer")]
    pub track: Track,
    /// Aggregate CSV output (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-run CSV output (run, metric, value).
    #[arg(long)]
    pub runs_out: Option<PathBuf>,
    /// Add the model value and whether it lies inside the 95% interval.
    #[arg(long)]
    pub compare: bool,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Domain(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn network_error(e: NetworkError) -> CliError {
    match e {
        NetworkError::Rate(_) | NetworkError::PacketErrorRatio { .. } => input(e),
        other => domain(other),
    }
}

/// Parses arguments and runs the command.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if let Some(w) = cli.workers {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
    }
    match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Schedule(a) => cmd_schedule(&a).map(|_| ExitCode::SUCCESS),
        Command::Analyze(a) => cmd_analyze(&a).map(|_| ExitCode::SUCCESS),
        Command::Sweep(a) => cmd_sweep(&a).map(|_| ExitCode::SUCCESS),
        Command::Simulate(a) => cmd_simulate(&a).map(|_| ExitCode::SUCCESS),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| input(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write_rows<T: Serialize>(rows: &[T], out: Box<dyn Write>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(input)?;
    }
    w.flush().map_err(input)
}

fn load_pair(schedule: &Path, topology: &Path) -> Result<(Schedule, Topology), CliError> {
    Ok((
        Schedule::load(schedule).map_err(input)?,
        Topology::load(topology).map_err(input)?,
    ))
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode, CliError> {
    let (schedule, topology) = load_pair(&args.schedule, &args.topology)?;
    let report = validate(&schedule, &topology);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(input)?);
    } else {
        print!("{report}");
        println!();
    }
    Ok(if report.is_valid() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn cmd_schedule(args: &ScheduleArgs) -> Result<(), CliError> {
    let topology = match (&args.topology, args.rings) {
        (Some(p), _) => Topology::load(p).map_err(input)?,
        (None, Some(r)) if r >= 1 => Topology::concentric(r),
        _ => return Err(input("--rings must be at least 1")),
    };
    let generated = generate(args.algorithm.into(), &topology).map_err(|e: SchedulerError| domain(e))?;
    let schedule = &generated.schedule;

    let mut summary = String::new();
    let (rx, ratio) = schedule.rx_ratio(ROOT);
    summary += &format!("S={}\n", schedule.slotframe_length());
    summary += &format!("root RX slots {rx} ratio {ratio:.4}\n");
    for n in 0..schedule.node_count() {
        summary += &format!(
            "node {n} tx {} rx {}\n",
            schedule.node(n).tx.len(),
            schedule.node(n).rx.len()
        );
    }
    if let Some(p) = &args.trace {
        let lines: String = generated.trace.iter().map(|e| format!("{e}\n")).collect();
        write_text(p, &lines)?;
    }
    if let Some(p) = &args.topology_out {
        write_text(p, &topology.to_json())?;
    }
    match &args.out {
        Some(p) => {
            write_text(p, &schedule.to_json())?;
            print!("{summary}");
        }
        None => {
            println!("{}", schedule.to_json());
            eprint!("{summary}");
        }
    }
    Ok(())
}

/// Single-node traffic from the command line; scalars apply to every slot.
fn node_traffic(t: &Target, slots: usize) -> Result<TrafficSpec, CliError> {
    let expand = |v: &[f64], name: &str| -> Result<Vec<f64>, CliError> {
        match v.len() {
            0 => Ok(vec![0.0; slots]),
            1 => Ok(vec![v[0]; slots]),
            n if n == slots => Ok(v.to_vec()),
            n => Err(input(format!("--{name} has {n} values, expected 1 or {slots}"))),
        }
    };
    TrafficSpec::new(expand(&t.poisson, "poisson")?, expand(&t.bernoulli, "bernoulli")?).map_err(input)
}

fn scenario(t: &Target) -> Result<NetworkScenario, CliError> {
    let (Some(s), Some(top)) = (&t.schedule, &t.topology) else {
        return Err(input("give --schedule and --topology, or --slots for a single node"));
    };
    let (schedule, topology) = load_pair(s, top)?;
    let sc = NetworkScenario::new(schedule, topology, 0.0, t.queue_limit);
    match (t.rate, t.interval) {
        (Some(r), None) => Ok(NetworkScenario {
            generation_rate: r,
            ..sc
        }),
        (None, Some(i)) if i > 0.0 && i.is_finite() => Ok(sc.with_interval(i)),
        (None, Some(_)) => Err(input("--interval must be positive")),
        _ => Err(input("give --rate or --interval")),
    }
}

#[derive(Serialize)]
struct MetricRow {
    metric: String,
    value: f64,
}

#[derive(Serialize)]
struct NodeRow {
    node: String,
    paccept: Option<f64>,
    delay_slots: Option<f64>,
    delay_s: Option<f64>,
    pdr: f64,
    e2e_delay_slots: f64,
    e2e_delay_s: f64,
    throughput: Option<f64>,
}

fn node_rows(r: &NetworkResult, outer: &[NodeId]) -> Vec<NodeRow> {
    let mut rows: Vec<NodeRow> = (0..r.pdr.len())
        .map(|n| {
            let (pa, d) = r.nodes[n]
                .as_ref()
                .map_or((1.0, 0.0), |m| (m.acceptance, m.expected_delay));
            NodeRow {
                node: n.to_string(),
                paccept: Some(pa),
                delay_slots: Some(d),
                delay_s: Some(d * r.slot_duration),
                pdr: r.pdr[n],
                e2e_delay_slots: r.delay[n],
                e2e_delay_s: r.delay_seconds(n),
                throughput: None,
            }
        })
        .collect();
    let (pdr, delay) = r.average(outer);
    rows.push(NodeRow {
        node: "outer".into(),
        paccept: None,
        delay_slots: None,
        delay_s: None,
        pdr,
        e2e_delay_slots: delay,
        e2e_delay_s: delay * r.slot_duration,
        throughput: Some(r.throughput()),
    });
    rows
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let t = &args.target;
    let options = SolverOptions::default();
    let variant: Variant = args.variant.into();

    if let Some(slots) = t.slots {
        let traffic = node_traffic(t, slots)?;
        let m = model_variant(variant, t.queue_limit, &t.tx, &traffic, &options).map_err(|e| {
            use crate::chain::ModelError::*;
            match e {
                QueueLimit | EmptySlotframe | SlotOutOfRange { .. } | TrafficLength { .. } => input(e),
                other => domain(other),
            }
        })?;
        let mut rows = vec![
            MetricRow { metric: "offered".into(), value: m.offered },
            MetricRow { metric: "paccept".into(), value: m.acceptance },
            MetricRow { metric: "delay_slots".into(), value: m.expected_delay },
            MetricRow { metric: "residual".into(), value: m.residual },
        ];
        for (i, tx) in m.transmission.iter().enumerate() {
            rows.push(MetricRow { metric: format!("tx_{i}"), value: *tx });
        }
        if let Some(p) = &args.marginals {
            let q: Vec<MetricRow> = m
                .marginals
                .iter()
                .enumerate()
                .map(|(q, &value)| MetricRow { metric: format!("q_{q}"), value })
                .collect();
            write_rows(&q, output(Some(p))?)?;
        }
        return write_rows(&rows, output(args.out.as_deref())?);
    }

    let sc = scenario(t)?.with_variant(variant);
    let result = evaluate_network(&sc).map_err(network_error)?;
    let outer = sc.topology.outermost();
    write_rows(&node_rows(&result, &outer), output(args.out.as_deref())?)?;
    if let Some(p) = &args.marginals {
        #[derive(Serialize)]
        struct Level {
            node: NodeId,
            q: usize,
            probability: f64,
        }
        let rows: Vec<Level> = result
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(n, m)| m.as_ref().map(|m| (n, m)))
            .flat_map(|(node, m)| {
                m.marginals
                    .iter()
                    .enumerate()
                    .map(move |(q, &probability)| Level { node, q, probability })
            })
            .collect();
        write_rows(&rows, output(Some(p))?)?;
    }
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let spec = SweepSpec::load(&args.spec).map_err(input)?;
    let rows = run_sweep(&spec).map_err(|e| if e.is_input() { input(e) } else { domain(e) })?;
    write_csv(&rows, output(args.out.as_deref())?).map_err(input)
}

#[derive(Serialize)]
struct RunRow {
    run: usize,
    metric: &'static str,
    value: f64,
}

#[derive(Serialize)]
struct AggregateRow {
    metric: &'static str,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inside_ci: Option<&'static str>,
}

fn aggregate(metric: &'static str, e: &Estimate, model: Option<f64>) -> AggregateRow {
    AggregateRow {
        metric,
        mean: e.mean,
        ci_low: e.ci_low,
        ci_high: e.ci_high,
        model,
        inside_ci: model.map(|m| if e.contains(m) { "yes" } else { "no" }),
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let t = &args.target;
    let mut metrics: Vec<(&'static str, Estimate, Option<f64>)> = Vec::new();

    if let Some(slots) = t.slots {
        let traffic = node_traffic(t, slots)?;
        if t.queue_limit == 0 || t.tx.iter().any(|&i| i >= slots) {
            return Err(input("need --queue >= 1 and TX slots inside the slotframe"));
        }
        let spec = QueueSpec {
            queue_limit: t.queue_limit,
            tx_slots: t.tx.clone(),
            traffic: traffic.clone(),
        };
        let config = QueueSimConfig {
            seed: args.seed,
            runs: args.runs.unwrap_or(10).max(1),
            packets: args.packets.unwrap_or(10_000).max(1),
            ..QueueSimConfig::default()
        };
        let stats = simulate_queue(&spec, &config);
        let model = if args.compare {
            Some(
                model_variant(Variant::Full, t.queue_limit, &t.tx, &traffic, &SolverOptions::default())
                    .map_err(domain)?,
            )
        } else {
            None
        };
        metrics.push(("acceptance", stats.acceptance, model.as_ref().map(|m| m.acceptance)));
        metrics.push(("delay_slots", stats.delay, model.as_ref().map(|m| m.expected_delay)));
    } else {
        let sc = scenario(t)?;
        let tracked = match args.track {
            Track::Outer => sc.topology.outermost(),
            Track::All => Vec::new(),
        };
        let config = NetworkSimConfig {
            seed: args.seed,
            runs: args.runs.unwrap_or(5).max(1),
            tracked_packets: args.packets.unwrap_or(100).max(1),
            tracked_nodes: tracked.clone(),
            ..NetworkSimConfig::default()
        }
        .with_warmup_seconds(args.warmup, sc.schedule.slot_duration());
        let stats = simulate_network(&sc, &config).map_err(network_error)?;
        let model = if args.compare {
            let r = evaluate_network(&sc).map_err(network_error)?;
            let nodes: Vec<NodeId> = if tracked.is_empty() {
                (1..sc.topology.node_count()).collect()
            } else {
                tracked
            };
            let (pdr, delay) = r.average(&nodes);
            Some((pdr, delay, r.throughput()))
        } else {
            None
        };
        metrics.push(("pdr", stats.pdr, model.map(|m| m.0)));
        metrics.push(("delay_slots", stats.delay, model.map(|m| m.1)));
        metrics.push(("throughput", stats.throughput, model.map(|m| m.2)));
    }

    if let Some(p) = &args.runs_out {
        let rows: Vec<RunRow> = metrics
            .iter()
            .flat_map(|(metric, e, _)| {
                e.runs
                    .iter()
                    .enumerate()
                    .map(move |(run, &value)| RunRow { run, metric, value })
            })
            .collect();
        write_rows(&rows, output(Some(p))?)?;
    }
    let rows: Vec<AggregateRow> = metrics
        .iter()
        .map(|(metric, e, model)| aggregate(metric, e, *model))
        .collect();
    write_rows(&rows, output(args.out.as_deref())?)
}
