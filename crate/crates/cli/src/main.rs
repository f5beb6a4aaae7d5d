use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use netlab::addr::{parse_v4, parse_v6, usable_hosts, V4Address, V4Prefix};
use netlab::aggregation::{
    aggregate_burst, assemble_bursts, disaggregate, generate_trace, header_swap_analysis,
    payload_reconstruct_analysis, remanufacture_sweep, stats_csv, AggError, BurstPolicy, Carrier,
    IpVersion, SizeDist, SweepRow, Trace, TraceProfile, Trigger,
};
use netlab::channel::{
    parse_experiment_config, run_experiment, Axis, BufferPolicy, ExperimentGrid, ReorderModel,
};
use netlab::subnet::{
    build_plan, check_feasibility, parse_requirements, render_plan, RenderFormat,
};

/// Addressing, subnet planning, keyed-transport simulation and packet
/// aggregation tools.
#[derive(Parser)]
#[command(name = "netlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// IPv4 and IPv6 address tools
    #[command(subcommand)]
    Addr(AddrCmd),
    /// Build a VLSM addressing table
    Plan(PlanArgs),
    /// Run the keyed-transport Monte-Carlo experiment
    KeyedSim(KeyedSimArgs),
    /// Assemble a trace into bursts and report carrier statistics
    Aggregate(AggregateArgs),
    /// IPv4 to IPv6 conversion analyses over a trace
    Remanufacture(RemanufactureArgs),
    /// Synthetic trace tools
    #[command(subcommand)]
    Trace(TraceCmd),
}

#[derive(Subcommand)]
enum AddrCmd {
    /// Print class and scope of an IPv4 address
    Classify { addr: String },
    /// Print network, broadcast and host range of a.b.c.d/len
    Net { prefix: String },
    /// IPv6 text tools
    #[command(subcommand)]
    V6(V6Cmd),
}

#[derive(Subcommand)]
enum V6Cmd {
    /// Print the canonical text form
    Canon { addr: String },
    /// Print the address type
    Classify { addr: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Pretty,
}

#[derive(Args)]
struct PlanArgs {
    /// Base network, e.g. 10.0.0.0/23
    #[arg(long)]
    base: V4Prefix,
    /// Requirements file with `name,hosts[,/len]` lines
    #[arg(long)]
    reqs: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    format: Format,
}

#[derive(Args)]
struct KeyedSimArgs {
    /// Impairment axis: loss or reorder
    #[arg(long)]
    axis: Option<Axis>,
    /// key=value experiment file; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Error rate; repeat for several
    #[arg(long)]
    rate: Vec<f64>,
    /// Comma separated key sizes
    #[arg(long, value_delimiter = ',')]
    key_sizes: Vec<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// adjacent or displacement:D
    #[arg(long)]
    model: Option<ReorderModel>,
    /// half or full
    #[arg(long)]
    buffer: Option<BufferPolicy>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Size,
    Time,
    Hybrid,
}

#[derive(Clone, Copy, ValueEnum)]
enum CarrierArg {
    V4,
    V6,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Hybrid)]
    policy: PolicyArg,
    /// Largest burst payload in bytes
    #[arg(long, default_value_t = 9000)]
    max_size: usize,
    #[arg(long, default_value_t = 10_000)]
    max_delay_us: u64,
    #[arg(long, value_enum, default_value_t = CarrierArg::V6)]
    carrier: CarrierArg,
    /// Check that every carrier unwraps to its original packets
    #[arg(long)]
    check_roundtrip: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Swap,
    Reconstruct,
    /// Every standard vicinity and size limit
    Sweep,
}

#[derive(Args)]
struct RemanufactureArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value_t = 500)]
    vicinity_us: u64,
    /// IPv6 packet size limit (the MTU in swap mode)
    #[arg(long, default_value_t = 1500)]
    limit: u32,
}

#[derive(Subcommand)]
enum TraceCmd {
    /// Write a synthetic trace CSV
    Generate(GenerateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 10_000)]
    packets: usize,
    #[arg(long, default_value_t = 32)]
    flows: usize,
    #[arg(long, default_value_t = 4)]
    destinations: usize,
    /// Stop once timestamps pass this point
    #[arg(long)]
    duration_us: Option<u64>,
    /// Fixed packet size instead of the mixed profile
    #[arg(long)]
    size: Option<u32>,
    #[arg(long, default_value_t = 8.0)]
    mean_train: f64,
    #[arg(long, value_enum, default_value_t = CarrierArg::V4)]
    ip_version: CarrierArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A well-formed request that cannot be satisfied. Exits with status 2.
#[derive(Debug)]
struct Constraint(String);

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Constraint {}

fn constraint(msg: impl Into<String>) -> anyhow::Error {
    Constraint(msg.into()).into()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_trace(path: &Path) -> Result<Trace> {
    let f = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Trace::read_csv(f).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_addr(cmd: AddrCmd) -> Result<String> {
    Ok(match cmd {
        AddrCmd::Classify { addr } => {
            let a = parse_v4(&addr)?;
            format!("{a}: Class {}, {}\n", a.class(), a.scope())
        }
        AddrCmd::Net { prefix } => {
            let p: V4Prefix = prefix.parse()?;
            let len = p.prefix_len();
            let mut out = format!(
                "address: {}\nmask: {} ({})\nnetwork: {}\nbroadcast: {}\nusable: {}\n",
                p.addr,
                V4Address::new(p.mask.value()),
                p.mask,
                p.network(),
                p.broadcast(),
                usable_hosts(len)
            );
            if len <= 30 {
                let first = p.network().value() + 1;
                let last = p.broadcast().value() - 1;
                out += &format!(
                    "first host: {}\nlast host: {}\n",
                    V4Address::new(first),
                    V4Address::new(last)
                );
            }
            out
        }
        AddrCmd::V6(V6Cmd::Canon { addr }) => format!("{}\n", parse_v6(&addr)?),
        AddrCmd::V6(V6Cmd::Classify { addr }) => {
            let a = parse_v6(&addr)?;
            format!("{a}\ntype: {}\n", a.kind())
        }
    })
}

fn cmd_plan(args: PlanArgs) -> Result<String> {
    let reqs = parse_requirements(&read(&args.reqs)?)?;
    let feas = check_feasibility(&reqs, args.base.prefix_len());
    if !feas.is_feasible() {
        return Err(constraint(format!(
            "infeasible: need {} addresses, base {} has {} (short by {})",
            feas.needed,
            args.base,
            feas.available,
            feas.deficit()
        )));
    }
    let table = build_plan(args.base, &reqs).map_err(|e| constraint(e.to_string()))?;
    let fmt = match args.format {
        Format::Csv => RenderFormat::Csv,
        Format::Pretty => RenderFormat::Pretty,
    };
    Ok(render_plan(&table, fmt))
}

fn cmd_keyed_sim(args: KeyedSimArgs) -> Result<String> {
    let mut grid = match &args.config {
        Some(path) => parse_experiment_config(&read(path)?)?,
        None => ExperimentGrid::for_axis(args.axis.unwrap_or(Axis::Loss)),
    };
    if let Some(axis) = args.axis {
        if args.config.is_some() && axis != grid.axis {
            // switch axis but keep whatever the file set besides rates
            grid.rates = ExperimentGrid::for_axis(axis).rates;
        }
        grid.axis = axis;
    }
    if !args.rate.is_empty() {
        grid.rates = args.rate;
    }
    if !args.key_sizes.is_empty() {
        grid.key_sizes = args.key_sizes;
    }
    if let Some(runs) = args.runs {
        grid.runs = runs;
    }
    if let Some(seed) = args.seed {
        grid.seed = seed;
    }
    if let Some(model) = args.model {
        grid.model = model;
    }
    if let Some(buffer) = args.buffer {
        grid.buffer = buffer;
    }
    let results = run_experiment(&grid)?;
    Ok(match args.format {
        Format::Csv => results.to_csv(),
        Format::Pretty => results.to_table(),
    })
}

fn cmd_aggregate(args: AggregateArgs) -> Result<String> {
    let trace = load_trace(&args.trace)?;
    let policy = BurstPolicy {
        max_burst_payload: args.max_size,
        max_delay_us: args.max_delay_us,
        trigger: match args.policy {
            PolicyArg::Size => Trigger::SizeOnly,
            PolicyArg::Time => Trigger::TimeOnly,
            PolicyArg::Hybrid => Trigger::Hybrid,
        },
    };
    let carrier = match args.carrier {
        CarrierArg::V4 => Carrier::v4_default(),
        CarrierArg::V6 => Carrier::v6_default(),
    };
    let bursts = assemble_bursts(&trace, &policy).map_err(|e| match e {
        AggError::PacketTooLarge { .. } => constraint(e.to_string()),
        e => e.into(),
    })?;
    let mut carrier_bytes = 0usize;
    let mut max_members = 0usize;
    let mut max_wait = 0u64;
    for (i, b) in bursts.iter().enumerate() {
        let c = aggregate_burst(b, &carrier).map_err(|e| constraint(format!("burst {i}: {e}")))?;
        if args.check_roundtrip && disaggregate(&c)? != b.member_bytes() {
            return Err(constraint(format!("burst {i} did not round trip")));
        }
        carrier_bytes += c.len();
        max_members = max_members.max(b.members.len());
        max_wait = max_wait.max(b.max_wait_us());
    }
    if args.check_roundtrip {
        eprintln!("roundtrip OK ({} bursts)", bursts.len());
    }
    let input_bytes: u64 = trace.records().iter().map(|r| r.total_len as u64).sum();
    let mean = if bursts.is_empty() {
        0.0
    } else {
        trace.len() as f64 / bursts.len() as f64
    };
    Ok(format!(
        "packets,bursts,mean_packets_per_burst,max_packets_per_burst,max_wait_us,input_bytes,carrier_bytes\n\
         {},{},{:.3},{},{},{},{}\n",
        trace.len(),
        bursts.len(),
        mean,
        max_members,
        max_wait,
        input_bytes,
        carrier_bytes
    ))
}

fn cmd_remanufacture(args: RemanufactureArgs) -> Result<String> {
    let trace = load_trace(&args.trace)?;
    if trace.is_empty() {
        bail!("trace is empty");
    }
    let rows = match args.mode {
        Mode::Swap => vec![SweepRow {
            parameterization: format!("swap mtu={}", args.limit),
            stats: header_swap_analysis(&trace, args.limit)?,
        }],
        Mode::Reconstruct => vec![SweepRow {
            parameterization: format!(
                "reconstruct vicinity_us={} limit={}",
                args.vicinity_us, args.limit
            ),
            stats: payload_reconstruct_analysis(&trace, args.vicinity_us, args.limit)?,
        }],
        Mode::Sweep => remanufacture_sweep(&trace)?,
    };
    Ok(stats_csv(&rows))
}

fn cmd_trace(cmd: TraceCmd) -> Result<String> {
    let TraceCmd::Generate(g) = cmd;
    let profile = TraceProfile {
        flows: g.flows,
        destinations: g.destinations,
        packets: g.packets,
        duration_us: g.duration_us,
        mean_train: g.mean_train,
        sizes: g.size.map_or_else(SizeDist::internet_mix, SizeDist::fixed),
        version: match g.ip_version {
            CarrierArg::V4 => IpVersion::V4,
            CarrierArg::V6 => IpVersion::V6,
        },
        seed: g.seed,
        ..TraceProfile::default()
    };
    let trace = generate_trace(&profile)?;
    match g.out {
        Some(path) => {
            let f =
                fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            trace.write_csv(f)?;
            Ok(String::new())
        }
        None => Ok(trace.to_csv()),
    }
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Addr(c) => cmd_addr(c),
        Command::Plan(a) => cmd_plan(a),
        Command::KeyedSim(a) => cmd_keyed_sim(a),
        Command::Aggregate(a) => cmd_aggregate(a),
        Command::Remanufacture(a) => cmd_remanufacture(a),
        Command::Trace(c) => cmd_trace(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Constraint>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
