//! Command-line front end: validate scenarios, list disjoint paths, run
//! single transfers and batches, and analyze reconstruction probabilities.
//!
//! Exit codes: 0 success, 1 no path between the endpoints, 2 configuration
//! or parse error, 3 delivery or reconstruction failure (`send` only;
//! `validate` uses 1 for invariant violations). Identical command lines and
//! seeds produce byte-identical stdout.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdmp::codec::CipherKey;
use sdmp::engine::{
    self, AnalyzeReport, BatchReport, DispatchMode, SimReport, TransferConfig,
};
use sdmp::leakage::AdversaryModel;
use sdmp::routing::{self, RoutingError};
use sdmp::topology::{NodeId, Scenario, Topology};

const EXIT_NO_PATH: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_RECONSTRUCTED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sdmp",
    version,
    about = "Split a message, disperse it over node-disjoint paths, and measure what an eavesdropper learns",
    long_about = None
)]
struct Cli {
    /// 64-bit hex seed driving every random draw.
    #[arg(long, global = true, default_value = "0")]
    seed: String,

    /// Output format (default: json; `paths` defaults to plain text).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write the event trace of a transfer to this file (send only).
    #[arg(long, global = true)]
    trace: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Unipath,
    Multipath,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file; prints one violation per line.
    Validate {
        /// Scenario file (JSON).
        topology: PathBuf,
    },
    /// List node-disjoint paths with their security costs, cheapest first.
    Paths {
        topology: PathBuf,
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        /// Cap on the number of disjoint paths to discover.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        max: Option<u64>,
    },
    /// Simulate one transfer and print its report.
    Send {
        topology: PathBuf,
        #[command(flatten)]
        transfer: TransferArgs,
    },
    /// Compute the adversary's reconstruction probability for a dispatch:
    /// exact when at most 20 relays matter, Monte Carlo otherwise.
    Analyze {
        topology: PathBuf,
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(2..))]
        parts: u16,
        #[arg(long, value_enum, default_value_t = ModeArg::Multipath)]
        mode: ModeArg,
        /// Number of paths to dispatch over (multipath only; default all).
        #[arg(long)]
        path_count: Option<usize>,
        /// Monte Carlo sample size when exact enumeration is infeasible.
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
    },
    /// Run repeated transfers with derived seeds and aggregate the rates.
    Batch {
        topology: PathBuf,
        #[command(flatten)]
        transfer: TransferArgs,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
    },
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long)]
    src: String,
    #[arg(long)]
    dst: String,
    /// Message to transfer (UTF-8).
    #[arg(long, default_value = "hello world")]
    message: String,
    /// Number of parts the message is split into.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(2..))]
    parts: u16,
    #[arg(long, value_enum, default_value_t = ModeArg::Multipath)]
    mode: ModeArg,
    /// Number of paths to dispatch over (multipath only; default all).
    #[arg(long)]
    path_count: Option<usize>,
    /// 64-bit hex cipher key.
    #[arg(long, default_value = "0")]
    key: String,
    /// Adversary: "none", "independent", or "fixed:<id>,<id>,...".
    #[arg(long, default_value = "none")]
    adversary: String,
    /// Treat intercepted payloads as unreadable (cipher holds).
    #[arg(long)]
    cipher_intact: bool,
    /// Let compromised endpoints observe traffic too.
    #[arg(long)]
    untrusted_endpoints: bool,
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let seed = parse_hex64(&cli.seed, "--seed")?;
    match cli.command {
        Command::Validate { topology } => cmd_validate(&topology),
        Command::Paths {
            topology,
            src,
            dst,
            max,
        } => cmd_paths(&topology, &src, &dst, max, cli.format),
        Command::Send { topology, transfer } => {
            cmd_send(&topology, &transfer, seed, cli.format, cli.trace.as_deref())
        }
        Command::Analyze {
            topology,
            src,
            dst,
            parts,
            mode,
            path_count,
            trials,
        } => cmd_analyze(
            &topology, &src, &dst, parts, mode, path_count, trials, seed, cli.format,
        ),
        Command::Batch {
            topology,
            transfer,
            trials,
        } => cmd_batch(&topology, &transfer, trials, seed, cli.format),
    }
}

fn cmd_validate(path: &std::path::Path) -> Result<u8, Failure> {
    let bytes = read_file(path)?;
    let scenario =
        Scenario::parse(&bytes).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let violations = scenario.validate();
    if violations.is_empty() {
        Ok(0)
    } else {
        for violation in &violations {
            println!("{violation}");
        }
        Ok(EXIT_NO_PATH) // exit 1: well-formed file, broken invariants
    }
}

fn cmd_paths(
    path: &std::path::Path,
    src: &str,
    dst: &str,
    max: Option<u64>,
    format: Option<Format>,
) -> Result<u8, Failure> {
    let scenario = load_checked(path)?;
    let topo = &scenario.topology;
    let (src, dst) = (NodeId::from(src), NodeId::from(dst));
    let cap = max.map_or(usize::MAX, |m| m as usize);
    let discovered =
        routing::max_disjoint_paths(topo, &src, &dst, cap).map_err(routing_failure)?;
    let probs = topo.compromise_probs();
    let ranked =
        routing::select_paths(&discovered, discovered.len(), &probs).map_err(routing_failure)?;
    let reports = path_reports(&ranked, topo).map_err(routing_failure)?;
    match format {
        None => {
            for p in &reports {
                println!("{}  cost {}", p.nodes.join(" -> "), p.cost);
            }
        }
        Some(Format::Json) => println!("{}", serde_json::to_string(&reports).unwrap()),
        Some(Format::Csv) => {
            for p in &reports {
                println!("{},{}", p.nodes.join("-"), p.cost);
            }
        }
    }
    Ok(0)
}

fn cmd_send(
    path: &std::path::Path,
    args: &TransferArgs,
    seed: u64,
    format: Option<Format>,
    trace: Option<&std::path::Path>,
) -> Result<u8, Failure> {
    let scenario = load_checked(path)?;
    let cfg = transfer_config(args, seed, &scenario)?;
    let cfg = TransferConfig {
        record_trace: trace.is_some(),
        ..cfg
    };
    let (src, dst) = endpoints(args)?;
    let run = engine::run_transfer(
        &scenario.topology,
        &src,
        &dst,
        args.message.as_bytes(),
        &cfg,
    )
    .map_err(engine_failure)?;
    if let Some(trace_path) = trace {
        let mut out = String::new();
        for event in &run.trace {
            out.push_str(&event.to_line());
            out.push('\n');
        }
        fs::write(trace_path, out)
            .map_err(|e| fail(EXIT_CONFIG, format!("cannot write trace: {e}")))?;
    }
    match format.unwrap_or(Format::Json) {
        Format::Json => println!("{}", serde_json::to_string(&run.report).unwrap()),
        Format::Csv => println!("{}", send_csv(&run.report)),
    }
    if run.report.reconstructed_ok {
        Ok(0)
    } else {
        Ok(EXIT_NOT_RECONSTRUCTED)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    path: &std::path::Path,
    src: &str,
    dst: &str,
    parts: u16,
    mode: ModeArg,
    path_count: Option<usize>,
    trials: u64,
    seed: u64,
    format: Option<Format>,
) -> Result<u8, Failure> {
    let scenario = load_checked(path)?;
    let topo = &scenario.topology;
    let cfg = TransferConfig {
        part_count: parts,
        mode: dispatch_mode(mode, path_count)?,
        seed,
        adversary: AdversaryModel::independent(topo.compromise_probs()),
        mac: scenario.mac.clone(),
        ..TransferConfig::default()
    };
    let (src, dst) = (NodeId::from(src), NodeId::from(dst));
    let report = engine::run_analysis(topo, &src, &dst, &cfg, trials).map_err(engine_failure)?;
    match format.unwrap_or(Format::Json) {
        Format::Json => println!("{}", serde_json::to_string(&report).unwrap()),
        Format::Csv => println!("{}", analyze_csv(&report)),
    }
    Ok(0)
}

fn cmd_batch(
    path: &std::path::Path,
    args: &TransferArgs,
    trials: u64,
    seed: u64,
    format: Option<Format>,
) -> Result<u8, Failure> {
    let scenario = load_checked(path)?;
    let cfg = transfer_config(args, seed, &scenario)?;
    let (src, dst) = endpoints(args)?;
    let report = engine::run_batch(
        &scenario.topology,
        &src,
        &dst,
        args.message.as_bytes(),
        &cfg,
        trials,
        seed,
    )
    .map_err(engine_failure)?;
    match format.unwrap_or(Format::Json) {
        Format::Json => println!("{}", serde_json::to_string(&report).unwrap()),
        Format::Csv => println!("{}", batch_csv(&report)),
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// Argument plumbing
// ---------------------------------------------------------------------------

fn read_file(path: &std::path::Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| fail(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))
}

fn load_checked(path: &std::path::Path) -> Result<Scenario, Failure> {
    let bytes = read_file(path)?;
    sdmp::topology::load_scenario(&bytes).map_err(|e| fail(EXIT_CONFIG, e.to_string()))
}

fn parse_hex64(text: &str, flag: &str) -> Result<u64, Failure> {
    let digits = text.strip_prefix("0x").unwrap_or(text);
    u64::from_str_radix(digits, 16)
        .map_err(|_| fail(EXIT_CONFIG, format!("{flag} wants a 64-bit hex value, got {text:?}")))
}

fn dispatch_mode(mode: ModeArg, path_count: Option<usize>) -> Result<DispatchMode, Failure> {
    match (mode, path_count) {
        (ModeArg::Unipath, None) => Ok(DispatchMode::Unipath),
        (ModeArg::Unipath, Some(_)) => Err(fail(
            EXIT_CONFIG,
            "--path-count only applies to --mode multipath",
        )),
        (ModeArg::Multipath, m) => {
            let m = m.unwrap_or(usize::MAX);
            if m == 0 {
                return Err(fail(EXIT_CONFIG, "--path-count must be at least 1"));
            }
            Ok(DispatchMode::Multipath(m))
        }
    }
}

fn endpoints(args: &TransferArgs) -> Result<(NodeId, NodeId), Failure> {
    Ok((NodeId::from(args.src.as_str()), NodeId::from(args.dst.as_str())))
}

fn transfer_config(
    args: &TransferArgs,
    seed: u64,
    scenario: &Scenario,
) -> Result<TransferConfig, Failure> {
    let mut adversary = parse_adversary(&args.adversary, &scenario.topology)?;
    adversary.cipher_broken = !args.cipher_intact;
    adversary.endpoints_trusted = !args.untrusted_endpoints;
    Ok(TransferConfig {
        part_count: args.parts,
        mode: dispatch_mode(args.mode, args.path_count)?,
        key: CipherKey(parse_hex64(&args.key, "--key")?),
        seed,
        msg_id: 1,
        adversary,
        mac: scenario.mac.clone(),
        record_trace: false,
    })
}

fn parse_adversary(spec: &str, topo: &Topology) -> Result<AdversaryModel, Failure> {
    if spec == "none" {
        return Ok(AdversaryModel::none());
    }
    if spec == "independent" {
        return Ok(AdversaryModel::independent(topo.compromise_probs()));
    }
    if let Some(list) = spec.strip_prefix("fixed:") {
        let mut nodes = BTreeSet::new();
        for id in list.split(',').filter(|s| !s.is_empty()) {
            let id = NodeId::from(id);
            if !topo.contains(&id) {
                return Err(fail(
                    EXIT_CONFIG,
                    format!("adversary node {id} not in topology"),
                ));
            }
            nodes.insert(id);
        }
        return Ok(AdversaryModel::fixed(nodes));
    }
    Err(fail(
        EXIT_CONFIG,
        format!("bad adversary spec {spec:?}: want none, independent, or fixed:<ids>"),
    ))
}

fn routing_failure(e: RoutingError) -> Failure {
    let code = match e {
        RoutingError::NoPath { .. } => EXIT_NO_PATH,
        _ => EXIT_CONFIG,
    };
    fail(code, e.to_string())
}

fn engine_failure(e: engine::EngineError) -> Failure {
    match e {
        engine::EngineError::Routing(e) => routing_failure(e),
        engine::EngineError::Codec(e) => fail(EXIT_CONFIG, e.to_string()),
    }
}

fn path_reports(
    ps: &routing::PathSet,
    topo: &Topology,
) -> Result<Vec<engine::PathReport>, RoutingError> {
    let probs = topo.compromise_probs();
    ps.paths
        .iter()
        .map(|p| {
            Ok(engine::PathReport {
                nodes: p.nodes().iter().map(|n| n.as_str().to_owned()).collect(),
                cost: routing::security_cost(p, &probs)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// CSV rows (column order is part of the CLI contract; see README)
// ---------------------------------------------------------------------------

fn join<I: IntoIterator<Item = T>, T: ToString>(items: I, sep: &str) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

fn paths_field(paths: &[engine::PathReport]) -> String {
    join(
        paths
            .iter()
            .map(|p| format!("{}:{}", p.nodes.join("-"), p.cost)),
        ";",
    )
}

fn send_csv(r: &SimReport) -> String {
    let mut row = String::new();
    let _ = write!(
        row,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.mode,
        r.seed,
        r.msg_id,
        r.part_count,
        r.delivered,
        r.reconstructed_ok,
        r.completion_time,
        r.frames_sent,
        r.frames_delivered,
        r.frames_intercepted,
        join(r.intercepted.indices(), ";"),
        join(r.leakage.recoverable_parts.iter(), ";"),
        r.leakage.full_reconstruction,
        paths_field(&r.paths),
        join(r.combo_assignment.iter(), ";"),
    );
    row
}

fn analyze_csv(r: &AnalyzeReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.method,
        r.mode,
        r.part_count,
        r.seed,
        r.reconstruction_prob,
        r.stderr.map(|s| s.to_string()).unwrap_or_default(),
        r.trials.map(|t| t.to_string()).unwrap_or_default(),
        paths_field(&r.paths),
    )
}

fn batch_csv(r: &BatchReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.trials,
        r.mode,
        r.seed,
        r.delivered_trials,
        r.intercepted_trials,
        r.adversary_reconstructions,
        r.delivery_rate,
        r.interception_rate,
        r.reconstruction_rate,
        r.mean_completion_time,
    )
}
