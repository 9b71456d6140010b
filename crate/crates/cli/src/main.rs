//! Command-line front end: generates seeded instances, solves and compares
//! placements, and reproduces the evaluation sweeps as CSV artifacts. Every
//! file-writing command also drops a `<out>.manifest.json` recording the
//! resolved parameters, the seed list, and a sha256 digest per output, so
//! any artifact can be regenerated from its manifest alone.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 usage error,
//! 2 infeasible instance, 3 validation or i/o failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use nfplace::baselines::{
    exact_solve, first_fit, ExactError, ExactResult, DEFAULT_EXACT_LIMIT,
};
use nfplace::fabric::{derive_paths, required_ports, simulate, FabricConfig};
use nfplace::fm::{solve, solve_traced, SolveError};
use nfplace::placement::{evaluate_cost, write_placement, Placement};
use nfplace::sfc::validate_instance_graph;
use nfplace::workload::{
    generate_instance, load_instance, save_instance, ProblemInstance, WorkloadParams,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

/// Node counts the sweeps are plotted against.
const SWEEP_NODE_COUNTS: [usize; 5] = [10, 15, 20, 25, 30];

/// Fabric slots for throughput sweeps: long enough for stable means, short
/// enough that a hundred paired runs stay interactive.
const SWEEP_WARMUP_SLOTS: usize = 2_000;
const SWEEP_MEASURE_SLOTS: usize = 20_000;

#[derive(Debug)]
enum CmdError {
    Usage(String),
    Infeasible(String),
    Validation(String),
}

impl CmdError {
    fn code(&self) -> u8 {
        match self {
            CmdError::Usage(_) => EXIT_USAGE,
            CmdError::Infeasible(_) => EXIT_INFEASIBLE,
            CmdError::Validation(_) => EXIT_VALIDATION,
        }
    }

    fn message(&self) -> &str {
        match self {
            CmdError::Usage(m) | CmdError::Infeasible(m) | CmdError::Validation(m) => m,
        }
    }
}

fn io_err(what: &Path, e: std::io::Error) -> CmdError {
    CmdError::Validation(format!("{}: {e}", what.display()))
}

#[derive(Parser)]
#[command(
    name = "nfplace",
    version,
    about = "Service-chain instance placement: generation, solving, oracle checks, and CSV sweeps",
    after_help = "The worker count for sweeps and comparisons comes from NFPLACE_WORKERS \
                  (default: one per CPU). Exit codes: 0 ok, 1 usage, 2 infeasible, 3 validation."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded problem instance and save it to a file.
    Generate(GenerateArgs),
    /// Solve an instance file and write the placement plus a CSV stats line.
    Solve(SolveArgs),
    /// Compare solver and first fit against the exhaustive optimum over a
    /// window of small seeded draws.
    Compare(CompareArgs),
    /// Run the exhaustive optimum against both heuristics on one instance.
    ExactCheck(ExactCheckArgs),
    /// Sweep node counts and emit one evaluation metric as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// RNG seed; the instance is a pure function of seed and parameters.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target node count (resampled until reached, else nearest).
    #[arg(long)]
    nodes: Option<usize>,
    /// Chains to draw.
    #[arg(long, default_value_t = 4)]
    sfcs: usize,
    /// Distinct NF types available to the chains.
    #[arg(long, default_value_t = 6)]
    nf_types: u32,
    /// Server pool size; default is one server per instance node.
    #[arg(long)]
    ports: Option<usize>,
    /// Instance file to write.
    #[arg(long, default_value = "instance.toml")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file to load.
    #[arg(long)]
    instance: PathBuf,
    /// Placement algorithm.
    #[arg(long, value_enum, default_value_t = Algorithm::Mfmttp)]
    algorithm: Algorithm,
    /// Placement file to write.
    #[arg(long, default_value = "placement.txt")]
    out: PathBuf,
    /// Write the refinement move trace as CSV (mfmttp only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Node-count cap for the exhaustive algorithm.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    /// Greedy deployment plus move-based refinement.
    Mfmttp,
    /// Greedy first fit.
    Gff,
    /// Exhaustive set-partition optimum (small instances only).
    Exact,
}

impl Algorithm {
    fn name(self) -> &'static str {
        match self {
            Algorithm::Mfmttp => "mfmttp",
            Algorithm::Gff => "gff",
            Algorithm::Exact => "exact",
        }
    }
}

#[derive(Args)]
struct CompareArgs {
    /// Seeded draws to compare.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// First seed of the window.
    #[arg(long, default_value_t = 0)]
    start_seed: u64,
    /// Node-count cap for the exhaustive oracle.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
    /// CSV file to write.
    #[arg(long, default_value = "compare.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ExactCheckArgs {
    /// Instance file to load.
    #[arg(long)]
    instance: PathBuf,
    /// Node-count cap for the exhaustive oracle.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepMetric {
    /// Crossing-traffic reduction of the refined solver over first fit.
    Traffic,
    /// Histogram of solver iteration counts.
    Iterations,
    /// Simulated fabric throughput for both algorithms.
    Throughput,
}

impl SweepMetric {
    fn name(self) -> &'static str {
        match self {
            SweepMetric::Traffic => "traffic",
            SweepMetric::Iterations => "iterations",
            SweepMetric::Throughput => "throughput",
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Metric to sweep over the node counts 10, 15, 20, 25, 30.
    #[arg(long, value_enum)]
    metric: SweepMetric,
    /// Seeds attempted per node count; draws neither algorithm can place
    /// are skipped and reported.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// Offered load for the throughput metric.
    #[arg(long, default_value_t = 0.8)]
    load: f64,
    /// CSV file to write.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let run = init_workers().and_then(|()| match cli.command {
        Command::Generate(a) => run_generate(a),
        Command::Solve(a) => run_solve(a),
        Command::Compare(a) => run_compare(a),
        Command::ExactCheck(a) => run_exact_check(a),
        Command::Sweep(a) => run_sweep(a),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Sizes the worker pool from NFPLACE_WORKERS when set; the rayon default
/// (one worker per CPU) otherwise.
fn init_workers() -> Result<(), CmdError> {
    let Ok(raw) = std::env::var("NFPLACE_WORKERS") else {
        return Ok(());
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CmdError::Usage(format!("NFPLACE_WORKERS must be a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CmdError::Usage(format!("worker pool: {e}")))
}

#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    params: serde_json::Value,
    seeds: Vec<u64>,
    outputs: Vec<OutputDigest>,
}

#[derive(Serialize)]
struct OutputDigest {
    path: String,
    sha256: String,
}

/// Writes `<first output>.manifest.json` describing a finished command.
fn write_manifest(
    command: &'static str,
    params: serde_json::Value,
    seeds: Vec<u64>,
    outputs: &[&Path],
) -> Result<(), CmdError> {
    let mut digests = Vec::with_capacity(outputs.len());
    for path in outputs {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        digests.push(OutputDigest {
            path: path.display().to_string(),
            sha256: format!("{:x}", hasher.finalize()),
        });
    }
    let manifest = RunManifest {
        tool: "nfplace",
        version: env!("CARGO_PKG_VERSION"),
        command,
        params,
        seeds,
        outputs: digests,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = outputs[0].with_extension(format!(
        "{}manifest.json",
        outputs[0]
            .extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

/// Loads an instance and refuses to continue if its graph fails validation.
fn load_checked(path: &Path) -> Result<ProblemInstance, CmdError> {
    let inst = load_instance(path)
        .map_err(|e| CmdError::Validation(format!("{}: {e}", path.display())))?;
    let diagnostics = validate_instance_graph(&inst.igraph);
    if let Some(first) = diagnostics.first() {
        return Err(CmdError::Validation(format!(
            "{}: instance graph failed validation ({} finding(s), first: {first})",
            path.display(),
            diagnostics.len()
        )));
    }
    Ok(inst)
}

fn cost_of(p: &Placement, inst: &ProblemInstance) -> f64 {
    evaluate_cost(p, &inst.igraph, &inst.pool()).expect("complete placement").total_cost
}

fn run_generate(args: GenerateArgs) -> Result<(), CmdError> {
    let params = WorkloadParams {
        seed: args.seed,
        target_nodes: args.nodes,
        sfc_count: args.sfcs,
        nf_type_count: args.nf_types,
        port_limit: args.ports,
        ..WorkloadParams::default()
    };
    let inst = generate_instance(&params).map_err(|e| CmdError::Usage(e.to_string()))?;
    save_instance(&args.out, &inst)
        .map_err(|e| CmdError::Validation(format!("{}: {e}", args.out.display())))?;
    println!(
        "wrote {}: {} nodes, {} traffic edges, {} chains, seed {}",
        args.out.display(),
        inst.igraph.node_count(),
        inst.igraph.traffic_edge_count(),
        inst.requests.len(),
        args.seed
    );
    write_manifest(
        "generate",
        serde_json::to_value(&params).expect("params serialize"),
        vec![args.seed],
        &[&args.out],
    )
}

fn run_solve(args: SolveArgs) -> Result<(), CmdError> {
    if args.trace.is_some() && args.algorithm != Algorithm::Mfmttp {
        return Err(CmdError::Usage("--trace requires --algorithm mfmttp".into()));
    }
    let inst = load_checked(&args.instance)?;
    let pool = inst.pool();
    let started = Instant::now();
    let mut trace_rows = String::new();
    let (placement, times) = match args.algorithm {
        Algorithm::Mfmttp => {
            let (p, stats, trace) = solve_traced(&inst.igraph, &pool)
                .map_err(|e| CmdError::Infeasible(e.to_string()))?;
            trace_rows.push_str("pass,seq,node,from,to,gain,committed\n");
            for mv in &trace {
                let _ = writeln!(
                    trace_rows,
                    "{},{},{},{},{},{},{}",
                    mv.pass, mv.seq, mv.node, mv.from, mv.to, mv.gain, mv.committed
                );
            }
            (p, stats.iterations)
        }
        Algorithm::Gff => {
            let p = first_fit(&inst.igraph, &pool).map_err(|e| match e {
                SolveError::Infeasible { .. } => CmdError::Infeasible(e.to_string()),
                other => CmdError::Validation(other.to_string()),
            })?;
            (p, 1)
        }
        Algorithm::Exact => {
            let r = run_exact(&inst, args.exact_limit)?;
            (r.placement, 1)
        }
    };
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let name = args
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let mut text = Vec::new();
    write_placement(&mut text, &name, &placement).map_err(|e| io_err(&args.out, e))?;
    fs::write(&args.out, text).map_err(|e| io_err(&args.out, e))?;
    println!("algorithm,cost,times,wall_ms");
    println!("{},{},{times},{wall_ms:.3}", args.algorithm.name(), cost_of(&placement, &inst));

    let mut outputs: Vec<&Path> = vec![&args.out];
    if let Some(trace_path) = &args.trace {
        fs::write(trace_path, trace_rows).map_err(|e| io_err(trace_path, e))?;
        outputs.push(trace_path);
    }
    write_manifest(
        "solve",
        serde_json::json!({
            "instance": args.instance.display().to_string(),
            "algorithm": args.algorithm.name(),
            "exact_limit": args.exact_limit,
        }),
        vec![inst.params.seed],
        &outputs,
    )
}

fn run_exact(inst: &ProblemInstance, limit: usize) -> Result<ExactResult, CmdError> {
    exact_solve(&inst.igraph, &inst.pool(), limit).map_err(|e| match e {
        ExactError::TooLarge { .. } => {
            CmdError::Usage(format!("{e}; raise --exact-limit to force enumeration"))
        }
        ExactError::Infeasible { .. } => CmdError::Infeasible(e.to_string()),
    })
}

/// The small-instance family the oracle can exhaust: four NF types, short
/// chains, and one to three instances per NF, targeted at five to nine
/// nodes by seed.
fn oracle_family(seed: u64) -> WorkloadParams {
    WorkloadParams {
        nf_type_count: 4,
        chain_length_range: (1, 3),
        instances_per_nf_range: (1, 3),
        sfc_count: 3,
        seed,
        target_nodes: Some(5 + (seed % 5) as usize),
        ..WorkloadParams::default()
    }
}

const COMPARE_HEADER: &str = "seed,nodes,cost_exact,cost_mfmttp,cost_gff,mfmttp_over_exact,gff_over_exact";

fn gap_ratio(cost: f64, optimum: f64) -> f64 {
    if optimum > 0.0 {
        cost / optimum
    } else if cost <= 1e-9 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn compare_row(seed: u64, inst: &ProblemInstance, exact: &ExactResult) -> Option<String> {
    let pool = inst.pool();
    let (refined, _) = solve(&inst.igraph, &pool).ok()?;
    let greedy = first_fit(&inst.igraph, &pool).ok()?;
    let (m, g) = (cost_of(&refined, inst), cost_of(&greedy, inst));
    Some(format!(
        "{seed},{},{},{m},{g},{:.6},{:.6}",
        inst.igraph.node_count(),
        exact.cost,
        gap_ratio(m, exact.cost),
        gap_ratio(g, exact.cost),
    ))
}

fn run_compare(args: CompareArgs) -> Result<(), CmdError> {
    let seeds: Vec<u64> = (args.start_seed..args.start_seed + args.seeds).collect();
    let rows: Vec<(u64, Option<String>)> = seeds
        .par_iter()
        .map(|&seed| {
            let inst = generate_instance(&oracle_family(seed)).expect("family params are valid");
            let row = match exact_solve(&inst.igraph, &inst.pool(), args.exact_limit) {
                Ok(exact) => compare_row(seed, &inst, &exact),
                Err(_) => None,
            };
            (seed, row)
        })
        .collect();
    let mut csv = String::from(COMPARE_HEADER);
    csv.push('\n');
    let mut kept = 0u64;
    for (_, row) in &rows {
        if let Some(row) = row {
            csv.push_str(row);
            csv.push('\n');
            kept += 1;
        }
    }
    fs::write(&args.out, csv).map_err(|e| io_err(&args.out, e))?;
    println!(
        "wrote {}: {kept} of {} draws compared ({} infeasible or unsolved, skipped)",
        args.out.display(),
        args.seeds,
        args.seeds - kept
    );
    write_manifest(
        "compare",
        serde_json::json!({
            "family": serde_json::to_value(oracle_family(args.start_seed)).expect("serializes"),
            "start_seed": args.start_seed,
            "count": args.seeds,
            "exact_limit": args.exact_limit,
        }),
        seeds,
        &[&args.out],
    )
}

fn run_exact_check(args: ExactCheckArgs) -> Result<(), CmdError> {
    let inst = load_checked(&args.instance)?;
    let exact = run_exact(&inst, args.exact_limit)?;
    let row = compare_row(inst.params.seed, &inst, &exact).ok_or_else(|| {
        CmdError::Infeasible(
            "the exhaustive optimum exists but a heuristic failed to place the instance".into(),
        )
    })?;
    println!("{COMPARE_HEADER}");
    println!("{row}");
    Ok(())
}

/// One solved draw for the sweeps; `greedy` is present when first fit also
/// placed the instance.
struct SweepPoint {
    nodes: usize,
    seed: u64,
    refined: Placement,
    greedy: Option<Placement>,
    times: u32,
    inst: ProblemInstance,
}

fn sweep_points(seeds: u64, want_greedy: bool) -> Vec<SweepPoint> {
    let grid: Vec<(usize, u64)> = SWEEP_NODE_COUNTS
        .iter()
        .flat_map(|&nodes| (0..seeds).map(move |seed| (nodes, seed)))
        .collect();
    let mut points: Vec<SweepPoint> = grid
        .par_iter()
        .filter_map(|&(nodes, seed)| {
            let params =
                WorkloadParams { target_nodes: Some(nodes), seed, ..WorkloadParams::default() };
            let inst = generate_instance(&params).expect("family params are valid");
            let pool = inst.pool();
            let (refined, stats) = solve(&inst.igraph, &pool).ok()?;
            let greedy = first_fit(&inst.igraph, &pool).ok();
            if want_greedy && greedy.is_none() {
                return None;
            }
            Some(SweepPoint { nodes, seed, refined, greedy, times: stats.iterations, inst })
        })
        .collect();
    points.sort_by_key(|p| (p.nodes, p.seed));
    points
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_sweep(args: SweepArgs) -> Result<(), CmdError> {
    if !(args.load > 0.0 && args.load <= 1.0) {
        return Err(CmdError::Usage(format!("--load must lie in (0, 1], got {}", args.load)));
    }
    if args.seeds == 0 {
        return Err(CmdError::Usage("--seeds must be positive".into()));
    }
    let mut csv = String::new();
    match args.metric {
        SweepMetric::Traffic => {
            let points = sweep_points(args.seeds, true);
            csv.push_str("nodes,seed,traffic_mfmttp,traffic_gff,reduction_pct\n");
            for nodes in SWEEP_NODE_COUNTS {
                let mut cuts = Vec::new();
                for p in points.iter().filter(|p| p.nodes == nodes) {
                    let m = cost_of(&p.refined, &p.inst);
                    let g = cost_of(p.greedy.as_ref().expect("filtered"), &p.inst);
                    let cut = if g > 0.0 { 100.0 * (g - m) / g } else { 0.0 };
                    let _ = writeln!(csv, "{nodes},{},{m},{g},{cut:.4}", p.seed);
                    cuts.push(cut);
                }
                let (mean, se) = mean_and_stderr(&cuts);
                println!(
                    "nodes {nodes}: mean reduction {mean:.2}% +- {se:.2}% over {} draws \
                     ({} skipped)",
                    cuts.len(),
                    args.seeds - cuts.len() as u64
                );
            }
        }
        SweepMetric::Iterations => {
            let points = sweep_points(args.seeds, false);
            csv.push_str("nodes,times,count\n");
            for nodes in SWEEP_NODE_COUNTS {
                let times: Vec<u32> =
                    points.iter().filter(|p| p.nodes == nodes).map(|p| p.times).collect();
                let max = times.iter().max().copied().unwrap_or(0);
                for t in 1..=max {
                    let count = times.iter().filter(|&&x| x == t).count();
                    if count > 0 {
                        let _ = writeln!(csv, "{nodes},{t},{count}");
                    }
                }
                let fast = times.iter().filter(|&&t| t <= 3).count();
                println!(
                    "nodes {nodes}: {fast} of {} solved draws within three iterations \
                     ({} skipped)",
                    times.len(),
                    args.seeds - times.len() as u64
                );
            }
        }
        SweepMetric::Throughput => {
            let points = sweep_points(args.seeds, true);
            csv.push_str("nodes,seed,throughput_mfmttp,throughput_gff\n");
            let sims: Vec<(usize, u64, f64, f64)> = points
                .par_iter()
                .map(|p| {
                    let greedy = p.greedy.as_ref().expect("filtered");
                    let rp = derive_paths(&p.refined, &p.inst.igraph, &p.inst.requests)
                        .expect("complete placement yields paths");
                    let gp = derive_paths(greedy, &p.inst.igraph, &p.inst.requests)
                        .expect("complete placement yields paths");
                    let ports = required_ports(&rp).max(required_ports(&gp));
                    let config = FabricConfig::new(ports, args.load, p.seed)
                        .with_slots(SWEEP_WARMUP_SLOTS, SWEEP_MEASURE_SLOTS);
                    let tr = simulate(&config, &rp).throughput;
                    let tg = simulate(&config, &gp).throughput;
                    (p.nodes, p.seed, tr, tg)
                })
                .collect();
            for &(nodes, seed, tr, tg) in &sims {
                let _ = writeln!(csv, "{nodes},{seed},{tr:.6},{tg:.6}");
            }
            for nodes in SWEEP_NODE_COUNTS {
                let (mut rs, mut gs) = (Vec::new(), Vec::new());
                for &(n, _, tr, tg) in &sims {
                    if n == nodes {
                        rs.push(tr);
                        gs.push(tg);
                    }
                }
                let (mr, _) = mean_and_stderr(&rs);
                let (mg, _) = mean_and_stderr(&gs);
                println!(
                    "nodes {nodes}: mean throughput {mr:.4} vs {mg:.4} over {} pairs \
                     ({} skipped)",
                    rs.len(),
                    args.seeds - rs.len() as u64
                );
            }
        }
    }
    fs::write(&args.out, csv).map_err(|e| io_err(&args.out, e))?;
    println!("wrote {}", args.out.display());
    write_manifest(
        "sweep",
        serde_json::json!({
            "metric": args.metric.name(),
            "node_counts": SWEEP_NODE_COUNTS,
            "seeds_per_count": args.seeds,
            "load": args.load,
            "warmup_slots": SWEEP_WARMUP_SLOTS,
            "measure_slots": SWEEP_MEASURE_SLOTS,
        }),
        (0..args.seeds).collect(),
        &[&args.out],
    )
}
