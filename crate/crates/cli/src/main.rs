use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use bnmap::bench::{emit_csv, emit_markdown, gen_random_instance, run_suite, Bucket, Family, SolverSpec, SuiteSpec};
use bnmap::fptas::solve_map_approx;
use bnmap::gadgets::{
    amplify, max2sat_to_naivebayes, partition_to_hmm, partition_to_polytree, GadgetArtifact, Max2SatInstance,
    PartitionInstance,
};
use bnmap::io::{fmt_rational, parse_network, parse_query, serialize_network, serialize_query};
use bnmap::oracle::brute_force_map_with;
use bnmap::treedecomp::treewidth;
use bnmap::{
    decompose, solve_map_with, validate_network, Backend, Deadline, Error, Heuristic, LatticeMode, MapSolution,
    Network, ProbValue, Query, SolveOptions,
};

#[derive(Parser)]
#[command(name = "bnmap", version, about = "Exact and approximate MAP inference for discrete Bayesian networks")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "BNMAP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a MAP query.
    Solve(SolveArgs),
    /// Generate instances.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run a benchmark suite.
    Bench(BenchArgs),
    /// Validate a network (and optionally a query against it).
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Exact,
    Approx,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    F64,
    Rational,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mult,
    Add,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeuristicArg {
    MinFill,
    MinDegree,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    query: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    solver: SolverKind,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Defaults to the network's own parameter type.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, value_enum, default_value = "min-fill")]
    heuristic: HeuristicArg,
    /// Keep every candidate (exact solver only; for cross-checks).
    #[arg(long)]
    no_prune: bool,
}

#[derive(Subcommand)]
enum GenCommand {
    /// A seeded random benchmark instance.
    Random(GenRandomArgs),
    /// A reduction gadget with a certificate.
    Gadget(GenGadgetArgs),
}

#[derive(Args)]
struct GenRandomArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    base_size: usize,
    #[arg(long, default_value_t = 3)]
    max_card: usize,
    #[arg(long, default_value = "0-10")]
    bucket: String,
    #[arg(long, default_value_t = 0.5)]
    evidence: f64,
    /// Number of instances; more than one writes numbered files.
    #[arg(long, default_value_t = 1)]
    count: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum GadgetKind {
    PartitionPolytree,
    PartitionHmm,
    Max2sat,
}

#[derive(Args)]
struct GenGadgetArgs {
    #[arg(value_enum)]
    kind: GadgetKind,
    /// Independent copies; the value becomes the q-th power.
    #[arg(long, default_value_t = 1)]
    q: u32,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    md: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    query: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    #[serde(default = "default_timeout")]
    timeout_secs: f64,
    threads: Option<usize>,
    #[serde(default = "default_solvers")]
    solvers: Vec<String>,
    suite: Vec<SuiteSpec>,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_solvers() -> Vec<String> {
    vec!["exact".into()]
}

/// Raised for bad flag combinations that clap cannot express.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::Parse { .. }
            | Error::Invalid(_)
            | Error::BackendMismatch { .. }
            | Error::PartialInstantiation(_)
            | Error::StateOutOfRange { .. }
            | Error::InvalidQuery(_)
            | Error::InvalidDecomposition(_)
            | Error::CandidateMismatch(_) => 2,
            Error::Timeout => 3,
            Error::ZeroProbabilityEvidence | Error::AllAssignmentsZero => 4,
            Error::GuardExceeded { .. } | Error::InvalidArgument(_) => 1,
        };
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        init_threads(n)?;
    }
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Gen(GenCommand::Random(a)) => gen_random(a),
        Command::Gen(GenCommand::Gadget(a)) => gen_gadget(a),
        Command::Bench(a) => bench(a, cli.threads.is_some()),
        Command::Check(a) => check(a),
    }
}

fn init_threads(n: usize) -> anyhow::Result<()> {
    if n == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    // a second initialisation (e.g. suite file after flag) is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_network(path: &Path) -> anyhow::Result<Network> {
    let net = parse_network(&read(path)?).with_context(|| path.display().to_string())?;
    let report = validate_network(&net);
    if !report.is_ok() {
        return Err(anyhow::Error::new(Error::Invalid(report)).context(path.display().to_string()));
    }
    Ok(net)
}

fn load_query(path: &Path, net: &Network) -> anyhow::Result<Query> {
    Ok(parse_query(&read(path)?, net).with_context(|| path.display().to_string())?)
}

fn solve(a: SolveArgs) -> anyhow::Result<()> {
    let is_approx = matches!(a.solver, SolverKind::Approx);
    if !is_approx && (a.epsilon.is_some() || a.mode.is_some()) {
        return Err(usage("--epsilon and --mode apply to the approx solver only"));
    }
    if a.no_prune && !matches!(a.solver, SolverKind::Exact) {
        return Err(usage("--no-prune applies to the exact solver only"));
    }
    if is_approx && matches!(a.backend, Some(BackendArg::Rational)) {
        return Err(usage("the approx solver runs in f64"));
    }
    if let Some(t) = a.timeout {
        if !(t > 0.0 && t.is_finite()) {
            return Err(usage("--timeout must be a positive number of seconds"));
        }
    }
    let net = load_network(&a.net)?;
    let query = load_query(&a.query, &net)?;
    let backend = match a.backend {
        Some(BackendArg::F64) => Backend::Float,
        Some(BackendArg::Rational) => Backend::Rational,
        None if is_approx => Backend::Float,
        None => net.backend(),
    };
    if backend == Backend::Rational && net.backend() == Backend::Float {
        return Err(Error::BackendMismatch { network: Backend::Float, requested: Backend::Rational }.into());
    }
    let deadline = a.timeout.map_or(Deadline::none(), |t| Deadline::after(Duration::from_secs_f64(t)));
    let heuristic = match a.heuristic {
        HeuristicArg::MinFill => Heuristic::MinFill,
        HeuristicArg::MinDegree => Heuristic::MinDegree,
    };

    let start = Instant::now();
    let mut out = vec![
        format!("solver={}", solver_name(a.solver)),
        format!("backend={backend}"),
    ];
    let (sol, guarantee): (MapSolution, _) = match a.solver {
        SolverKind::Oracle => (brute_force_map_with(&net, &query, backend, &deadline)?, None),
        SolverKind::Exact => {
            let ad = decompose(&net, &query, heuristic)?;
            let opts = SolveOptions { prune: !a.no_prune, deadline };
            (solve_map_with(&net, &query, &ad, backend, &opts)?, None)
        }
        SolverKind::Approx => {
            let epsilon = a.epsilon.unwrap_or(0.1);
            let mode = match a.mode.unwrap_or(ModeArg::Mult) {
                ModeArg::Mult => LatticeMode::Multiplicative,
                ModeArg::Add => LatticeMode::Additive,
            };
            let ad = decompose(&net, &query, heuristic)?;
            let (s, g) = solve_map_approx(&net, &query, &ad, epsilon, mode, deadline)?;
            (s, Some(g))
        }
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;

    out.push(format!("value={}", sol.value));
    out.push(format!("value_f64={:e}", sol.value.to_f64()));
    out.push(format!("assignment={}", sol.assignment.display(&net)));
    if !matches!(a.solver, SolverKind::Oracle) {
        let s = &sol.stats;
        out.push(format!("clusters={}", s.clusters));
        out.push(format!("width={}", s.width));
        out.push(format!("avg_pareto={}", s.avg_pareto));
        out.push(format!("avg_dim={}", s.avg_dim));
        out.push(format!("max_pareto={}", s.max_pareto));
        out.push(format!("candidates_generated={}", s.candidates_generated));
    }
    if let Some(g) = guarantee {
        out.push(format!("guarantee_mode={}", g.mode));
        out.push(format!("guarantee_epsilon={}", g.epsilon));
        out.push(format!("guarantee_lower_bound={:e}", g.lower_bound_claimed));
        out.push(format!("guarantee_opt_upper_bound={:e}", g.opt_upper_bound));
    }
    if let Some(t) = &query.threshold {
        out.push(format!("threshold={}", fmt_rational(t)));
        let exceeds = match &sol.value {
            ProbValue::Rational(v) => v > t,
            ProbValue::Float(v) => *v > bnmap::numeric::ToF64Lossy::to_f64_lossy(t),
        };
        out.push(format!("exceeds_threshold={exceeds}"));
    }
    out.push(format!("ms={ms:.3}"));
    println!("{}", out.join("\n"));
    Ok(())
}

fn solver_name(s: SolverKind) -> &'static str {
    match s {
        SolverKind::Exact => "exact",
        SolverKind::Approx => "approx",
        SolverKind::Oracle => "oracle",
    }
}

fn gen_random(a: GenRandomArgs) -> anyhow::Result<()> {
    if a.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let spec = SuiteSpec {
        name: "cli".into(),
        family: a.family.parse::<Family>()?,
        base_size: a.base_size,
        max_card: a.max_card,
        seed: a.seed,
        queries: a.count,
        bucket: a.bucket.parse::<Bucket>()?,
        evidence: a.evidence,
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for i in 0..a.count {
        let (net, query) = gen_random_instance(&spec, i)?;
        let (net_name, query_name) = if a.count == 1 {
            ("network.bnm".to_string(), "query.qry".to_string())
        } else {
            (format!("network_{i}.bnm"), format!("query_{i}.qry"))
        };
        let net_path = a.out.join(net_name);
        let query_path = a.out.join(query_name);
        write(&net_path, &serialize_network(&net))?;
        write(&query_path, &serialize_query(&query, &net))?;
        println!("network={}", net_path.display());
        println!("query={}", query_path.display());
        println!("ss_log2={:.4}", query.search_space_log2(&net));
    }
    Ok(())
}

fn gen_gadget(a: GenGadgetArgs) -> anyhow::Result<()> {
    if a.q == 0 {
        return Err(usage("--q must be at least 1"));
    }
    let text = read(&a.input)?;
    let base: GadgetArtifact = match a.kind {
        GadgetKind::PartitionPolytree => partition_to_polytree(&PartitionInstance::parse(&text)?)?,
        GadgetKind::PartitionHmm => partition_to_hmm(&PartitionInstance::parse(&text)?)?,
        GadgetKind::Max2sat => max2sat_to_naivebayes(&Max2SatInstance::parse_dimacs(&text)?)?,
    };
    let g = if a.q > 1 { amplify(&base, a.q)? } else { base };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let net_path = a.out.join("network.bnm");
    let query_path = a.out.join("query.qry");
    let cert_path = a.out.join("certificate.txt");
    write(&net_path, &serialize_network(&g.network))?;
    write(&query_path, &serialize_query(&g.query, &g.network))?;
    write(&cert_path, &format!("{}\n", g.certificate.line()))?;
    println!("network={}", net_path.display());
    println!("query={}", query_path.display());
    println!("certificate={}", cert_path.display());
    println!("nodes={}", g.network.len());
    if let Some(v) = g.certificate.expected_value() {
        println!("expected_value={}", fmt_rational(&v));
    }
    if let Some(t) = &g.query.threshold {
        println!("threshold={}", fmt_rational(t));
    }
    if let Some(above) = g.certificate.expects_above_threshold() {
        println!("expects_exceeds_threshold={above}");
    }
    Ok(())
}

fn bench(a: BenchArgs, threads_from_cli: bool) -> anyhow::Result<()> {
    let text = read(&a.suite)?;
    let file: SuiteFile =
        toml::from_str(&text).map_err(|e| anyhow!(Error::Parse { line: 0, msg: e.to_string() }))?;
    if !threads_from_cli {
        if let Some(n) = file.threads {
            init_threads(n)?;
        }
    }
    if file.suite.is_empty() {
        bail!(usage("suite file lists no [[suite]] entries"));
    }
    if !(file.timeout_secs > 0.0 && file.timeout_secs.is_finite()) {
        return Err(usage("timeout_secs must be positive"));
    }
    let solvers: Vec<SolverSpec> = file.solvers.iter().map(|s| s.parse()).collect::<Result<_, Error>>()?;
    let records = run_suite(&file.suite, &solvers, Duration::from_secs_f64(file.timeout_secs))?;
    let mut csv = Vec::new();
    emit_csv(&records, &mut csv)?;
    fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out.display()))?;
    let md = emit_markdown(&records);
    if let Some(p) = &a.md {
        write(p, &md)?;
    }
    println!("records={}", records.len());
    println!("csv={}", a.out.display());
    eprint!("{md}");
    Ok(())
}

fn check(a: CheckArgs) -> anyhow::Result<()> {
    let net = load_network(&a.net)?;
    println!("valid=true");
    println!("variables={}", net.len());
    println!("edges={}", net.edge_count());
    println!("backend={}", net.backend());
    if let Some(qp) = &a.query {
        let query = load_query(qp, &net)?;
        let ad = decompose(&net, &query, Heuristic::MinFill)?;
        println!("query_valid=true");
        println!("map_vars={}", query.map_vars.len());
        println!("evidence={}", query.evidence.len());
        println!("search_space_log2={:.4}", query.search_space_log2(&net));
        println!("width={}", treewidth(ad.base()));
    }
    Ok(())
}
