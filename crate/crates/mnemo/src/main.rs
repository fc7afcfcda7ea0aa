//! Command-line surface: ingest streams, run recall and approximate
//! queries over a data directory, and drive the deterministic experiments.

use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use mnemo::config::AppConfig;
use mnemo::error::{Error, Result};
use mnemo::ingest::{read_stream_jsonl, Pipeline, ProcessOutcome};
use mnemo::meta::{MetaStore, QueryPredicate};
use mnemo::plan::{capacity_plan, CapacityInputs};
use mnemo::prefetch::{plan_for, Strategy, PERIOD_SECONDS};
use mnemo::replay::{alloc_bench, replay_with_artifacts};
use mnemo::report::{MetricsReport, ReportFormat};
use mnemo::sample::approx_query;
use mnemo::tier::{EvictorRegistry, TieredStore};
use mnemo::workload::{
    export_trace_jsonl, generate_workload, import_trace_jsonl, StreamSpec, OBJECT_PREFIX,
};
use mnemo::{BackendDescriptor, MountTable, ObjectPath};

#[derive(Parser)]
#[command(name = "mnemo", version, about = "Tiered media store with recall queries, prefetching, and sampled aggregation")]
struct Cli {
    /// Path to a TOML config file; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process a stream file (or a synthetic stream) into a session record.
    Ingest(IngestArgs),
    /// Run a recall query against the data directory's records.
    Query(QueryArgs),
    /// Estimate a count by online sampling, with error bounds.
    Approx(ApproxArgs),
    /// Generate a workload, replay it, and report the metrics.
    Simulate(SimulateArgs),
    /// Compute a deployment capacity plan.
    Plan(PlanArgs),
    /// Compare the two write allocators on a saturation script.
    BenchAlloc(BenchAllocArgs),
    /// Compare prefetch strategies on the same workload.
    BenchPrefetch(BenchPrefetchArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Stream file: JSON Lines header plus frame lines.
    #[arg(long, conflicts_with = "synthetic_seed")]
    stream: Option<PathBuf>,
    /// Generate a synthetic stream from this seed instead of reading a file.
    #[arg(long)]
    synthetic_seed: Option<u64>,
    #[arg(long, default_value = "mnemo-data")]
    data_dir: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Predicate as inline JSON, or @path to a JSON file.
    #[arg(long)]
    predicate: String,
    #[arg(long, default_value = "mnemo-data")]
    data_dir: PathBuf,
}

#[derive(Args)]
struct ApproxArgs {
    /// Predicate as inline JSON, or @path to a JSON file.
    #[arg(long)]
    predicate: String,
    /// Sampling rate in (0, 1].
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "mnemo-data")]
    data_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Override the configured prefetch strategy.
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    /// Write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the report as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Save the generated trace as JSON Lines.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Replay this trace file instead of generating one.
    #[arg(long)]
    trace_in: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, default_value_t = 10)]
    machines: u64,
    /// Accepts raw bytes or k/M/G/T suffixes (decimal).
    #[arg(long, default_value = "20GB", value_parser = parse_bytes)]
    mem_per_machine: u64,
    #[arg(long, default_value = "200GB", value_parser = parse_bytes)]
    hdd_per_machine: u64,
    #[arg(long, default_value = "10MB", value_parser = parse_bytes)]
    avg_file: u64,
    /// Seconds per recognized image.
    #[arg(long, default_value_t = 0.16)]
    per_image_latency: f64,
    /// Seconds between extracted frames.
    #[arg(long, default_value_t = 2.0)]
    frame_interval: f64,
    #[arg(long, default_value_t = 0.8)]
    utilization: f64,
    #[arg(long, default_value_t = 100)]
    queries_per_server: u64,
    #[arg(long, default_value_t = 0.1)]
    concurrency_factor: f64,
}

#[derive(Args)]
struct BenchAllocArgs {
    #[arg(long, default_value_t = 1000)]
    writes: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct BenchPrefetchArgs {
    /// Comma-separated strategies to compare.
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy, default_values_t = [
        Strategy::None, Strategy::MostRequested, Strategy::TimePeriod,
        Strategy::LabelHot, Strategy::LocationHot,
    ])]
    strategies: Vec<Strategy>,
    /// Also print each strategy's inspection plan as JSON.
    #[arg(long)]
    print_plans: bool,
    /// Write all rows as one CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse::<Strategy>().map_err(|e| e.to_string())
}

fn parse_bytes(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    let (digits, multiplier) = match s.char_indices().find(|(_, c)| !c.is_ascii_digit() && *c != '.') {
        Some((idx, _)) => {
            let suffix = s[idx..].trim();
            let mult = match suffix.to_ascii_lowercase().as_str() {
                "k" | "kb" => 1e3,
                "m" | "mb" => 1e6,
                "g" | "gb" => 1e9,
                "t" | "tb" => 1e12,
                "b" | "" => 1.0,
                other => return Err(format!("unknown size suffix `{other}`")),
            };
            (&s[..idx], mult)
        }
        None => (s, 1.0),
    };
    let value: f64 = digits.parse().map_err(|e| format!("bad size `{s}`: {e}"))?;
    Ok((value * multiplier) as u64)
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    match cli.command {
        Command::Ingest(args) => cmd_ingest(&config, args),
        Command::Query(args) => cmd_query(args),
        Command::Approx(args) => cmd_approx(args),
        Command::Simulate(args) => cmd_simulate(&config, args),
        Command::Plan(args) => cmd_plan(args),
        Command::BenchAlloc(args) => cmd_bench_alloc(args),
        Command::BenchPrefetch(args) => cmd_bench_prefetch(&config, args),
    }
}

// ---------------------------------------------------------------------------
// Data-directory state: records.jsonl plus an objects/ directory backend.
// Tier contents are volatile per invocation; only the backend is durable.
// ---------------------------------------------------------------------------

fn records_path(data_dir: &Path) -> PathBuf {
    data_dir.join("records.jsonl")
}

fn load_meta(data_dir: &Path) -> Result<MetaStore> {
    let path = records_path(data_dir);
    if path.exists() {
        MetaStore::import_jsonl(BufReader::new(std::fs::File::open(path)?))
    } else {
        Ok(MetaStore::new())
    }
}

fn open_store(config: &AppConfig, data_dir: &Path) -> Result<TieredStore> {
    let mut fabric = MountTable::new();
    fabric.mount(
        ObjectPath::new("/store")?,
        BackendDescriptor::local_directory("disk", data_dir.join("objects")),
    )?;
    let system = config.system_config()?;
    TieredStore::create_with_registry(
        system.tiers,
        system.allocator,
        &system.evictor,
        Arc::new(fabric),
        &EvictorRegistry::default(),
        system.backend_cost,
    )
}

fn parse_predicate(arg: &str) -> Result<QueryPredicate> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)?,
        None => arg.to_string(),
    };
    let predicate: QueryPredicate = serde_json::from_str(&text)?;
    predicate.validate()?;
    Ok(predicate)
}

fn cmd_ingest(config: &AppConfig, args: IngestArgs) -> Result<()> {
    std::fs::create_dir_all(&args.data_dir)?;
    let stream = match (&args.stream, args.synthetic_seed) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            read_stream_jsonl(&text, base)?
        }
        (None, Some(seed)) => synthetic_stream(seed),
        (None, None) => {
            return Err(Error::InvalidConfig("ingest needs --stream or --synthetic-seed".into()));
        }
    };
    let mut meta = load_meta(&args.data_dir)?;
    let store = open_store(config, &args.data_dir)?;
    let system = config.system_config()?;
    let pipeline = Pipeline::new(system.frame_policy, system.extractor, ObjectPath::new(OBJECT_PREFIX)?)
        .with_samplers(mnemo::ingest::SamplerStack {
            pre_learning: system.reduction.pre_learning,
            pre_memorization: system.reduction.pre_memorization,
        });
    match pipeline.process_stream(&stream, &store, &mut meta)? {
        ProcessOutcome::Stored { record, receipt } => {
            let mut file = std::fs::File::create(records_path(&args.data_dir))?;
            meta.export_jsonl(&mut file)?;
            println!("{}", serde_json::to_string_pretty(&record)?);
            eprintln!(
                "stored block {} in {} ({:.2} ms modeled)",
                receipt.block_id, receipt.placed_tier, receipt.modeled_latency_ms
            );
        }
        ProcessOutcome::Skipped { stage, inclusion_probability } => {
            println!(
                "{}",
                serde_json::json!({ "skipped": stage, "inclusion_probability": inclusion_probability })
            );
        }
    }
    Ok(())
}

fn synthetic_stream(seed: u64) -> mnemo::ingest::VideoStream {
    let spec = StreamSpec {
        session_id: format!("synthetic-{seed}"),
        user_id: "synthetic".into(),
        start_timestamp: (seed % 86_400) as i64,
        duration: 30.0,
        location: "living room".into(),
        frame_count: 16,
        nominal_size: 10_000_000,
        content_seed: seed,
    };
    spec.materialize()
}

fn cmd_query(args: QueryArgs) -> Result<()> {
    let meta = load_meta(&args.data_dir)?;
    let predicate = parse_predicate(&args.predicate)?;
    let results = meta.query(&predicate)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for record in &results {
        serde_json::to_writer(&mut lock, record)?;
        use std::io::Write;
        lock.write_all(b"\n")?;
    }
    eprintln!("{} record(s)", results.len());
    Ok(())
}

fn cmd_approx(args: ApproxArgs) -> Result<()> {
    let meta = load_meta(&args.data_dir)?;
    let predicate = parse_predicate(&args.predicate)?;
    let answer = approx_query(&meta, &predicate, args.rate, args.seed)?;
    println!("{}", serde_json::to_string_pretty(&answer)?);
    Ok(())
}

fn cmd_simulate(config: &AppConfig, args: SimulateArgs) -> Result<()> {
    let mut system = config.system_config()?;
    if let Some(strategy) = args.strategy {
        system.prefetch_strategy = strategy;
    }
    let trace = match &args.trace_in {
        Some(path) => import_trace_jsonl(BufReader::new(std::fs::File::open(path)?))?,
        None => generate_workload(&config.workload_spec()?)?,
    };
    if let Some(path) = &args.trace_out {
        let mut file = std::fs::File::create(path)?;
        export_trace_jsonl(&trace, &mut file)?;
    }
    let report = mnemo::replay::replay(&trace, &system)?;
    print!("{}", report.to_json_string());
    if let Some(path) = &args.out {
        mnemo::report::export_report(&report, ReportFormat::Json, path)?;
    }
    if let Some(path) = &args.csv {
        mnemo::report::export_report(&report, ReportFormat::Csv, path)?;
    }
    Ok(())
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let inputs = CapacityInputs {
        machines: args.machines,
        mem_per_machine: args.mem_per_machine,
        hdd_per_machine: args.hdd_per_machine,
        avg_file: args.avg_file,
        per_image_latency: args.per_image_latency,
        frame_interval: args.frame_interval,
        utilization: args.utilization,
        queries_per_server: args.queries_per_server,
        concurrency_factor: args.concurrency_factor,
    };
    let plan = capacity_plan(&inputs)?;
    println!("{}", serde_json::to_string_pretty(&plan)?);
    Ok(())
}

fn cmd_bench_alloc(args: BenchAllocArgs) -> Result<()> {
    let report = alloc_bench(args.writes, args.seed)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!(
        "direct-write mean {:.2} ms vs default-cascade {:.2} ms ({:.2}x)",
        report.direct_mean_ms, report.cascade_mean_ms, report.latency_ratio
    );
    Ok(())
}

fn cmd_bench_prefetch(config: &AppConfig, args: BenchPrefetchArgs) -> Result<()> {
    let system = config.system_config()?;
    let spec = config.workload_spec()?;
    let trace = generate_workload(&spec)?;
    let mut reports: Vec<MetricsReport> = Vec::new();
    println!("{:<16} {:>9} {:>12} {:>12}", "strategy", "hit_rate", "read_ms", "promoted");
    for strategy in &args.strategies {
        let mut run_config = system.clone();
        run_config.prefetch_strategy = *strategy;
        let artifacts = replay_with_artifacts(&trace, &run_config)?;
        println!(
            "{:<16} {:>9.4} {:>12.2} {:>12}",
            artifacts.report.strategy,
            artifacts.report.hit_rate,
            artifacts.report.read_latency.mean_ms,
            artifacts.report.prefetch_promoted
        );
        if args.print_plans && *strategy != Strategy::None {
            let now = trace.last().map(|e| e.t - e.t.rem_euclid(PERIOD_SECONDS) + PERIOD_SECONDS).unwrap_or(0);
            let plan = plan_for(*strategy, &artifacts.log, &artifacts.meta, now, run_config.prefetch_budget, &artifacts.sizes);
            println!("{}", serde_json::to_string_pretty(&plan)?);
        }
        reports.push(artifacts.report);
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, MetricsReport::many_to_csv_string(&reports))?;
    }
    Ok(())
}
