use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use trendcompare::algebra::explain_logical;
use trendcompare::engine::{run_query, verify, EngineOptions, QueryResult, Stats};
use trendcompare::planner::PlannerOptions;
use trendcompare::storage::{write_csv, Catalog, Relation};
use trendcompare::workload::{bench_query, generate, WorkloadConfig};
use trendcompare::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_EXEC: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "compare", version, about = "Groupwise trend comparison over CSV tables")]
struct Cli {
    /// Worker threads for parallel scoring (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a query and write the score relation as CSV.
    Query(QueryArgs),
    /// Print the logical and/or physical plan of a query.
    Explain {
        #[command(flatten)]
        input: QueryInput,
        #[command(flatten)]
        toggles: Toggles,
        #[arg(long, value_enum, default_value = "both")]
        mode: ExplainMode,
    },
    /// Run a query and check it against the exhaustive reference.
    Verify {
        #[command(flatten)]
        input: QueryInput,
        #[command(flatten)]
        toggles: Toggles,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Write a synthetic flights catalog.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        workload: WorkloadArgs,
    },
    /// Run every ablation stage on a synthetic workload.
    Bench {
        #[command(flatten)]
        workload: WorkloadArgs,
        /// GMPairs in the benchmark query (1-4).
        #[arg(long, default_value_t = 4)]
        gms: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Rank the most different pairs first instead of the most similar.
        #[arg(long)]
        desc: bool,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct QueryInput {
    /// Directory of `<table>.csv` + `<table>.schema` files.
    #[arg(long)]
    catalog: PathBuf,
    /// Query text.
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    query: Option<String>,
    /// File holding the query text.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Replace the query's top-k.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Clone, Copy)]
struct Toggles {
    #[arg(long)]
    no_merge: bool,
    #[arg(long)]
    no_trendwise: bool,
    /// Disables bound pruning (and early termination with it).
    #[arg(long)]
    no_pruning: bool,
    #[arg(long)]
    no_early_termination: bool,
    /// Skip the logical rewrite rules.
    #[arg(long)]
    no_rewrite: bool,
}

impl Toggles {
    fn options(self, k: Option<usize>) -> EngineOptions {
        EngineOptions {
            planner: PlannerOptions {
                merge: !self.no_merge,
                trendwise: !self.no_trendwise,
                pruning: !self.no_pruning,
                early_termination: !self.no_pruning && !self.no_early_termination,
            },
            optimize: !self.no_rewrite,
            k,
            ..EngineOptions::default()
        }
    }
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    input: QueryInput,
    #[command(flatten)]
    toggles: Toggles,
    /// Score CSV destination (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the base tuples of the surviving pairs as CSV.
    #[arg(long)]
    tuples: Option<PathBuf>,
    /// Print a JSON stats object to stderr.
    #[arg(long)]
    stats: bool,
    /// Write the JSON stats object to a file.
    #[arg(long)]
    stats_file: Option<PathBuf>,
    /// Also run the reference and report PASS/FAIL.
    #[arg(long)]
    verify: bool,
    #[arg(long, value_enum, default_value = "none")]
    explain: ExplainMode,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExplainMode {
    Logical,
    Physical,
    Both,
    None,
}

#[derive(Args)]
struct WorkloadArgs {
    #[arg(long, default_value_t = 1000)]
    trends: usize,
    #[arg(long, default_value_t = 50)]
    days: usize,
    #[arg(long, default_value_t = 2)]
    replicas: usize,
    /// Draw trends around this many shared curves.
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

impl WorkloadArgs {
    fn config(&self) -> WorkloadConfig {
        WorkloadConfig {
            trends: self.trends,
            days: self.days,
            replicas: self.replicas,
            clusters: self.clusters,
            noise: self.noise,
            integral: false,
            seed: self.seed,
        }
    }
}

/// Failure with its exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_query_error() { EXIT_USAGE } else { EXIT_EXEC };
        Failure(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure(EXIT_EXEC, format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Query(args) => query(args),
        Command::Explain { input, toggles, mode } => {
            let (catalog, text) = load(&input)?;
            let r = run_query(&text, &catalog, toggles.options(input.k))?;
            print!("{}", explain_text(&r, mode));
            Ok(0)
        }
        Command::Verify {
            input,
            toggles,
            tolerance,
        } => {
            let (catalog, text) = load(&input)?;
            verify_cmd(&text, &catalog, toggles.options(input.k), tolerance)
        }
        Command::Gen { out, workload } => {
            let rel = generate(&workload.config());
            let rows = rel.row_count();
            let sum = checksum(&rel);
            Catalog::single(rel)
                .save_dir(&out)
                .map_err(|e| Failure(EXIT_EXEC, e.to_string()))?;
            println!("wrote {rows} rows to {} (checksum {sum:016x})", out.display());
            Ok(0)
        }
        Command::Bench {
            workload,
            gms,
            k,
            desc,
            output,
        } => bench(&workload, gms, k, !desc, output.as_deref()),
    }
}

fn load(input: &QueryInput) -> Result<(Catalog, String), Failure> {
    let catalog = Catalog::load_dir(&input.catalog).map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
    let text = match (&input.query, &input.file) {
        (Some(q), _) => q.clone(),
        (None, Some(f)) => std::fs::read_to_string(f).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", f.display())))?,
        (None, None) => return Err(Failure(EXIT_USAGE, "either --query or --file is required".into())),
    };
    Ok((catalog, text))
}

fn stats_json(stats: &Stats) -> serde_json::Value {
    serde_json::to_value(stats).expect("stats serialize")
}

fn query(args: QueryArgs) -> Result<u8, Failure> {
    let (catalog, text) = load(&args.input)?;
    let mut opts = args.toggles.options(args.input.k);
    opts.materialize = args.tuples.is_some();
    let r = run_query(&text, &catalog, opts)?;

    if args.explain != ExplainMode::None {
        eprint!("{}", explain_text(&r, args.explain));
    }
    match &args.output {
        Some(p) => {
            let f = File::create(p).map_err(|e| io_failure(p, e))?;
            r.scores.write_csv(BufWriter::new(f)).map_err(|e| io_failure(p, e))?;
        }
        None => {
            let out = io::stdout().lock();
            r.scores
                .write_csv(out)
                .map_err(|e| Failure(EXIT_EXEC, e.to_string()))?;
        }
    }
    if let (Some(p), Some(t)) = (&args.tuples, &r.tuples) {
        let f = File::create(p).map_err(|e| io_failure(p, e))?;
        write_csv(t, BufWriter::new(f)).map_err(|e| Failure(EXIT_EXEC, e.to_string()))?;
    }
    let stats = stats_json(&r.stats);
    if args.stats {
        eprintln!("{}", serde_json::to_string_pretty(&stats).expect("json"));
    }
    if let Some(p) = &args.stats_file {
        std::fs::write(p, serde_json::to_string_pretty(&stats).expect("json")).map_err(|e| io_failure(p, e))?;
    }
    if args.verify {
        return verify_cmd(&text, &catalog, opts, 1e-9);
    }
    Ok(0)
}

fn verify_cmd(text: &str, catalog: &Catalog, opts: EngineOptions, tolerance: f64) -> Result<u8, Failure> {
    let rep = verify(text, catalog, opts, tolerance)?;
    let rows = rep.engine.scores.len();
    if rep.ok() {
        println!("PASS rows={rows} max_rel_delta={:e}", rep.diff.max_rel_delta);
        Ok(0)
    } else {
        println!(
            "FAIL rows={rows} reference_rows={} max_rel_delta={:e}",
            rep.oracle.len(),
            rep.diff.max_rel_delta
        );
        for m in rep.diff.mismatches.iter().take(20) {
            println!("  {m}");
        }
        Ok(EXIT_MISMATCH)
    }
}

fn explain_text(r: &QueryResult, mode: ExplainMode) -> String {
    let mut s = String::new();
    if matches!(mode, ExplainMode::Logical | ExplainMode::Both) {
        s.push_str("== logical plan ==\n");
        s.push_str(&explain_logical(&r.logical_before));
        s.push_str("== rules applied ==\n");
        if r.rules.is_empty() {
            s.push_str("(none)\n");
        }
        for rule in &r.rules {
            s.push_str(rule.name());
            s.push('\n');
        }
        s.push_str("== optimized plan ==\n");
        s.push_str(&explain_logical(&r.logical_after));
    }
    if matches!(mode, ExplainMode::Physical | ExplainMode::Both) {
        for (i, p) in r.physical.iter().enumerate() {
            s.push_str(&format!("== physical plan {} (cost {:.0}) ==\n", i + 1, p.cost()));
            s.push_str(&p.explain());
        }
    }
    s
}

/// FNV-1a over the CSV rendering.
fn checksum(rel: &Relation) -> u64 {
    let mut buf = Vec::new();
    write_csv(rel, &mut buf).expect("writing to memory");
    buf.iter().fold(0xcbf29ce484222325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x100000001b3))
}

fn bench(workload: &WorkloadArgs, gms: usize, k: usize, ascending: bool, output: Option<&Path>) -> Result<u8, Failure> {
    let t = Instant::now();
    let rel = generate(&workload.config());
    let rows = rel.row_count();
    let sum = checksum(&rel);
    let catalog = Catalog::single(rel);
    let gen_ms = t.elapsed().as_secs_f64() * 1e3;
    let text = bench_query(gms, k, ascending);

    let mut stages = Vec::new();
    let mut reference: Option<QueryResult> = None;
    for (name, planner) in PlannerOptions::stages() {
        let opts = EngineOptions {
            planner,
            ..EngineOptions::default()
        };
        let t = Instant::now();
        let r = run_query(&text, &catalog, opts)?;
        let wall = t.elapsed().as_secs_f64() * 1e3;
        let same = reference.as_ref().is_none_or(|b| {
            trendcompare::engine::compare_results(&b.scores, &r.scores, 1e-9).ok()
        });
        stages.push(json!({
            "stage": name,
            "wall_ms": wall,
            "group_by_nodes": r.physical.iter().map(|p| p.group_by_count()).sum::<usize>(),
            "same_result": same,
            "stats": stats_json(&r.stats),
        }));
        if reference.is_none() {
            reference = Some(r);
        }
    }
    let report = json!({
        "workload": {
            "trends": workload.trends,
            "days": workload.days,
            "replicas": workload.replicas,
            "clusters": workload.clusters,
            "seed": workload.seed,
            "rows": rows,
            "checksum": format!("{sum:016x}"),
            "generate_ms": gen_ms,
        },
        "query": text,
        "stages": stages,
    });
    let text = serde_json::to_string_pretty(&report).expect("json");
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure(p, e))?,
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Failure(EXIT_EXEC, e.to_string()))?;
        }
    }
    Ok(0)
}
