mod output;
mod stats;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sarsim::baselines::{time_generator, BenchReport, Generator};
use sarsim::format::{
    write_csv_rows, write_f32s, write_jsonl_rows, write_jsonl_window, write_raw_window, write_series_header,
    write_window_header,
};
use sarsim::{batch_windows, BatchStream, Error, OutputFormat, SimulatorConfig};
use serde::Serialize;

use crate::output::AtomicOutput;

#[derive(Parser)]
#[command(name = "sarsim", version, about = "Synthetic SARIMA-based time-series generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate batches of series.
    Generate(GenerateArgs),
    /// Cut training windows (context, padding, target) from generated batches.
    Windows(WindowArgs),
    /// Time generators and compare per-series cost.
    Bench(BenchArgs),
    /// Summarize a generated file.
    Stats(StatsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; missing fields take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "SARSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of batches.
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output path, or `-` for stdout.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value = "raw", value_parser = parse_format)]
    format: OutputFormat,
}

#[derive(Args)]
struct WindowArgs {
    #[command(flatten)]
    run: RunArgs,
    /// `jsonl` or `raw`.
    #[arg(long, default_value = "raw", value_parser = parse_format)]
    format: OutputFormat,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated subset of sarsim, forecastpfn, kernelsynth.
    #[arg(long, value_delimiter = ',', default_value = "sarsim,forecastpfn,kernelsynth")]
    generators: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1024")]
    lengths: Vec<usize>,
    /// Series per generator: one value for all, or one per generator.
    #[arg(long, value_delimiter = ',', default_value = "4096,256,8")]
    counts: Vec<usize>,
    #[arg(long, env = "SARSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Also write the rows as csv here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// File written by `generate` (raw, csv or jsonl).
    path: PathBuf,
    /// Rows to summarize individually, spread evenly over the file.
    #[arg(long, default_value_t = 8)]
    rows: usize,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Errors that should exit with the usage status.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

fn load_config(path: Option<&Path>) -> anyhow::Result<SimulatorConfig> {
    let Some(path) = path else {
        return Ok(SimulatorConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    SimulatorConfig::from_json_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

fn open_stream(run: &RunArgs, cfg: &SimulatorConfig) -> anyhow::Result<BatchStream> {
    if run.count == 0 {
        return usage("--count must be >= 1");
    }
    Ok(BatchStream::new(run.seed, cfg.clone(), Some(run.count))?.with_workers(run.workers)?)
}

fn total_rows(run: &RunArgs, cfg: &SimulatorConfig) -> anyhow::Result<usize> {
    usize::try_from(run.count)
        .ok()
        .and_then(|c| c.checked_mul(cfg.batch_size))
        .context("row count overflows")
}

#[derive(Serialize)]
struct BatchMeta {
    index: u64,
    digest: String,
    attempt: u64,
    recipe: serde_json::Value,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    engine_version: &'a str,
    command: &'a str,
    seed: u64,
    count: u64,
    format: OutputFormat,
    rows: usize,
    length: usize,
    config_digest: String,
    config: &'a SimulatorConfig,
    batches: Vec<BatchMeta>,
}

fn cmd_generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let run = &args.run;
    let cfg = load_config(run.config.as_deref())?;
    let rows = total_rows(run, &cfg)?;
    let len = cfg.sequence_length;
    let stream = open_stream(run, &cfg)?;

    let mut out = AtomicOutput::create(&run.out)?;
    let mut batches = Vec::new();
    if args.format == OutputFormat::Raw {
        write_series_header(&mut out, rows, len)?;
    }
    for (index, batch) in stream.enumerate() {
        let batch = batch?;
        let values = batch.to_f32();
        match args.format {
            OutputFormat::Raw => write_f32s(&mut out, &values)?,
            OutputFormat::Csv => write_csv_rows(&mut out, &values, len)?,
            OutputFormat::Jsonl => write_jsonl_rows(&mut out, index as u64, &values, len)?,
        }
        batches.push(BatchMeta {
            index: index as u64,
            digest: batch.recipe.digest(),
            attempt: batch.recipe.attempt,
            recipe: serde_json::to_value(&batch.recipe)?,
        });
    }
    let meta = RunMeta {
        engine_version: sarsim::VERSION,
        command: "generate",
        seed: run.seed,
        count: run.count,
        format: args.format,
        rows,
        length: len,
        config_digest: cfg.digest(),
        config: &cfg,
        batches,
    };
    out.commit_with_meta(&serde_json::to_vec_pretty(&meta)?)
}

fn cmd_windows(args: &WindowArgs) -> anyhow::Result<()> {
    let run = &args.run;
    if args.format == OutputFormat::Csv {
        return usage("windows support jsonl or raw output");
    }
    let cfg = load_config(run.config.as_deref())?;
    let records = total_rows(run, &cfg)?;
    let geometry = cfg.window;
    let stream = open_stream(run, &cfg)?;

    let mut out = AtomicOutput::create(&run.out)?;
    let mut batches = Vec::new();
    if args.format == OutputFormat::Raw {
        write_window_header(&mut out, records, geometry.context, geometry.horizon)?;
    }
    for (index, batch) in stream.enumerate() {
        let batch = batch?;
        for w in batch_windows(&batch, &geometry)? {
            match args.format {
                OutputFormat::Raw => write_raw_window(&mut out, &w)?,
                _ => write_jsonl_window(&mut out, &w)?,
            }
        }
        batches.push(BatchMeta {
            index: index as u64,
            digest: batch.recipe.digest(),
            attempt: batch.recipe.attempt,
            recipe: serde_json::to_value(&batch.recipe)?,
        });
    }
    let meta = RunMeta {
        engine_version: sarsim::VERSION,
        command: "windows",
        seed: run.seed,
        count: run.count,
        format: args.format,
        rows: records,
        length: geometry.total(),
        config_digest: cfg.digest(),
        config: &cfg,
        batches,
    };
    out.commit_with_meta(&serde_json::to_vec_pretty(&meta)?)
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let generators: Vec<Generator> = args
        .generators
        .iter()
        .filter(|g| !g.trim().is_empty())
        .map(|g| g.trim().parse::<Generator>().map_err(|e| UsageError(e.to_string())))
        .collect::<Result<_, _>>()?;
    if generators.is_empty() {
        return usage("--generators needs at least one of sarsim, forecastpfn, kernelsynth");
    }
    if args.lengths.is_empty() || args.lengths.contains(&0) {
        return usage("--lengths must be positive");
    }
    let counts = match args.counts.len() {
        1 => vec![args.counts[0]; generators.len()],
        n if n == generators.len() => args.counts.clone(),
        n => return usage(format!("{n} counts given for {} generators", generators.len())),
    };
    if counts.contains(&0) {
        return usage("--counts must be positive");
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let mut report = BenchReport::default();
    for &len in &args.lengths {
        for (&g, &count) in generators.iter().zip(&counts) {
            report
                .rows
                .push(pool.install(|| time_generator(g, len, count, args.seed))?);
        }
    }
    emit(&format!("{report}\n{}", report.to_csv()))?;
    if let Some(path) = &args.csv {
        let mut out = AtomicOutput::create(path)?;
        std::io::Write::write_all(&mut out, report.to_csv().as_bytes())?;
        out.commit()?;
    }
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> anyhow::Result<()> {
    let bytes = std::fs::read(&args.path).with_context(|| format!("reading {}", args.path.display()))?;
    let summary = stats::summarize(&bytes, args.rows)?;
    emit(&format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
    Ok(())
}

fn emit(text: &str) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    std::io::Write::write_all(&mut out, text.as_bytes())?;
    std::io::Write::flush(&mut out)
}

/// A closed stdout (e.g. piped into `head`) ends the run quietly.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<Error>()
                .is_some_and(|s| matches!(s, Error::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Windows(a) => cmd_windows(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
