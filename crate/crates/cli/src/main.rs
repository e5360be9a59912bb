use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpuformer_cli::bench::{
    bench_dispatch_overhead, bench_matmul_ratio, bench_model, bench_model_row, default_matmul_shapes,
    default_seq_lens, dispatch_row_cells, linear_shapes_for, matmul_row_cells, sweep_partition,
    sweep_row_cells, BENCH_DISPATCH_HEADER, BENCH_MATMUL_HEADER, BENCH_MODEL_HEADER,
    SWEEP_PARTITION_HEADER,
};
use cpuformer_cli::config::{load_config, parse_list, parse_partition, resolve_threads};
use cpuformer_cli::csv::{render_csv, write_csv, Cell};
use cpuformer_core::{Error, Result};

/// CPU transformer-encoder inference benchmarks.
#[derive(Parser)]
#[command(name = "cpuformer", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Worker threads (falls back to INFER_NUM_THREADS, then 1)
    #[arg(long)]
    threads: Option<usize>,
    /// Timed repetitions
    #[arg(long)]
    reps: Option<usize>,
    /// Seed for synthetic weights and inputs
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// bert-base | bert-large | distil | path to a JSON config
    #[arg(long, default_value = "bert-base")]
    cfg: String,
    /// baseline | patched | bm,bn,bk
    #[arg(long, default_value = "baseline")]
    partition: String,
}

#[derive(Subcommand)]
enum Command {
    /// Model inference latency with timing breakdowns
    BenchModel {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated sequence lengths
        #[arg(long, default_value = "8,64,384")]
        seq_len: String,
        /// Comma-separated thread counts (overrides --threads)
        #[arg(long)]
        thread_grid: Option<String>,
        /// on | off: adaptive NN/NT form selection
        #[arg(long, default_value = "on")]
        adaptive: String,
    },
    /// NN vs NT matmul time ratios over a (shape, seq_len, threads) grid
    BenchMatmul {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated sequence lengths (default: powers of two to 512)
        #[arg(long)]
        seq_len: Option<String>,
        /// Comma-separated thread counts (overrides --threads)
        #[arg(long)]
        thread_grid: Option<String>,
    },
    /// Dispatch-phase vs kernel-phase time, full path vs fast path
    BenchDispatch {
        #[command(flatten)]
        common: CommonArgs,
        /// Multiply shape as m,k,n
        #[arg(long, default_value = "8,768,768")]
        shape: String,
    },
    /// Blocked-GEMM time and correctness across BK values
    SweepPartition {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated BK values
        #[arg(long, default_value = "64,384")]
        bk: String,
        /// Sequence length for the operand shapes
        #[arg(long, default_value_t = 384)]
        seq_len: usize,
    },
}

fn parse_adaptive(s: &str) -> Result<bool> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(Error::InvalidArgument(format!("--adaptive must be on or off, got '{other}'"))),
    }
}

fn emit(out: &Option<PathBuf>, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    match out {
        Some(path) => write_csv(path, header, rows),
        None => {
            print!("{}", render_csv(header, rows));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BenchModel { common, seq_len, thread_grid, adaptive } => {
            let (cfg, cfg_seed) = load_config(&common.cfg)?;
            let seed = if common.seed != 0 { common.seed } else { cfg_seed };
            let params = parse_partition(&common.partition)?;
            let adaptive = parse_adaptive(&adaptive)?;
            let reps = common.reps.unwrap_or(5);
            let seq_lens = parse_list(&seq_len)?;
            let threads_list = match thread_grid {
                Some(g) => parse_list(&g)?,
                None => vec![resolve_threads(common.threads)],
            };
            let mut rows = Vec::new();
            for &t in &threads_list {
                for &len in &seq_lens {
                    let r = bench_model(cfg, seed, len, t, reps, params, adaptive)?;
                    rows.push(bench_model_row(&common.cfg, len, t, reps, adaptive, params, &r));
                }
            }
            emit(&common.out, BENCH_MODEL_HEADER, &rows)
        }
        Command::BenchMatmul { common, seq_len, thread_grid } => {
            let params = parse_partition(&common.partition)?;
            let reps = common.reps.unwrap_or(5);
            let seq_lens = match seq_len {
                Some(s) => parse_list(&s)?,
                None => default_seq_lens(),
            };
            let threads_list = match thread_grid {
                Some(g) => parse_list(&g)?,
                None => vec![resolve_threads(common.threads)],
            };
            let shapes = default_matmul_shapes();
            let rows =
                bench_matmul_ratio(&shapes, &seq_lens, &threads_list, reps, common.seed, params)?;
            let cells: Vec<Vec<Cell>> = rows.iter().map(matmul_row_cells).collect();
            emit(&common.out, BENCH_MATMUL_HEADER, &cells)
        }
        Command::BenchDispatch { common, shape } => {
            let dims = parse_list(&shape)?;
            if dims.len() != 3 {
                return Err(Error::InvalidArgument("--shape must be m,k,n".into()));
            }
            let shape = (dims[0], dims[1], dims[2]);
            let threads = resolve_threads(common.threads);
            let reps = common.reps.unwrap_or(10_000);
            let rows = bench_dispatch_overhead(shape, threads, reps)?;
            let cells: Vec<Vec<Cell>> =
                rows.iter().map(|r| dispatch_row_cells(r, shape, threads)).collect();
            emit(&common.out, BENCH_DISPATCH_HEADER, &cells)
        }
        Command::SweepPartition { common, bk, seq_len } => {
            let (cfg, _) = load_config(&common.cfg)?;
            let bk_list = parse_list(&bk)?;
            let threads = resolve_threads(common.threads);
            let reps = common.reps.unwrap_or(3);
            let shapes = linear_shapes_for(&cfg, seq_len);
            let rows = sweep_partition(&bk_list, &shapes, threads, reps, common.seed)?;
            let cells: Vec<Vec<Cell>> = rows.iter().map(sweep_row_cells).collect();
            emit(&common.out, SWEEP_PARTITION_HEADER, &cells)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::InvalidArgument(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
