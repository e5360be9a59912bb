//! Library side of the benchmark CLI, exposed so integration tests can
//! drive the harnesses directly.

pub mod bench;
pub mod config;
pub mod csv;

pub use bench::{
    bench_dispatch_overhead, bench_matmul_ratio, bench_model, sweep_partition, BenchResult,
    DispatchRow, MatmulRow, SweepRow,
};
pub use config::{load_config, parse_list, parse_partition, resolve_threads, ENV_THREADS};
pub use csv::{render_csv, write_csv, Cell};
