//! Measurement harnesses: model latency with breakdowns, NN/NT matmul
//! ratio grids, dispatch-overhead split, and partition-parameter sweeps.

use std::time::Instant;

use cpuformer_core::nn::{
    build_model, model_forward, EncoderConfig, ProfileCache, WallClockTimer,
};
use cpuformer_core::{
    build_registry, dispatch_fast_timed, dispatch_full_timed, gemm_blocked, gemm_naive,
    max_rel_err, random_matrix, DispatchCache, Error, KernelDescriptor, Matrix, PartitionParams,
    Result, Rng, TimingBreakdown, TransposeMode,
};

use crate::csv::Cell;

fn median_u64(mut xs: Vec<u64>) -> u64 {
    xs.sort_unstable();
    xs[xs.len() / 2]
}

fn median_f64(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// One model-latency measurement: per-repetition latencies, summary stats,
/// and the aggregated timing breakdown.
pub struct BenchResult {
    pub latencies_ms: Vec<f64>,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub median_ms: f64,
    pub breakdown: TimingBreakdown,
    pub pooled: Matrix,
}

impl BenchResult {
    /// Order-independent fingerprint of the pooled output, for checking
    /// that correctness does not drift between configurations.
    pub fn pooled_checksum(&self) -> u64 {
        self.pooled
            .as_slice()
            .iter()
            .fold(0u64, |acc, v| acc.rotate_left(7) ^ u64::from(v.to_bits()))
    }
}

/// Builds the model once (profiling runs inside the build, outside the
/// timed region), then measures `reps` warm repetitions of the forward
/// pass. One untimed warm-up repetition precedes the measured ones.
#[allow(clippy::too_many_arguments)]
pub fn bench_model(
    cfg: EncoderConfig,
    seed: u64,
    seq_len: usize,
    threads: usize,
    reps: usize,
    params: PartitionParams,
    adaptive: bool,
) -> Result<BenchResult> {
    if seq_len == 0 || seq_len > cfg.max_len {
        return Err(Error::InvalidArgument(format!(
            "seq_len must be in 1..={}, got {seq_len}",
            cfg.max_len
        )));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    let cache = ProfileCache::new();
    let model = build_model(cfg, seed, threads, &cache, adaptive, &mut WallClockTimer)?;

    let mut ids_rng = Rng::new(seed ^ 0xB00C_5EED);
    let token_ids: Vec<usize> =
        (0..seq_len).map(|_| (ids_rng.next_u64() as usize) % cfg.vocab).collect();

    // warm-up, excluded from stats
    let (mut pooled, _) = model_forward(&model, &token_ids, threads, params)?;

    let mut latencies_ms = Vec::with_capacity(reps);
    let mut breakdown = TimingBreakdown::new();
    for _ in 0..reps {
        let t0 = Instant::now();
        let (p, bd) = model_forward(&model, &token_ids, threads, params)?;
        latencies_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        breakdown.merge(&bd);
        pooled = p;
    }

    let mean_ms = latencies_ms.iter().sum::<f64>() / reps as f64;
    let std_ms = if reps > 1 {
        let var = latencies_ms.iter().map(|l| (l - mean_ms).powi(2)).sum::<f64>()
            / (reps - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };
    let median_ms = median_f64(&latencies_ms);

    Ok(BenchResult { latencies_ms, mean_ms, std_ms, median_ms, breakdown, pooled })
}

pub const BENCH_MODEL_HEADER: &[&str] = &[
    "cfg",
    "seq_len",
    "threads",
    "reps",
    "adaptive",
    "bm",
    "bn",
    "bk",
    "mean_ms",
    "std_ms",
    "median_ms",
    "linear_ns",
    "bmm_ns",
    "softmax_ns",
    "layernorm_ns",
    "activation_ns",
    "other_module_ns",
    "attn_self_ns",
    "attn_dense_ns",
    "attn_layernorm_ns",
    "attn_other_ns",
    "ffn_dense1_ns",
    "ffn_dense2_ns",
    "ffn_layernorm_ns",
    "ffn_other_ns",
    "other_sublayer_ns",
    "total_ns",
    "pooled_checksum",
];

#[allow(clippy::too_many_arguments)]
pub fn bench_model_row(
    cfg_name: &str,
    seq_len: usize,
    threads: usize,
    reps: usize,
    adaptive: bool,
    params: PartitionParams,
    r: &BenchResult,
) -> Vec<Cell> {
    let mut row = vec![
        Cell::Str(cfg_name.to_string()),
        Cell::UInt(seq_len as u64),
        Cell::UInt(threads as u64),
        Cell::UInt(reps as u64),
        Cell::Str(if adaptive { "on" } else { "off" }.to_string()),
        Cell::UInt(params.bm as u64),
        Cell::UInt(params.bn as u64),
        Cell::UInt(params.bk as u64),
        Cell::Float(r.mean_ms),
        Cell::Float(r.std_ms),
        Cell::Float(r.median_ms),
    ];
    for (_, ns) in r.breakdown.module_entries() {
        row.push(Cell::UInt(ns));
    }
    for (_, ns) in r.breakdown.sublayer_entries() {
        row.push(Cell::UInt(ns));
    }
    row.push(Cell::UInt(r.breakdown.total_ns));
    row.push(Cell::UInt(r.pooled_checksum()));
    row
}

/// One (weight shape, sequence length, thread count) cell of the NN-vs-NT
/// ratio grid: raw medians for both forms plus their ratio.
pub struct MatmulRow {
    pub in_dim: usize,
    pub out_dim: usize,
    pub seq_len: usize,
    pub threads: usize,
    pub nn_median_ns: u64,
    pub nt_median_ns: u64,
}

impl MatmulRow {
    /// Time for non-transposed over time for transposed; > 1 means the NT
    /// form is faster.
    pub fn ratio(&self) -> f64 {
        self.nn_median_ns as f64 / self.nt_median_ns as f64
    }
}

pub const BENCH_MATMUL_HEADER: &[&str] =
    &["in_dim", "out_dim", "seq_len", "threads", "nn_median_ns", "nt_median_ns", "ratio_nn_over_nt"];

pub fn matmul_row_cells(r: &MatmulRow) -> Vec<Cell> {
    vec![
        Cell::UInt(r.in_dim as u64),
        Cell::UInt(r.out_dim as u64),
        Cell::UInt(r.seq_len as u64),
        Cell::UInt(r.threads as u64),
        Cell::UInt(r.nn_median_ns),
        Cell::UInt(r.nt_median_ns),
        Cell::Float(r.ratio()),
    ]
}

/// Default weight shapes: the three distinct linear shapes of BERT-base.
pub fn default_matmul_shapes() -> Vec<(usize, usize)> {
    vec![(768, 768), (768, 3072), (3072, 768)]
}

/// Default sequence lengths: powers of two up to 512.
pub fn default_seq_lens() -> Vec<usize> {
    (0..10).map(|i| 1usize << i).collect()
}

/// Measures median NN and NT multiply times for every grid cell.
pub fn bench_matmul_ratio(
    shapes: &[(usize, usize)],
    seq_lens: &[usize],
    thread_counts: &[usize],
    reps: usize,
    seed: u64,
    params: PartitionParams,
) -> Result<Vec<MatmulRow>> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for &(in_dim, out_dim) in shapes {
        let mut rng = Rng::new(seed ^ ((in_dim as u64) << 20) ^ out_dim as u64);
        let w_normal = random_matrix(in_dim, out_dim, &mut rng)?;
        let w_transposed = w_normal.transpose();
        for &seq_len in seq_lens {
            let x = random_matrix(seq_len, in_dim, &mut rng)?;
            for &threads in thread_counts {
                let time_form = |mode: TransposeMode, w: &Matrix| -> Result<u64> {
                    let _ = gemm_blocked(&x, w, mode, params, threads)?; // warm-up
                    let samples: Result<Vec<u64>> = (0..reps)
                        .map(|_| {
                            let t0 = Instant::now();
                            let _ = gemm_blocked(&x, w, mode, params, threads)?;
                            Ok(t0.elapsed().as_nanos() as u64)
                        })
                        .collect();
                    Ok(median_u64(samples?))
                };
                let nn_median_ns = time_form(TransposeMode::NN, &w_normal)?;
                let nt_median_ns = time_form(TransposeMode::NT, &w_transposed)?;
                rows.push(MatmulRow { in_dim, out_dim, seq_len, threads, nn_median_ns, nt_median_ns });
            }
        }
    }
    Ok(rows)
}

/// Per-path medians of the dispatch-phase and kernel-phase split.
pub struct DispatchRow {
    pub path: &'static str,
    pub calls: usize,
    pub dispatch_median_ns: u64,
    pub kernel_median_ns: u64,
}

pub const BENCH_DISPATCH_HEADER: &[&str] =
    &["path", "m", "k", "n", "threads", "calls", "dispatch_median_ns", "kernel_median_ns"];

pub fn dispatch_row_cells(r: &DispatchRow, (m, k, n): (usize, usize, usize), threads: usize) -> Vec<Cell> {
    vec![
        Cell::Str(r.path.to_string()),
        Cell::UInt(m as u64),
        Cell::UInt(k as u64),
        Cell::UInt(n as u64),
        Cell::UInt(threads as u64),
        Cell::UInt(r.calls as u64),
        Cell::UInt(r.dispatch_median_ns),
        Cell::UInt(r.kernel_median_ns),
    ]
}

/// Repeats one multiply through the full and fast dispatch paths and
/// reports the per-call time split into dispatch phase vs kernel phase.
/// Also verifies the two paths agree bitwise on every call.
pub fn bench_dispatch_overhead(
    (m, k, n): (usize, usize, usize),
    threads: usize,
    reps: usize,
) -> Result<Vec<DispatchRow>> {
    if threads < 2 {
        return Err(Error::InvalidArgument("dispatch overhead harness requires threads >= 2".into()));
    }
    if reps < 1000 {
        return Err(Error::InvalidArgument("reps must be >= 1000".into()));
    }
    let mut rng = Rng::new(77);
    let a = random_matrix(m, k, &mut rng)?;
    let b = random_matrix(k, n, &mut rng)?;
    let d = KernelDescriptor {
        mode: TransposeMode::NN,
        m,
        n,
        k,
        threads,
        params: PartitionParams::baseline(),
    };
    let reg = build_registry();
    let cache = DispatchCache::new();

    // warm both paths (and populate the cache) before measuring
    let (full_ref, _) = dispatch_full_timed(&reg, &d, &a, &b)?;
    let (fast_ref, _) = dispatch_fast_timed(&cache, &reg, &d, &a, &b)?;
    if !full_ref.bitwise_eq(&fast_ref) {
        return Err(Error::InvalidArgument("fast path diverged from full path".into()));
    }

    let mut full_dispatch = Vec::with_capacity(reps);
    let mut full_kernel = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (c, phases) = dispatch_full_timed(&reg, &d, &a, &b)?;
        debug_assert!(c.bitwise_eq(&full_ref));
        full_dispatch.push(phases.dispatch_ns);
        full_kernel.push(phases.kernel_ns);
    }

    let mut fast_dispatch = Vec::with_capacity(reps);
    let mut fast_kernel = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (c, phases) = dispatch_fast_timed(&cache, &reg, &d, &a, &b)?;
        debug_assert!(c.bitwise_eq(&full_ref));
        fast_dispatch.push(phases.dispatch_ns);
        fast_kernel.push(phases.kernel_ns);
    }

    Ok(vec![
        DispatchRow {
            path: "full",
            calls: reps,
            dispatch_median_ns: median_u64(full_dispatch),
            kernel_median_ns: median_u64(full_kernel),
        },
        DispatchRow {
            path: "fast",
            calls: reps,
            dispatch_median_ns: median_u64(fast_dispatch),
            kernel_median_ns: median_u64(fast_kernel),
        },
    ])
}

/// One partition-sweep cell: median blocked-GEMM time plus the worst
/// relative error against the naive oracle for that configuration.
pub struct SweepRow {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub bk: usize,
    pub threads: usize,
    pub median_ns: u64,
    pub max_rel_err: f64,
}

pub const SWEEP_PARTITION_HEADER: &[&str] =
    &["m", "k", "n", "bk", "threads", "median_ns", "max_rel_err"];

pub fn sweep_row_cells(r: &SweepRow) -> Vec<Cell> {
    vec![
        Cell::UInt(r.m as u64),
        Cell::UInt(r.k as u64),
        Cell::UInt(r.n as u64),
        Cell::UInt(r.bk as u64),
        Cell::UInt(r.threads as u64),
        Cell::UInt(r.median_ns),
        Cell::Float(r.max_rel_err),
    ]
}

/// GEMM operand shapes (m, k, n) for a config's linear layers at one
/// sequence length.
pub fn linear_shapes_for(cfg: &EncoderConfig, seq_len: usize) -> Vec<(usize, usize, usize)> {
    vec![
        (seq_len, cfg.d_model, cfg.d_model),
        (seq_len, cfg.d_model, cfg.d_ff),
        (seq_len, cfg.d_ff, cfg.d_model),
    ]
}

/// Times the blocked kernel for every (bk, shape) pair and records the
/// error against the oracle; correctness must never vary with partitioning.
pub fn sweep_partition(
    bk_list: &[usize],
    shapes: &[(usize, usize, usize)],
    threads: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    if bk_list.iter().any(|&bk| bk == 0) {
        return Err(Error::InvalidArgument("bk values must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for &(m, k, n) in shapes {
        let mut rng = Rng::new(seed ^ ((m as u64) << 40) ^ ((k as u64) << 20) ^ n as u64);
        let a = random_matrix(m, k, &mut rng)?;
        let b = random_matrix(k, n, &mut rng)?;
        let oracle = gemm_naive(&a, &b, TransposeMode::NN)?;
        for &bk in bk_list {
            let params = PartitionParams::new(64, 64, bk)?;
            let c = gemm_blocked(&a, &b, TransposeMode::NN, params, threads)?;
            let err = max_rel_err(&c, &oracle)?;
            let samples: Result<Vec<u64>> = (0..reps)
                .map(|_| {
                    let t0 = Instant::now();
                    let _ = gemm_blocked(&a, &b, TransposeMode::NN, params, threads)?;
                    Ok(t0.elapsed().as_nanos() as u64)
                })
                .collect();
            rows.push(SweepRow {
                m,
                k,
                n,
                bk,
                threads,
                median_ns: median_u64(samples?),
                max_rel_err: err,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> EncoderConfig {
        EncoderConfig {
            layers: 1,
            heads: 2,
            d_model: 16,
            d_ff: 32,
            d_k: 8,
            max_len: 512,
            layernorm_eps: 1e-12,
            vocab: 32,
        }
    }

    #[test]
    fn bench_model_single_rep_has_zero_std() {
        let r = bench_model(tiny_cfg(), 1, 8, 1, 1, PartitionParams::baseline(), false).unwrap();
        assert_eq!(r.std_ms, 0.0);
        assert_eq!(r.latencies_ms.len(), 1);
        assert!(r.breakdown.check_consistency());
    }

    #[test]
    fn bench_model_mean_recomputable() {
        let r = bench_model(tiny_cfg(), 1, 8, 1, 4, PartitionParams::baseline(), false).unwrap();
        let mean = r.latencies_ms.iter().sum::<f64>() / 4.0;
        assert!((mean - r.mean_ms).abs() < 1e-12);
    }

    #[test]
    fn bench_model_checksum_stable_across_reps() {
        let a = bench_model(tiny_cfg(), 3, 8, 1, 2, PartitionParams::baseline(), false).unwrap();
        let b = bench_model(tiny_cfg(), 3, 8, 1, 5, PartitionParams::baseline(), false).unwrap();
        assert_eq!(a.pooled_checksum(), b.pooled_checksum());
    }

    #[test]
    fn bench_model_rejects_bad_args() {
        assert!(bench_model(tiny_cfg(), 1, 0, 1, 1, PartitionParams::baseline(), false).is_err());
        assert!(bench_model(tiny_cfg(), 1, 600, 1, 1, PartitionParams::baseline(), false).is_err());
        assert!(bench_model(tiny_cfg(), 1, 8, 1, 0, PartitionParams::baseline(), false).is_err());
    }

    #[test]
    fn matmul_grid_is_complete() {
        let rows = bench_matmul_ratio(
            &[(16, 16), (16, 32)],
            &[1, 2, 4],
            &[1, 2],
            3,
            1,
            PartitionParams::baseline(),
        )
        .unwrap();
        assert_eq!(rows.len(), 2 * 3 * 2);
        for r in &rows {
            assert!(r.nn_median_ns > 0 && r.nt_median_ns > 0);
            assert!(r.ratio() > 0.0);
        }
    }

    #[test]
    fn dispatch_overhead_validates_usage() {
        assert!(bench_dispatch_overhead((8, 16, 8), 1, 2000).is_err());
        assert!(bench_dispatch_overhead((8, 16, 8), 2, 10).is_err());
    }

    #[test]
    fn sweep_rows_carry_passing_error_column() {
        let rows =
            sweep_partition(&[4, 16], &[(8, 16, 8), (7, 13, 9)], 2, 2, 5).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.max_rel_err <= 1e-4, "bk={} err={}", r.bk, r.max_rel_err);
        }
    }
}
