//! CPU inference micro-engine for transformer-encoder workloads.
//!
//! Four pieces: dense f32 matrices ([`tensor`]), a blocked multi-threaded
//! GEMM with explicit partition parameters ([`gemm`]), a kernel-selection
//! layer with a memoized fast path ([`dispatch`]), and a BERT-shaped encoder
//! forward pass with an adaptive NN/NT linear module and timing
//! instrumentation ([`nn`], [`timing`]).

pub mod dispatch;
pub mod error;
pub mod gemm;
pub mod nn;
pub mod tensor;
pub mod timing;

pub use dispatch::{
    build_registry, dispatch_fast, dispatch_fast_timed, dispatch_full, dispatch_full_timed,
    DispatchCache, DispatchContext, KernelDescriptor, KernelEntry, KernelRegistry, PhaseSample,
};
pub use error::{Error, Result};
pub use gemm::{
    check_shapes, gemm_batched, gemm_blocked, gemm_naive, GemmTask, PartitionParams, TransposeMode,
};
pub use tensor::{max_rel_err, random_matrix, Matrix, Rng};
pub use timing::{Module, Sublayer, TimingBreakdown, MODULE_LABELS, SUBLAYER_LABELS};
