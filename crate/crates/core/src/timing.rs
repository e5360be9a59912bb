//! Per-category wall-time accumulation for the model forward pass.
//!
//! The same measurements are rendered two ways: by module (linear, bmm,
//! softmax, ...) and by sub-layer (attention self/dense/layernorm/...).

use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Module {
    Linear,
    Bmm,
    Softmax,
    LayerNorm,
    Activation,
    Other,
}

pub const MODULE_LABELS: [&str; 6] = ["linear", "bmm", "softmax", "layernorm", "activation", "other"];

impl Module {
    #[inline]
    fn index(self) -> usize {
        match self {
            Module::Linear => 0,
            Module::Bmm => 1,
            Module::Softmax => 2,
            Module::LayerNorm => 3,
            Module::Activation => 4,
            Module::Other => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sublayer {
    AttnSelf,
    AttnDense,
    AttnLayerNorm,
    AttnOther,
    FfnDense1,
    FfnDense2,
    FfnLayerNorm,
    FfnOther,
    Other,
}

pub const SUBLAYER_LABELS: [&str; 9] = [
    "attn_self",
    "attn_dense",
    "attn_layernorm",
    "attn_other",
    "ffn_dense1",
    "ffn_dense2",
    "ffn_layernorm",
    "ffn_other",
    "other",
];

impl Sublayer {
    #[inline]
    fn index(self) -> usize {
        match self {
            Sublayer::AttnSelf => 0,
            Sublayer::AttnDense => 1,
            Sublayer::AttnLayerNorm => 2,
            Sublayer::AttnOther => 3,
            Sublayer::FfnDense1 => 4,
            Sublayer::FfnDense2 => 5,
            Sublayer::FfnLayerNorm => 6,
            Sublayer::FfnOther => 7,
            Sublayer::Other => 8,
        }
    }
}

/// Accumulated nanoseconds per category plus the measured total.
#[derive(Debug, Clone, Default)]
pub struct TimingBreakdown {
    by_module: [u64; 6],
    by_sublayer: [u64; 9],
    pub total_ns: u64,
}

impl TimingBreakdown {
    pub fn new() -> Self {
        Self::default()
    }

    /// Times `f` and charges the elapsed wall time to both renderings.
    #[inline]
    pub fn record<T>(&mut self, module: Module, sublayer: Sublayer, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        let ns = t0.elapsed().as_nanos() as u64;
        self.by_module[module.index()] += ns;
        self.by_sublayer[sublayer.index()] += ns;
        out
    }

    pub fn module_ns(&self, module: Module) -> u64 {
        self.by_module[module.index()]
    }

    pub fn sublayer_ns(&self, sublayer: Sublayer) -> u64 {
        self.by_sublayer[sublayer.index()]
    }

    pub fn module_entries(&self) -> impl Iterator<Item = (&'static str, u64)> + '_ {
        MODULE_LABELS.iter().copied().zip(self.by_module.iter().copied())
    }

    pub fn sublayer_entries(&self) -> impl Iterator<Item = (&'static str, u64)> + '_ {
        SUBLAYER_LABELS.iter().copied().zip(self.by_sublayer.iter().copied())
    }

    pub fn module_sum_ns(&self) -> u64 {
        self.by_module.iter().sum()
    }

    pub fn sublayer_sum_ns(&self) -> u64 {
        self.by_sublayer.iter().sum()
    }

    /// Accumulates another breakdown (used to aggregate repetitions).
    pub fn merge(&mut self, other: &TimingBreakdown) {
        for (a, b) in self.by_module.iter_mut().zip(&other.by_module) {
            *a += b;
        }
        for (a, b) in self.by_sublayer.iter_mut().zip(&other.by_sublayer) {
            *a += b;
        }
        self.total_ns += other.total_ns;
    }

    /// Category sums may exceed the total by at most the documented 2%
    /// scoped-timer overlap slack.
    pub fn check_consistency(&self) -> bool {
        let slack = (self.total_ns as f64 * 1.02) as u64;
        self.module_sum_ns() <= slack && self.sublayer_sum_ns() <= slack
    }
}
