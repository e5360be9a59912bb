//! Criterion benchmark crate. See the `benches/` directory; the library
//! target only hosts shared fixture helpers.

use cpuformer_core::{random_matrix, Matrix, Rng};

/// Deterministic operand pair for an m*k by k*n multiply.
pub fn operands(m: usize, k: usize, n: usize, seed: u64) -> (Matrix, Matrix) {
    let mut rng = Rng::new(seed);
    let a = random_matrix(m, k, &mut rng).unwrap();
    let b = random_matrix(k, n, &mut rng).unwrap();
    (a, b)
}
