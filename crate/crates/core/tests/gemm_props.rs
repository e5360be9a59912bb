//! Property tests for the blocked GEMM against the naive oracle.

use cpuformer_core::{
    gemm_blocked, gemm_naive, max_rel_err, random_matrix, PartitionParams, Rng, TransposeMode,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blocked_matches_oracle(
        m in 1usize..64,
        n in 1usize..64,
        k in 1usize..64,
        bm in 1usize..96,
        bn in 1usize..96,
        bk in 1usize..96,
        threads in 1usize..5,
        nt in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mode = if nt { TransposeMode::NT } else { TransposeMode::NN };
        let mut rng = Rng::new(seed);
        let a = random_matrix(m, k, &mut rng).unwrap();
        let b = match mode {
            TransposeMode::NN => random_matrix(k, n, &mut rng).unwrap(),
            TransposeMode::NT => random_matrix(n, k, &mut rng).unwrap(),
        };
        let params = PartitionParams::new(bm, bn, bk).unwrap();
        let got = gemm_blocked(&a, &b, mode, params, threads).unwrap();
        let want = gemm_naive(&a, &b, mode).unwrap();
        prop_assert!(max_rel_err(&got, &want).unwrap() <= 1e-4);
    }

    #[test]
    fn blocked_thread_invariant(
        m in 1usize..48,
        n in 1usize..48,
        k in 1usize..48,
        seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed);
        let a = random_matrix(m, k, &mut rng).unwrap();
        let b = random_matrix(k, n, &mut rng).unwrap();
        let params = PartitionParams::new(8, 8, 8).unwrap();
        let base = gemm_blocked(&a, &b, TransposeMode::NN, params, 1).unwrap();
        for t in [2, 3, 8] {
            let got = gemm_blocked(&a, &b, TransposeMode::NN, params, t).unwrap();
            prop_assert!(got.bitwise_eq(&base));
        }
    }

    #[test]
    fn mode_equivalence(
        m in 1usize..32,
        n in 1usize..32,
        k in 1usize..32,
        seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed);
        let a = random_matrix(m, k, &mut rng).unwrap();
        let b_n = random_matrix(k, n, &mut rng).unwrap();
        let b_t = b_n.transpose();
        let params = PartitionParams::new(16, 16, 16).unwrap();
        let c_n = gemm_blocked(&a, &b_n, TransposeMode::NN, params, 2).unwrap();
        let c_t = gemm_blocked(&a, &b_t, TransposeMode::NT, params, 2).unwrap();
        prop_assert!(max_rel_err(&c_n, &c_t).unwrap() <= 1e-4);
    }
}
