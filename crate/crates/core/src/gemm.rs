//! Blocked, multi-threaded single-precision matrix multiplication.
//!
//! The blocked kernel follows the classic partitioned loop nest: the outer
//! loop walks K in steps of `bk`, then M in steps of `bm`, then N in steps of
//! `bn`, accumulating C in place. Each (M-block, N-block) cell of the output
//! grid is owned by exactly one worker for every K step, so the per-element
//! accumulation order is ascending-k no matter how many threads run. That
//! makes the output bitwise-invariant in the thread count, which is the
//! property the benchmarking side leans on.

use crate::error::{invalid, Result};
use crate::tensor::Matrix;

/// Source-form variant of the multiply.
///
/// NN: C = A·B with B stored normally as [K, N].
/// NT: C = A·Bᵗ with B stored transposed as [N, K].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransposeMode {
    NN,
    NT,
}

impl std::fmt::Display for TransposeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransposeMode::NN => write!(f, "NN"),
            TransposeMode::NT => write!(f, "NT"),
        }
    }
}

/// The BM/BN/BK blocking triple controlling GEMM tiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartitionParams {
    pub bm: usize,
    pub bn: usize,
    pub bk: usize,
}

impl PartitionParams {
    pub fn new(bm: usize, bn: usize, bk: usize) -> Result<Self> {
        if bm == 0 || bn == 0 || bk == 0 {
            return Err(invalid(format!("partition params must be >= 1, got {bm},{bn},{bk}")));
        }
        Ok(Self { bm, bn, bk })
    }

    /// The stock library profile.
    pub fn baseline() -> Self {
        Self { bm: 64, bn: 64, bk: 384 }
    }

    /// The reduced-BK profile.
    pub fn patched() -> Self {
        Self { bm: 64, bn: 64, bk: 64 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bm == 0 || self.bn == 0 || self.bk == 0 {
            return Err(invalid(format!(
                "partition params must be >= 1, got {},{},{}",
                self.bm, self.bn, self.bk
            )));
        }
        Ok(())
    }
}

/// One multiply in a batch.
#[derive(Debug, Clone)]
pub struct GemmTask {
    pub a: Matrix,
    pub b: Matrix,
    pub mode: TransposeMode,
}

/// Resolves (m, n, k) and checks inner-dimension agreement for the mode.
pub fn check_shapes(a: &Matrix, b: &Matrix, mode: TransposeMode) -> Result<(usize, usize, usize)> {
    let m = a.rows();
    let k = a.cols();
    match mode {
        TransposeMode::NN => {
            if b.rows() != k {
                return Err(invalid(format!(
                    "NN shape mismatch: A is {}x{} but B is {}x{}",
                    m, k, b.rows(), b.cols()
                )));
            }
            Ok((m, b.cols(), k))
        }
        TransposeMode::NT => {
            if b.cols() != k {
                return Err(invalid(format!(
                    "NT shape mismatch: A is {}x{} but Bᵗ-stored B is {}x{}",
                    m, k, b.rows(), b.cols()
                )));
            }
            Ok((m, b.rows(), k))
        }
    }
}

/// Plain triple loop, fixed i, j, k loop order, ascending-k f32 accumulation.
/// This is the correctness oracle for the blocked kernels.
pub fn gemm_naive(a: &Matrix, b: &Matrix, mode: TransposeMode) -> Result<Matrix> {
    let (m, n, k) = check_shapes(a, b, mode)?;
    let mut c = Matrix::zeros(m, n)?;
    match mode {
        TransposeMode::NN => {
            for i in 0..m {
                let a_row = a.row(i);
                for j in 0..n {
                    let mut acc = 0.0f32;
                    for p in 0..k {
                        acc += a_row[p] * b.get(p, j);
                    }
                    c.set(i, j, acc);
                }
            }
        }
        TransposeMode::NT => {
            for i in 0..m {
                let a_row = a.row(i);
                for j in 0..n {
                    let b_row = b.row(j);
                    let mut acc = 0.0f32;
                    for p in 0..k {
                        acc += a_row[p] * b_row[p];
                    }
                    c.set(i, j, acc);
                }
            }
        }
    }
    Ok(c)
}

/// Raw output pointer that can cross a scoped-thread boundary. Workers write
/// disjoint (i, j) blocks, which is what makes the aliasing sound.
#[derive(Clone, Copy)]
struct OutPtr(*mut f32);
unsafe impl Send for OutPtr {}
unsafe impl Sync for OutPtr {}

/// One p-panel of one owned output block, NN form.
///
/// i outer, k middle, j inner: B is read row-wise along n (unit stride) and
/// every C(i,j) still accumulates in ascending-k order.
#[inline]
unsafe fn panel_nn(
    a: &Matrix,
    b: &Matrix,
    c: OutPtr,
    n: usize,
    (i0, i1): (usize, usize),
    (j0, j1): (usize, usize),
    (p0, p1): (usize, usize),
) {
    for i in i0..i1 {
        let a_row = a.row(i);
        let c_row = std::slice::from_raw_parts_mut(c.0.add(i * n + j0), j1 - j0);
        for p in p0..p1 {
            let aik = a_row[p];
            let b_row = &b.row(p)[j0..j1];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += aik * bv;
            }
        }
    }
}

/// One p-panel of one owned output block, NT form.
///
/// Both operands are read with unit stride along k; the reduction stays a
/// scalar ascending-k loop to keep the accumulation-order contract.
#[inline]
unsafe fn panel_nt(
    a: &Matrix,
    b: &Matrix,
    c: OutPtr,
    n: usize,
    (i0, i1): (usize, usize),
    (j0, j1): (usize, usize),
    (p0, p1): (usize, usize),
) {
    for i in i0..i1 {
        let a_row = &a.row(i)[p0..p1];
        let c_row = std::slice::from_raw_parts_mut(c.0.add(i * n + j0), j1 - j0);
        for (j, cv) in (j0..j1).zip(c_row.iter_mut()) {
            let b_row = &b.row(j)[p0..p1];
            let mut acc = *cv;
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *cv = acc;
        }
    }
}

/// Runs every p-step for the blocks a worker owns: p outermost, then the
/// owned (i, j) grid cells.
#[allow(clippy::too_many_arguments)]
fn run_worker(
    a: &Matrix,
    b: &Matrix,
    mode: TransposeMode,
    params: PartitionParams,
    c: OutPtr,
    (m, n, k): (usize, usize, usize),
    n_blocks: usize,
    owned: &[usize],
) {
    let PartitionParams { bm, bn, bk } = params;
    let mut p0 = 0;
    while p0 < k {
        let p1 = (p0 + bk).min(k);
        for &idx in owned {
            let bi = idx / n_blocks;
            let bj = idx % n_blocks;
            let i0 = bi * bm;
            let i1 = (i0 + bm).min(m);
            let j0 = bj * bn;
            let j1 = (j0 + bn).min(n);
            unsafe {
                match mode {
                    TransposeMode::NN => panel_nn(a, b, c, n, (i0, i1), (j0, j1), (p0, p1)),
                    TransposeMode::NT => panel_nt(a, b, c, n, (i0, i1), (j0, j1), (p0, p1)),
                }
            }
        }
        p0 = p1;
    }
}

/// Blocked multiply with explicit partition parameters and a worker count.
///
/// Output blocks are dealt round-robin to workers, so the result is
/// bitwise-identical for the same inputs and params across any thread count.
pub fn gemm_blocked(
    a: &Matrix,
    b: &Matrix,
    mode: TransposeMode,
    params: PartitionParams,
    threads: usize,
) -> Result<Matrix> {
    if threads == 0 {
        return Err(invalid("threads must be >= 1"));
    }
    params.validate()?;
    let (m, n, k) = check_shapes(a, b, mode)?;
    let mut c = Matrix::zeros(m, n)?;
    let out = OutPtr(c.as_mut_slice().as_mut_ptr());

    let m_blocks = m.div_ceil(params.bm);
    let n_blocks = n.div_ceil(params.bn);
    let total = m_blocks * n_blocks;
    let workers = threads.min(total).max(1);

    if workers == 1 {
        let owned: Vec<usize> = (0..total).collect();
        run_worker(a, b, mode, params, out, (m, n, k), n_blocks, &owned);
    } else {
        let ownership: Vec<Vec<usize>> = (0..workers)
            .map(|w| (0..total).filter(|idx| idx % workers == w).collect())
            .collect();
        std::thread::scope(|s| {
            for owned in &ownership {
                s.spawn(move || {
                    run_worker(a, b, mode, params, out, (m, n, k), n_blocks, owned);
                });
            }
        });
    }
    Ok(c)
}

/// Batched multiply: element i equals `gemm_blocked` on task i. Batch-level
/// parallelism distributes whole tasks across workers; each task runs the
/// single-thread kernel so results match the single-task path bitwise.
pub fn gemm_batched(
    tasks: &[GemmTask],
    params: PartitionParams,
    threads: usize,
) -> Result<Vec<Matrix>> {
    if threads == 0 {
        return Err(invalid("threads must be >= 1"));
    }
    params.validate()?;
    for (i, t) in tasks.iter().enumerate() {
        check_shapes(&t.a, &t.b, t.mode)
            .map_err(|e| invalid(format!("task {i}: {e}")))?;
    }
    if tasks.is_empty() {
        return Ok(Vec::new());
    }

    let workers = threads.min(tasks.len());
    if workers == 1 {
        return tasks
            .iter()
            .map(|t| gemm_blocked(&t.a, &t.b, t.mode, params, 1))
            .collect();
    }

    let mut slots: Vec<Option<Matrix>> = vec![None; tasks.len()];
    std::thread::scope(|s| -> Result<()> {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || -> Result<Vec<(usize, Matrix)>> {
                    tasks
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, t)| Ok((i, gemm_blocked(&t.a, &t.b, t.mode, params, 1)?)))
                        .collect()
                })
            })
            .collect();
        for h in handles {
            for (i, c) in h.join().expect("gemm worker panicked")? {
                slots[i] = Some(c);
            }
        }
        Ok(())
    })?;
    Ok(slots.into_iter().map(|s| s.expect("task not computed")).collect())
}
