//! Dense row-major f32 matrices plus the seeded RNG used to generate
//! synthetic weights and activations.

use crate::error::{invalid, Result};

/// Dense 2-D array of f32 in row-major order.
///
/// Element (i, j) lives at linear index `i * cols + j`. Values are immutable
/// once constructed, so a `Matrix` can be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("matrix dimensions must be >= 1, got {rows}x{cols}")));
        }
        Ok(Self { rows, cols, data: vec![0.0; rows * cols] })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("matrix dimensions must be >= 1, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(invalid(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(invalid("ragged row lengths"));
        }
        Self::from_vec(r, c, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a contiguous slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.cols;
        &self.data[i * c..(i + 1) * c]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Materializes the transpose as a new matrix (no views); the NN and NT
    /// GEMM paths must see genuinely different memory layouts.
    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0f32; self.rows * self.cols];
        for i in 0..self.rows {
            let src = self.row(i);
            for (j, &v) in src.iter().enumerate() {
                out[j * self.rows + i] = v;
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data: out }
    }

    /// True when shapes and all bits agree.
    pub fn bitwise_eq(&self, other: &Matrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// max over elements of |a-b| / max(|a|, |b|, 1e-6).
pub fn max_rel_err(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(invalid(format!(
            "shape mismatch: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut worst = 0.0f64;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        let denom = (x.abs() as f64).max(y.abs() as f64).max(1e-6);
        let e = (x as f64 - y as f64).abs() / denom;
        if e > worst {
            worst = e;
        }
    }
    Ok(worst)
}

/// Splittable 64-bit PRNG (splitmix64). Identical seed gives an identical
/// stream, which is what makes whole-model initialization reproducible.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [-0.5, 0.5) with 24 bits of mantissa.
    #[inline]
    pub fn next_f32(&mut self) -> f32 {
        ((self.next_u64() >> 40) as f32) * (1.0 / 16_777_216.0) - 0.5
    }

    /// Derives an independent generator; the parent stream advances by one.
    pub fn split(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }
}

/// Matrix filled with uniform values in [-0.5, 0.5).
pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(invalid(format!("matrix dimensions must be >= 1, got {rows}x{cols}")));
    }
    let data: Vec<f32> = (0..rows * cols).map(|_| rng.next_f32()).collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_matrix_rejects_zero_dims() {
        let mut rng = Rng::new(1);
        assert!(random_matrix(0, 3, &mut rng).is_err());
        assert!(random_matrix(3, 0, &mut rng).is_err());
    }

    #[test]
    fn random_matrix_is_deterministic() {
        let a = random_matrix(1, 1, &mut Rng::new(7)).unwrap();
        let b = random_matrix(1, 1, &mut Rng::new(7)).unwrap();
        assert!(a.bitwise_eq(&b));

        let c = random_matrix(8, 768, &mut Rng::new(1)).unwrap();
        let d = random_matrix(8, 768, &mut Rng::new(1)).unwrap();
        assert!(c.bitwise_eq(&d));
    }

    #[test]
    fn random_matrix_range() {
        let m = random_matrix(8, 768, &mut Rng::new(1)).unwrap();
        assert!(m.as_slice().iter().all(|&v| (-0.5..0.5).contains(&v)));
    }

    // Record-once golden vector for the seeded generator; freezing it pins
    // the stream across refactors.
    #[test]
    fn random_matrix_golden_seed42() {
        let m = random_matrix(2, 3, &mut Rng::new(42)).unwrap();
        let expected: [f32; 6] = [
            0.24156487,
            -0.34008962,
            -0.22139889,
            -0.15580934,
            -0.46196985,
            0.36822802,
        ];
        for (got, want) in m.as_slice().iter().zip(expected.iter()) {
            assert_eq!(got.to_bits(), want.to_bits(), "got {got}, want {want}");
        }
    }

    #[test]
    fn transpose_basics() {
        let m = Matrix::from_vec(1, 1, vec![5.0]).unwrap();
        assert!(m.transpose().bitwise_eq(&m));

        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let t = m.transpose();
        assert_eq!((t.rows(), t.cols()), (3, 2));
        let want = Matrix::from_vec(3, 2, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]).unwrap();
        assert!(t.bitwise_eq(&want));
    }

    #[test]
    fn transpose_involution() {
        let m = random_matrix(17, 31, &mut Rng::new(99)).unwrap();
        assert!(m.transpose().transpose().bitwise_eq(&m));
    }

    #[test]
    fn max_rel_err_cases() {
        let m = random_matrix(4, 5, &mut Rng::new(3)).unwrap();
        assert_eq!(max_rel_err(&m, &m).unwrap(), 0.0);

        let a = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let b = Matrix::from_vec(1, 1, vec![1.001]).unwrap();
        let e = max_rel_err(&a, &b).unwrap();
        assert!((e - 0.000999).abs() < 1e-5, "e = {e}");

        let z = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
        assert_eq!(max_rel_err(&z, &z).unwrap(), 0.0);

        // symmetry
        assert_eq!(max_rel_err(&a, &b).unwrap(), max_rel_err(&b, &a).unwrap());

        let c = Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(max_rel_err(&a, &c).is_err());
    }
}
