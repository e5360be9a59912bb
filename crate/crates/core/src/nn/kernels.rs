//! Elementwise and normalization kernels for the encoder forward pass.

use crate::error::{invalid, Result};
use crate::tensor::Matrix;

/// Row-wise softmax with max-subtraction for overflow safety.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    out
}

/// Per-row gamma/beta scale and shift around the normalized value.
#[derive(Debug, Clone)]
pub struct LayerNormParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub eps: f32,
}

impl LayerNormParams {
    /// gamma = 1, beta = 0.
    pub fn identity(dim: usize, eps: f32) -> Self {
        Self { gamma: vec![1.0; dim], beta: vec![0.0; dim], eps }
    }
}

/// Row-wise (x - mean) / sqrt(var + eps) * gamma + beta, population variance.
pub fn layer_norm(m: &Matrix, p: &LayerNormParams) -> Result<Matrix> {
    if m.cols() != p.gamma.len() || m.cols() != p.beta.len() {
        return Err(invalid(format!(
            "layer_norm dim mismatch: matrix cols {} vs gamma {} / beta {}",
            m.cols(),
            p.gamma.len(),
            p.beta.len()
        )));
    }
    let mut out = m.clone();
    let n = m.cols() as f32;
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let mean = row.iter().sum::<f32>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
        let inv_std = 1.0 / (var + p.eps).sqrt();
        for ((v, &g), &b) in row.iter_mut().zip(&p.gamma).zip(&p.beta) {
            *v = (*v - mean) * inv_std * g + b;
        }
    }
    Ok(out)
}

/// Exact-erf gelu: x * Phi(x) with Phi the standard normal CDF.
#[inline]
pub fn gelu_scalar(x: f32) -> f32 {
    let xf = x as f64;
    (xf * 0.5 * (1.0 + libm::erf(xf / std::f64::consts::SQRT_2))) as f32
}

pub fn gelu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for v in out.as_mut_slice() {
        *v = gelu_scalar(*v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{random_matrix, Rng};

    #[test]
    fn softmax_symmetry_and_overflow() {
        let m = Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        let s = softmax_rows(&m);
        assert_eq!(s.get(0, 0), 0.5);
        assert_eq!(s.get(0, 1), 0.5);

        let m = Matrix::from_vec(1, 2, vec![1000.0, 1000.0]).unwrap();
        let s = softmax_rows(&m);
        assert_eq!(s.get(0, 0), 0.5);
        assert!(s.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_hand_case() {
        let m = Matrix::from_vec(1, 2, vec![0.0, 3.0f32.ln()]).unwrap();
        let s = softmax_rows(&m);
        assert!((s.get(0, 0) - 0.25).abs() < 1e-6);
        assert!((s.get(0, 1) - 0.75).abs() < 1e-6);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = random_matrix(13, 37, &mut Rng::new(5)).unwrap();
        let s = softmax_rows(&m);
        for i in 0..s.rows() {
            let sum: f32 = s.row(i).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-5, "row {i} sums to {sum}");
            assert!(s.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn layer_norm_constant_row() {
        let m = Matrix::from_vec(1, 4, vec![3.0; 4]).unwrap();
        let p = LayerNormParams::identity(4, 1e-12);
        let out = layer_norm(&m, &p).unwrap();
        assert!(out.as_slice().iter().all(|&v| v.abs() < 1e-5));
    }

    #[test]
    fn layer_norm_hand_case() {
        let m = Matrix::from_vec(1, 2, vec![1.0, 3.0]).unwrap();
        let p = LayerNormParams::identity(2, 1e-12);
        let out = layer_norm(&m, &p).unwrap();
        assert!((out.get(0, 0) + 1.0).abs() < 1e-3);
        assert!((out.get(0, 1) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn layer_norm_normalizes_mean_and_variance() {
        let m = random_matrix(5, 64, &mut Rng::new(17)).unwrap();
        let p = LayerNormParams::identity(64, 1e-12);
        let out = layer_norm(&m, &p).unwrap();
        for i in 0..out.rows() {
            let row = out.row(i);
            let mean: f32 = row.iter().sum::<f32>() / 64.0;
            let var: f32 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / 64.0;
            assert!(mean.abs() <= 1e-5);
            assert!((var - 1.0).abs() <= 1e-3);
        }
    }

    #[test]
    fn layer_norm_dim_mismatch() {
        let m = Matrix::zeros(1, 3).unwrap();
        let p = LayerNormParams::identity(4, 1e-12);
        assert!(layer_norm(&m, &p).is_err());
    }

    #[test]
    fn gelu_limits() {
        assert_eq!(gelu_scalar(0.0), 0.0);
        assert!((gelu_scalar(10.0) - 10.0).abs() < 1e-4);
        assert!(gelu_scalar(-10.0).abs() < 1e-4);
        // 1 * Phi(1)
        assert!((gelu_scalar(1.0) - 0.841345).abs() < 1e-4);
    }
}
