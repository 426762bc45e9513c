use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Work below this many multiply-adds stays on the calling thread.
const PAR_THRESHOLD: usize = 1 << 15;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Stacks equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · otherᵀ` where `other` is stored row-major with matching
    /// column count. Every output entry is a single [`dot`], so a row's
    /// result does not depend on which other rows share the batch.
    pub fn mul_transposed(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: other.cols,
                actual: self.cols,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        if out.data.is_empty() {
            return Ok(out);
        }
        let fill = |(r, out_row): (usize, &mut [f64])| {
            let a = self.row(r);
            for (o, v) in out_row.iter_mut().enumerate() {
                *v = dot(a, other.row(o));
            }
        };
        if self.rows * other.rows * self.cols >= PAR_THRESHOLD {
            out.data
                .par_chunks_mut(other.rows)
                .enumerate()
                .for_each(fill);
        } else {
            out.data.chunks_mut(other.rows).enumerate().for_each(fill);
        }
        Ok(out)
    }

    /// `self · other` (n×m times m×k).
    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: other.rows,
                actual: self.cols,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        if out.data.is_empty() {
            return Ok(out);
        }
        let fill = |(r, out_row): (usize, &mut [f64])| {
            for (m, &coef) in self.row(r).iter().enumerate() {
                if coef != 0.0 {
                    axpy(coef, other.row(m), out_row);
                }
            }
        };
        if self.rows * self.cols * other.cols >= PAR_THRESHOLD {
            out.data
                .par_chunks_mut(other.cols)
                .enumerate()
                .for_each(fill);
        } else {
            out.data.chunks_mut(other.cols).enumerate().for_each(fill);
        }
        Ok(out)
    }

    /// `selfᵀ · other` (n×m transposed, times n×k) giving m×k.
    pub fn transposed_mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                expected: other.rows,
                actual: self.rows,
            });
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        if out.data.is_empty() {
            return Ok(out);
        }
        let fill = |(o, out_row): (usize, &mut [f64])| {
            for n in 0..self.rows {
                let coef = self.data[n * self.cols + o];
                if coef != 0.0 {
                    axpy(coef, other.row(n), out_row);
                }
            }
        };
        if self.rows * self.cols * other.cols >= PAR_THRESHOLD {
            out.data
                .par_chunks_mut(other.cols)
                .enumerate()
                .for_each(fill);
        } else {
            out.data.chunks_mut(other.cols).enumerate().for_each(fill);
        }
        Ok(out)
    }
}

/// Dot product with a fixed 4-way accumulation order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in tail_a.iter().zip(tail_b) {
        sum += x * y;
    }
    sum
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for j in 0..b.cols {
                let mut s = 0.0;
                for k in 0..a.cols {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.data[i * b.cols + j] = s;
            }
        }
        out
    }

    fn transpose(a: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.cols, a.rows);
        for i in 0..a.rows {
            for j in 0..a.cols {
                out.data[j * a.rows + i] = a.get(i, j);
            }
        }
        out
    }

    fn seq(rows: usize, cols: usize, phase: f64) -> Matrix {
        let data = (0..rows * cols)
            .map(|k| ((k as f64) * 0.37 + phase).sin())
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn products_match_naive() {
        let a = seq(7, 13, 0.1);
        let b = seq(13, 5, 0.7);
        let expect = naive(&a, &b);
        let close = |x: &Matrix, y: &Matrix| {
            x.rows == y.rows
                && x.cols == y.cols
                && x.data.iter().zip(&y.data).all(|(p, q)| (p - q).abs() < 1e-12)
        };
        assert!(close(&a.mul(&b).unwrap(), &expect));
        assert!(close(&a.mul_transposed(&transpose(&b)).unwrap(), &expect));
        assert!(close(&transpose(&a).transposed_mul(&b).unwrap(), &expect));
    }

    #[test]
    fn batch_rows_are_independent() {
        let w = seq(64, 300, 0.2);
        let batch = seq(40, 300, 1.3);
        let full = batch.mul_transposed(&w).unwrap();
        for r in [0, 17, 39] {
            let single = Matrix::from_rows(&[batch.row(r)]).unwrap();
            assert_eq!(single.mul_transposed(&w).unwrap().row(0), full.row(r));
        }
    }

    #[test]
    fn shape_errors() {
        let a = Matrix::zeros(2, 3);
        assert!(a.mul(&Matrix::zeros(2, 3)).is_err());
        assert!(a.mul_transposed(&Matrix::zeros(2, 2)).is_err());
        assert!(Matrix::from_vec(2, 2, vec![1.0]).is_err());
    }
}
