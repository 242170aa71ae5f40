//! Dense row-major `f64` tensors and the few matrix kernels the trainer needs.
//!
//! All reductions accumulate sequentially, left to right, so results are
//! reproducible bit for bit on a single thread.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) || shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape {
                shape,
                len: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::filled(shape, 1.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Builds a matrix from rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::Dimension {
                    op: "from_rows",
                    left: vec![cols],
                    right: vec![row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a matrix; 1 for a vector.
    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn get2(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() || shape.contains(&0) {
            return Err(Error::Shape {
                shape,
                len: self.data.len(),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += scale * other`, elementwise.
    pub fn axpy(&mut self, scale: f64, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, &x| acc + x)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Result<Self> {
        let (m, n) = self.matrix_dims("transpose")?;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Self {
            shape: vec![n, m],
            data: out,
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.matrix_dims("matmul")?;
        let (k2, n) = other.matrix_dims("matmul")?;
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(&self.data, &other.data, &mut out, m, k, n);
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.matrix_dims("t_matmul")?;
        let (m2, n) = other.matrix_dims("t_matmul")?;
        if m != m2 {
            return Err(Error::Dimension {
                op: "t_matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; k * n];
        // out[p, :] += a[r, p] * b[r, :] for r in order; four rows of `b` per
        // pass, added left to right, keep the per-element order unchanged.
        let mut r = 0;
        while r + 4 <= m {
            let b0 = &other.data[r * n..(r + 1) * n];
            let b1 = &other.data[(r + 1) * n..(r + 2) * n];
            let b2 = &other.data[(r + 2) * n..(r + 3) * n];
            let b3 = &other.data[(r + 3) * n..(r + 4) * n];
            for p in 0..k {
                let a0 = self.data[r * k + p];
                let a1 = self.data[(r + 1) * k + p];
                let a2 = self.data[(r + 2) * k + p];
                let a3 = self.data[(r + 3) * k + p];
                let o = &mut out[p * n..(p + 1) * n];
                for j in 0..n {
                    o[j] = o[j] + a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
                }
            }
            r += 4;
        }
        for r in r..m {
            let a_row = &self.data[r * k..(r + 1) * k];
            let b_row = &other.data[r * n..(r + 1) * n];
            for (p, &a) in a_row.iter().enumerate() {
                let o = &mut out[p * n..(p + 1) * n];
                for (x, &b) in o.iter_mut().zip(b_row) {
                    *x += a * b;
                }
            }
        }
        Ok(Self {
            shape: vec![k, n],
            data: out,
        })
    }

    /// Column sums of a matrix.
    pub fn sum_rows(&self) -> Result<Self> {
        let (m, n) = self.matrix_dims("sum_rows")?;
        let mut out = vec![0.0; n];
        for i in 0..m {
            for (o, &x) in out.iter_mut().zip(&self.data[i * n..(i + 1) * n]) {
                *o += x;
            }
        }
        Ok(Self::vector(out))
    }

    pub(crate) fn matrix_dims(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[m, n] => Ok((m, n)),
            other => Err(Error::Dimension {
                op,
                left: other.to_vec(),
                right: vec![0, 0],
            }),
        }
    }
}

/// `out += a · b` for row-major `a: m×k`, `b: k×n`.
///
/// i-k-j loop order: every output element accumulates its k terms in order,
/// while the innermost loop runs over independent columns and vectorizes.
pub(crate) fn gemm_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let o = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        // Four terms per pass, added left to right: same order as one at a time.
        let mut p = 0;
        while p + 4 <= k {
            let (a0, a1, a2, a3) = (a_row[p], a_row[p + 1], a_row[p + 2], a_row[p + 3]);
            let b0 = &b[p * n..(p + 1) * n];
            let b1 = &b[(p + 1) * n..(p + 2) * n];
            let b2 = &b[(p + 2) * n..(p + 3) * n];
            let b3 = &b[(p + 3) * n..(p + 4) * n];
            for j in 0..n {
                o[j] = o[j] + a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
            p += 4;
        }
        for p in p..k {
            let av = a_row[p];
            for (x, &bv) in o.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *x += av * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn hand_matmul() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    #[test]
    fn identity_matmul() {
        let m = Tensor::new(vec![3, 3], (0..9).map(|x| x as f64 * 0.7 - 2.0).collect()).unwrap();
        assert_eq!(Tensor::identity(3).matmul(&m).unwrap(), m);
    }

    #[test]
    fn t_matmul_matches_explicit_transpose() {
        let a = Tensor::new(vec![3, 2], vec![1.0, -2.0, 0.5, 4.0, 3.0, 1.5]).unwrap();
        let b = Tensor::new(vec![3, 4], (0..12).map(|x| x as f64 - 5.0).collect()).unwrap();
        let want = a.transpose().unwrap().matmul(&b).unwrap();
        assert_eq!(a.t_matmul(&b).unwrap(), want);
    }

    #[test]
    fn kernels_keep_sequential_order() {
        let (m, k, n) = (7, 11, 5);
        let a: Vec<f64> = (0..m * k).map(|i| ((i * 37 % 17) as f64 - 8.0) / 3.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| ((i * 13 % 11) as f64 - 5.0) / 7.0).collect();
        let ta = Tensor::new(vec![m, k], a.clone()).unwrap();
        let tb = Tensor::new(vec![k, n], b.clone()).unwrap();
        let c = ta.matmul(&tb).unwrap();
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a[i * k + p] * b[p * n + j];
                }
                assert_eq!(c.get2(i, j).to_bits(), acc.to_bits());
            }
        }
        let g = Tensor::new(vec![m, n], (0..m * n).map(|i| (i as f64).sin()).collect()).unwrap();
        let atg = ta.t_matmul(&g).unwrap();
        for p in 0..k {
            for j in 0..n {
                let mut acc = 0.0;
                for r in 0..m {
                    acc += a[r * k + p] * g.get2(r, j);
                }
                assert_eq!(atg.get2(p, j).to_bits(), acc.to_bits());
            }
        }
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }
}
