use std::fmt;

use super::flops;
use crate::error::{shape_err, Error, Result};

/// Dense row-major matrix of `f64`.
///
/// Vectors are carried as single-column matrices; a batch of vectors is a
/// matrix with one column per batch element.
#[derive(Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor2[{}x{}]", self.rows, self.cols)?;
        if self.data.len() <= 16 {
            write!(f, "{:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot fill a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_col(&mut self, c: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (r, v) in values.iter().enumerate() {
            self.set(r, c, *v);
        }
    }

    pub fn transpose(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    fn same_shape(&self, other: &Tensor2, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return shape_err(op, self.shape(), other.shape());
        }
        Ok(())
    }

    /// Matrix product `a · b`.
    pub fn matmul(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
        if a.cols != b.rows {
            return shape_err("matmul", a.shape(), b.shape());
        }
        let (m, k, n) = (a.rows, a.cols, b.cols);
        let mut out = Tensor2::zeros(m, n);
        for i in 0..m {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            let a_row = &a.data[i * k..(i + 1) * k];
            for (p, &av) in a_row.iter().enumerate() {
                let b_row = &b.data[p * n..(p + 1) * n];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += av * bv;
                }
            }
        }
        flops::record(m * n * k, m * n * k.saturating_sub(1));
        Ok(out)
    }

    /// `aᵀ · b` without materializing the transpose.
    pub fn matmul_tn(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
        if a.rows != b.rows {
            return shape_err("matmul_tn", a.shape(), b.shape());
        }
        let (k, m, n) = (a.rows, a.cols, b.cols);
        let mut out = Tensor2::zeros(m, n);
        for p in 0..k {
            let a_row = &a.data[p * m..(p + 1) * m];
            let b_row = &b.data[p * n..(p + 1) * n];
            for (i, &av) in a_row.iter().enumerate() {
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += av * bv;
                }
            }
        }
        flops::record(m * n * k, m * n * k.saturating_sub(1));
        Ok(out)
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_nt(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
        if a.cols != b.cols {
            return shape_err("matmul_nt", a.shape(), b.shape());
        }
        let (m, k, n) = (a.rows, a.cols, b.rows);
        let mut out = Tensor2::zeros(m, n);
        for i in 0..m {
            let a_row = &a.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b_row = &b.data[j * k..(j + 1) * k];
                out.data[i * n + j] = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            }
        }
        flops::record(m * n * k, m * n * k.saturating_sub(1));
        Ok(out)
    }

    fn zip_with(&self, other: &Tensor2, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor2> {
        self.same_shape(other, op)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, other: &Tensor2) -> Result<Tensor2> {
        let out = self.zip_with(other, "add", |a, b| a + b)?;
        flops::record(0, out.len());
        Ok(out)
    }

    pub fn sub(&self, other: &Tensor2) -> Result<Tensor2> {
        let out = self.zip_with(other, "sub", |a, b| a - b)?;
        flops::record(0, out.len());
        Ok(out)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Tensor2) -> Result<Tensor2> {
        let out = self.zip_with(other, "hadamard", |a, b| a * b)?;
        flops::record(out.len(), 0);
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Tensor2) -> Result<()> {
        self.same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        flops::record(0, self.len());
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        flops::record(self.len(), 0);
        self.map(|v| v * s)
    }

    /// `1 - self`, elementwise.
    pub fn one_minus(&self) -> Tensor2 {
        flops::record(0, self.len());
        self.map(|v| 1.0 - v)
    }

    /// Adds a column vector to every column (bias broadcast).
    pub fn add_col(&self, bias: &Tensor2) -> Result<Tensor2> {
        if bias.cols != 1 || bias.rows != self.rows {
            return shape_err("add_col", self.shape(), bias.shape());
        }
        let mut out = self.clone();
        for r in 0..self.rows {
            let b = bias.data[r];
            for v in &mut out.data[r * self.cols..(r + 1) * self.cols] {
                *v += b;
            }
        }
        flops::record(0, self.len());
        Ok(out)
    }

    /// Sum over columns, giving a `rows x 1` vector.
    pub fn row_sums(&self) -> Tensor2 {
        let data = self
            .data
            .chunks(self.cols.max(1))
            .map(|row| row.iter().sum())
            .collect::<Vec<f64>>();
        Tensor2 {
            rows: self.rows,
            cols: 1,
            data: if self.cols == 0 { vec![0.0; self.rows] } else { data },
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2 {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    /// Columns `[start, start + n)` as a new matrix.
    pub fn cols_range(&self, start: usize, n: usize) -> Tensor2 {
        let mut out = Tensor2::zeros(self.rows, n);
        for r in 0..self.rows {
            out.data[r * n..(r + 1) * n]
                .copy_from_slice(&self.data[r * self.cols + start..r * self.cols + start + n]);
        }
        out
    }
}
