//! Compressed sparse row storage for the symmetric lattice operators.

use nalgebra::DMatrix;

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col[k])] = self.val[k];
            }
        }
        m
    }

    /// Largest row sum of absolute values (bounds the spectral radius).
    pub fn gershgorin_sup(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.val[k].abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Row-by-row builder; entries within a row must be pushed in column order.
pub struct CsrBuilder {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(n: usize, nnz_hint: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        CsrBuilder {
            n,
            row_ptr,
            col: Vec::with_capacity(nnz_hint),
            val: Vec::with_capacity(nnz_hint),
        }
    }

    pub fn push(&mut self, col: usize, val: f64) {
        debug_assert!(col < self.n);
        self.col.push(col);
        self.val.push(val);
    }

    pub fn finish_row(&mut self) {
        self.row_ptr.push(self.col.len());
    }

    pub fn rows_done(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn build(self) -> CsrMatrix {
        assert_eq!(self.row_ptr.len(), self.n + 1, "not all rows finished");
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr,
            col: self.col,
            val: self.val,
        }
    }
}
