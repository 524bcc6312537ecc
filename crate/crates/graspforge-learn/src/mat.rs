//! Dense row-major f64 matrices with the three matmul variants the tape
//! needs. The kernels keep the innermost loop contiguous so LLVM can
//! vectorize them; training throughput lives and dies here.

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Mat {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transposed(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self (r x k) * b (k x c)`.
    pub fn matmul(&self, b: &Mat) -> Mat {
        assert_eq!(self.cols, b.rows, "matmul inner dims");
        let (r, k, c) = (self.rows, self.cols, b.cols);
        let mut out = Mat::zeros(r, c);
        for i in 0..r {
            let a_row = &self.data[i * k..(i + 1) * k];
            let out_row = &mut out.data[i * c..(i + 1) * c];
            // Two k-steps per pass halves the out_row traffic; the inner
            // zip keeps the loop free of bounds checks so it vectorizes.
            let mut kk = 0;
            while kk + 1 < k {
                let a0 = a_row[kk];
                let a1 = a_row[kk + 1];
                let b0 = &b.data[kk * c..(kk + 1) * c];
                let b1 = &b.data[(kk + 1) * c..(kk + 2) * c];
                for ((o, &x0), &x1) in out_row.iter_mut().zip(b0).zip(b1) {
                    *o += a0 * x0 + a1 * x1;
                }
                kk += 2;
            }
            if kk < k {
                let a0 = a_row[kk];
                let b0 = &b.data[kk * c..(kk + 1) * c];
                for (o, &x0) in out_row.iter_mut().zip(b0) {
                    *o += a0 * x0;
                }
            }
        }
        out
    }

    /// `self (r x c) * b^T (k x c) -> (r x k)`; used for `dX = dY * W^T`.
    /// The explicit transpose is cheap next to the multiply and lets the
    /// contiguous kernel do the work.
    pub fn matmul_transposed(&self, b: &Mat) -> Mat {
        assert_eq!(self.cols, b.cols, "matmul_transposed inner dims");
        self.matmul(&b.transposed())
    }

    /// `self^T (r x k) * b (r x c) -> (k x c)`; used for `dW = X^T * dY`.
    pub fn transposed_matmul(&self, b: &Mat) -> Mat {
        assert_eq!(self.rows, b.rows, "transposed_matmul inner dims");
        let (r, k, c) = (self.rows, self.cols, b.cols);
        let mut out = Mat::zeros(k, c);
        let mut i = 0;
        while i + 1 < r {
            let a0_row = &self.data[i * k..(i + 1) * k];
            let a1_row = &self.data[(i + 1) * k..(i + 2) * k];
            let b0_row = &b.data[i * c..(i + 1) * c];
            let b1_row = &b.data[(i + 1) * c..(i + 2) * c];
            for j in 0..k {
                let a0 = a0_row[j];
                let a1 = a1_row[j];
                let out_row = &mut out.data[j * c..(j + 1) * c];
                for ((o, &x0), &x1) in out_row.iter_mut().zip(b0_row).zip(b1_row) {
                    *o += a0 * x0 + a1 * x1;
                }
            }
            i += 2;
        }
        if i < r {
            let a_row = &self.data[i * k..(i + 1) * k];
            let b_row = &b.data[i * c..(i + 1) * c];
            for (j, &aij) in a_row.iter().enumerate() {
                let out_row = &mut out.data[j * c..(j + 1) * c];
                for (o, &x0) in out_row.iter_mut().zip(b_row) {
                    *o += aij * x0;
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_assign(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }
}

/// Row-wise softmax (inference helper; training uses the fused CE op).
pub fn softmax_rows(logits: &Mat) -> Mat {
    let mut out = Mat::zeros(logits.rows, logits.cols);
    for i in 0..logits.rows {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for j in 0..logits.cols {
            let e = (row[j] - max).exp();
            out.set(i, j, e);
            denom += e;
        }
        for j in 0..logits.cols {
            let v = out.get(i, j) / denom;
            out.set(i, j, v);
        }
    }
    out
}
