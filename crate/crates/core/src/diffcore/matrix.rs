use std::fmt;

/// Dense row-major `f64` matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Rows `start..start + count` as a new matrix.
    pub fn row_block(&self, start: usize, count: usize) -> Matrix {
        Matrix::from_vec(
            count,
            self.cols,
            self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        )
    }
}

/// `out = beta * out + a(^T) * b(^T)` with `a` of logical shape `m x k` and
/// `b` of logical shape `k x n`. Row blocks of `b` may be selected with
/// `b_row_offset` when `b` is not transposed.
pub(crate) struct Gemm<'a> {
    pub a: &'a [f64],
    pub a_cols: usize,
    pub a_t: bool,
    pub b: &'a [f64],
    pub b_cols: usize,
    pub b_t: bool,
}

impl Gemm<'_> {
    pub(crate) fn run(&self, m: usize, k: usize, n: usize, beta: f64, out: &mut [f64]) {
        assert_eq!(out.len(), m * n);
        if m == 0 || n == 0 {
            return;
        }
        if k == 0 {
            if beta == 0.0 {
                out.iter_mut().for_each(|x| *x = 0.0);
            } else {
                out.iter_mut().for_each(|x| *x *= beta);
            }
            return;
        }
        let (rsa, csa) = if self.a_t {
            (1, self.a_cols as isize)
        } else {
            (self.a_cols as isize, 1)
        };
        let (rsb, csb) = if self.b_t {
            (1, self.b_cols as isize)
        } else {
            (self.b_cols as isize, 1)
        };
        debug_assert!(self.a.len() >= if self.a_t { k * self.a_cols } else { m * self.a_cols });
        // SAFETY: strides and extents describe sub-blocks of the borrowed slices
        // (checked by the callers' shape assertions above).
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.a.as_ptr(),
                rsa,
                csa,
                self.b.as_ptr(),
                rsb,
                csb,
                beta,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

/// Plain matrix product `a * b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.rows, "matmul inner dimension mismatch");
    let mut out = Matrix::zeros(a.rows, b.cols);
    Gemm {
        a: &a.data,
        a_cols: a.cols,
        a_t: false,
        b: &b.data,
        b_cols: b.cols,
        b_t: false,
    }
    .run(a.rows, a.cols, b.cols, 0.0, &mut out.data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let b = Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.5, 1.0, -1.0]]);
        let c = matmul(&a, &b);
        assert_eq!(
            c.as_slice(),
            &[2.0, 2.0, 0.0, 5.0, 4.0, 2.0, 8.0, 6.0, 4.0]
        );
    }

    #[test]
    fn transposed_gemm() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        // a^T a
        let mut out = vec![0.0; 4];
        Gemm {
            a: a.as_slice(),
            a_cols: 2,
            a_t: true,
            b: a.as_slice(),
            b_cols: 2,
            b_t: false,
        }
        .run(2, 3, 2, 0.0, &mut out);
        assert_eq!(out, vec![35.0, 44.0, 44.0, 56.0]);
    }
}
