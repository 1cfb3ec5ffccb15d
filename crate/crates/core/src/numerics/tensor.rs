use crate::error::{PinError, Result};

/// Row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor2 { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(PinError::shape(format!(
                "buffer of length {} cannot be viewed as {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(PinError::shape("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor2 { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor2 { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn same_shape(&self, other: &Tensor2) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_shape(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if self.shape() != (rows, cols) {
            return Err(PinError::shape(format!(
                "{what}: expected {rows}x{cols}, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2 {
        Tensor2 { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        self.map(|v| v * s)
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Tensor2, s: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(PinError::shape("add_scaled operands differ in shape"));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Selects the given rows, in order, into a new tensor.
    pub fn gather_rows(&self, idx: &[usize]) -> Tensor2 {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor2 { rows: idx.len(), cols: self.cols, data }
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn hconcat(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
        if a.rows != b.rows {
            return Err(PinError::shape(format!(
                "cannot concatenate {} rows with {} rows",
                a.rows, b.rows
            )));
        }
        let cols = a.cols + b.cols;
        let mut data = Vec::with_capacity(a.rows * cols);
        for i in 0..a.rows {
            data.extend_from_slice(a.row(i));
            data.extend_from_slice(b.row(i));
        }
        Ok(Tensor2 { rows: a.rows, cols, data })
    }

    /// Inverse of [`Tensor2::hconcat`]: splits off the first `at` columns.
    pub fn split_cols(&self, at: usize) -> (Tensor2, Tensor2) {
        assert!(at <= self.cols);
        let rc = self.cols - at;
        let mut left = Vec::with_capacity(self.rows * at);
        let mut right = Vec::with_capacity(self.rows * rc);
        for i in 0..self.rows {
            let r = self.row(i);
            left.extend_from_slice(&r[..at]);
            right.extend_from_slice(&r[at..]);
        }
        (
            Tensor2 { rows: self.rows, cols: at, data: left },
            Tensor2 { rows: self.rows, cols: rc, data: right },
        )
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    /// `self · otherᵀ`; `self` is n×k, `other` is m×k.
    pub fn matmul_t(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.cols != other.cols {
            return Err(PinError::shape(format!(
                "matmul_t: inner dimensions {} and {} differ",
                self.cols, other.cols
            )));
        }
        let mut out = Tensor2::zeros(self.rows, other.rows);
        gemm(
            self.rows, self.cols, other.rows,
            &self.data, (self.cols as isize, 1),
            &other.data, (1, other.cols as isize),
            0.0, &mut out.data, (other.rows as isize, 1),
        );
        Ok(out)
    }

    /// `self · other`; `self` is n×k, `other` is k×m.
    pub fn matmul(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.cols != other.rows {
            return Err(PinError::shape(format!(
                "matmul: inner dimensions {} and {} differ",
                self.cols, other.rows
            )));
        }
        let mut out = Tensor2::zeros(self.rows, other.cols);
        gemm(
            self.rows, self.cols, other.cols,
            &self.data, (self.cols as isize, 1),
            &other.data, (other.cols as isize, 1),
            0.0, &mut out.data, (other.cols as isize, 1),
        );
        Ok(out)
    }

    /// `selfᵀ · other`, accumulated into `acc` (k×m += (n×k)ᵀ · n×m).
    pub fn t_matmul_acc(&self, other: &Tensor2, acc: &mut [f64]) -> Result<()> {
        if self.rows != other.rows || acc.len() != self.cols * other.cols {
            return Err(PinError::shape("t_matmul_acc: incompatible operands"));
        }
        gemm(
            self.cols, self.rows, other.cols,
            &self.data, (1, self.cols as isize),
            &other.data, (other.cols as isize, 1),
            1.0, acc, (other.cols as isize, 1),
        );
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (isize, isize),
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    // SAFETY: strides describe dense row-major buffers whose lengths were
    // checked by the callers above.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), rsa, csa,
            b.as_ptr(), rsb, csb,
            beta, c.as_mut_ptr(), rsc, csc,
        );
    }
}

/// `Y = X·Wᵀ + b`, with `b` broadcast over rows.
pub fn affine_forward(w: &Tensor2, b: &[f64], x: &Tensor2) -> Result<Tensor2> {
    if x.cols() != w.cols() {
        return Err(PinError::shape(format!(
            "affine: input width {} does not match weight width {}",
            x.cols(),
            w.cols()
        )));
    }
    if b.len() != w.rows() {
        return Err(PinError::shape("affine: bias length differs from output width"));
    }
    let mut y = x.matmul_t(w)?;
    for i in 0..y.rows() {
        for (v, bj) in y.row_mut(i).iter_mut().zip(b) {
            *v += bj;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn naive_matmul_t(x: &Tensor2, w: &Tensor2) -> Tensor2 {
        Tensor2::from_fn(x.rows(), w.rows(), |i, j| {
            let mut s = 0.0;
            for k in 0..x.cols() {
                s += x.get(i, k) * w.get(j, k);
            }
            s
        })
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Tensor2 {
        let mut rng = crate::rng::seeded(seed);
        Tensor2::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_affine_is_noop() {
        let x = random(4, 3, 1);
        let y = affine_forward(&Tensor2::identity(3), &[0.0; 3], &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn scalar_affine() {
        let w = Tensor2::from_rows(&[[2.0]]).unwrap();
        let x = Tensor2::from_rows(&[[4.0]]).unwrap();
        let y = affine_forward(&w, &[3.0], &x).unwrap();
        assert_eq!(y.data(), &[11.0]);
    }

    #[test]
    fn affine_matches_triple_loop() {
        let x = random(3, 5, 2);
        let w = random(2, 5, 3);
        let b = [0.25, -0.5];
        let y = affine_forward(&w, &b, &x).unwrap();
        let mut expect = naive_matmul_t(&x, &w);
        for i in 0..3 {
            for j in 0..2 {
                expect.set(i, j, expect.get(i, j) + b[j]);
            }
        }
        for (a, e) in y.data().iter().zip(expect.data()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_rejects_bad_shapes() {
        let x = random(3, 4, 2);
        let w = random(2, 5, 3);
        assert!(matches!(affine_forward(&w, &[0.0, 0.0], &x), Err(PinError::Shape(_))));
    }

    #[test]
    fn transposed_products_match_naive() {
        let a = random(7, 4, 5);
        let b = random(7, 3, 6);
        let mut acc = vec![1.0; 12];
        a.t_matmul_acc(&b, &mut acc).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let mut s = 1.0;
                for r in 0..7 {
                    s += a.get(r, i) * b.get(r, j);
                }
                assert!((acc[i * 3 + j] - s).abs() < 1e-12);
            }
        }
        let c = random(4, 6, 7);
        let p = a.matmul(&c).unwrap();
        for i in 0..7 {
            for j in 0..6 {
                let s: f64 = (0..4).map(|k| a.get(i, k) * c.get(k, j)).sum();
                assert!((p.get(i, j) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn concat_split_roundtrip() {
        let a = random(5, 2, 8);
        let b = random(5, 3, 9);
        let c = Tensor2::hconcat(&a, &b).unwrap();
        let (l, r) = c.split_cols(2);
        assert_eq!(l, a);
        assert_eq!(r, b);
        assert!(Tensor2::hconcat(&a, &random(4, 3, 1)).is_err());
    }
}
