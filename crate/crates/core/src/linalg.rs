//! Dense kernels shared by the state, measurement and collision code.
//!
//! Buffers are row-major `C64` slices unless stated otherwise. Products go
//! through `matrixmultiply`'s complex gemm.

use nalgebra::DMatrix;

use crate::C64;

fn as_raw(x: &[C64]) -> *const [f64; 2] {
    x.as_ptr().cast()
}

fn as_raw_mut(x: &mut [C64]) -> *mut [f64; 2] {
    x.as_mut_ptr().cast()
}

fn max_offset(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs
    }
}

/// A strided read-only matrix view.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [C64],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> View<'a> {
    pub fn row_major(data: &'a [C64], rows: usize, cols: usize) -> Self {
        Self { data, rows, cols, rs: cols, cs: 1 }
    }

    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            assert!(max_offset(self.rows, self.cols, self.rs, self.cs) < self.data.len());
        }
    }
}

/// `c ← alpha·a·b + beta·c`, with `c` row-major `a.rows × b.cols`.
pub(crate) fn gemm(alpha: C64, a: View<'_>, b: View<'_>, beta: C64, c: &mut [C64]) {
    assert_eq!(a.cols, b.rows);
    a.check();
    b.check();
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: every access stays within the asserted extents of the slices,
    // and C64 is layout-compatible with [f64; 2].
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            as_raw(a.data),
            a.rs as isize,
            a.cs as isize,
            as_raw(b.data),
            b.rs as isize,
            b.cs as isize,
            [beta.re, beta.im],
            as_raw_mut(c),
            n as isize,
            1,
        );
    }
}

/// `out += weight · M M†` for a row-major `rows × cols` block `m`; `out` is
/// row-major `rows × rows`.
pub(crate) fn add_gram(m: &[C64], rows: usize, cols: usize, weight: f64, out: &mut [C64]) {
    assert_eq!(m.len(), rows * cols);
    let conj: Vec<C64> = m.iter().map(|z| z.conj()).collect();
    // M† viewed through the conjugated copy: element (c, r) at r*cols + c.
    let adj = View { data: &conj, rows: cols, cols: rows, rs: 1, cs: cols };
    gemm(
        C64::new(weight, 0.0),
        View::row_major(m, rows, cols),
        adj,
        C64::new(1.0, 0.0),
        out,
    );
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub(crate) fn symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors =
        DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
        let mut c = vec![C64::new(0.0, 0.0); m * n];
        for i in 0..m {
            for j in 0..n {
                for l in 0..k {
                    c[i * n + j] += a[i * k + l] * b[l * n + j];
                }
            }
        }
        c
    }

    fn sample(len: usize, salt: f64) -> Vec<C64> {
        (0..len)
            .map(|i| C64::new((i as f64 * 0.37 + salt).sin(), (i as f64 * 0.91 - salt).cos()))
            .collect()
    }

    #[test]
    fn gemm_matches_triple_loop() {
        let (m, k, n) = (5, 7, 3);
        let a = sample(m * k, 0.1);
        let b = sample(k * n, 0.7);
        let mut c = vec![C64::new(0.0, 0.0); m * n];
        gemm(
            C64::new(1.0, 0.0),
            View::row_major(&a, m, k),
            View::row_major(&b, k, n),
            C64::new(0.0, 0.0),
            &mut c,
        );
        for (x, y) in c.iter().zip(naive(&a, &b, m, k, n)) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn gram_is_hermitian_product() {
        let (rows, cols) = (4, 6);
        let m = sample(rows * cols, 0.3);
        let mut out = vec![C64::new(0.0, 0.0); rows * rows];
        add_gram(&m, rows, cols, 0.5, &mut out);
        for r in 0..rows {
            for s in 0..rows {
                let mut want = C64::new(0.0, 0.0);
                for c in 0..cols {
                    want += m[r * cols + c] * m[s * cols + c].conj();
                }
                assert!((out[r * rows + s] - 0.5 * want).norm() < 1e-13);
            }
        }
    }
}
