//! Lowest eigenpair of a sparse Hermitian operator by restarted Lanczos with
//! full reorthogonalization.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::spinops::{SparseOperator, StateVector};
use crate::C64;

/// Dimension at or below which the dense solver is used instead.
const DENSE_LIMIT: usize = 256;

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// Target for `‖Hv − Ev‖`.
    pub residual_tol: f64,
    /// Krylov basis size before a restart.
    pub max_basis: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { residual_tol: 1e-9, max_basis: 100, max_restarts: 60 }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Deterministic start vector with support on every basis state.
fn start_vector(dim: usize) -> Vec<C64> {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut v: Vec<C64> = (0..dim)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            C64::new(0.5 + (state >> 11) as f64 / (1u64 << 53) as f64, 0.0)
        })
        .collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn dense_lowest(op: &SparseOperator) -> (f64, Vec<C64>) {
    let (values, vectors) = linalg::hermitian_eigen(&op.to_dense());
    (values[0], vectors.column(0).iter().copied().collect())
}

/// Lowest eigenvalue and a normalized eigenvector of a Hermitian operator.
pub fn lowest_eigenpair(op: &SparseOperator, opts: &LanczosOptions) -> Result<(f64, StateVector)> {
    let dim = op.dim();
    if dim <= DENSE_LIMIT {
        let (e, v) = dense_lowest(op);
        return Ok((e, StateVector::new(v)?));
    }
    let m_max = opts.max_basis.min(dim).max(2);
    let mut start = start_vector(dim);
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut last_residual = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<C64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let (energy, y) = loop {
            let k = basis.len() - 1;
            op.apply_slice(&basis[k], &mut w);
            iterations += 1;
            let a = dot(&basis[k], &w).re;
            alpha.push(a);
            // Full reorthogonalization, applied twice for stability.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b_next = norm(&w);
            let m = alpha.len();
            let done = m >= m_max || b_next < 1e-14;
            if m % 5 == 0 || done {
                let t = DMatrix::from_fn(m, m, |r, c| {
                    if r == c {
                        alpha[r]
                    } else if r + 1 == c {
                        beta[r]
                    } else if c + 1 == r {
                        beta[c]
                    } else {
                        0.0
                    }
                });
                let (vals, vecs) = linalg::symmetric_eigen(t);
                let y: Vec<f64> = vecs.column(0).iter().copied().collect();
                let est = b_next * y[m - 1].abs();
                if est < 0.1 * opts.residual_tol || done {
                    break (vals[0], y);
                }
            }
            beta.push(b_next);
            basis.push(w.iter().map(|x| x / b_next).collect());
        };
        let mut v = vec![C64::new(0.0, 0.0); dim];
        for (coef, b) in y.iter().zip(&basis) {
            v.iter_mut().zip(b).for_each(|(x, z)| *x += coef * z);
        }
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        op.apply_slice(&v, &mut w);
        let residual = w.iter().zip(&v).map(|(hv, x)| (hv - energy * x).norm_sqr()).sum::<f64>().sqrt();
        last_residual = residual;
        if residual < opts.residual_tol {
            return Ok((energy, StateVector::new(v)?));
        }
        start = v;
    }
    Err(Error::LanczosNonConvergence { residual: last_residual, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinops::Pauli;

    fn chain(n: usize) -> SparseOperator {
        let mut h = SparseOperator::zero(n);
        for i in 1..=n {
            let j = i % n + 1;
            let xx = SparseOperator::pauli_string(&[(Pauli::X, i), (Pauli::X, j)], n).unwrap();
            h = h.add(&xx.scale(-0.7)).unwrap();
            h = h.add(&SparseOperator::site_pauli(Pauli::Z, i, n).unwrap().scale(-0.45)).unwrap();
        }
        h
    }

    #[test]
    fn matches_dense_ground_energy() {
        let h = chain(10);
        let (e, v) = lowest_eigenpair(&h, &LanczosOptions::default()).unwrap();
        let (e_dense, _) = dense_lowest(&h);
        assert!((e - e_dense).abs() < 1e-10, "{e} vs {e_dense}");
        let hv = h.apply(&v).unwrap();
        let res: f64 = hv.amplitudes().iter().zip(v.amplitudes()).map(|(a, b)| (a - e * b).norm_sqr()).sum();
        assert!(res.sqrt() < 1e-9);
    }
}
