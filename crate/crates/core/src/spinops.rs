//! Sparse Pauli-operator algebra, pure states and reduced density matrices.
//!
//! Bit ordering: qubit 1 is the most significant bit of a basis index. In a
//! joint system ⊗ bath register the system qubits come first, so a joint
//! basis index is `system_index * 2^n_bath + bath_index` and tracing out the
//! bath is a sum over contiguous blocks.
//!
//! Basis state `0` of a qubit is spin up (σ^z = +1).

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Single-qubit Pauli axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::X => "x",
            Pauli::Y => "y",
            Pauli::Z => "z",
        };
        f.write_str(s)
    }
}

fn dim_of(n_qubits: usize) -> usize {
    1usize << n_qubits
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Bit mask of a 1-based site in an `n_qubits` register.
pub fn site_mask(site: usize, n_qubits: usize) -> Result<usize> {
    if site == 0 || site > n_qubits {
        return Err(Error::SiteOutOfRange { site, n_qubits });
    }
    Ok(1usize << (n_qubits - site))
}

/// Hermitian-or-not operator on `n_qubits` qubits in compressed-row form.
///
/// Exact zeros are never stored. Real-valued operators keep a real copy of
/// their entries so the matrix–vector product only does half the work.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    n_qubits: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
    real_vals: Option<Vec<f64>>,
    hermitian: bool,
}

impl SparseOperator {
    fn from_csr(n_qubits: usize, row_ptr: Vec<usize>, cols: Vec<u32>, vals: Vec<C64>, hermitian: bool) -> Self {
        let real_vals = vals.iter().all(|v| v.im == 0.0).then(|| vals.iter().map(|v| v.re).collect());
        Self { n_qubits, row_ptr, cols, vals, real_vals, hermitian }
    }

    /// Builds an operator from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros dropped; the Hermitian flag is computed exactly.
    pub fn from_triplets(n_qubits: usize, mut triplets: Vec<(usize, usize, C64)>) -> Result<Self> {
        let dim = dim_of(n_qubits);
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: r.max(c) + 1 });
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc as usize == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c as u32);
            vals.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != ZERO {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut op = Self::from_csr(n_qubits, row_ptr, keep_cols, keep_vals, false);
        op.hermitian = op.check_hermitian();
        Ok(op)
    }

    pub fn zero(n_qubits: usize) -> Self {
        Self::from_csr(n_qubits, vec![0; dim_of(n_qubits) + 1], Vec::new(), Vec::new(), true)
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = dim_of(n_qubits);
        Self::from_csr(n_qubits, (0..=dim).collect(), (0..dim as u32).collect(), vec![ONE; dim], true)
    }

    /// Real diagonal operator.
    pub fn from_diagonal(n_qubits: usize, diag: &[f64]) -> Result<Self> {
        let dim = dim_of(n_qubits);
        if diag.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: diag.len() });
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                cols.push(i as u32);
                vals.push(C64::new(d, 0.0));
            }
            row_ptr.push(cols.len());
        }
        Ok(Self::from_csr(n_qubits, row_ptr, cols, vals, true))
    }

    /// The Pauli `axis` acting on 1-based `site`, identity elsewhere.
    pub fn site_pauli(axis: Pauli, site: usize, n_qubits: usize) -> Result<Self> {
        let mask = site_mask(site, n_qubits)?;
        let dim = dim_of(n_qubits);
        let mut cols = Vec::with_capacity(dim);
        let mut vals = Vec::with_capacity(dim);
        for r in 0..dim {
            let down = r & mask != 0;
            let (c, v) = match axis {
                Pauli::X => (r ^ mask, ONE),
                // <0|Y|1> = -i, <1|Y|0> = +i
                Pauli::Y => (r ^ mask, if down { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) }),
                Pauli::Z => (r, if down { -ONE } else { ONE }),
            };
            cols.push(c as u32);
            vals.push(v);
        }
        Ok(Self::from_csr(n_qubits, (0..=dim).collect(), cols, vals, true))
    }

    /// Product of single-site Paulis, e.g. `[(X, 1), (X, 2)]`.
    pub fn pauli_string(factors: &[(Pauli, usize)], n_qubits: usize) -> Result<Self> {
        let mut op = Self::identity(n_qubits);
        for &(axis, site) in factors {
            op = op.matmul(&Self::site_pauli(axis, site, n_qubits)?)?;
        }
        Ok(op)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        dim_of(self.n_qubits)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_real(&self) -> bool {
        self.real_vals.is_some()
    }

    /// Iterates over the stored `(row, col, value)` entries in row order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k] as usize, self.vals[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[span.clone()].binary_search(&(col as u32)) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Exact check of `A[r,c] == conj(A[c,r])` over every stored entry.
    pub fn check_hermitian(&self) -> bool {
        self.entries().all(|(r, c, v)| self.get(c, r) == v.conj())
    }

    pub fn scale(&self, factor: f64) -> Self {
        let vals = self.vals.iter().map(|v| v * factor).collect();
        if factor == 0.0 {
            return Self::zero(self.n_qubits);
        }
        Self::from_csr(self.n_qubits, self.row_ptr.clone(), self.cols.clone(), vals, self.hermitian)
    }

    pub fn scale_complex(&self, factor: C64) -> Self {
        let vals = self.vals.iter().map(|v| v * factor).collect();
        let hermitian = self.hermitian && factor.im == 0.0;
        Self::from_csr(self.n_qubits, self.row_ptr.clone(), self.cols.clone(), vals, hermitian)
    }

    /// Entry-wise sum; exact zeros produced by cancellation are dropped.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        let dim = self.dim();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(self.nnz() + other.nnz());
        let mut vals = Vec::with_capacity(self.nnz() + other.nnz());
        row_ptr.push(0);
        for r in 0..dim {
            let (mut i, ie) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let (mut j, je) = (other.row_ptr[r], other.row_ptr[r + 1]);
            while i < ie || j < je {
                let ci = if i < ie { self.cols[i] } else { u32::MAX };
                let cj = if j < je { other.cols[j] } else { u32::MAX };
                let (c, v) = if ci == cj {
                    let v = self.vals[i] + other.vals[j];
                    i += 1;
                    j += 1;
                    (ci, v)
                } else if ci < cj {
                    i += 1;
                    (ci, self.vals[i - 1])
                } else {
                    j += 1;
                    (cj, other.vals[j - 1])
                };
                if v != ZERO {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self::from_csr(self.n_qubits, row_ptr, cols, vals, self.hermitian && other.hermitian))
    }

    /// Tensor product `self ⊗ other`; `self` acts on the high (leading) qubits.
    pub fn kron(&self, other: &Self) -> Self {
        let db = other.dim();
        let n_qubits = self.n_qubits + other.n_qubits;
        let dim = dim_of(n_qubits);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(self.nnz() * other.nnz());
        let mut vals = Vec::with_capacity(self.nnz() * other.nnz());
        row_ptr.push(0);
        for ra in 0..self.dim() {
            for rb in 0..db {
                for ka in self.row_ptr[ra]..self.row_ptr[ra + 1] {
                    let base = self.cols[ka] as usize * db;
                    for kb in other.row_ptr[rb]..other.row_ptr[rb + 1] {
                        cols.push((base + other.cols[kb] as usize) as u32);
                        vals.push(self.vals[ka] * other.vals[kb]);
                    }
                }
                row_ptr.push(cols.len());
            }
        }
        Self::from_csr(n_qubits, row_ptr, cols, vals, self.hermitian && other.hermitian)
    }

    /// `self ⊗ I` on a register with `n_bath` trailing qubits.
    pub fn embed_system(&self, n_bath: usize) -> Self {
        self.kron(&Self::identity(n_bath))
    }

    /// `I ⊗ self` on a register with `n_system` leading qubits.
    pub fn embed_bath(&self, n_system: usize) -> Self {
        Self::identity(n_system).kron(self)
    }

    /// Operator product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        let mut triplets = Vec::new();
        for (r, k, a) in self.entries() {
            for idx in other.row_ptr[k]..other.row_ptr[k + 1] {
                triplets.push((r, other.cols[idx] as usize, a * other.vals[idx]));
            }
        }
        Self::from_triplets(self.n_qubits, triplets)
    }

    /// `y ← A x` on raw amplitude slices.
    ///
    /// # Panics
    /// If either slice length differs from the operator dimension.
    pub fn apply_slice(&self, x: &[C64], y: &mut [C64]) {
        let dim = self.dim();
        assert!(x.len() == dim && y.len() == dim, "operator/vector dimension mismatch");
        match &self.real_vals {
            Some(re) => {
                for (r, out) in y.iter_mut().enumerate() {
                    let (mut ar, mut ai) = (0.0, 0.0);
                    for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                        let xv = x[self.cols[k] as usize];
                        ar += re[k] * xv.re;
                        ai += re[k] * xv.im;
                    }
                    *out = C64::new(ar, ai);
                }
            }
            None => {
                for (r, out) in y.iter_mut().enumerate() {
                    let mut acc = ZERO;
                    for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                        acc += self.vals[k] * x[self.cols[k] as usize];
                    }
                    *out = acc;
                }
            }
        }
    }

    /// Exact sparse matrix–vector product; no normalization.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: psi.dim() });
        }
        let mut out = vec![ZERO; self.dim()];
        self.apply_slice(psi.amplitudes(), &mut out);
        Ok(StateVector { n_qubits: self.n_qubits, amps: out })
    }

    /// `⟨ψ|A|ψ⟩` without normalizing ψ.
    pub fn sandwich(&self, psi: &StateVector) -> Result<C64> {
        let a_psi = self.apply(psi)?;
        Ok(psi.inner(&a_psi))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }
}

/// Pure state on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amps.len())?;
        Ok(Self { n_qubits, amps })
    }

    pub fn zero(n_qubits: usize) -> Self {
        Self { n_qubits, amps: vec![ZERO; dim_of(n_qubits)] }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(n_qubits);
        if index >= s.dim() {
            return Err(Error::DimensionMismatch { expected: s.dim(), actual: index + 1 });
        }
        s.amps[index] = ONE;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm and returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
        n
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `self ⊗ other`, `self` on the leading qubits.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Self { n_qubits: self.n_qubits + other.n_qubits, amps }
    }

    /// Squared distance `‖self − other‖²`.
    pub fn distance_sqr(&self, other: &Self) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum()
    }
}

/// Dense density matrix on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps a square matrix of dimension `2^n`. Physical validity is not
    /// checked here; see [`DensityMatrix::validate`].
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), actual: matrix.ncols() });
        }
        let n_qubits = qubits_for_len(matrix.nrows())?;
        Ok(Self { n_qubits, matrix })
    }

    pub(crate) fn from_row_major(n_qubits: usize, data: &[C64]) -> Self {
        let dim = dim_of(n_qubits);
        Self { n_qubits, matrix: DMatrix::from_row_slice(dim, dim, data) }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        let dim = a.len();
        Self { n_qubits: psi.n_qubits, matrix: DMatrix::from_fn(dim, dim, |r, c| a[r] * a[c].conj()) }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = dim_of(n_qubits);
        Self { n_qubits, matrix: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0) }
    }

    /// Convex mixture of pure states.
    pub fn from_ensemble(states: &[(f64, StateVector)]) -> Result<Self> {
        let first = states.first().ok_or(Error::EmptyBranches)?;
        let n = first.1.n_qubits;
        let dim = dim_of(n);
        let mut acc = vec![ZERO; dim * dim];
        for (w, s) in states {
            if s.n_qubits != n {
                return Err(Error::DimensionMismatch { expected: dim, actual: s.dim() });
            }
            linalg::add_gram(s.amplitudes(), dim, 1, *w, &mut acc);
        }
        Ok(Self::from_row_major(n, &acc))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Real parts of the diagonal (basis populations).
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// Largest `|ρ − ρ†|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues (ascending) and eigenvectors as matrix columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        linalg::hermitian_eigen(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    /// Checks trace (1e-10), Hermiticity (1e-12) and positivity (−1e-10).
    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} differs from 1")));
        }
        let herm = self.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!("hermiticity error {herm:e}")));
        }
        let low = self.eigenvalues().first().copied().unwrap_or(0.0);
        if low < -1e-10 {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {low:e}")));
        }
        Ok(())
    }

    /// `½ ‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        let diff = &self.matrix - &other.matrix;
        Ok(0.5 * linalg::hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
    }

    /// `tr[ρ A]` (complex; real for Hermitian `A`).
    pub fn trace_with(&self, op: &SparseOperator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: op.dim() });
        }
        // tr[ρA] = Σ_{r,c} ρ[c,r] A[r,c]
        Ok(op.entries().map(|(r, c, v)| self.matrix[(c, r)] * v).sum())
    }

    /// `U ρ U†` for a dense unitary (or any square matrix) `u`.
    pub fn conjugate_by(&self, u: &DMatrix<C64>) -> Self {
        Self { n_qubits: self.n_qubits, matrix: u * &self.matrix * u.adjoint() }
    }
}

/// Reduced state of the system after tracing out the trailing `n_bath`
/// qubits of `psi`. The trace equals `‖ψ‖²`.
pub fn partial_trace_bath(psi: &StateVector, n_system: usize, n_bath: usize) -> Result<DensityMatrix> {
    if psi.n_qubits() != n_system + n_bath {
        return Err(Error::QubitCountMismatch { system: n_system, bath: n_bath, actual: psi.n_qubits() });
    }
    let ds = dim_of(n_system);
    let mut acc = vec![ZERO; ds * ds];
    linalg::add_gram(psi.amplitudes(), ds, dim_of(n_bath), 1.0, &mut acc);
    Ok(DensityMatrix::from_row_major(n_system, &acc))
}

/// `Σ_k w_k Tr_A |ψ_k⟩⟨ψ_k|` for a normalized weight list.
pub fn weighted_branch_assemble(
    branches: &[(f64, StateVector)],
    n_system: usize,
    n_bath: usize,
) -> Result<DensityMatrix> {
    if branches.is_empty() {
        return Err(Error::EmptyBranches);
    }
    let mut total = 0.0;
    for (w, psi) in branches {
        if *w < 0.0 {
            return Err(Error::NegativeWeight(*w));
        }
        if psi.n_qubits() != n_system + n_bath {
            return Err(Error::QubitCountMismatch { system: n_system, bath: n_bath, actual: psi.n_qubits() });
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::WeightSum(total));
    }
    let ds = dim_of(n_system);
    let db = dim_of(n_bath);
    let mut acc = vec![ZERO; ds * ds];
    for (w, psi) in branches {
        linalg::add_gram(psi.amplitudes(), ds, db, *w, &mut acc);
    }
    Ok(DensityMatrix::from_row_major(n_system, &acc))
}
