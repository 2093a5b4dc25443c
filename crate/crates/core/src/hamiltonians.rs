//! Builders for the problem, driver, bath, coupling and joint Hamiltonians,
//! and the bath eigensystem.
//!
//! On a joint register the system occupies qubits `1..=n` and the bath
//! qubits `n+1..=2n`. The bath Hamiltonian is built *unscaled*; the energy
//! scale `alpha` is applied only when assembling the joint Hamiltonian
//!
//! ```text
//! H_tot = H_p ⊗ I + α I ⊗ H_A + H_I
//! H_A   = −Σ_i (1−f) Σ^x_i Σ^x_{i+1} − f Σ^z_i
//! H_I   = −J Σ_i σ^x_i Σ^x_i   [ − J Σ_i σ^y_i Σ^y_i ]
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::SkInstance;
use crate::lanczos::{self, LanczosOptions};
use crate::linalg;
use crate::spinops::{SparseOperator, StateVector};
use crate::C64;

/// Largest bath accepted by [`bath_eigensystem`].
pub const MAX_DENSE_BATH: usize = 14;

/// Relative tolerance for grouping bath energies into levels.
pub const LEVEL_TOL: f64 = 1e-10;

/// Boundary rule for the bath chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Site `N+1` is identified with site 1.
    #[default]
    Periodic,
    /// The `(N, N+1)` bond is dropped.
    Open,
}

/// Quench-walk schedule: `γ(t) = γ1` before `t_q`, `γ2` from `t_q` on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkParameters {
    pub gamma1: f64,
    pub gamma2: f64,
    pub t_q: f64,
    pub t_end: f64,
}

impl Default for WalkParameters {
    fn default() -> Self {
        Self { gamma1: 4.0, gamma2: 1.0, t_q: 5.0, t_end: 50.0 }
    }
}

impl WalkParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_q >= 0.0) {
            return Err(Error::InvalidParameter { name: "t_q", reason: format!("{} must be ≥ 0", self.t_q) });
        }
        if !(self.t_end >= self.t_q) {
            return Err(Error::InvalidParameter { name: "t_end", reason: format!("{} must be ≥ t_q", self.t_end) });
        }
        Ok(())
    }

    /// Driver strength in effect at time `t` (the step is right-continuous).
    pub fn gamma_at(&self, t: f64) -> f64 {
        if t < self.t_q {
            self.gamma1
        } else {
            self.gamma2
        }
    }
}

/// Bath chain and coupling parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathParameters {
    /// Transverse-field mixing in `[0, 1]`.
    pub f: f64,
    /// Energy scale applied to the bath Hamiltonian in the joint Hamiltonian.
    pub alpha: f64,
    pub n_bath: usize,
    #[serde(default)]
    pub boundary: Boundary,
    /// System–bath coupling strength `J`.
    pub coupling_j: f64,
    /// Adds the `σ^y Σ^y` coupling term.
    #[serde(default)]
    pub coupling_yy: bool,
}

impl Default for BathParameters {
    fn default() -> Self {
        Self { f: 0.6, alpha: 3.0, n_bath: 9, boundary: Boundary::Periodic, coupling_j: 1.0, coupling_yy: false }
    }
}

impl BathParameters {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.f) {
            return Err(Error::InvalidParameter { name: "f", reason: format!("{} outside [0, 1]", self.f) });
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter { name: "alpha", reason: format!("{} must be > 0", self.alpha) });
        }
        if self.n_bath == 0 {
            return Err(Error::InvalidParameter { name: "n_bath", reason: "must be ≥ 1".into() });
        }
        if !self.coupling_j.is_finite() {
            return Err(Error::InvalidParameter { name: "coupling_j", reason: "must be finite".into() });
        }
        Ok(())
    }

    /// Nearest-neighbour bonds as 1-based site pairs.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_bath;
        match self.boundary {
            Boundary::Periodic => (1..=n).map(|i| (i, i % n + 1)).collect(),
            Boundary::Open => (1..n).map(|i| (i, i + 1)).collect(),
        }
    }
}

/// Diagonal of the problem Hamiltonian over the computational basis.
pub fn problem_diagonal(instance: &SkInstance) -> Vec<f64> {
    (0..1usize << instance.n()).map(|idx| instance.energy_of_index(idx)).collect()
}

/// The diagonal problem Hamiltonian.
pub fn build_problem(instance: &SkInstance) -> SparseOperator {
    SparseOperator::from_diagonal(instance.n(), &problem_diagonal(instance)).expect("diagonal has 2^n entries")
}

fn z_count(index: usize, n: usize) -> f64 {
    // Σ_i σ^z_i on a basis state: up spins minus down spins.
    n as f64 - 2.0 * f64::from(index.count_ones())
}

/// Driver `−Σ_i σ^x_i`.
pub fn build_driver(n: usize) -> SparseOperator {
    let dim = 1usize << n;
    let triplets = (0..dim)
        .flat_map(|r| (0..n).map(move |b| (r ^ (1 << b), r, C64::new(-1.0, 0.0))))
        .collect();
    SparseOperator::from_triplets(n, triplets).expect("indices in range")
}

/// Uniform superposition, the ground state of the driver.
pub fn driver_ground_state(n: usize) -> StateVector {
    let dim = 1usize << n;
    let a = C64::new((dim as f64).sqrt().recip(), 0.0);
    StateVector::new(vec![a; dim]).expect("power-of-two length")
}

/// `γ H_d + H_p`.
pub fn build_walk(instance: &SkInstance, gamma: f64) -> SparseOperator {
    build_driver(instance.n()).scale(gamma).add(&build_problem(instance)).expect("same register size")
}

/// Unscaled transverse-field Ising chain `H_A`.
pub fn build_bath(params: &BathParameters) -> SparseOperator {
    let n = params.n_bath;
    let dim = 1usize << n;
    let masks: Vec<usize> =
        params.bonds().iter().map(|&(i, j)| (1usize << (n - i)) ^ (1usize << (n - j))).collect();
    let mut triplets = Vec::with_capacity(dim * (masks.len() + 1));
    for r in 0..dim {
        triplets.push((r, r, C64::new(-params.f * z_count(r, n), 0.0)));
        for &m in &masks {
            triplets.push((r ^ m, r, C64::new(-(1.0 - params.f), 0.0)));
        }
    }
    SparseOperator::from_triplets(n, triplets).expect("indices in range")
}

/// Site-matched coupling on a `2n`-qubit register (system first).
pub fn build_coupling(n: usize, coupling_j: f64, include_yy: bool) -> SparseOperator {
    let total = 2 * n;
    let dim = 1usize << total;
    let mut triplets = Vec::new();
    if coupling_j != 0.0 {
        for r in 0..dim {
            for site in 1..=n {
                let ms = 1usize << (total - site);
                let mb = 1usize << (n - site);
                triplets.push((r ^ ms ^ mb, r, C64::new(-coupling_j, 0.0)));
                if include_yy {
                    // <āb̄|YY|ab> = −1 when a = b, +1 otherwise.
                    let same = (r & ms != 0) == (r & mb != 0);
                    triplets.push((r ^ ms ^ mb, r, C64::new(if same { coupling_j } else { -coupling_j }, 0.0)));
                }
            }
        }
    }
    SparseOperator::from_triplets(total, triplets).expect("indices in range")
}

/// Joint Hamiltonian `H_p ⊗ I + α I ⊗ H_A + H_I`.
pub fn build_total(instance: &SkInstance, params: &BathParameters) -> Result<SparseOperator> {
    params.validate()?;
    if instance.n() != params.n_bath {
        return Err(Error::SizeMismatch { system: instance.n(), bath: params.n_bath });
    }
    let n = instance.n();
    let problem = build_problem(instance).embed_system(n);
    let bath = build_bath(params).scale(params.alpha).embed_bath(n);
    let coupling = build_coupling(n, params.coupling_j, params.coupling_yy);
    problem.add(&bath)?.add(&coupling)
}

/// Full spectrum of a Hermitian operator with near-degenerate levels grouped.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// Ascending.
    pub energies: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Partition of eigen-indices into levels, in ascending energy.
    pub level_groups: Vec<Vec<usize>>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn ground_state(&self) -> &StateVector {
        &self.states[0]
    }

    /// Level-group index of eigenstate `j`.
    pub fn group_of(&self, j: usize) -> usize {
        self.level_groups.iter().position(|g| g.contains(&j)).expect("every index is grouped")
    }

    /// Per-eigenstate level-group labels.
    pub fn group_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.len()];
        for (g, members) in self.level_groups.iter().enumerate() {
            for &j in members {
                labels[j] = g;
            }
        }
        labels
    }
}

fn group_levels(energies: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (j, &e) in energies.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (e - energies[g[0]]).abs() <= LEVEL_TOL * energies[g[0]].abs().max(1.0) => g.push(j),
            _ => groups.push(vec![j]),
        }
    }
    groups
}

/// Replaces the eigenvectors of one level by a canonical orthonormal basis:
/// computational basis states are projected onto the level in index order
/// (starting from all-up) and Gram–Schmidt orthonormalized. Each chosen
/// vector therefore has a positive overlap with the first basis state that
/// has weight in it.
fn canonical_level_basis(vectors: &DMatrix<f64>, members: &[usize]) -> Vec<Vec<f64>> {
    let dim = vectors.nrows();
    let d = members.len();
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(d);
    for b in 0..dim {
        if chosen.len() == d {
            break;
        }
        let mut v = vec![0.0; dim];
        for &j in members {
            let w = vectors[(b, j)];
            if w != 0.0 {
                for (r, x) in v.iter_mut().enumerate() {
                    *x += w * vectors[(r, j)];
                }
            }
        }
        for _ in 0..2 {
            for u in &chosen {
                let c: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-7 {
            v.iter_mut().for_each(|x| *x /= n);
            chosen.push(v);
        }
    }
    assert_eq!(chosen.len(), d, "level basis must span the eigenspace");
    chosen
}

/// Eigensystem of a real symmetric operator with canonical level bases.
pub fn real_eigensystem(op: &SparseOperator) -> EigenSystem {
    let dense = op.to_dense().map(|z| z.re);
    let (energies, vectors) = linalg::symmetric_eigen(dense);
    let level_groups = group_levels(&energies);
    let mut states = vec![StateVector::zero(op.n_qubits()); energies.len()];
    for members in &level_groups {
        for (&j, v) in members.iter().zip(canonical_level_basis(&vectors, members)) {
            states[j] = StateVector::new(v.into_iter().map(|x| C64::new(x, 0.0)).collect()).expect("power of two");
        }
    }
    EigenSystem { energies, states, level_groups }
}

/// Full spectrum of the unscaled bath Hamiltonian.
pub fn bath_eigensystem(params: &BathParameters) -> Result<EigenSystem> {
    params.validate()?;
    if params.n_bath > MAX_DENSE_BATH {
        return Err(Error::DiagonalizationBound { n: params.n_bath, max: MAX_DENSE_BATH });
    }
    Ok(real_eigensystem(&build_bath(params)))
}

/// Canonical ground state of the bath (first vector of the lowest level).
pub fn bath_ground_state(params: &BathParameters) -> Result<StateVector> {
    Ok(bath_eigensystem(params)?.states.swap_remove(0))
}

/// Ground energy and a ground vector of any Hermitian operator.
pub fn ground_state(op: &SparseOperator) -> Result<(f64, StateVector)> {
    lanczos::lowest_eigenpair(op, &LanczosOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinops::Pauli;

    fn dense_spectrum(op: &SparseOperator) -> Vec<f64> {
        linalg::symmetric_eigen(op.to_dense().map(|z| z.re)).0
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn two_spin_ferromagnet_diagonal() {
        let inst = SkInstance::from_upper(2, &[1.0], vec![0.0, 0.0], 0, "manual").unwrap();
        assert_eq!(problem_diagonal(&inst), vec![-1.0, 1.0, 1.0, -1.0]);
        let single = SkInstance::new(vec![0.0], vec![2.0], 0, "manual").unwrap();
        assert_eq!(problem_diagonal(&single), vec![-2.0, 2.0]);
    }

    #[test]
    fn driver_spectra() {
        assert!(close(&dense_spectrum(&build_driver(1)), &[-1.0, 1.0], 1e-14));
        assert!(close(
            &dense_spectrum(&build_driver(3)),
            &[-3.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 3.0],
            1e-12
        ));
        let d9 = build_driver(9);
        let psi = driver_ground_state(9);
        assert!((d9.sandwich(&psi).unwrap().re + 9.0).abs() < 1e-12);
    }

    #[test]
    fn driver_ground_state_matches_eigensolver() {
        for n in 1..=4 {
            let sys = real_eigensystem(&build_driver(n));
            let overlap = sys.ground_state().inner(&driver_ground_state(n)).norm();
            assert!((overlap - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn walk_at_zero_gamma_is_problem() {
        let inst = crate::instances::sample_sk(3, 5).unwrap();
        let w = build_walk(&inst, 0.0);
        assert_eq!(w.to_dense(), build_problem(&inst).to_dense());
    }

    #[test]
    fn bath_decoupled_limit() {
        for n in 1..=4 {
            let p = BathParameters { f: 1.0, n_bath: n, ..Default::default() };
            let sys = bath_eigensystem(&p).unwrap();
            assert!((sys.energies[0] + n as f64).abs() < 1e-12);
            assert!((sys.ground_state().amplitudes()[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let p = BathParameters { f: 1.0, n_bath: 3, ..Default::default() };
        assert!(close(&bath_eigensystem(&p).unwrap().energies, &[-3.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 3.0], 1e-12));
    }

    #[test]
    fn classical_chain_counts_bonds() {
        let periodic = BathParameters { f: 0.0, n_bath: 3, ..Default::default() };
        let open = BathParameters { boundary: Boundary::Open, ..periodic };
        assert!((dense_spectrum(&build_bath(&periodic))[0] + 3.0).abs() < 1e-12);
        assert!((dense_spectrum(&build_bath(&open))[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn open_pair_matches_dense_sum() {
        let p = BathParameters { f: 0.5, n_bath: 2, boundary: Boundary::Open, ..Default::default() };
        let xx = SparseOperator::pauli_string(&[(Pauli::X, 1), (Pauli::X, 2)], 2).unwrap().to_dense();
        let z1 = SparseOperator::site_pauli(Pauli::Z, 1, 2).unwrap().to_dense();
        let z2 = SparseOperator::site_pauli(Pauli::Z, 2, 2).unwrap().to_dense();
        let half = C64::new(-0.5, 0.0);
        let want = xx * half + (z1 + z2) * half;
        assert!((build_bath(&p).to_dense() - want).norm() < 1e-15);
    }

    #[test]
    fn classical_doublet_is_one_level() {
        let p = BathParameters { f: 0.0, n_bath: 2, boundary: Boundary::Open, ..Default::default() };
        let sys = bath_eigensystem(&p).unwrap();
        assert_eq!(sys.level_groups[0], vec![0, 1]);
        assert!((sys.energies[0] + 1.0).abs() < 1e-12);
        // Canonical vector: projection of |00⟩ onto the doublet, i.e. (|00⟩+|11⟩)/√2.
        let g = sys.ground_state().amplitudes();
        let s = 1.0 / 2f64.sqrt();
        assert!((g[0].re - s).abs() < 1e-12 && (g[3].re - s).abs() < 1e-12);
    }

    #[test]
    fn coupling_single_pair() {
        let c = build_coupling(1, 1.0, false);
        assert!(close(&dense_spectrum(&c), &[-1.0, -1.0, 1.0, 1.0], 1e-14));
        assert_eq!(build_coupling(2, 0.0, true).nnz(), 0);
    }

    #[test]
    fn coupling_with_yy_matches_kronecker_sum() {
        let n = 2;
        let mut want = DMatrix::<C64>::zeros(16, 16);
        for i in 1..=n {
            for axis in [Pauli::X, Pauli::Y] {
                let term = SparseOperator::pauli_string(&[(axis, i), (axis, n + i)], 2 * n).unwrap();
                want -= term.to_dense();
            }
        }
        let got = build_coupling(n, 1.0, true);
        assert!((got.to_dense() - want).norm() < 1e-14);
        assert!(got.is_hermitian());
    }

    #[test]
    fn total_size_mismatch() {
        let inst = crate::instances::sample_sk(3, 1).unwrap();
        let p = BathParameters { n_bath: 2, ..Default::default() };
        assert!(matches!(build_total(&inst, &p), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn parameter_validation() {
        assert!(BathParameters { f: 1.2, ..Default::default() }.validate().is_err());
        assert!(BathParameters { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(WalkParameters { t_q: 5.0, t_end: 4.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn bath_too_large_for_dense() {
        let p = BathParameters { n_bath: 15, ..Default::default() };
        assert!(matches!(bath_eigensystem(&p), Err(Error::DiagonalizationBound { .. })));
    }
}
