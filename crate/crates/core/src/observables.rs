//! Scalar diagnostics: expectation values, ground-state fidelity, von Neumann
//! entropy, purity and the bath x-magnetization with its thermodynamic-limit
//! reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{self, BathParameters, Boundary};
use crate::instances::{GroundSolution, SkInstance};
use crate::spinops::{DensityMatrix, Pauli, SparseOperator, StateVector};

/// Imaginary parts above this are reported by [`ExpectationValue::flagged`].
pub const IMAG_FLAG_TOL: f64 = 1e-9;

/// Eigenvalues down to this are clamped to zero in the entropy.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectationValue {
    pub value: f64,
    /// Imaginary residue; non-zero only through round-off for Hermitian ops.
    pub imaginary: f64,
}

impl ExpectationValue {
    pub fn flagged(&self) -> bool {
        self.imaginary.abs() > IMAG_FLAG_TOL
    }
}

/// Anything an operator can be averaged over.
pub trait QuantumState {
    fn expectation(&self, op: &SparseOperator) -> Result<ExpectationValue>;
}

impl QuantumState for StateVector {
    fn expectation(&self, op: &SparseOperator) -> Result<ExpectationValue> {
        let z = op.sandwich(self)?;
        Ok(ExpectationValue { value: z.re, imaginary: z.im })
    }
}

impl QuantumState for DensityMatrix {
    fn expectation(&self, op: &SparseOperator) -> Result<ExpectationValue> {
        let z = self.trace_with(op)?;
        Ok(ExpectationValue { value: z.re, imaginary: z.im })
    }
}

/// `⟨ψ|O|ψ⟩` or `tr[ρ O]`.
pub fn expectation<S: QuantumState + ?Sized>(state: &S, op: &SparseOperator) -> Result<ExpectationValue> {
    state.expectation(op)
}

/// `tr[ρ Π_0]` with `Π_0` the projector on the problem ground
/// configuration(s).
pub fn fidelity_to_problem_ground(rho: &DensityMatrix, ground: &GroundSolution) -> f64 {
    let m = rho.matrix();
    ground.ground_indices().iter().map(|&i| m[(i, i)].re).sum()
}

/// Pure-state counterpart of [`fidelity_to_problem_ground`].
pub fn fidelity_pure(psi: &StateVector, ground: &GroundSolution) -> f64 {
    ground.ground_indices().iter().map(|&i| psi.amplitudes()[i].norm_sqr()).sum()
}

/// `⟨H_p⟩` from the diagonal of `ρ`.
pub fn problem_energy(rho: &DensityMatrix, instance: &SkInstance) -> f64 {
    let m = rho.matrix();
    hamiltonians::problem_diagonal(instance).iter().enumerate().map(|(i, e)| e * m[(i, i)].re).sum()
}

/// `−Σ λ ln λ` over a spectrum, clamping tiny negatives.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigenvalues {
        if l < -NEGATIVE_EIGEN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("eigenvalue {l} below -{NEGATIVE_EIGEN_TOL}")));
        }
        if l > 0.0 {
            s -= l * l.ln();
        }
    }
    Ok(s.max(0.0))
}

/// `S(ρ) = −tr ρ ln ρ`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of_spectrum(&rho.eigenvalues())
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// Thermodynamic-limit x-magnetization of the ferromagnetic transverse-field
/// chain `−(1−f)ΣxΣx − fΣz`: `(1 − (f/(1−f))²)^{1/8}` below the critical
/// point `f = ½`, zero above.
pub fn pfeuty_reference(f: f64) -> f64 {
    if f >= 0.5 {
        return 0.0;
    }
    let r = f / (1.0 - f);
    (1.0 - r * r).max(0.0).powf(0.125)
}

/// How the finite-size order parameter is extracted from a ground state that
/// is Z₂ symmetric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MagnetizationEstimator {
    /// `√|⟨Σ^x_1 Σ^x_r⟩|` with `r` the site farthest from site 1 (`N` for
    /// open chains, `1 + ⌊N/2⌋` for rings). No field is added.
    Correlation,
    /// Site-averaged `|⟨Σ^x_i⟩|` after adding `−ε Σ^x_1` to the Hamiltonian.
    Pinned { epsilon: f64 },
}

impl Default for MagnetizationEstimator {
    fn default() -> Self {
        MagnetizationEstimator::Correlation
    }
}

impl MagnetizationEstimator {
    /// Default pinning strength of the pinned estimator.
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    pub fn epsilon(&self) -> f64 {
        match self {
            MagnetizationEstimator::Correlation => 0.0,
            MagnetizationEstimator::Pinned { epsilon } => *epsilon,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MagnetizationEstimator::Correlation => "correlation",
            MagnetizationEstimator::Pinned { .. } => "pinned",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnetizationMode {
    Interacting,
    Free,
    ThermodynamicLimit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnetizationPoint {
    pub f: f64,
    pub m_x: f64,
    pub mode: MagnetizationMode,
    /// Zero for the correlation estimator and the closed form.
    pub pinning_epsilon: f64,
}

/// Farthest site from site 1 on the chain.
pub fn farthest_site(n: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Open => n,
        Boundary::Periodic => 1 + n / 2,
    }
}

/// x-magnetization of the bath in the ground state of `α H_A` (free mode,
/// `instance = None`) or of the joint Hamiltonian (interacting mode).
pub fn bath_x_magnetization(
    instance: Option<&SkInstance>,
    params: &BathParameters,
    estimator: MagnetizationEstimator,
) -> Result<MagnetizationPoint> {
    params.validate()?;
    let nb = params.n_bath;
    let (h, n_system, mode) = match instance {
        None => (hamiltonians::build_bath(params).scale(params.alpha), 0, MagnetizationMode::Free),
        Some(inst) => (hamiltonians::build_total(inst, params)?, inst.n(), MagnetizationMode::Interacting),
    };
    let total = n_system + nb;
    let bath_x = |site: usize| SparseOperator::site_pauli(Pauli::X, n_system + site, total);
    let m_x = match estimator {
        MagnetizationEstimator::Correlation => {
            let far = farthest_site(nb, params.boundary);
            let corr = if far == 1 {
                1.0
            } else {
                let op = SparseOperator::pauli_string(&[(Pauli::X, n_system + 1), (Pauli::X, n_system + far)], total)?;
                let (_, psi) = hamiltonians::ground_state(&h)?;
                psi.expectation(&op)?.value
            };
            corr.abs().sqrt()
        }
        MagnetizationEstimator::Pinned { epsilon } => {
            if !(epsilon >= 0.0 && epsilon.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: format!("must be non-negative, got {epsilon}"),
                });
            }
            let pinned = h.add(&bath_x(1)?.scale(-epsilon))?;
            let (_, psi) = hamiltonians::ground_state(&pinned)?;
            let mut acc = 0.0;
            for site in 1..=nb {
                acc += psi.expectation(&bath_x(site)?)?.value.abs();
            }
            acc / nb as f64
        }
    };
    Ok(MagnetizationPoint { f: params.f, m_x: m_x.min(1.0), mode, pinning_epsilon: estimator.epsilon() })
}

pub fn thermodynamic_point(f: f64) -> MagnetizationPoint {
    MagnetizationPoint {
        f,
        m_x: pfeuty_reference(f),
        mode: MagnetizationMode::ThermodynamicLimit,
        pinning_epsilon: 0.0,
    }
}

/// First `f` on an ascending grid at which a curve falls to half its
/// maximum, linearly interpolated between grid points.
pub fn half_maximum_crossing(f_values: &[f64], m_values: &[f64]) -> Option<f64> {
    let peak = m_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * peak;
    let start = m_values.iter().position(|&m| m == peak)?;
    for k in start..m_values.len().saturating_sub(1) {
        let (a, b) = (m_values[k], m_values[k + 1]);
        if a >= half && b < half {
            let s = (a - half) / (a - b);
            return Some(f_values[k] + s * (f_values[k + 1] - f_values[k]));
        }
    }
    None
}
