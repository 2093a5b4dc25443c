//! Projective measurement of the bath energy after a stroke, and the
//! measurement-conditioned protocols built on it: post-selection on the first
//! excited bath eigenstate and stochastic selection.
//!
//! Each joint branch `ψ_k` is rewritten in the bath eigenbasis,
//! `Φ_k[s, j] = (⟨s| ⊗ ⟨E_A^(j)|) ψ_k`, so that outcome `j` has probability
//! `Σ_k w_k ‖Φ_k[:, j]‖²` and unnormalized post-measurement state
//! `Σ_k w_k Φ_k[:, j] Φ_k[:, j]†`.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::collision::{self, CollisionModel, CollisionRun, StrokeSchedule};
use crate::error::{Error, Result};
use crate::evolve::format_float;
use crate::hamiltonians::{self, EigenSystem};
use crate::instances::{GroundSolution, SkInstance};
use crate::linalg::{self, View};
use crate::observables;
use crate::spinops::{DensityMatrix, StateVector};
use crate::C64;

/// Outcomes below this probability have no post-measurement state.
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-14;

/// ChaCha stream used for outcome sampling; instances use stream 0.
pub const SELECTION_STREAM: u64 = 1;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOutcome {
    /// Bath eigenstate index.
    pub j: usize,
    pub level_group: usize,
    /// `E_A^(j)` of the unscaled bath Hamiltonian.
    pub energy: f64,
    pub probability: f64,
    /// `None` when the probability is negligible.
    pub post_state: Option<DensityMatrix>,
}

/// Bath-eigenbasis coefficients of a branch ensemble.
#[derive(Clone, Debug)]
pub struct MeasurementDistribution {
    n_system: usize,
    energies: Vec<f64>,
    labels: Vec<usize>,
    level_groups: Vec<Vec<usize>>,
    weights: Vec<f64>,
    /// Row-major `d_S × d_A` per branch.
    coeffs: Vec<Vec<C64>>,
    probabilities: Vec<f64>,
}

impl MeasurementDistribution {
    pub fn new(branches: &[(f64, StateVector)], bath_eigs: &EigenSystem, n_system: usize) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::EmptyBranches);
        }
        let da = bath_eigs.len();
        let ds = 1usize << n_system;
        let mut conj_e = vec![ZERO; da * da];
        for (j, v) in bath_eigs.states.iter().enumerate() {
            for (a, z) in v.amplitudes().iter().enumerate() {
                conj_e[a * da + j] = z.conj();
            }
        }
        let mut coeffs = Vec::with_capacity(branches.len());
        let mut weights = Vec::with_capacity(branches.len());
        let mut probabilities = vec![0.0; da];
        for (w, psi) in branches {
            if psi.dim() != ds * da {
                return Err(Error::DimensionMismatch { expected: ds * da, actual: psi.dim() });
            }
            if *w < 0.0 {
                return Err(Error::NegativeWeight(*w));
            }
            let mut phi = vec![ZERO; ds * da];
            linalg::gemm(
                ONE,
                View::row_major(psi.amplitudes(), ds, da),
                View::row_major(&conj_e, da, da),
                ZERO,
                &mut phi,
            );
            for row in phi.chunks(da) {
                for (p, z) in probabilities.iter_mut().zip(row) {
                    *p += w * z.norm_sqr();
                }
            }
            coeffs.push(phi);
            weights.push(*w);
        }
        Ok(Self {
            n_system,
            energies: bath_eigs.energies.clone(),
            labels: bath_eigs.group_labels(),
            level_groups: bath_eigs.level_groups.clone(),
            weights,
            coeffs,
            probabilities,
        })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn energy(&self, j: usize) -> f64 {
        self.energies[j]
    }

    pub fn level_group(&self, j: usize) -> usize {
        self.labels[j]
    }

    pub fn level_groups(&self) -> &[Vec<usize>] {
        &self.level_groups
    }

    /// Probabilities aggregated per level group.
    pub fn group_probabilities(&self) -> Vec<f64> {
        self.level_groups.iter().map(|g| g.iter().map(|&j| self.probabilities[j]).sum()).collect()
    }

    /// Probability and normalized post-measurement state for the projector
    /// onto the span of the eigenstates `js`.
    pub fn post_state_for(&self, js: &[usize]) -> Result<(f64, DensityMatrix)> {
        let p: f64 = js.iter().map(|&j| self.probabilities[j]).sum();
        if p < NEGLIGIBLE_PROBABILITY {
            return Err(Error::NegligibleOutcome { j: js.first().copied().unwrap_or(0), probability: p });
        }
        let ds = 1usize << self.n_system;
        let da = self.len();
        let mut acc = vec![ZERO; ds * ds];
        let mut col = vec![ZERO; ds];
        for (w, phi) in self.weights.iter().zip(&self.coeffs) {
            for &j in js {
                for (s, c) in col.iter_mut().enumerate() {
                    *c = phi[s * da + j];
                }
                linalg::add_gram(&col, ds, 1, w / p, &mut acc);
            }
        }
        Ok((p, DensityMatrix::from_row_major(self.n_system, &acc)))
    }

    pub fn post_state(&self, j: usize) -> Result<DensityMatrix> {
        Ok(self.post_state_for(&[j])?.1)
    }

    /// `Σ_j p_j ρ_j`, assembled from the projected coefficients.
    pub fn non_selective_state(&self) -> DensityMatrix {
        let ds = 1usize << self.n_system;
        let da = self.len();
        let mut acc = vec![ZERO; ds * ds];
        for (w, phi) in self.weights.iter().zip(&self.coeffs) {
            linalg::add_gram(phi, ds, da, *w, &mut acc);
        }
        DensityMatrix::from_row_major(self.n_system, &acc)
    }

    /// Per-outcome `Σ_k w_k Σ_s |Φ_k[s, j]|² g(s)`, unnormalized.
    fn weighted_diagonal(&self, g: impl Fn(usize) -> f64) -> Vec<f64> {
        let da = self.len();
        let mut out = vec![0.0; da];
        for (w, phi) in self.weights.iter().zip(&self.coeffs) {
            for (s, row) in phi.chunks(da).enumerate() {
                let gs = g(s);
                if gs == 0.0 {
                    continue;
                }
                for (o, z) in out.iter_mut().zip(row) {
                    *o += w * gs * z.norm_sqr();
                }
            }
        }
        out
    }

    /// `⟨H_p⟩` conditioned on every outcome (`None` for negligible ones).
    pub fn conditional_energies(&self, instance: &SkInstance) -> Vec<Option<f64>> {
        let diag = hamiltonians::problem_diagonal(instance);
        let raw = self.weighted_diagonal(|s| diag[s]);
        self.normalize(raw)
    }

    /// Ground-configuration population conditioned on every outcome.
    pub fn conditional_fidelities(&self, ground: &GroundSolution) -> Vec<Option<f64>> {
        let idx = ground.ground_indices();
        let raw = self.weighted_diagonal(|s| if idx.contains(&s) { 1.0 } else { 0.0 });
        self.normalize(raw)
    }

    fn normalize(&self, raw: Vec<f64>) -> Vec<Option<f64>> {
        raw.into_iter()
            .zip(&self.probabilities)
            .map(|(x, &p)| (p >= NEGLIGIBLE_PROBABILITY).then(|| x / p))
            .collect()
    }

    /// All outcomes with their post-measurement states.
    pub fn outcomes(&self) -> Result<Vec<MeasurementOutcome>> {
        (0..self.len())
            .map(|j| {
                let p = self.probabilities[j];
                let post_state = if p >= NEGLIGIBLE_PROBABILITY { Some(self.post_state(j)?) } else { None };
                Ok(MeasurementOutcome {
                    j,
                    level_group: self.labels[j],
                    energy: self.energies[j],
                    probability: p,
                    post_state,
                })
            })
            .collect()
    }
}

/// Outcome list of a bath-energy measurement on a branch ensemble.
pub fn measurement_distribution(
    branches: &[(f64, StateVector)],
    bath_eigs: &EigenSystem,
    n_system: usize,
) -> Result<Vec<MeasurementOutcome>> {
    MeasurementDistribution::new(branches, bath_eigs, n_system)?.outcomes()
}

/// `tr[ρ_j H_p]` for an outcome.
pub fn conditional_energy(outcome: &MeasurementOutcome, instance: &SkInstance) -> Result<f64> {
    let rho = outcome
        .post_state
        .as_ref()
        .ok_or(Error::NegligibleOutcome { j: outcome.j, probability: outcome.probability })?;
    Ok(observables::problem_energy(rho, instance))
}

/// One line of an outcome table.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeRow {
    pub stroke: usize,
    pub j: usize,
    pub level_group: usize,
    pub energy: f64,
    pub probability: f64,
    pub e_p_cond: Option<f64>,
    pub fidelity_cond: Option<f64>,
}

pub const OUTCOME_HEADER: [&str; 7] = ["stroke", "j", "level_group", "E_A", "p", "e_p_cond", "fidelity_cond"];

pub fn write_outcomes_csv<W: Write>(rows: &[OutcomeRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", OUTCOME_HEADER.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.stroke,
            r.j,
            r.level_group,
            format_float(r.energy),
            format_float(r.probability),
            r.e_p_cond.map(format_float).unwrap_or_default(),
            r.fidelity_cond.map(format_float).unwrap_or_default(),
        )?;
    }
    Ok(())
}

fn outcome_rows(
    dist: &MeasurementDistribution,
    stroke: usize,
    instance: &SkInstance,
    ground: &GroundSolution,
) -> Vec<OutcomeRow> {
    let e = dist.conditional_energies(instance);
    let fid = dist.conditional_fidelities(ground);
    (0..dist.len())
        .map(|j| OutcomeRow {
            stroke,
            j,
            level_group: dist.level_group(j),
            energy: dist.energy(j),
            probability: dist.probabilities()[j],
            e_p_cond: e[j],
            fidelity_cond: fid[j],
        })
        .collect()
}

/// Outcome table after `n_measure_at` strokes of plain cooling.
#[derive(Clone, Debug)]
pub struct MeasurementScan {
    pub rows: Vec<OutcomeRow>,
    /// `⟨H_p⟩` of the unmeasured state.
    pub e_p_pre: f64,
    /// Total probability of outcomes whose conditional `⟨H_p⟩` is below
    /// `e_p_pre`.
    pub fraction_below: f64,
    pub run: CollisionRun,
}

pub fn measure_after_strokes(
    instance: &SkInstance,
    schedule: &StrokeSchedule,
    n_measure_at: usize,
) -> Result<MeasurementScan> {
    if n_measure_at == 0 || n_measure_at > schedule.n_c {
        return Err(Error::InvalidParameter {
            name: "n_measure_at",
            reason: format!("must lie in 1..={}, got {n_measure_at}", schedule.n_c),
        });
    }
    let schedule = StrokeSchedule { n_c: n_measure_at, ..schedule.clone() };
    schedule.validate()?;
    let mut model = CollisionModel::new(instance, &schedule.bath, schedule.krylov)?;
    let rho0 = schedule.init_state.prepare(instance.n(), model.ground())?;
    let bath_eigs = model.bath_eigensystem().clone();
    let ground = model.ground().clone();
    let mut rows = Vec::new();
    let mut run = collision::drive(&mut model, &schedule, rho0, true, &mut |k, result| {
        if k == n_measure_at {
            let dist = MeasurementDistribution::new(&result.joint_branches_end, &bath_eigs, instance.n())?;
            rows = outcome_rows(&dist, k, instance, &ground);
        }
        Ok(None)
    })?;
    if let Some(msg) = &run.aborted {
        return Err(Error::InvalidParameter { name: "protocol", reason: msg.clone() });
    }
    let e_p_pre = run.summary.last().expect("at least one stroke").e_p_post;
    let fraction_below: f64 = rows.iter().filter(|r| r.e_p_cond.is_some_and(|e| e < e_p_pre)).map(|r| r.probability).sum();
    run.record.metadata.insert("protocol".into(), "measure-scan".into());
    run.record.metadata.insert("n_measure_at".into(), (n_measure_at as i64).into());
    run.record.metadata.insert("fraction_below".into(), fraction_below.into());
    Ok(MeasurementScan { rows, e_p_pre, fraction_below, run })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Measure and continue with the averaged state.
    #[default]
    None,
    PostSelectFirstExcited,
    Stochastic,
}

/// Whether outcomes are bath eigenstates or degenerate levels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeIndexing {
    #[default]
    Eigenstate,
    Level,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRule {
    pub mode: SelectionMode,
    pub rng_seed: u64,
    pub indexing: OutcomeIndexing,
}

impl SelectionMode {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionMode::None => "none",
            SelectionMode::PostSelectFirstExcited => "post_select_first_excited",
            SelectionMode::Stochastic => "stochastic",
        }
    }
}

/// What was measured and kept after one stroke.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeLogEntry {
    pub stroke: usize,
    /// Chosen eigenstate or level (per the indexing); `None` without
    /// selection.
    pub chosen: Option<usize>,
    pub probability: f64,
    pub e_p_post: f64,
    pub fidelity_post: f64,
    pub purity_post: f64,
}

pub const LOG_HEADER: [&str; 6] = ["stroke", "chosen", "p", "e_p_post", "fidelity_post", "purity_post"];

pub fn write_log_csv<W: Write>(log: &[OutcomeLogEntry], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", LOG_HEADER.join(","))?;
    for e in log {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.stroke,
            e.chosen.map(|c| c.to_string()).unwrap_or_default(),
            format_float(e.probability),
            format_float(e.e_p_post),
            format_float(e.fidelity_post),
            format_float(e.purity_post),
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct MeasuredRun {
    pub run: CollisionRun,
    pub log: Vec<OutcomeLogEntry>,
}

/// Draws an index from `p` with one uniform variate.
fn sample_index(p: &[f64], u: f64) -> usize {
    let total: f64 = p.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if target < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Collision protocol with a bath-energy measurement after every stroke.
pub fn run_measured_protocol(
    instance: &SkInstance,
    schedule: &StrokeSchedule,
    rule: &SelectionRule,
) -> Result<MeasuredRun> {
    schedule.validate()?;
    let mut model = CollisionModel::new(instance, &schedule.bath, schedule.krylov)?;
    let rho0 = schedule.init_state.prepare(instance.n(), model.ground())?;
    let bath_eigs = model.bath_eigensystem().clone();
    let ground = model.ground().clone();
    let mut rng = ChaCha20Rng::seed_from_u64(rule.rng_seed);
    rng.set_stream(SELECTION_STREAM);
    let mut log = Vec::new();
    let mut run = collision::drive(&mut model, schedule, rho0, true, &mut |k, result| {
        let dist = MeasurementDistribution::new(&result.joint_branches_end, &bath_eigs, instance.n())?;
        let members = |c: usize| -> Vec<usize> {
            match rule.indexing {
                OutcomeIndexing::Eigenstate => vec![c],
                OutcomeIndexing::Level => dist.level_groups()[c].clone(),
            }
        };
        let (chosen, p, rho) = match rule.mode {
            SelectionMode::None => (None, 1.0, dist.non_selective_state()),
            SelectionMode::PostSelectFirstExcited => {
                let js = members(1);
                let (p, rho) = dist.post_state_for(&js)?;
                (Some(1), p, rho)
            }
            SelectionMode::Stochastic => {
                let weights = match rule.indexing {
                    OutcomeIndexing::Eigenstate => dist.probabilities().to_vec(),
                    OutcomeIndexing::Level => dist.group_probabilities(),
                };
                let c = sample_index(&weights, rng.random::<f64>());
                let (p, rho) = dist.post_state_for(&members(c))?;
                (Some(c), p, rho)
            }
        };
        log.push(OutcomeLogEntry {
            stroke: k,
            chosen,
            probability: p,
            e_p_post: observables::problem_energy(&rho, instance),
            fidelity_post: observables::fidelity_to_problem_ground(&rho, &ground),
            purity_post: rho.purity(),
        });
        Ok(Some(rho))
    })?;
    let m = &mut run.record.metadata;
    m.insert("protocol".into(), "measured".into());
    m.insert("selection".into(), rule.mode.name().into());
    m.insert("rng_seed".into(), (rule.rng_seed as i64).into());
    m.insert(
        "outcome_indexing".into(),
        match rule.indexing {
            OutcomeIndexing::Eigenstate => "eigenstate",
            OutcomeIndexing::Level => "level",
        }
        .into(),
    );
    Ok(MeasuredRun { run, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::evolve_stroke;
    use crate::hamiltonians::BathParameters;
    use crate::instances::sample_sk;

    fn bath(n: usize) -> BathParameters {
        BathParameters { f: 0.6, n_bath: n, ..Default::default() }
    }

    #[test]
    fn fresh_bath_is_in_ground_state() {
        let inst = sample_sk(3, 1).unwrap();
        let rho = DensityMatrix::from_pure(&hamiltonians::driver_ground_state(3));
        let r = evolve_stroke(&rho, &inst, &bath(3), 0.0, 0.25, 1e-12).unwrap();
        let eigs = hamiltonians::bath_eigensystem(&bath(3)).unwrap();
        let out = measurement_distribution(&r.joint_branches_end, &eigs, 3).unwrap();
        assert!((out[0].probability - 1.0).abs() < 1e-12);
        assert!(out[1..].iter().all(|o| o.probability < 1e-12 && o.post_state.is_none()));
    }

    #[test]
    fn non_selective_identity_and_total_expectation() {
        let inst = sample_sk(3, 2).unwrap();
        let rho = DensityMatrix::maximally_mixed(3);
        let r = evolve_stroke(&rho, &inst, &bath(3), 5.0, 5.0, 1e-12).unwrap();
        let eigs = hamiltonians::bath_eigensystem(&bath(3)).unwrap();
        let outs = measurement_distribution(&r.joint_branches_end, &eigs, 3).unwrap();
        let total: f64 = outs.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let mut avg = nalgebra::DMatrix::<C64>::zeros(8, 8);
        let mut e_avg = 0.0;
        for o in &outs {
            if let Some(p) = &o.post_state {
                avg += p.matrix() * C64::new(o.probability, 0.0);
                e_avg += o.probability * conditional_energy(o, &inst).unwrap();
            }
        }
        let avg = DensityMatrix::from_matrix(avg).unwrap();
        assert!(avg.trace_distance(&r.rho_s_end).unwrap() < 1e-10);
        assert!((e_avg - observables::problem_energy(&r.rho_s_end, &inst)).abs() < 1e-9);
    }

    #[test]
    fn conditional_energy_examples() {
        let inst = sample_sk(3, 3).unwrap();
        let g = crate::instances::brute_force_ground(&inst).unwrap();
        let o = MeasurementOutcome {
            j: 0,
            level_group: 0,
            energy: 0.0,
            probability: 1.0,
            post_state: Some(DensityMatrix::from_pure(&StateVector::basis(3, g.index).unwrap())),
        };
        assert!((conditional_energy(&o, &inst).unwrap() - g.energy).abs() < 1e-12);
        let mixed = MeasurementOutcome { post_state: Some(DensityMatrix::maximally_mixed(3)), ..o.clone() };
        let mean = hamiltonians::problem_diagonal(&inst).iter().sum::<f64>() / 8.0;
        assert!((conditional_energy(&mixed, &inst).unwrap() - mean).abs() < 1e-12);
        let none = MeasurementOutcome { post_state: None, probability: 0.0, ..o };
        assert!(conditional_energy(&none, &inst).is_err());
    }

    #[test]
    fn sample_index_covers_cumulative_bins() {
        let p = [0.2, 0.0, 0.5, 0.3];
        assert_eq!(sample_index(&p, 0.0), 0);
        assert_eq!(sample_index(&p, 0.19), 0);
        assert_eq!(sample_index(&p, 0.2), 2);
        assert_eq!(sample_index(&p, 0.75), 3);
        assert_eq!(sample_index(&p, 0.999_999_999_999), 3);
    }

    #[test]
    fn measure_at_zero_is_rejected() {
        let inst = sample_sk(2, 1).unwrap();
        let s = StrokeSchedule { n_c: 2, bath: bath(2), ..Default::default() };
        assert!(measure_after_strokes(&inst, &s, 0).is_err());
        assert!(measure_after_strokes(&inst, &s, 3).is_err());
    }
}
