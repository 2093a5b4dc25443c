//! Repeated-collision cooling: the system is coupled to a bath chain prepared
//! in its ground state, the pair evolves unitarily for one stroke, the bath
//! is discarded and a fresh one is attached.
//!
//! Two engines produce the reduced state after a stroke:
//!
//! - *Branch*: the incoming `ρ_S` is split into its eigen-ensemble, each
//!   branch `|ψ_k⟩ ⊗ |E_A^(0)⟩` is propagated, and the reduced states are
//!   summed with their weights.
//! - *Channel*: every system basis state `|x⟩ ⊗ |E_A^(0)⟩` is propagated once
//!   for a given stroke Hamiltonian, and the stored images are contracted
//!   against `ρ_S = B B†` with dense products. This costs the same as one
//!   full-rank branch stroke up front but makes every further stroke with
//!   the same Hamiltonian cheap.
//!
//! [`Engine::Auto`] chooses per stroke.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{sample_grid, KrylovOptions, Propagator, TrajectoryRecord, TrajectoryRow};
use crate::hamiltonians::{self, BathParameters, Boundary, EigenSystem};
use crate::instances::{brute_force_ground, GroundSolution, SkInstance};
use crate::linalg::{self, View};
use crate::observables;
use crate::spinops::{DensityMatrix, SparseOperator, StateVector};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Memory the channel engine may use for stored basis images.
pub const CHANNEL_MEMORY_BUDGET: usize = 3 << 29;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Branch,
    Channel,
    #[default]
    Auto,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Branch => "branch",
            Engine::Channel => "channel",
            Engine::Auto => "auto",
        }
    }
}

/// State of the system before the first stroke.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    DriverGround,
    ProblemGround,
    MaximallyMixed,
    Custom(DensityMatrix),
}

impl InitialState {
    pub fn name(&self) -> &'static str {
        match self {
            InitialState::DriverGround => "driver_ground",
            InitialState::ProblemGround => "problem_ground",
            InitialState::MaximallyMixed => "maximally_mixed",
            InitialState::Custom(_) => "custom",
        }
    }

    pub fn prepare(&self, n: usize, ground: &GroundSolution) -> Result<DensityMatrix> {
        match self {
            InitialState::DriverGround => Ok(DensityMatrix::from_pure(&hamiltonians::driver_ground_state(n))),
            InitialState::ProblemGround => Ok(DensityMatrix::from_pure(&StateVector::basis(n, ground.index)?)),
            InitialState::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(n)),
            InitialState::Custom(rho) => {
                if rho.n_qubits() != n {
                    return Err(Error::DimensionMismatch { expected: 1 << n, actual: rho.dim() });
                }
                rho.validate()?;
                Ok(rho.clone())
            }
        }
    }
}

/// Parameters of a collision protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct StrokeSchedule {
    pub n_c: usize,
    pub dt: f64,
    pub bath: BathParameters,
    /// `(stroke, J)`: from 1-based `stroke` on, the coupling is `J`.
    pub j_schedule: Vec<(usize, f64)>,
    pub init_state: InitialState,
    pub sample_dt: f64,
    /// Eigenvalues of `ρ_S` at or below this are dropped from the ensemble.
    pub branch_tol: f64,
    pub engine: Engine,
    pub krylov: KrylovOptions,
    /// Keep the joint states at the end of every stroke in the result.
    pub keep_branches: bool,
}

impl Default for StrokeSchedule {
    fn default() -> Self {
        Self {
            n_c: 5,
            dt: 5.0,
            bath: BathParameters::default(),
            j_schedule: Vec::new(),
            init_state: InitialState::DriverGround,
            sample_dt: 0.25,
            branch_tol: 1e-12,
            engine: Engine::Auto,
            krylov: KrylovOptions::default(),
            keep_branches: false,
        }
    }
}

impl StrokeSchedule {
    pub fn validate(&self) -> Result<()> {
        self.bath.validate()?;
        self.krylov.validate()?;
        if self.n_c == 0 {
            return Err(Error::InvalidParameter { name: "n_c", reason: "must be at least 1".into() });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {}", self.dt) });
        }
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sample_dt",
                reason: format!("must be positive, got {}", self.sample_dt),
            });
        }
        if !(self.branch_tol > 0.0 && self.branch_tol < 1.0) {
            return Err(Error::InvalidParameter {
                name: "branch_tol",
                reason: format!("must lie in (0, 1), got {}", self.branch_tol),
            });
        }
        for &(s, j) in &self.j_schedule {
            if s == 0 || s > self.n_c {
                return Err(Error::InvalidParameter {
                    name: "j_schedule",
                    reason: format!("stroke {s} outside 1..={}", self.n_c),
                });
            }
            if !j.is_finite() {
                return Err(Error::InvalidParameter { name: "j_schedule", reason: format!("J = {j} is not finite") });
            }
        }
        Ok(())
    }

    /// Coupling in effect during 1-based `stroke`.
    pub fn coupling_at(&self, stroke: usize) -> f64 {
        let mut best: Option<(usize, f64)> = None;
        for &(s, j) in &self.j_schedule {
            if s <= stroke && best.is_none_or(|(b, _)| s >= b) {
                best = Some((s, j));
            }
        }
        best.map_or(self.bath.coupling_j, |(_, j)| j)
    }

    /// Sampling offsets inside one stroke, excluding 0 and ending at `dt`.
    pub fn sample_offsets(&self) -> Vec<f64> {
        sample_grid(self.dt, self.sample_dt).into_iter().skip(1).collect()
    }
}

/// Everything about one stroke except the incoming state.
#[derive(Clone, Debug, PartialEq)]
pub struct StrokeSpec {
    pub coupling_j: f64,
    pub dt: f64,
    /// Increasing offsets in `(0, dt]`; `dt` is appended when missing.
    pub offsets: Vec<f64>,
    /// Protocol time at the start of the stroke.
    pub t0: f64,
    pub stroke_index: usize,
    pub branch_tol: f64,
    pub engine: Engine,
    pub keep_branches: bool,
    /// Strokes (this one included) expected to reuse the same Hamiltonian;
    /// consulted by [`Engine::Auto`].
    pub reuse_hint: usize,
}

#[derive(Clone, Debug)]
pub struct StrokeResult {
    pub rho_s_end: DensityMatrix,
    /// Normalized joint states and weights at the end of the stroke; empty
    /// unless requested.
    pub joint_branches_end: Vec<(f64, StateVector)>,
    /// One row per sampling offset, in protocol time.
    pub rows: Vec<TrajectoryRow>,
    pub branch_count: usize,
    /// Engine actually used.
    pub engine: Engine,
    /// Largest `|‖ψ‖² − 1|` over propagated joint vectors.
    pub max_norm_drift: f64,
    /// Largest `|tr ρ_S − 1|` over the samples.
    pub max_trace_error: f64,
    /// Smallest eigenvalue of `ρ_S` over the samples.
    pub min_eigenvalue: f64,
}

/// Stored images `U(t)(|x⟩ ⊗ |E_A^(0)⟩)` for one stroke Hamiltonian.
struct Channel {
    key: (u64, u64),
    offsets: Vec<f64>,
    /// Per offset, a column-major `dim × d_s` block, column `x` the image of
    /// `|x⟩`.
    images: Vec<Vec<C64>>,
    norm_drift: f64,
}

/// Precomputed data shared by all strokes of a protocol on one instance.
pub struct CollisionModel<'a> {
    instance: &'a SkInstance,
    bath: BathParameters,
    ground: GroundSolution,
    diag: Vec<f64>,
    bath_eigs: EigenSystem,
    krylov: KrylovOptions,
    hamiltonians: Vec<(u64, SparseOperator)>,
    channels: Vec<Channel>,
}

fn ensemble(rho: &DensityMatrix, tol: f64) -> Vec<(f64, Vec<C64>)> {
    let (vals, vecs) = rho.eigen();
    let kept: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > tol).collect();
    let total: f64 = kept.iter().map(|&k| vals[k]).sum();
    kept.into_iter().map(|k| (vals[k] / total, vecs.column(k).iter().copied().collect())).collect()
}

/// Largest offset list a stroke samples at; `dt` always included.
fn normalized_offsets(offsets: &[f64], dt: f64) -> Vec<f64> {
    let eps = 1e-9 * dt.max(1.0);
    let mut out: Vec<f64> = offsets.iter().copied().filter(|&o| o > eps && o < dt - eps).collect();
    out.push(dt);
    out
}

impl<'a> CollisionModel<'a> {
    pub fn new(instance: &'a SkInstance, bath: &BathParameters, krylov: KrylovOptions) -> Result<Self> {
        bath.validate()?;
        krylov.validate()?;
        if instance.n() != bath.n_bath {
            return Err(Error::SizeMismatch { system: instance.n(), bath: bath.n_bath });
        }
        Ok(Self {
            instance,
            bath: *bath,
            ground: brute_force_ground(instance)?,
            diag: hamiltonians::problem_diagonal(instance),
            bath_eigs: hamiltonians::bath_eigensystem(bath)?,
            krylov,
            hamiltonians: Vec::new(),
            channels: Vec::new(),
        })
    }

    pub fn instance(&self) -> &SkInstance {
        self.instance
    }

    pub fn bath(&self) -> &BathParameters {
        &self.bath
    }

    pub fn n(&self) -> usize {
        self.instance.n()
    }

    pub fn ground(&self) -> &GroundSolution {
        &self.ground
    }

    pub fn bath_eigensystem(&self) -> &EigenSystem {
        &self.bath_eigs
    }

    pub fn bath_ground(&self) -> &StateVector {
        self.bath_eigs.ground_state()
    }

    /// Bytes the channel engine needs for `n_offsets` stored instants.
    pub fn channel_bytes(&self, n_offsets: usize) -> usize {
        let n = self.n();
        n_offsets * (1usize << (2 * n)) * (1usize << n) * std::mem::size_of::<C64>()
    }

    fn hamiltonian(&mut self, coupling_j: f64) -> Result<usize> {
        let key = coupling_j.to_bits();
        if let Some(i) = self.hamiltonians.iter().position(|(k, _)| *k == key) {
            return Ok(i);
        }
        let params = BathParameters { coupling_j, ..self.bath };
        self.hamiltonians.push((key, hamiltonians::build_total(self.instance, &params)?));
        Ok(self.hamiltonians.len() - 1)
    }

    /// Row of observables for a reduced state at protocol time `time`.
    pub fn observe(&self, rho: &DensityMatrix, time: f64, stroke_index: Option<usize>) -> Result<TrajectoryRow> {
        Ok(self.observe_full(rho, time, stroke_index)?.0)
    }

    /// The row plus the trace error and smallest eigenvalue.
    fn observe_full(
        &self,
        rho: &DensityMatrix,
        time: f64,
        stroke_index: Option<usize>,
    ) -> Result<(TrajectoryRow, f64, f64)> {
        let m = rho.matrix();
        let e_p = self.diag.iter().enumerate().map(|(i, e)| e * m[(i, i)].re).sum();
        let eig = rho.eigenvalues();
        let row = TrajectoryRow {
            time,
            stroke_index,
            e_p,
            e_driver: None,
            e_total: None,
            fidelity: observables::fidelity_to_problem_ground(rho, &self.ground),
            entropy: Some(observables::entropy_of_spectrum(&eig)?),
        };
        Ok((row, (rho.trace().re - 1.0).abs(), eig.first().copied().unwrap_or(0.0)))
    }

    fn joint_of(&self, system: &[C64]) -> Vec<C64> {
        let e0 = self.bath_ground().amplitudes();
        let mut out = Vec::with_capacity(system.len() * e0.len());
        for s in system {
            out.extend(e0.iter().map(|a| s * a));
        }
        out
    }

    /// Propagates `psi` through `offsets`, handing each sampled state to
    /// `sink`. Returns `|‖ψ‖² − 1|` at the end.
    fn propagate_sampled(
        h: &SparseOperator,
        psi: &mut [C64],
        offsets: &[f64],
        krylov: &KrylovOptions,
        mut sink: impl FnMut(usize, &[C64]),
    ) -> Result<f64> {
        let total = *offsets.last().expect("offsets end at dt");
        let rate = krylov.tol / total;
        let mut prop = Propagator::new(h, *krylov)?;
        let mut now = 0.0;
        for (i, &o) in offsets.iter().enumerate() {
            prop.propagate(psi, o - now, rate * (o - now))?;
            now = o;
            sink(i, psi);
        }
        Ok((psi.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs())
    }

    fn chunk_size() -> usize {
        2 * rayon::current_num_threads()
    }

    /// Per-offset reduced states, end branches and norm drift by branch
    /// propagation.
    fn branch_engine(
        &self,
        h: &SparseOperator,
        branches: &[(f64, Vec<C64>)],
        offsets: &[f64],
        keep: bool,
    ) -> Result<(Vec<Vec<C64>>, Vec<(f64, StateVector)>, f64)> {
        let n = self.n();
        let ds = 1usize << n;
        let mut acc = vec![vec![ZERO; ds * ds]; offsets.len()];
        let mut kept = Vec::new();
        let mut drift: f64 = 0.0;
        for chunk in branches.chunks(Self::chunk_size()) {
            let results: Vec<Result<(Vec<Vec<C64>>, Vec<C64>, f64)>> = chunk
                .par_iter()
                .map(|(w, v)| {
                    let mut psi = self.joint_of(v);
                    let mut grams = vec![vec![ZERO; ds * ds]; offsets.len()];
                    let d = Self::propagate_sampled(h, &mut psi, offsets, &self.krylov, |i, state| {
                        linalg::add_gram(state, ds, ds, *w, &mut grams[i]);
                    })?;
                    Ok((grams, psi, d))
                })
                .collect();
            for ((w, _), r) in chunk.iter().zip(results) {
                let (grams, psi, d) = r?;
                for (a, g) in acc.iter_mut().zip(&grams) {
                    a.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
                drift = drift.max(d);
                if keep {
                    kept.push((*w, StateVector::new(psi)?));
                }
            }
        }
        Ok((acc, kept, drift))
    }

    fn build_channel(&self, h: &SparseOperator, key: (u64, u64), offsets: &[f64]) -> Result<Channel> {
        let n = self.n();
        let ds = 1usize << n;
        let dim = ds * ds;
        let mut images = vec![vec![ZERO; dim * ds]; offsets.len()];
        let mut drift: f64 = 0.0;
        let xs: Vec<usize> = (0..ds).collect();
        for chunk in xs.chunks(Self::chunk_size()) {
            let results: Vec<Result<(Vec<Vec<C64>>, f64)>> = chunk
                .par_iter()
                .map(|&x| {
                    let mut sys = vec![ZERO; ds];
                    sys[x] = ONE;
                    let mut psi = self.joint_of(&sys);
                    let mut snaps = Vec::with_capacity(offsets.len());
                    let d = Self::propagate_sampled(h, &mut psi, offsets, &self.krylov, |_, s| snaps.push(s.to_vec()))?;
                    Ok((snaps, d))
                })
                .collect();
            for (&x, r) in chunk.iter().zip(results) {
                let (snaps, d) = r?;
                drift = drift.max(d);
                for (img, snap) in images.iter_mut().zip(snaps) {
                    img[x * dim..(x + 1) * dim].copy_from_slice(&snap);
                }
            }
        }
        Ok(Channel { key, offsets: offsets.to_vec(), images, norm_drift: drift })
    }

    fn channel_engine(
        &self,
        channel: &Channel,
        branches: &[(f64, Vec<C64>)],
        keep: bool,
    ) -> Result<(Vec<Vec<C64>>, Vec<(f64, StateVector)>, f64)> {
        let ds = 1usize << self.n();
        let dim = ds * ds;
        let r = branches.len();
        // B = Q √w, row-major d_s × r.
        let mut b = vec![ZERO; ds * r];
        for (k, (w, v)) in branches.iter().enumerate() {
            let s = w.sqrt();
            for x in 0..ds {
                b[x * r + k] = v[x] * s;
            }
        }
        let mut grams = Vec::with_capacity(channel.offsets.len());
        let mut kept = Vec::new();
        let mut m = vec![ZERO; dim * r];
        for (i, img) in channel.images.iter().enumerate() {
            let wv = View { data: img, rows: dim, cols: ds, rs: 1, cs: dim };
            linalg::gemm(ONE, wv, View::row_major(&b, ds, r), ZERO, &mut m);
            let mut g = vec![ZERO; ds * ds];
            // Rows s·d_A .. (s+1)·d_A of the row-major `dim × r` product hold
            // every (a, k) pair for system index s.
            linalg::add_gram(&m, ds, ds * r, 1.0, &mut g);
            grams.push(g);
            if keep && i + 1 == channel.images.len() {
                for (k, (w, _)) in branches.iter().enumerate() {
                    let s = 1.0 / w.sqrt();
                    let col: Vec<C64> = (0..dim).map(|j| m[j * r + k] * s).collect();
                    kept.push((*w, StateVector::new(col)?));
                }
            }
        }
        Ok((grams, kept, channel.norm_drift))
    }

    /// Evolves `rho` through one stroke with a fresh bath.
    pub fn evolve_stroke(&mut self, rho: &DensityMatrix, spec: &StrokeSpec) -> Result<StrokeResult> {
        let n = self.n();
        if rho.n_qubits() != n {
            return Err(Error::DimensionMismatch { expected: 1 << n, actual: rho.dim() });
        }
        if !(spec.dt >= 0.0 && spec.dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be ≥ 0, got {}", spec.dt) });
        }
        let branches = ensemble(rho, spec.branch_tol);
        if branches.is_empty() {
            return Err(Error::EmptyBranches);
        }
        assert!(branches.len() <= 1 << n, "branch count cannot exceed the system dimension");
        if spec.dt == 0.0 {
            let joint_branches_end = if spec.keep_branches {
                branches.iter().map(|(w, v)| Ok((*w, StateVector::new(self.joint_of(v))?))).collect::<Result<_>>()?
            } else {
                Vec::new()
            };
            return Ok(StrokeResult {
                rho_s_end: rho.clone(),
                joint_branches_end,
                rows: Vec::new(),
                branch_count: branches.len(),
                engine: Engine::Branch,
                max_norm_drift: 0.0,
                max_trace_error: (rho.trace().re - 1.0).abs(),
                min_eigenvalue: rho.eigenvalues()[0],
            });
        }
        let offsets = normalized_offsets(&spec.offsets, spec.dt);
        let key = (spec.coupling_j.to_bits(), spec.dt.to_bits());
        let cached = self.channels.iter().position(|c| c.key == key && c.offsets == offsets);
        let fits = self.channel_bytes(offsets.len()) <= CHANNEL_MEMORY_BUDGET;
        let engine = match spec.engine {
            Engine::Branch => Engine::Branch,
            Engine::Channel => Engine::Channel,
            Engine::Auto if cached.is_some() => Engine::Channel,
            Engine::Auto if branches.len() > 1 && spec.reuse_hint >= 2 && fits => Engine::Channel,
            Engine::Auto => Engine::Branch,
        };
        let hi = self.hamiltonian(spec.coupling_j)?;
        let (grams, kept, drift) = match engine {
            Engine::Channel => {
                let ci = match cached {
                    Some(ci) => ci,
                    None => {
                        // One cached channel at a time bounds memory.
                        self.channels.clear();
                        let ch = self.build_channel(&self.hamiltonians[hi].1, key, &offsets)?;
                        self.channels.push(ch);
                        0
                    }
                };
                self.channel_engine(&self.channels[ci], &branches, spec.keep_branches)?
            }
            _ => self.branch_engine(&self.hamiltonians[hi].1, &branches, &offsets, spec.keep_branches)?,
        };
        let mut rows = Vec::with_capacity(offsets.len());
        let mut max_trace_error: f64 = 0.0;
        let mut min_eigenvalue = f64::INFINITY;
        let mut last = None;
        for (o, g) in offsets.iter().zip(grams) {
            let rho_t = DensityMatrix::from_row_major(n, &g);
            let (row, te, me) = self.observe_full(&rho_t, spec.t0 + o, Some(spec.stroke_index))?;
            max_trace_error = max_trace_error.max(te);
            min_eigenvalue = min_eigenvalue.min(me);
            rows.push(row);
            last = Some(rho_t);
        }
        Ok(StrokeResult {
            rho_s_end: last.expect("at least one offset"),
            joint_branches_end: kept,
            rows,
            branch_count: branches.len(),
            engine,
            max_norm_drift: drift,
            max_trace_error,
            min_eigenvalue,
        })
    }
}

/// One stroke from `rho_s` with the branch engine, keeping the joint
/// branches.
pub fn evolve_stroke(
    rho_s: &DensityMatrix,
    instance: &SkInstance,
    bath: &BathParameters,
    dt: f64,
    sample_dt: f64,
    branch_tol: f64,
) -> Result<StrokeResult> {
    let mut model = CollisionModel::new(instance, bath, KrylovOptions::default())?;
    let offsets = if dt > 0.0 { sample_grid(dt, sample_dt).into_iter().skip(1).collect() } else { Vec::new() };
    let spec = StrokeSpec {
        coupling_j: bath.coupling_j,
        dt,
        offsets,
        t0: 0.0,
        stroke_index: 1,
        branch_tol,
        engine: Engine::Branch,
        keep_branches: true,
        reuse_hint: 1,
    };
    model.evolve_stroke(rho_s, &spec)
}

/// Per-stroke summary line.
#[derive(Clone, Debug, PartialEq)]
pub struct StrokeSummary {
    pub stroke_index: usize,
    pub coupling_j: f64,
    pub e_p_pre: f64,
    pub e_p_post: f64,
    pub entropy_post: f64,
    pub branch_count: usize,
    pub engine: Engine,
}

pub const SUMMARY_HEADER: [&str; 7] =
    ["stroke_index", "coupling_j", "e_p_pre", "e_p_post", "entropy_post", "branch_count", "engine"];

#[derive(Clone, Debug)]
pub struct CollisionRun {
    pub record: TrajectoryRecord,
    pub strokes: Vec<StrokeResult>,
    pub summary: Vec<StrokeSummary>,
    /// Set when a stroke failed; the results up to that stroke are kept.
    pub aborted: Option<String>,
}

impl CollisionRun {
    pub fn final_state(&self) -> Option<&DensityMatrix> {
        self.strokes.last().map(|s| &s.rho_s_end)
    }

    /// Rows at the end of each stroke.
    pub fn boundary_rows(&self) -> Vec<&TrajectoryRow> {
        self.strokes.iter().filter_map(|s| s.rows.last()).collect()
    }
}

pub(crate) fn boundary_name(b: Boundary) -> &'static str {
    match b {
        Boundary::Periodic => "periodic",
        Boundary::Open => "open",
    }
}

pub(crate) fn schedule_metadata(table: &mut toml::Table, schedule: &StrokeSchedule) {
    let b = &schedule.bath;
    table.insert("f".into(), b.f.into());
    table.insert("alpha".into(), b.alpha.into());
    table.insert("coupling_j".into(), b.coupling_j.into());
    table.insert("coupling_yy".into(), b.coupling_yy.into());
    table.insert("n_bath".into(), (b.n_bath as i64).into());
    table.insert("boundary".into(), boundary_name(b.boundary).into());
    table.insert("dt".into(), schedule.dt.into());
    table.insert("n_c".into(), (schedule.n_c as i64).into());
    table.insert("sample_dt".into(), schedule.sample_dt.into());
    table.insert("branch_tol".into(), schedule.branch_tol.into());
    table.insert("engine".into(), schedule.engine.name().into());
    table.insert("init_state".into(), schedule.init_state.name().into());
    let js: Vec<toml::Value> = schedule
        .j_schedule
        .iter()
        .map(|&(s, j)| toml::Value::Array(vec![(s as i64).into(), j.into()]))
        .collect();
    table.insert("j_schedule".into(), toml::Value::Array(js));
    table.insert("krylov_tol".into(), schedule.krylov.tol.into());
}

/// What happens between strokes: given the stroke just finished, return the
/// state entering the next one (`None` keeps `rho_s_end`).
pub(crate) type Between<'f> = dyn FnMut(usize, &StrokeResult) -> Result<Option<DensityMatrix>> + 'f;

/// Runs all strokes of `schedule` on a prepared model from `rho0`. With
/// `need_branches`, `between` sees the joint branches even when the schedule
/// does not keep them.
pub(crate) fn drive(
    model: &mut CollisionModel<'_>,
    schedule: &StrokeSchedule,
    rho0: DensityMatrix,
    need_branches: bool,
    between: &mut Between<'_>,
) -> Result<CollisionRun> {
    let mut record = TrajectoryRecord::new();
    record.rows.push(model.observe(&rho0, 0.0, None)?);
    let offsets = schedule.sample_offsets();
    let mut rho = rho0;
    let mut strokes: Vec<StrokeResult> = Vec::with_capacity(schedule.n_c);
    let mut summary = Vec::with_capacity(schedule.n_c);
    let mut aborted = None;
    for k in 1..=schedule.n_c {
        let j = schedule.coupling_at(k);
        let reuse_hint = (k..=schedule.n_c).filter(|&s| schedule.coupling_at(s).to_bits() == j.to_bits()).count();
        let spec = StrokeSpec {
            coupling_j: j,
            dt: schedule.dt,
            offsets: offsets.clone(),
            t0: (k - 1) as f64 * schedule.dt,
            stroke_index: k,
            branch_tol: schedule.branch_tol,
            engine: schedule.engine,
            keep_branches: schedule.keep_branches || need_branches,
            reuse_hint,
        };
        let e_pre = observables::problem_energy(&rho, model.instance());
        let result = match model.evolve_stroke(&rho, &spec) {
            Ok(r) => r,
            Err(e) => {
                aborted = Some(format!("stroke {k}: {e}"));
                break;
            }
        };
        let last = result.rows.last().expect("stroke rows");
        summary.push(StrokeSummary {
            stroke_index: k,
            coupling_j: j,
            e_p_pre: e_pre,
            e_p_post: last.e_p,
            entropy_post: last.entropy.unwrap_or(0.0),
            branch_count: result.branch_count,
            engine: result.engine,
        });
        record.rows.extend(result.rows.iter().cloned());
        let next = match between(k, &result) {
            Ok(next) => next,
            Err(e) => {
                aborted = Some(format!("after stroke {k}: {e}"));
                strokes.push(result);
                break;
            }
        };
        rho = next.unwrap_or_else(|| result.rho_s_end.clone());
        if !schedule.keep_branches {
            strokes.push(StrokeResult { joint_branches_end: Vec::new(), ..result });
        } else {
            strokes.push(result);
        }
    }
    let m = &mut record.metadata;
    crate::evolve::instance_metadata(m, model.instance(), model.ground());
    schedule_metadata(m, schedule);
    if let Some(msg) = &aborted {
        m.insert("aborted".into(), msg.clone().into());
    }
    Ok(CollisionRun { record, strokes, summary, aborted })
}

/// Full collision protocol. Validation failures are errors; a failing
/// stroke ends the run early with [`CollisionRun::aborted`] set.
pub fn run_collision_protocol(instance: &SkInstance, schedule: &StrokeSchedule) -> Result<CollisionRun> {
    schedule.validate()?;
    let mut model = CollisionModel::new(instance, &schedule.bath, schedule.krylov)?;
    let rho0 = schedule.init_state.prepare(instance.n(), model.ground())?;
    let mut run = drive(&mut model, schedule, rho0, false, &mut |_, _| Ok(None))?;
    run.record.metadata.insert("protocol".into(), "collide".into());
    Ok(run)
}

/// Which prefactor carries the `1/√Δt` law in the short-stroke limit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkovScaling {
    /// The coupling `J` of `H_I`.
    #[default]
    Interaction,
    /// The bath prefactor `α`.
    Alpha,
}

impl MarkovScaling {
    pub fn name(&self) -> &'static str {
        match self {
            MarkovScaling::Interaction => "interaction",
            MarkovScaling::Alpha => "alpha",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkovianParameters {
    pub dt_short: f64,
    pub n_short: usize,
    pub scaling: MarkovScaling,
    /// The scaled prefactor is `base · √(reference_dt / dt_short)`. With the
    /// default `1` this is `base/√Δt`; setting it to the long stroke length
    /// makes `dt_short = reference_dt` reproduce the unscaled stroke.
    pub reference_dt: f64,
}

impl Default for MarkovianParameters {
    fn default() -> Self {
        Self { dt_short: 0.1, n_short: 50, scaling: MarkovScaling::Interaction, reference_dt: 1.0 }
    }
}

/// Short-stroke run with the scaled prefactor; all other settings come from
/// `base`.
pub fn run_markovian_mode(
    instance: &SkInstance,
    base: &StrokeSchedule,
    params: &MarkovianParameters,
) -> Result<CollisionRun> {
    if !(params.dt_short > 0.0 && params.dt_short.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dt_short",
            reason: format!("must be positive, got {}", params.dt_short),
        });
    }
    if !(params.reference_dt > 0.0 && params.reference_dt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "reference_dt",
            reason: format!("must be positive, got {}", params.reference_dt),
        });
    }
    let factor = (params.reference_dt / params.dt_short).sqrt();
    let mut schedule = base.clone();
    schedule.n_c = params.n_short;
    schedule.dt = params.dt_short;
    schedule.sample_dt = base.sample_dt.min(params.dt_short);
    match params.scaling {
        MarkovScaling::Interaction => {
            schedule.bath.coupling_j *= factor;
            schedule.j_schedule.iter_mut().for_each(|(_, j)| *j *= factor);
        }
        MarkovScaling::Alpha => schedule.bath.alpha *= factor,
    }
    schedule.j_schedule.retain(|&(s, _)| s <= schedule.n_c);
    let mut run = run_collision_protocol(instance, &schedule)?;
    let m = &mut run.record.metadata;
    m.insert("protocol".into(), "markovian".into());
    m.insert("markov_scaling".into(), params.scaling.name().into());
    m.insert("markov_factor".into(), factor.into());
    m.insert("reference_dt".into(), params.reference_dt.into());
    Ok(run)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub f: f64,
    /// `(final ⟨H_p⟩, final fidelity)` or the failure message.
    pub outcome: std::result::Result<(f64, f64), String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    /// Sorted by `f`.
    pub points: Vec<SweepPoint>,
}

impl SweepTable {
    /// `f` of the lowest final `⟨H_p⟩` among successful points.
    pub fn argmin(&self) -> Option<f64> {
        self.points
            .iter()
            .filter_map(|p| p.outcome.as_ref().ok().map(|(e, _)| (p.f, *e)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(f, _)| f)
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_err()).count()
    }
}

/// Final `⟨H_p⟩` and fidelity of one protocol per `f`, in parallel.
pub fn final_energy_sweep(instance: &SkInstance, f_values: &[f64], template: &StrokeSchedule) -> Result<SweepTable> {
    if f_values.is_empty() {
        return Err(Error::InvalidParameter { name: "f_values", reason: "grid is empty".into() });
    }
    let mut grid = f_values.to_vec();
    grid.sort_by(f64::total_cmp);
    let points = grid
        .par_iter()
        .map(|&f| {
            let mut schedule = template.clone();
            schedule.bath.f = f;
            let outcome = run_collision_protocol(instance, &schedule).map_err(|e| e.to_string()).and_then(|run| {
                match (&run.aborted, run.record.last()) {
                    (None, Some(row)) => Ok((row.e_p, row.fidelity)),
                    (Some(msg), _) => Err(msg.clone()),
                    (None, None) => Err("no rows".into()),
                }
            });
            SweepPoint { f, outcome }
        })
        .collect();
    Ok(SweepTable { points })
}
