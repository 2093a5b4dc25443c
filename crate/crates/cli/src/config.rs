//! Experiment configuration: parsing, validation with key-path diagnostics,
//! and resolution into a fully expanded [`ExperimentConfig`].
//!
//! A config is one TOML document. Every section is optional and every key
//! has a default matching the reference setup; only `experiment` is
//! required. The resolved config serializes back to the same format, so a
//! run's `metadata.toml` can be fed to `coolsim run` again.

use std::fmt;
use std::path::{Path, PathBuf};

use coolsim_core::collision::{Engine, InitialState, MarkovScaling, StrokeSchedule};
use coolsim_core::evolve::{AnnealParameters, KrylovOptions};
use coolsim_core::hamiltonians::{BathParameters, Boundary, WalkParameters};
use coolsim_core::instances::{self, SkInstance, MAX_ENUMERATION};
use coolsim_core::measure::{OutcomeIndexing, SelectionMode, SelectionRule};
use coolsim_core::observables::MagnetizationEstimator;
use serde::{Deserialize, Serialize};

use crate::recipes::Recipe;

/// Largest system for recipes that simulate the `2N`-qubit joint register.
pub const MAX_JOINT_N: usize = 12;

/// One problem found in a config, anchored at a dotted key path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
    pub remedy: String,
}

impl Diagnostic {
    fn new(key: impl Into<String>, message: impl Into<String>, remedy: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into(), remedy: remedy.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)?;
        if !self.remedy.is_empty() {
            write!(f, " ({})", self.remedy)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Raw document

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    output_dir: Option<PathBuf>,
    global_seed: Option<u64>,
    #[serde(default)]
    instance: RawInstance,
    #[serde(default)]
    walk: RawWalk,
    #[serde(default)]
    anneal: RawAnneal,
    #[serde(default)]
    bath: RawBath,
    #[serde(default)]
    collision: RawCollision,
    #[serde(default)]
    sampling: RawSampling,
    #[serde(default)]
    krylov: RawKrylov,
    #[serde(default)]
    selection: RawSelection,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    measure: RawMeasure,
    #[serde(default)]
    stochastic: RawStochastic,
    #[serde(default)]
    magnetization: RawMagnetization,
    #[serde(default)]
    markovian: RawMarkovian,
    /// Run results written into `metadata.toml`; ignored on input.
    #[serde(default)]
    #[allow(dead_code)]
    result: Option<toml::Table>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    n: Option<usize>,
    seed: Option<u64>,
    file: Option<PathBuf>,
    rng_id: Option<String>,
    #[serde(rename = "J")]
    couplings: Option<toml::Value>,
    h: Option<Vec<f64>>,
    ground_energy: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWalk {
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    t_q: Option<f64>,
    t_end: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnneal {
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    t_f: Option<f64>,
    n_steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBath {
    f: Option<f64>,
    alpha: Option<f64>,
    n_bath: Option<usize>,
    boundary: Option<Boundary>,
    coupling_j: Option<f64>,
    coupling_yy: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCollision {
    n_c: Option<usize>,
    dt: Option<f64>,
    j_schedule: Option<Vec<(usize, f64)>>,
    init_state: Option<InitKind>,
    engine: Option<Engine>,
    branch_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    sample_dt: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKrylov {
    tol: Option<f64>,
    max_dim: Option<usize>,
    max_substeps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSelection {
    mode: Option<SelectionMode>,
    rng_seed: Option<u64>,
    indexing: Option<OutcomeIndexing>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    f_values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    n_measure_at: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStochastic {
    trajectories: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMagnetization {
    f_values: Option<Vec<f64>>,
    estimator: Option<EstimatorKind>,
    epsilon: Option<f64>,
    interacting: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarkovian {
    dt_short: Option<f64>,
    n_short: Option<usize>,
    scalings: Option<Vec<MarkovScaling>>,
    reference_dt: Option<f64>,
}

// ---------------------------------------------------------------------------
// Resolved config

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    DriverGround,
    ProblemGround,
    MaximallyMixed,
}

impl InitKind {
    pub fn to_state(self) -> InitialState {
        match self {
            InitKind::DriverGround => InitialState::DriverGround,
            InitKind::ProblemGround => InitialState::ProblemGround,
            InitKind::MaximallyMixed => InitialState::MaximallyMixed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Correlation,
    Pinned,
}

/// The instance echoed inline so that a metadata file is self-contained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceEcho {
    pub n: usize,
    pub seed: u64,
    pub rng_id: String,
    #[serde(rename = "J")]
    pub couplings: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnealSection {
    pub gamma1: f64,
    pub gamma2: f64,
    pub t_f: f64,
    pub n_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollisionSection {
    pub n_c: usize,
    pub dt: f64,
    pub j_schedule: Vec<(usize, f64)>,
    pub init_state: InitKind,
    pub engine: Engine,
    pub branch_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SamplingSection {
    pub sample_dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KrylovSection {
    pub tol: f64,
    pub max_dim: usize,
    pub max_substeps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSection {
    pub f_values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureSection {
    pub n_measure_at: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StochasticSection {
    pub trajectories: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagnetizationSection {
    pub f_values: Vec<f64>,
    pub estimator: EstimatorKind,
    pub epsilon: f64,
    pub interacting: bool,
}

impl MagnetizationSection {
    pub fn estimator(&self) -> MagnetizationEstimator {
        match self.estimator {
            EstimatorKind::Correlation => MagnetizationEstimator::Correlation,
            EstimatorKind::Pinned => MagnetizationEstimator::Pinned { epsilon: self.epsilon },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkovianSection {
    pub dt_short: f64,
    pub n_short: usize,
    pub scalings: Vec<MarkovScaling>,
    pub reference_dt: f64,
}

/// Fully resolved experiment: every default expanded, the instance loaded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Recipe,
    pub output_dir: PathBuf,
    pub global_seed: u64,
    pub instance: InstanceEcho,
    pub walk: WalkParameters,
    pub anneal: AnnealSection,
    pub bath: BathParameters,
    pub collision: CollisionSection,
    pub sampling: SamplingSection,
    pub krylov: KrylovSection,
    pub selection: SelectionRule,
    pub sweep: SweepSection,
    pub measure: MeasureSection,
    pub stochastic: StochasticSection,
    pub magnetization: MagnetizationSection,
    pub markovian: MarkovianSection,
    #[serde(skip)]
    pub sk: SkInstance,
}

impl ExperimentConfig {
    pub fn walk_parameters(&self) -> WalkParameters {
        self.walk
    }

    pub fn anneal_parameters(&self) -> AnnealParameters {
        let a = &self.anneal;
        AnnealParameters { gamma1: a.gamma1, gamma2: a.gamma2, t_f: a.t_f, n_steps: a.n_steps }
    }

    pub fn krylov_options(&self) -> KrylovOptions {
        KrylovOptions { tol: self.krylov.tol, max_dim: self.krylov.max_dim, max_substeps: self.krylov.max_substeps }
    }

    pub fn stroke_schedule(&self) -> StrokeSchedule {
        let c = &self.collision;
        StrokeSchedule {
            n_c: c.n_c,
            dt: c.dt,
            bath: self.bath,
            j_schedule: c.j_schedule.clone(),
            init_state: c.init_state.to_state(),
            sample_dt: self.sampling.sample_dt,
            branch_tol: c.branch_tol,
            engine: c.engine,
            krylov: self.krylov_options(),
            keep_branches: false,
        }
    }

    /// The config as a TOML table, the form echoed into metadata.
    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }
}

// ---------------------------------------------------------------------------
// Loading

fn parse(text: &str) -> Result<RawConfig, Vec<Diagnostic>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        vec![Diagnostic::new("<document>", e.message().to_string(), "fix the TOML syntax")]
    })?;
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." || path.is_empty() { "<document>".to_string() } else { path };
        vec![Diagnostic::new(key, e.inner().to_string(), "check the key name and value type")]
    })
}

fn range(diags: &mut Vec<Diagnostic>, key: &str, ok: bool, message: String, remedy: &str) {
    if !ok {
        diags.push(Diagnostic::new(key, message, remedy));
    }
}

fn positive(diags: &mut Vec<Diagnostic>, key: &str, v: f64) {
    range(diags, key, v > 0.0 && v.is_finite(), format!("must be positive and finite, got {v}"), "use a value > 0");
}

fn finite(diags: &mut Vec<Diagnostic>, key: &str, v: f64) {
    range(diags, key, v.is_finite(), format!("must be finite, got {v}"), "use a finite number");
}

fn unit_interval(diags: &mut Vec<Diagnostic>, key: &str, v: f64) {
    range(diags, key, (0.0..=1.0).contains(&v), format!("{v} is outside [0, 1]"), "choose a value between 0 and 1");
}

fn f_grid(diags: &mut Vec<Diagnostic>, key: &str, values: &[f64]) {
    if values.is_empty() {
        diags.push(Diagnostic::new(key, "grid is empty", "list at least one value"));
    }
    for (i, &f) in values.iter().enumerate() {
        unit_interval(diags, &format!("{key}[{i}]"), f);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        diags.push(Diagnostic::new(key, "grid contains duplicate values", "list each value once"));
    }
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_instance(raw: &RawInstance, global_seed: u64, base: &Path, diags: &mut Vec<Diagnostic>) -> Option<SkInstance> {
    let inline = raw.couplings.is_some() || raw.h.is_some();
    match (&raw.file, inline) {
        (Some(_), true) => {
            diags.push(Diagnostic::new(
                "instance",
                "both `file` and inline `J`/`h` are given",
                "keep exactly one instance source",
            ));
            None
        }
        (Some(file), false) => {
            if raw.n.is_some() || raw.seed.is_some() {
                diags.push(Diagnostic::new(
                    "instance.file",
                    "`n`/`seed` cannot be combined with `file`",
                    "drop `n` and `seed`; the file defines the instance",
                ));
                return None;
            }
            let path = resolve_path(base, file);
            match instances::load_instance_file(&path) {
                Ok(f) => Some(f.instance),
                Err(e) => {
                    diags.push(Diagnostic::new(
                        "instance.file",
                        format!("cannot load {}: {e}", path.display()),
                        "check the path; relative paths resolve against the config file's directory",
                    ));
                    None
                }
            }
        }
        (None, true) => {
            let mut doc = toml::Table::new();
            match raw.n {
                Some(n) => doc.insert("n".into(), (n as i64).into()),
                None => {
                    diags.push(Diagnostic::new("instance.n", "inline instances need `n`", "add `n`"));
                    return None;
                }
            };
            doc.insert("seed".into(), (raw.seed.unwrap_or(0) as i64).into());
            doc.insert("rng_id".into(), raw.rng_id.clone().unwrap_or_else(|| "inline".into()).into());
            if let Some(j) = &raw.couplings {
                doc.insert("J".into(), j.clone());
            }
            if let Some(h) = &raw.h {
                doc.insert("h".into(), toml::Value::Array(h.iter().map(|&x| x.into()).collect()));
            }
            if let Some(e) = raw.ground_energy {
                doc.insert("ground_energy".into(), e.into());
            }
            match instances::instance_from_toml(&toml::to_string(&doc).expect("table serializes")) {
                Ok(f) => Some(f.instance),
                Err(e) => {
                    diags.push(Diagnostic::new("instance", e, "give `J` as the upper triangle or a full symmetric matrix"));
                    None
                }
            }
        }
        (None, false) => {
            let n = raw.n.unwrap_or(9);
            if n == 0 || n > MAX_ENUMERATION {
                diags.push(Diagnostic::new(
                    "instance.n",
                    format!("{n} is outside 1..={MAX_ENUMERATION}"),
                    "choose a smaller system",
                ));
                return None;
            }
            if let Some(id) = &raw.rng_id {
                if id != instances::RNG_ID {
                    diags.push(Diagnostic::new(
                        "instance.rng_id",
                        format!("unknown generator `{id}`"),
                        format!("use `{}` or give the instance inline", instances::RNG_ID),
                    ));
                    return None;
                }
            }
            match instances::sample_sk(n, raw.seed.unwrap_or(global_seed)) {
                Ok(inst) => Some(inst),
                Err(e) => {
                    diags.push(Diagnostic::new("instance", e.to_string(), ""));
                    None
                }
            }
        }
    }
}

/// Parses and validates a config. `base_dir` anchors relative paths and
/// `seed_override` replaces `global_seed`.
pub fn load_config(text: &str, base_dir: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    let raw = parse(text)?;
    let mut d = Vec::new();

    let experiment = match raw.experiment.as_deref() {
        None => {
            d.push(Diagnostic::new("experiment", "missing", "name a recipe; `coolsim recipes list` shows them"));
            None
        }
        Some(name) => match Recipe::from_name(name) {
            Some(r) => Some(r),
            None => {
                d.push(Diagnostic::new(
                    "experiment",
                    format!("unknown recipe `{name}`"),
                    "`coolsim recipes list` shows the registered recipes",
                ));
                None
            }
        },
    };
    let global_seed = seed_override.or(raw.global_seed).unwrap_or(1);
    range(
        &mut d,
        "global_seed",
        i64::try_from(global_seed).is_ok(),
        format!("{global_seed} does not fit a TOML integer"),
        "use a seed below 2^63",
    );
    let sk = load_instance(&raw.instance, global_seed, base_dir, &mut d);
    let n = sk.as_ref().map(|s| s.n());

    let w = &raw.walk;
    let walk = WalkParameters {
        gamma1: w.gamma1.unwrap_or(4.0),
        gamma2: w.gamma2.unwrap_or(1.0),
        t_q: w.t_q.unwrap_or(5.0),
        t_end: w.t_end.unwrap_or(50.0),
    };
    finite(&mut d, "walk.gamma1", walk.gamma1);
    finite(&mut d, "walk.gamma2", walk.gamma2);
    range(&mut d, "walk.t_q", walk.t_q >= 0.0 && walk.t_q.is_finite(), format!("must be ≥ 0, got {}", walk.t_q), "use a non-negative quench time");
    range(
        &mut d,
        "walk.t_end",
        walk.t_end >= walk.t_q && walk.t_end.is_finite(),
        format!("{} is before t_q = {}", walk.t_end, walk.t_q),
        "set t_end ≥ t_q",
    );

    let a = &raw.anneal;
    let anneal = AnnealSection {
        gamma1: a.gamma1.unwrap_or(4.0),
        gamma2: a.gamma2.unwrap_or(1.0),
        t_f: a.t_f.unwrap_or(25.0),
        n_steps: a.n_steps.unwrap_or(250),
    };
    finite(&mut d, "anneal.gamma1", anneal.gamma1);
    finite(&mut d, "anneal.gamma2", anneal.gamma2);
    positive(&mut d, "anneal.t_f", anneal.t_f);
    range(&mut d, "anneal.n_steps", anneal.n_steps >= 1, "must be at least 1".into(), "use n_steps ≥ 1");

    let b = &raw.bath;
    let bath = BathParameters {
        f: b.f.unwrap_or(0.6),
        alpha: b.alpha.unwrap_or(3.0),
        n_bath: b.n_bath.or(n).unwrap_or(9),
        boundary: b.boundary.unwrap_or_default(),
        coupling_j: b.coupling_j.unwrap_or(1.0),
        coupling_yy: b.coupling_yy.unwrap_or(false),
    };
    unit_interval(&mut d, "bath.f", bath.f);
    positive(&mut d, "bath.alpha", bath.alpha);
    finite(&mut d, "bath.coupling_j", bath.coupling_j);
    if let Some(n) = n {
        range(
            &mut d,
            "bath.n_bath",
            bath.n_bath == n,
            format!("bath has {} sites but the system has {n} spins", bath.n_bath),
            "the coupling is site-matched; set n_bath equal to instance.n or drop it",
        );
    }

    let c = &raw.collision;
    let default_strokes = match experiment {
        Some(Recipe::Entropy) => 10,
        Some(Recipe::MarkovianCompare) => 1,
        _ => 5,
    };
    let collision = CollisionSection {
        n_c: c.n_c.unwrap_or(default_strokes),
        dt: c.dt.unwrap_or(5.0),
        j_schedule: c.j_schedule.clone().unwrap_or_default(),
        init_state: c.init_state.unwrap_or_default(),
        engine: c.engine.unwrap_or_default(),
        branch_tol: c.branch_tol.unwrap_or(1e-12),
    };
    range(&mut d, "collision.n_c", collision.n_c >= 1, "must be at least 1".into(), "use n_c ≥ 1");
    positive(&mut d, "collision.dt", collision.dt);
    range(
        &mut d,
        "collision.branch_tol",
        (0.0..1e-3).contains(&collision.branch_tol),
        format!("{} is outside [0, 1e-3)", collision.branch_tol),
        "keep the truncation threshold small, e.g. 1e-12",
    );
    for (i, &(stroke, j)) in collision.j_schedule.iter().enumerate() {
        range(
            &mut d,
            &format!("collision.j_schedule[{i}]"),
            (1..=collision.n_c).contains(&stroke),
            format!("stroke {stroke} is outside 1..={}", collision.n_c),
            "strokes are 1-based and at most n_c",
        );
        finite(&mut d, &format!("collision.j_schedule[{i}]"), j);
    }

    let sampling = SamplingSection { sample_dt: raw.sampling.sample_dt.unwrap_or(0.25) };
    positive(&mut d, "sampling.sample_dt", sampling.sample_dt);

    let k = &raw.krylov;
    let defaults = KrylovOptions::default();
    let krylov = KrylovSection {
        tol: k.tol.unwrap_or(defaults.tol),
        max_dim: k.max_dim.unwrap_or(defaults.max_dim),
        max_substeps: k.max_substeps.unwrap_or(defaults.max_substeps),
    };
    range(
        &mut d,
        "krylov.tol",
        krylov.tol > 0.0 && krylov.tol <= 1e-2,
        format!("{} is outside (0, 1e-2]", krylov.tol),
        "use a tolerance such as 1e-9",
    );
    range(&mut d, "krylov.max_dim", krylov.max_dim >= 2, "must be at least 2".into(), "use max_dim ≥ 2");
    range(&mut d, "krylov.max_substeps", krylov.max_substeps >= 1, "must be at least 1".into(), "use max_substeps ≥ 1");

    let s = &raw.selection;
    let selection = SelectionRule {
        mode: s.mode.unwrap_or(match experiment {
            Some(Recipe::Postselect) => SelectionMode::PostSelectFirstExcited,
            Some(Recipe::Stochastic) => SelectionMode::Stochastic,
            _ => SelectionMode::None,
        }),
        rng_seed: s.rng_seed.unwrap_or(global_seed),
        indexing: s.indexing.unwrap_or_default(),
    };

    let default_f: Vec<f64> = match experiment {
        Some(Recipe::Entropy) => vec![0.3, 0.6, 0.9],
        _ => (1..=9).map(|k| k as f64 / 10.0).collect(),
    };
    let sweep = SweepSection { f_values: raw.sweep.f_values.clone().unwrap_or(default_f) };
    f_grid(&mut d, "sweep.f_values", &sweep.f_values);

    let measure = MeasureSection { n_measure_at: raw.measure.n_measure_at.unwrap_or(collision.n_c) };
    range(
        &mut d,
        "measure.n_measure_at",
        collision.n_c == 0 || (1..=collision.n_c).contains(&measure.n_measure_at),
        format!("{} is outside 1..={}", measure.n_measure_at, collision.n_c),
        "measure after one of the protocol's strokes",
    );

    let stochastic = StochasticSection { trajectories: raw.stochastic.trajectories.unwrap_or(10) };
    range(&mut d, "stochastic.trajectories", stochastic.trajectories >= 1, "must be at least 1".into(), "use trajectories ≥ 1");
    range(
        &mut d,
        "selection.rng_seed",
        selection.rng_seed.checked_add(stochastic.trajectories as u64).is_some_and(|s| i64::try_from(s).is_ok()),
        format!("{} leaves no room for per-trajectory seeds", selection.rng_seed),
        "use a seed below 2^63 minus the trajectory count",
    );

    let m = &raw.magnetization;
    let magnetization = MagnetizationSection {
        f_values: m.f_values.clone().unwrap_or_else(|| (0..=20).map(|k| k as f64 / 20.0).collect()),
        estimator: m.estimator.unwrap_or_default(),
        epsilon: m.epsilon.unwrap_or(MagnetizationEstimator::DEFAULT_EPSILON),
        interacting: m.interacting.unwrap_or(true),
    };
    f_grid(&mut d, "magnetization.f_values", &magnetization.f_values);
    range(
        &mut d,
        "magnetization.epsilon",
        magnetization.epsilon >= 0.0 && magnetization.epsilon.is_finite(),
        format!("must be ≥ 0, got {}", magnetization.epsilon),
        "use a small non-negative pinning field",
    );

    let mk = &raw.markovian;
    let markovian = MarkovianSection {
        dt_short: mk.dt_short.unwrap_or(0.1),
        n_short: mk.n_short.unwrap_or(50),
        scalings: mk.scalings.clone().unwrap_or_else(|| vec![MarkovScaling::Interaction, MarkovScaling::Alpha]),
        reference_dt: mk.reference_dt.unwrap_or(1.0),
    };
    positive(&mut d, "markovian.dt_short", markovian.dt_short);
    positive(&mut d, "markovian.reference_dt", markovian.reference_dt);
    range(&mut d, "markovian.n_short", markovian.n_short >= 1, "must be at least 1".into(), "use n_short ≥ 1");
    range(&mut d, "markovian.scalings", !markovian.scalings.is_empty(), "list is empty".into(), "name at least one scaling mode");

    if let (Some(recipe), Some(n)) = (experiment, n) {
        if recipe.uses_bath() {
            range(
                &mut d,
                "instance.n",
                n <= MAX_JOINT_N,
                format!("{n} spins need a {}-qubit joint register", 2 * n),
                &format!("recipe `{}` supports at most {MAX_JOINT_N} spins", recipe.name()),
            );
        }
    }

    let output_dir = resolve_path(
        base_dir,
        &raw.output_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(experiment.map(|r| r.name()).unwrap_or("run"))),
    );

    if !d.is_empty() {
        return Err(d);
    }
    let sk = sk.expect("instance loaded when there are no diagnostics");
    let instance = InstanceEcho {
        n: sk.n(),
        seed: sk.seed(),
        rng_id: sk.rng_id().to_string(),
        couplings: sk.upper_triangle(),
        h: sk.fields().to_vec(),
    };
    Ok(ExperimentConfig {
        experiment: experiment.expect("checked"),
        output_dir,
        global_seed,
        instance,
        walk,
        anneal,
        bath,
        collision,
        sampling,
        krylov,
        selection,
        sweep,
        measure,
        stochastic,
        magnetization,
        markovian,
        sk,
    })
}

/// Diagnostics for a config document; empty iff it is runnable.
pub fn validate_config(text: &str, base_dir: &Path) -> Vec<Diagnostic> {
    load_config(text, base_dir, None).err().unwrap_or_default()
}

/// Reads and loads a config file; relative paths resolve against its
/// directory.
pub fn load_config_file(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![Diagnostic::new("<file>", format!("cannot read {}: {e}", path.display()), "check the config path")]
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_config(&text, &base, seed_override)
}
