//! Recipe registry and the experiment runner.

use std::path::Path;

use coolsim_core::collision::{self, CollisionRun, MarkovianParameters, StrokeSchedule};
use coolsim_core::evolve::{self, format_float, TrajectoryRecord};
use coolsim_core::hamiltonians::BathParameters;
use coolsim_core::measure::{self, SelectionRule};
use coolsim_core::observables::{self, MagnetizationEstimator};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{check_unit, point_dir, Emitter};
use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Recipe {
    Walk,
    Anneal,
    Collide,
    Fsweep,
    Entropy,
    MeasureScan,
    Postselect,
    Stochastic,
    Magnetization,
    MarkovianCompare,
}

impl Recipe {
    pub const ALL: [Recipe; 10] = [
        Recipe::Walk,
        Recipe::Anneal,
        Recipe::Collide,
        Recipe::Fsweep,
        Recipe::Entropy,
        Recipe::MeasureScan,
        Recipe::Postselect,
        Recipe::Stochastic,
        Recipe::Magnetization,
        Recipe::MarkovianCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Walk => "walk",
            Recipe::Anneal => "anneal",
            Recipe::Collide => "collide",
            Recipe::Fsweep => "fsweep",
            Recipe::Entropy => "entropy",
            Recipe::MeasureScan => "measure-scan",
            Recipe::Postselect => "postselect",
            Recipe::Stochastic => "stochastic",
            Recipe::Magnetization => "magnetization",
            Recipe::MarkovianCompare => "markovian-compare",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn description(self) -> &'static str {
        match self {
            Recipe::Walk => "two-stage quench walk from the driver ground state",
            Recipe::Anneal => "linear anneal of the driver strength",
            Recipe::Collide => "repeated collisions with fresh bath chains",
            Recipe::Fsweep => "final problem energy of the collision protocol over a grid of f",
            Recipe::Entropy => "system entropy over ten strokes for several f",
            Recipe::MeasureScan => "bath-energy outcome table after n_measure_at strokes",
            Recipe::Postselect => "collisions post-selected on the first excited bath eigenstate",
            Recipe::Stochastic => "seeded trajectories with sampled bath outcomes and their ensemble mean",
            Recipe::Magnetization => "bath x-magnetization, free and interacting, against the closed form",
            Recipe::MarkovianCompare => "finite strokes against many short strokes with scaled prefactor",
        }
    }

    /// Whether the recipe simulates the joint system + bath register.
    pub fn uses_bath(self) -> bool {
        !matches!(self, Recipe::Walk | Recipe::Anneal)
    }
}

impl Serialize for Recipe {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// What a successful run produced.
#[derive(Debug, Default)]
pub struct RunReport {
    pub files: Vec<std::path::PathBuf>,
    pub warnings: Vec<String>,
}

/// Runs the configured recipe with `workers` threads for the sweep pool.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<RunReport, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Bounds(format!("worker pool: {e}")))?;
    pool.install(|| {
        let mut ctx = Context { config, out: Emitter::new(), warnings: Vec::new() };
        match config.experiment {
            Recipe::Walk => ctx.walk(),
            Recipe::Anneal => ctx.anneal(),
            Recipe::Collide => ctx.collide(),
            Recipe::Fsweep => ctx.fsweep(),
            Recipe::Entropy => ctx.entropy(),
            Recipe::MeasureScan => ctx.measure_scan(),
            Recipe::Postselect => ctx.postselect(),
            Recipe::Stochastic => ctx.stochastic(),
            Recipe::Magnetization => ctx.magnetization(),
            Recipe::MarkovianCompare => ctx.markovian_compare(),
        }?;
        Ok(RunReport { files: ctx.out.written, warnings: ctx.warnings })
    })
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    out: Emitter,
    warnings: Vec<String>,
}

fn float(x: f64) -> String {
    format_float(x)
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

impl Context<'_> {
    fn dir(&self) -> &Path {
        &self.config.output_dir
    }

    fn n(&self) -> usize {
        self.config.sk.n()
    }

    fn metadata(&mut self, dir: &Path, result: toml::Table) -> Result<(), RunError> {
        let mut result = result;
        result.insert("coolsim_version".into(), env!("CARGO_PKG_VERSION").into());
        let config = self.config.to_table();
        self.out.metadata(dir, &config, &result)
    }

    fn record(&mut self, dir: &Path, record: &TrajectoryRecord) -> Result<(), RunError> {
        let n = self.n();
        self.out.trajectory(dir, record, n)?;
        self.metadata(dir, record.metadata.clone())
    }

    /// Trajectory, summary and metadata of a collision run; an aborted run is
    /// written out and then reported as an error.
    fn collision_files(&mut self, dir: &Path, run: &CollisionRun, extra: toml::Table) -> Result<(), RunError> {
        let n = self.n();
        self.out.trajectory(dir, &run.record, n)?;
        self.out.summary(dir, &run.summary)?;
        let mut meta = run.record.metadata.clone();
        meta.extend(extra);
        self.metadata(dir, meta)
    }

    fn walk(&mut self) -> Result<(), RunError> {
        let c = self.config;
        let rec = evolve::run_quench_walk(&c.sk, &c.walk_parameters(), c.sampling.sample_dt, &c.krylov_options())?;
        self.record(&c.output_dir, &rec)
    }

    fn anneal(&mut self) -> Result<(), RunError> {
        let c = self.config;
        let rec = evolve::run_anneal(&c.sk, &c.anneal_parameters(), c.sampling.sample_dt, &c.krylov_options())?;
        if let Some(w) = rec.metadata.get("warning").and_then(|w| w.as_str()) {
            self.warnings.push(w.to_string());
        }
        self.record(&c.output_dir, &rec)
    }

    fn collide(&mut self) -> Result<(), RunError> {
        let c = self.config;
        let run = collision::run_collision_protocol(&c.sk, &c.stroke_schedule())?;
        self.collision_files(&c.output_dir, &run, toml::Table::new())?;
        aborted(&run)
    }

    /// Runs one collision protocol per `f` on the worker pool and writes
    /// each point's files as soon as it finishes.
    fn f_points(&mut self) -> Vec<(f64, Result<CollisionRun, String>)> {
        let c = self.config;
        type Point = (f64, Result<(CollisionRun, Vec<std::path::PathBuf>), String>);
        let results: Vec<Point> = c
            .sweep
            .f_values
            .par_iter()
            .map(|&f| {
                let mut schedule = c.stroke_schedule();
                schedule.bath.f = f;
                let dir = c.output_dir.join(point_dir("f", f));
                let outcome = (|| {
                    let run = collision::run_collision_protocol(&c.sk, &schedule).map_err(|e| e.to_string())?;
                    let mut ctx = Context { config: c, out: Emitter::new(), warnings: Vec::new() };
                    let mut extra = toml::Table::new();
                    extra.insert("point_f".into(), f.into());
                    ctx.collision_files(&dir, &run, extra).map_err(|e| e.to_string())?;
                    if let Some(msg) = &run.aborted {
                        return Err(msg.clone());
                    }
                    Ok((run, ctx.out.written))
                })();
                (f, outcome)
            })
            .collect();
        results
            .into_iter()
            .map(|(f, r)| match r {
                Ok((run, files)) => {
                    self.out.written.extend(files);
                    (f, Ok(run))
                }
                Err(e) => (f, Err(e)),
            })
            .collect()
    }

    fn fsweep(&mut self) -> Result<(), RunError> {
        let points = self.f_points();
        let rows = points.iter().map(|(f, r)| match r {
            Ok(run) => {
                let last = run.record.last().expect("rows");
                vec![float(*f), float(last.e_p), float(last.fidelity), String::new()]
            }
            Err(e) => vec![float(*f), String::new(), String::new(), e.clone()],
        });
        let path = self.dir().join("fsweep.csv");
        self.out.table(path, &["f", "e_p_final", "fidelity_final", "error"], rows.collect::<Vec<_>>())?;
        let best = points
            .iter()
            .filter_map(|(f, r)| r.as_ref().ok().map(|run| (*f, run.record.final_e_p().expect("rows"))))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let mut meta = base_result(self.config, "fsweep");
        if let Some((f, e)) = best {
            meta.insert("argmin_f".into(), f.into());
            meta.insert("min_e_p_final".into(), e.into());
        }
        let failures = partial(&points);
        meta.insert("failures".into(), (failures.len() as i64).into());
        let dir = self.config.output_dir.clone();
        self.metadata(&dir, meta)?;
        failed_points(failures, points.len())
    }

    fn entropy(&mut self) -> Result<(), RunError> {
        let points = self.f_points();
        let mut rows = Vec::new();
        for (f, r) in &points {
            if let Ok(run) = r {
                for row in &run.record.rows {
                    rows.push(vec![
                        float(*f),
                        float(row.time),
                        row.stroke_index.map(|k| k.to_string()).unwrap_or_default(),
                        opt_float(row.entropy),
                        float(row.fidelity),
                    ]);
                }
            }
        }
        let path = self.dir().join("entropy.csv");
        self.out.table(path, &["f", "time", "stroke_index", "entropy", "fidelity"], rows)?;
        let mut meta = base_result(self.config, "entropy");
        meta.insert("entropy_max".into(), (self.n() as f64 * std::f64::consts::LN_2).into());
        let failures = partial(&points);
        meta.insert("failures".into(), (failures.len() as i64).into());
        let dir = self.config.output_dir.clone();
        self.metadata(&dir, meta)?;
        failed_points(failures, points.len())
    }

    fn measure_scan(&mut self) -> Result<(), RunError> {
        let c = self.config;
        let scan = measure::measure_after_strokes(&c.sk, &c.stroke_schedule(), c.measure.n_measure_at)?;
        self.out.outcomes(&c.output_dir, &scan.rows)?;
        let mut extra = toml::Table::new();
        extra.insert("e_p_pre".into(), scan.e_p_pre.into());
        self.collision_files(&c.output_dir, &scan.run, extra)
    }

    fn postselect(&mut self) -> Result<(), RunError> {
        let c = self.config;
        let run = measure::run_measured_protocol(&c.sk, &c.stroke_schedule(), &c.selection)?;
        self.out.selection_log(&c.output_dir, &run.log)?;
        self.collision_files(&c.output_dir, &run.run, toml::Table::new())?;
        aborted(&run.run)
    }

    fn stochastic(&mut self) -> Result<(), RunError> {
        let c = self.config;
        let schedule = c.stroke_schedule();
        let plain = collision::run_collision_protocol(&c.sk, &schedule)?;
        let plain_dir = c.output_dir.join("plain");
        self.collision_files(&plain_dir, &plain, toml::Table::new())?;
        aborted(&plain)?;
        type Outcome = Result<(measure::MeasuredRun, Vec<std::path::PathBuf>), String>;
        let results: Vec<Outcome> = (0..c.stochastic.trajectories)
            .into_par_iter()
            .map(|k| {
                let rule = SelectionRule { rng_seed: c.selection.rng_seed + k as u64, ..c.selection };
                let run = measure::run_measured_protocol(&c.sk, &schedule, &rule).map_err(|e| e.to_string())?;
                let dir = c.output_dir.join(format!("trajectory_{k:04}"));
                let mut ctx = Context { config: c, out: Emitter::new(), warnings: Vec::new() };
                ctx.out.selection_log(&dir, &run.log).map_err(|e| e.to_string())?;
                let mut extra = toml::Table::new();
                extra.insert("trajectory".into(), (k as i64).into());
                extra.insert("trajectory_rng_seed".into(), (rule.rng_seed as i64).into());
                ctx.collision_files(&dir, &run.run, extra).map_err(|e| e.to_string())?;
                if let Some(msg) = &run.run.aborted {
                    return Err(msg.clone());
                }
                Ok((run, ctx.out.written))
            })
            .collect();
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for (k, r) in results.into_iter().enumerate() {
            match r {
                Ok((run, files)) => {
                    self.out.written.extend(files);
                    runs.push(run);
                }
                Err(e) => failures.push((format!("trajectory {k}"), e)),
            }
        }
        let mut rows = Vec::new();
        for (s, plain_summary) in plain.summary.iter().enumerate() {
            let e: Vec<f64> = runs.iter().filter_map(|r| r.log.get(s).map(|l| l.e_p_post)).collect();
            let fid: Vec<f64> = runs.iter().filter_map(|r| r.log.get(s).map(|l| l.fidelity_post)).collect();
            let m = e.len() as f64;
            if e.is_empty() {
                continue;
            }
            let mean = e.iter().sum::<f64>() / m;
            let se = if e.len() > 1 {
                (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
            } else {
                f64::NAN
            };
            rows.push(vec![
                (s + 1).to_string(),
                e.len().to_string(),
                float(mean),
                if se.is_nan() { String::new() } else { float(se) },
                float(fid.iter().sum::<f64>() / m),
                float(plain_summary.e_p_post),
            ]);
        }
        let path = self.dir().join("ensemble.csv");
        self.out.table(
            path,
            &["stroke", "trajectories", "mean_e_p_post", "std_error", "mean_fidelity_post", "e_p_plain"],
            rows,
        )?;
        let mut meta = base_result(self.config, "stochastic");
        meta.insert("failures".into(), (failures.len() as i64).into());
        let dir = self.config.output_dir.clone();
        self.metadata(&dir, meta)?;
        failed_points(failures, c.stochastic.trajectories)
    }

    fn magnetization(&mut self) -> Result<(), RunError> {
        let c = self.config;
        let m = &c.magnetization;
        let estimator = m.estimator();
        let n = self.n();
        let rows: Vec<Result<[f64; 3], String>> = m
            .f_values
            .par_iter()
            .map(|&f| {
                let bath = BathParameters { f, ..c.bath };
                let free = observables::bath_x_magnetization(None, &bath, estimator).map_err(|e| e.to_string())?.m_x;
                let inter = if m.interacting {
                    observables::bath_x_magnetization(Some(&c.sk), &bath, estimator).map_err(|e| e.to_string())?.m_x
                } else {
                    f64::NAN
                };
                Ok([free, inter, observables::pfeuty_reference(f)])
            })
            .collect();
        let mut table = Vec::new();
        let mut curves: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut fs = Vec::new();
        for (&f, r) in m.f_values.iter().zip(&rows) {
            let [free, inter, thermo] = match r {
                Ok(v) => *v,
                Err(e) => return Err(RunError::Bounds(format!("magnetization at f = {f}: {e}"))),
            };
            check_unit("magnetization: m_x_free", free)?;
            if m.interacting {
                check_unit("magnetization: m_x_interacting", inter)?;
            }
            fs.push(f);
            curves[0].push(free);
            curves[1].push(inter);
            table.push(vec![
                float(f),
                float(free),
                if m.interacting { float(inter) } else { String::new() },
                float(thermo),
                float(estimator.epsilon()),
                n.to_string(),
            ]);
        }
        let path = self.dir().join("magnetization.csv");
        self.out.table(path, &["f", "m_x_free", "m_x_interacting", "m_x_thermo", "epsilon", "N"], table)?;
        let mut meta = base_result(c, "magnetization");
        meta.insert("estimator".into(), estimator.name().into());
        if let MagnetizationEstimator::Correlation = estimator {
            let far = observables::farthest_site(c.bath.n_bath, c.bath.boundary);
            meta.insert("correlation_site".into(), (far as i64).into());
        }
        let mut order: Vec<usize> = (0..fs.len()).collect();
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        let sorted = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let grid = sorted(&fs);
        if let Some(x) = observables::half_maximum_crossing(&grid, &sorted(&curves[0])) {
            meta.insert("half_max_f_free".into(), x.into());
        }
        if m.interacting {
            if let Some(x) = observables::half_maximum_crossing(&grid, &sorted(&curves[1])) {
                meta.insert("half_max_f_interacting".into(), x.into());
            }
        }
        self.metadata(&c.output_dir, meta)
    }

    fn markovian_compare(&mut self) -> Result<(), RunError> {
        let c = self.config;
        let base: StrokeSchedule = c.stroke_schedule();
        let single = collision::run_collision_protocol(&c.sk, &base)?;
        self.collision_files(&c.output_dir.join("finite"), &single, toml::Table::new())?;
        aborted(&single)?;
        let mut rows = vec![comparison_row("finite", &base, 1.0, &single)];
        for &scaling in &c.markovian.scalings {
            let params = MarkovianParameters {
                dt_short: c.markovian.dt_short,
                n_short: c.markovian.n_short,
                scaling,
                reference_dt: c.markovian.reference_dt,
            };
            let run = collision::run_markovian_mode(&c.sk, &base, &params)?;
            self.collision_files(&c.output_dir.join(scaling.name()), &run, toml::Table::new())?;
            aborted(&run)?;
            let factor = run.record.metadata["markov_factor"].as_float().unwrap_or(f64::NAN);
            let short = StrokeSchedule { n_c: params.n_short, dt: params.dt_short, ..base.clone() };
            rows.push(comparison_row(scaling.name(), &short, factor, &run));
        }
        let path = self.dir().join("comparison.csv");
        self.out.table(path, &["run", "dt", "n_strokes", "factor", "e_p_final", "fidelity_final"], rows)?;
        let meta = base_result(c, "markovian-compare");
        self.metadata(&c.output_dir, meta)
    }
}

fn comparison_row(name: &str, schedule: &StrokeSchedule, factor: f64, run: &CollisionRun) -> Vec<String> {
    let last = run.record.last().expect("rows");
    vec![
        name.to_string(),
        float(schedule.dt),
        schedule.n_c.to_string(),
        float(factor),
        float(last.e_p),
        float(last.fidelity),
    ]
}

/// Instance block shared by top-level metadata of multi-run recipes.
fn base_result(c: &ExperimentConfig, protocol: &str) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("protocol".into(), protocol.into());
    t.insert("n".into(), (c.sk.n() as i64).into());
    t.insert("instance_seed".into(), (c.sk.seed() as i64).into());
    t.insert("rng_id".into(), c.sk.rng_id().into());
    if let Ok(g) = coolsim_core::instances::brute_force_ground(&c.sk) {
        t.insert("e_p_ground".into(), g.energy.into());
    }
    t
}

fn aborted(run: &CollisionRun) -> Result<(), RunError> {
    match &run.aborted {
        Some(msg) => Err(RunError::Aborted(msg.clone())),
        None => Ok(()),
    }
}

fn partial<T>(points: &[(f64, Result<T, String>)]) -> Vec<(String, String)> {
    points.iter().filter_map(|(f, r)| r.as_ref().err().map(|e| (format!("f = {f}"), e.clone()))).collect()
}

fn failed_points(failures: Vec<(String, String)>, total: usize) -> Result<(), RunError> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(RunError::Partial { total, failures })
    }
}
