use coolsim_core::collision::{
    self, Engine, InitialState, MarkovScaling, MarkovianParameters, StrokeSchedule,
};
use coolsim_core::hamiltonians::{BathParameters, Boundary};
use coolsim_core::instances::sample_sk;
use coolsim_core::measure::{self, OutcomeIndexing, SelectionMode, SelectionRule};
use coolsim_core::observables;
use coolsim_core::spinops::DensityMatrix;
use coolsim_core::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn schedule(n: usize, n_c: usize) -> StrokeSchedule {
    StrokeSchedule {
        n_c,
        dt: 2.0,
        sample_dt: 0.5,
        bath: BathParameters { f: 0.6, n_bath: n, ..Default::default() },
        ..Default::default()
    }
}

fn random_density(n: usize) -> impl Strategy<Value = DensityMatrix> {
    let d = 1usize << n;
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |v| {
        let a = DMatrix::from_iterator(d, d, v.into_iter().map(|(x, y)| C64::new(x, y)));
        let m = &a * a.adjoint();
        let t = m.trace();
        DensityMatrix::from_matrix(m / t).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn a_stroke_maps_states_to_states(rho in random_density(2), f in 0.0f64..1.0, seed in 0u64..50) {
        let inst = sample_sk(2, seed).unwrap();
        let bath = BathParameters { f, n_bath: 2, ..Default::default() };
        let r = collision::evolve_stroke(&rho, &inst, &bath, 1.5, 0.5, 1e-12).unwrap();
        let out = &r.rho_s_end;
        prop_assert!((out.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(out.hermiticity_error() < 1e-12);
        prop_assert!(out.eigenvalues().iter().all(|&l| l > -1e-10));
        prop_assert!(r.max_norm_drift < 1e-10);
    }

    #[test]
    fn a_stroke_is_linear_in_the_input(a in random_density(2), b in random_density(2), p in 0.0f64..1.0) {
        let inst = sample_sk(2, 3).unwrap();
        let bath = BathParameters { n_bath: 2, ..Default::default() };
        let run = |rho: &DensityMatrix| {
            collision::evolve_stroke(rho, &inst, &bath, 2.0, 2.0, 0.0).unwrap().rho_s_end.into_matrix()
        };
        let mix = DensityMatrix::from_matrix(a.matrix() * C64::new(p, 0.0) + b.matrix() * C64::new(1.0 - p, 0.0)).unwrap();
        let lhs = run(&mix);
        let rhs = run(&a) * C64::new(p, 0.0) + run(&b) * C64::new(1.0 - p, 0.0);
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }
}

#[test]
fn zero_duration_stroke_is_the_identity() {
    let inst = sample_sk(3, 1).unwrap();
    let rho = DensityMatrix::maximally_mixed(3);
    let r = collision::evolve_stroke(&rho, &inst, &schedule(3, 1).bath, 0.0, 0.5, 1e-12).unwrap();
    assert_eq!(r.rho_s_end, rho);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let inst = sample_sk(4, 8).unwrap();
    let a = collision::run_collision_protocol(&inst, &schedule(4, 3)).unwrap();
    let b = collision::run_collision_protocol(&inst, &schedule(4, 3)).unwrap();
    assert_eq!(a.record, b.record);
    assert_eq!(a.summary, b.summary);
}

#[test]
fn engines_agree() {
    let inst = sample_sk(4, 2).unwrap();
    let mut s = schedule(4, 3);
    s.init_state = InitialState::MaximallyMixed;
    s.engine = Engine::Branch;
    let branch = collision::run_collision_protocol(&inst, &s).unwrap();
    s.engine = Engine::Channel;
    let channel = collision::run_collision_protocol(&inst, &s).unwrap();
    for (x, y) in branch.record.rows.iter().zip(&channel.record.rows) {
        assert!((x.e_p - y.e_p).abs() < 1e-9);
        assert!((x.entropy.unwrap() - y.entropy.unwrap()).abs() < 1e-8);
    }
    let d = branch.final_state().unwrap().trace_distance(channel.final_state().unwrap()).unwrap();
    assert!(d < 1e-9, "{d}");
    assert!(channel.summary.iter().all(|s| s.engine == Engine::Channel));
}

#[test]
fn branch_truncation_threshold_does_not_move_results() {
    let inst = sample_sk(4, 5).unwrap();
    let mut s = schedule(4, 4);
    s.engine = Engine::Branch;
    s.branch_tol = 1e-14;
    let fine = collision::run_collision_protocol(&inst, &s).unwrap();
    s.branch_tol = 1e-10;
    let coarse = collision::run_collision_protocol(&inst, &s).unwrap();
    let d = fine.final_state().unwrap().trace_distance(coarse.final_state().unwrap()).unwrap();
    assert!(d < 1e-8, "{d}");
    assert!(coarse.summary.last().unwrap().branch_count <= fine.summary.last().unwrap().branch_count);
}

#[test]
fn uncoupled_strokes_keep_the_problem_energy() {
    let inst = sample_sk(3, 4).unwrap();
    let mut s = schedule(3, 4);
    s.j_schedule = vec![(2, 0.0)];
    let run = collision::run_collision_protocol(&inst, &s).unwrap();
    let e1 = run.summary[0].e_p_post;
    for st in &run.summary[1..] {
        assert_eq!(st.coupling_j, 0.0);
        assert!((st.e_p_post - e1).abs() < 1e-10);
    }
    // H_p alone cannot change the entropy either.
    let s1 = run.summary[0].entropy_post;
    assert!(run.summary.iter().skip(1).all(|st| (st.entropy_post - s1).abs() < 1e-8));
}

#[test]
fn cooling_lowers_the_problem_energy() {
    let inst = sample_sk(5, 1).unwrap();
    let s = StrokeSchedule { bath: BathParameters { n_bath: 5, ..Default::default() }, sample_dt: 5.0, ..Default::default() };
    let run = collision::run_collision_protocol(&inst, &s).unwrap();
    assert!(run.record.final_e_p().unwrap() < run.record.rows[0].e_p - 1.0);
    assert!(run.record.check_bounds(5).is_ok());
}

#[test]
fn open_chain_and_yy_coupling_run() {
    let inst = sample_sk(3, 6).unwrap();
    let mut s = schedule(3, 2);
    s.bath.boundary = Boundary::Open;
    s.bath.coupling_yy = true;
    let run = collision::run_collision_protocol(&inst, &s).unwrap();
    assert!(run.aborted.is_none());
    assert_eq!(run.record.metadata["boundary"].as_str(), Some("open"));
    assert_eq!(run.record.metadata["coupling_yy"].as_bool(), Some(true));
}

#[test]
fn unscaled_short_stroke_reproduces_the_long_stroke() {
    let inst = sample_sk(3, 2).unwrap();
    let base = schedule(3, 1);
    let long = collision::run_collision_protocol(&inst, &base).unwrap();
    for scaling in [MarkovScaling::Interaction, MarkovScaling::Alpha] {
        let params = MarkovianParameters { dt_short: base.dt, n_short: 1, scaling, reference_dt: base.dt };
        let short = collision::run_markovian_mode(&inst, &base, &params).unwrap();
        assert_eq!(short.record.rows, long.record.rows);
        assert_eq!(short.record.metadata["markov_factor"].as_float(), Some(1.0));
    }
}

#[test]
fn markovian_factor_follows_the_inverse_square_root_law() {
    let inst = sample_sk(3, 2).unwrap();
    let params = MarkovianParameters { dt_short: 0.25, n_short: 2, ..Default::default() };
    let run = collision::run_markovian_mode(&inst, &schedule(3, 1), &params).unwrap();
    assert_eq!(run.record.metadata["markov_factor"].as_float(), Some(2.0));
    assert_eq!(run.summary[0].coupling_j, 2.0);
    assert_eq!(run.record.rows.len(), 3);
}

#[test]
fn sweep_is_sorted_and_reports_argmin() {
    let inst = sample_sk(3, 3).unwrap();
    let table = collision::final_energy_sweep(&inst, &[0.9, 0.1, 0.5], &schedule(3, 2)).unwrap();
    let fs: Vec<f64> = table.points.iter().map(|p| p.f).collect();
    assert_eq!(fs, vec![0.1, 0.5, 0.9]);
    assert_eq!(table.failures(), 0);
    let best = table
        .points
        .iter()
        .min_by(|a, b| a.outcome.as_ref().unwrap().0.total_cmp(&b.outcome.as_ref().unwrap().0))
        .unwrap();
    assert_eq!(table.argmin(), Some(best.f));
}

#[test]
fn unselected_measurement_leaves_the_protocol_unchanged() {
    let inst = sample_sk(3, 7).unwrap();
    let s = schedule(3, 3);
    let plain = collision::run_collision_protocol(&inst, &s).unwrap();
    let measured = measure::run_measured_protocol(&inst, &s, &SelectionRule::default()).unwrap();
    for (a, b) in plain.record.rows.iter().zip(&measured.run.record.rows) {
        assert!((a.e_p - b.e_p).abs() < 1e-10);
        assert!((a.fidelity - b.fidelity).abs() < 1e-10);
    }
    assert!(measured.log.iter().all(|e| e.chosen.is_none() && e.probability == 1.0));
}

#[test]
fn post_selection_keeps_the_state_pure() {
    let inst = sample_sk(3, 1).unwrap();
    let rule = SelectionRule { mode: SelectionMode::PostSelectFirstExcited, ..Default::default() };
    let run = measure::run_measured_protocol(&inst, &schedule(3, 4), &rule).unwrap();
    for e in &run.log {
        assert!((e.purity_post - 1.0).abs() < 1e-9, "stroke {}: {}", e.stroke, e.purity_post);
        assert_eq!(e.chosen, Some(1));
    }
}

#[test]
fn stochastic_runs_replay_from_their_seed() {
    let inst = sample_sk(3, 1).unwrap();
    let rule = |seed| SelectionRule { mode: SelectionMode::Stochastic, rng_seed: seed, indexing: OutcomeIndexing::Level };
    let a = measure::run_measured_protocol(&inst, &schedule(3, 4), &rule(42)).unwrap();
    let b = measure::run_measured_protocol(&inst, &schedule(3, 4), &rule(42)).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.run.record, b.run.record);
    let picks: Vec<Vec<Option<usize>>> = (0..8)
        .map(|s| measure::run_measured_protocol(&inst, &schedule(3, 4), &rule(s)).unwrap().log.iter().map(|e| e.chosen).collect())
        .collect();
    assert!(picks.iter().any(|p| p != &picks[0]), "different seeds never diverged");
}

#[test]
fn measurement_scan_splits_the_energy() {
    let inst = sample_sk(4, 2).unwrap();
    let scan = measure::measure_after_strokes(&inst, &schedule(4, 3), 2).unwrap();
    let total: f64 = scan.rows.iter().map(|r| r.probability).sum();
    assert!((total - 1.0).abs() < 1e-10);
    let mean: f64 = scan.rows.iter().filter_map(|r| r.e_p_cond.map(|e| e * r.probability)).sum();
    assert!((mean - scan.e_p_pre).abs() < 1e-9);
    assert!(scan.fraction_below > 0.0 && scan.fraction_below < 1.0);
    let plain = collision::run_collision_protocol(&inst, &StrokeSchedule { n_c: 2, ..schedule(4, 3) }).unwrap();
    let e_plain = observables::problem_energy(plain.final_state().unwrap(), &inst);
    assert!((e_plain - scan.e_p_pre).abs() < 1e-10);
}
