use std::path::Path;

use coolsim::config::{load_config, validate_config};
use coolsim::Recipe;
use proptest::prelude::*;

fn keys(text: &str) -> Vec<String> {
    validate_config(text, Path::new(".")).into_iter().map(|d| d.key).collect()
}

#[test]
fn out_of_range_f_names_the_key() {
    let d = validate_config("experiment = \"collide\"\n[bath]\nf = 1.2\n", Path::new("."));
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].key, "bath.f");
    assert!(d[0].message.contains("1.2"));
    assert!(!d[0].remedy.is_empty());
}

#[test]
fn zero_strokes_is_rejected() {
    assert_eq!(keys("experiment = \"collide\"\n[collision]\nn_c = 0\n"), ["collision.n_c"]);
}

#[test]
fn bath_must_match_the_system() {
    let k = keys("experiment = \"collide\"\n[instance]\nn = 3\n[bath]\nn_bath = 4\n");
    assert_eq!(k, ["bath.n_bath"]);
}

#[test]
fn missing_instance_file_is_reported_with_its_path() {
    let d = validate_config("experiment = \"walk\"\n[instance]\nfile = \"no/such/instance.toml\"\n", Path::new("."));
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].key, "instance.file");
    assert!(d[0].message.contains("no/such/instance.toml"), "{}", d[0].message);
}

#[test]
fn unknown_keys_and_recipes_are_diagnosed() {
    assert_eq!(keys("experiment = \"collide\"\n[bath]\nfff = 1\n"), ["bath.fff"]);
    assert_eq!(keys("experiment = \"nope\"\n"), ["experiment"]);
    assert_eq!(keys("[bath]\nf = 0.5\n"), ["experiment"]);
}

#[test]
fn several_problems_are_reported_together() {
    let k = keys("experiment = \"fsweep\"\n[sweep]\nf_values = [0.5, 2.0]\n[collision]\ndt = -1\n[sampling]\nsample_dt = 0\n");
    assert_eq!(k.len(), 3, "{k:?}");
}

#[test]
fn joint_register_size_is_capped() {
    assert_eq!(keys("experiment = \"collide\"\n[instance]\nn = 13\n"), ["instance.n"]);
    // The walk has no bath, so larger systems are fine there.
    assert!(keys("experiment = \"walk\"\n[instance]\nn = 13\n").is_empty());
}

#[test]
fn defaults_follow_the_recipe() {
    let load = |r: &str| load_config(&format!("experiment = \"{r}\"\n"), Path::new("/base"), None).unwrap();
    let c = load("collide");
    assert_eq!(c.instance.n, 9);
    assert_eq!(c.collision.n_c, 5);
    assert_eq!(c.collision.dt, 5.0);
    assert_eq!(c.bath.alpha, 3.0);
    assert_eq!(c.bath.f, 0.6);
    assert_eq!(c.walk.gamma1, 4.0);
    assert_eq!(c.anneal.t_f, 25.0);
    assert_eq!(c.output_dir, Path::new("/base/out/collide"));
    assert_eq!(load("entropy").collision.n_c, 10);
    assert_eq!(load("entropy").sweep.f_values, [0.3, 0.6, 0.9]);
    assert_eq!(load("markovian-compare").collision.n_c, 1);
    assert_eq!(load("postselect").selection.mode, coolsim_core::measure::SelectionMode::PostSelectFirstExcited);
}

#[test]
fn seed_override_replaces_the_global_seed() {
    let text = "experiment = \"collide\"\nglobal_seed = 4\n[instance]\nn = 3\n";
    let a = load_config(text, Path::new("."), None).unwrap();
    let b = load_config(text, Path::new("."), Some(9)).unwrap();
    assert_eq!(a.global_seed, 4);
    assert_eq!(b.global_seed, 9);
    assert_eq!(b.selection.rng_seed, 9);
}

#[test]
fn every_recipe_is_registered_by_name() {
    for r in Recipe::ALL {
        assert_eq!(Recipe::from_name(r.name()), Some(r));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The resolved config echoed into metadata loads back to itself.
    #[test]
    fn resolved_config_round_trips(
        recipe in prop::sample::select(Recipe::ALL.to_vec()),
        n in 2usize..7,
        seed in 0u64..1000,
        f in 0.0f64..=1.0,
        n_c in 1usize..8,
        dt in 0.1f64..10.0,
    ) {
        let text = format!(
            "experiment = \"{}\"\n[instance]\nn = {n}\nseed = {seed}\n[bath]\nf = {f}\n[collision]\nn_c = {n_c}\ndt = {dt}\n",
            recipe.name()
        );
        let a = load_config(&text, Path::new("/x"), None).unwrap();
        let echoed = toml::to_string(&a.to_table()).unwrap();
        let b = load_config(&echoed, Path::new("/x"), None).unwrap();
        prop_assert_eq!(a, b);
    }
}
