use landmix::dataset::{load_dataset, save_dataset, validate_dataset, LoadOptions, ValidationOptions};
use landmix::simgen::{simulate, SimSpec};
use proptest::prelude::*;

fn round_trip(seed: u64, n_sites: usize) {
    let spec = SimSpec {
        seed,
        n_sites,
        ..SimSpec::with_components(3)
    };
    let d = simulate(&spec).unwrap().dataset;
    let dir = tempfile::tempdir().unwrap();
    let (s, o, c) = (dir.path().join("s.csv"), dir.path().join("o.csv"), dir.path().join("c.csv"));
    save_dataset(&d, &s, &o, &c).unwrap();
    let back = load_dataset(&s, &o, &c, &LoadOptions::default()).unwrap();
    assert_eq!(back, d);
    assert!(validate_dataset(&back, &ValidationOptions::default()).is_empty());
}

#[test]
fn saved_simulation_loads_back_identically() {
    round_trip(3, 16);
}

#[test]
fn missing_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("absent.csv");
    let err = load_dataset(&p, &p, &p, &LoadOptions::default()).unwrap_err();
    assert_eq!(err.code(), "MissingFile");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn load_inverts_save(seed in 0u64..10_000, n_sites in 3usize..12) {
        round_trip(seed, n_sites);
    }
}
