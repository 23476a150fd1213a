//! Round trips through the file formats and fixture loading.

use jointmct::fixtures::{load_fixture, Manifest, FIXTURE_DIR_ENV};
use jointmct::io::{read_contrast_csv, read_long_csv, write_contrast_csv, write_long_csv, LongColumns};
use jointmct::Error;
use jointmct_core::contrasts::{build_family, expand_joint, Family, JointBlocks};
use jointmct_core::dataset::{LongDataset, Observation};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use tempfile::TempDir;

fn random_dataset(seed: u64, n_a: usize, n_b: usize) -> LongDataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 3.0).unwrap();
    let mut obs = Vec::new();
    for b in 0..n_b {
        for a in 0..n_a {
            for _ in 0..rng.random_range(1..6) {
                obs.push(Observation {
                    response: noise.sample(&mut rng),
                    a,
                    b,
                });
            }
        }
    }
    LongDataset::from_observations(
        obs,
        (0..n_a).map(|a| format!("d{a}")).collect(),
        (0..n_b).map(|b| format!("s {b}")).collect(),
        true,
    )
    .unwrap()
}

fn cols(ds: &LongDataset) -> LongColumns {
    LongColumns {
        response: "y".into(),
        primary: "a".into(),
        secondary: Some("b".into()),
        primary_order: Some(ds.layout().a_levels.clone()),
        secondary_order: Some(ds.layout().b_levels.clone()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn long_csv_round_trip_is_exact(seed in any::<u64>(), n_a in 2usize..5, n_b in 1usize..4) {
        let ds = random_dataset(seed, n_a, n_b);
        let mut buf = Vec::new();
        write_long_csv(&ds, &mut buf, &cols(&ds)).unwrap();
        let back = read_long_csv(buf.as_slice(), "mem", &cols(&ds)).unwrap();
        prop_assert_eq!(back.layout().cell_n(), ds.layout().cell_n());
        prop_assert_eq!(back.summarize(), ds.summarize());
        prop_assert_eq!(back.rows(), ds.rows());
    }

    #[test]
    fn contrast_csv_round_trip_is_exact(seed in any::<u64>(), n_a in 2usize..5, n_b in 1usize..4, fam in 0usize..4) {
        let ds = random_dataset(seed, n_a, n_b);
        let l = ds.layout();
        let family = [Family::Dunnett { control: None }, Family::Williams, Family::Tukey, Family::GrandMean][fam].clone();
        let proto = build_family(&family, &l.a_levels, &l.a_totals(), true).unwrap();
        let cm = expand_joint(&proto, l, JointBlocks::default()).unwrap();
        let mut buf = Vec::new();
        write_contrast_csv(&cm, &mut buf).unwrap();
        let back = read_contrast_csv(buf.as_slice(), "mem", l).unwrap();
        prop_assert_eq!(back, cm);
    }
}

#[test]
fn contrast_columns_are_matched_by_cell_name() {
    let ds = random_dataset(1, 2, 2);
    let text = "label,s 1:d1,s 1:d0\ndiff,1,-1\n";
    let cm = read_contrast_csv(text.as_bytes(), "mem", ds.layout()).unwrap();
    assert_eq!(cm.row(0), vec![0.0, 0.0, -1.0, 1.0]);
    let unknown = "label,s 9:d0\nx,1\n";
    let e = read_contrast_csv(unknown.as_bytes(), "mem", ds.layout()).unwrap_err();
    assert!(matches!(e, Error::MissingColumn { column, .. } if column == "s 9:d0"));
}

#[test]
fn fixture_directory_can_be_redirected() {
    let m = Manifest::bundled();
    let ibs = m.get("ibs").unwrap();
    let empty = TempDir::new().unwrap();
    match ibs.load_from(empty.path()) {
        Err(Error::FixtureUnavailable { name, reason }) => {
            assert_eq!(name, "ibs");
            assert!(reason.contains("fetch_ibs.R"), "{reason}");
        }
        other => panic!("expected unavailable, got {other:?}"),
    }

    // A stand-in file with the documented cell sizes passes validation.
    let dir = TempDir::new().unwrap();
    let mut text = String::from("resp,dose,gender\n");
    let n = ibs.cell_n.clone().unwrap();
    for (c, &count) in n.iter().enumerate() {
        let gender = if c < 5 { "m" } else { "f" };
        for i in 0..count {
            text.push_str(&format!("{},{},{gender}\n", (i % 7) as f64 * 0.25, c % 5));
        }
    }
    std::fs::write(dir.path().join("ibs.csv"), &text).unwrap();
    std::env::set_var(FIXTURE_DIR_ENV, dir.path());
    let loaded = load_fixture("ibs");
    std::env::remove_var(FIXTURE_DIR_ENV);
    assert!(loaded.is_ok(), "{loaded:?}");

    // One row short is caught against the manifest.
    let short: String = text.lines().take(369).map(|l| format!("{l}\n")).collect();
    std::fs::write(dir.path().join("ibs.csv"), short).unwrap();
    assert!(matches!(ibs.load_from(dir.path()), Err(Error::Config(_))));
}
