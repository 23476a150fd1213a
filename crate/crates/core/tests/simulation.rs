//! Monte Carlo checks of the simulation harness and the interaction F test.

use jointmct_core::contrasts::{Family, RowTag};
use jointmct_core::dataset::{LongDataset, Observation};
use jointmct_core::inference::interaction_f_test;
use jointmct_core::models::{CovarianceKind, HcFlavor};
use jointmct_core::simulate::{run_scenario, Scenario};
use jointmct_core::Alternative;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn interaction_f_test_is_uniform_under_the_null() {
    // additive truth with unequal cell sizes
    let mut rng = StdRng::seed_from_u64(404);
    let reps = 2000;
    let mut p = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut obs = Vec::new();
        for b in 0..3 {
            for a in 0..3 {
                for _ in 0..(3 + a + b) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    obs.push(Observation { response: a as f64 + 2.0 * b as f64 + z, a, b });
                }
            }
        }
        let ds = LongDataset::from_observations(
            obs,
            vec!["0".into(), "1".into(), "2".into()],
            vec!["x".into(), "y".into(), "z".into()],
            true,
        )
        .unwrap();
        p.push(interaction_f_test(&ds).unwrap().p);
    }
    p.sort_by(f64::total_cmp);
    // Kolmogorov distance against the uniform, 1% critical value 1.63/sqrt(n)
    let d = p
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / reps as f64).abs().max(((i + 1) as f64 / reps as f64 - v).abs()))
        .fold(0.0, f64::max);
    assert!(d < 1.63 / (reps as f64).sqrt(), "KS distance {d}");
}

#[test]
fn joint_fwer_holds_on_null_grid() {
    let mut grid = Vec::new();
    let mut balanced = Scenario::global_null(3, 2, 8, 1500, 1);
    balanced.alternative = Alternative::TwoSided;
    grid.push(balanced);
    let mut unbalanced = Scenario::global_null(2, 3, 6, 1500, 2);
    unbalanced.n = vec![4, 9, 6, 12, 5, 7, 3, 8, 10];
    grid.push(unbalanced);
    let mut hetero = Scenario::global_null(2, 2, 10, 800, 3);
    hetero.sds = vec![1.0, 2.0, 0.5, 1.0, 3.0, 1.5];
    hetero.covariance = CovarianceKind::Sandwich(HcFlavor::Hc3);
    grid.push(hetero);
    for s in grid {
        let r = run_scenario(&s).unwrap();
        let se = (s.alpha * (1.0 - s.alpha) / r.replications as f64).sqrt();
        assert!(r.fwer_joint <= s.alpha + 3.0 * se, "{:?}: fwer {} > {}", s.n, r.fwer_joint, s.alpha + 3.0 * se);
        assert!((0.0..=1.0).contains(&r.pretest_rate));
        assert!(r.rows.iter().all(|row| row.true_null));
    }
}

#[test]
fn one_interacting_cell_costs_the_pretest_strategy_power() {
    // level 2 helps in every stratum; level 1 misbehaves in the second stratum only
    let mut s = Scenario::global_null(2, 2, 10, 600, 77);
    s.means = vec![0.0, 0.0, 1.0, 0.0, -2.5, 1.0];
    let r = run_scenario(&s).unwrap();
    let pooled = r
        .rows
        .iter()
        .find(|row| row.tag == RowTag::Pooled && row.label.contains("2 - 0"))
        .unwrap();
    assert!(!pooled.true_null);
    assert!(r.pretest_rate > 0.5, "pre-test rate {}", r.pretest_rate);
    let gap = pooled.power_joint - pooled.power_pretest;
    let se = ((pooled.power_joint * (1.0 - pooled.power_joint) + pooled.power_pretest * (1.0 - pooled.power_pretest))
        / r.replications as f64)
        .sqrt();
    assert!(gap > 3.0 * se, "joint {} vs pre-test {}", pooled.power_joint, pooled.power_pretest);
}

#[test]
fn grand_mean_family_runs_in_simulation() {
    let mut s = Scenario::global_null(2, 2, 6, 50, 5);
    s.family = Family::GrandMean;
    s.alternative = Alternative::TwoSided;
    let r = run_scenario(&s).unwrap();
    assert_eq!(r.replications, 50);
}
