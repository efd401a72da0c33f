//! Behavioral tests for the regression forest: exact algebraic cases,
//! determinism, out-of-bag error on a known signal, and honesty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uplift_forest::regression::{fit_regression_forest, ForestConfig};
use uplift_forest::Matrix;

fn uniform_matrix(n: usize, p: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Matrix::from_columns(cols).unwrap()
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn constant_outcome_predicts_exactly() {
    let x = uniform_matrix(200, 3, 1);
    let y = vec![3.0; 200];
    let forest = fit_regression_forest(&x, &y, &ForestConfig {
        num_trees: 25,
        ..ForestConfig::default()
    })
    .unwrap();
    let pred = forest.predict(&uniform_matrix(50, 3, 2)).unwrap();
    assert_eq!(pred, vec![3.0; 50]);
}

#[test]
fn single_leaf_forest_predicts_the_sample_mean() {
    // min_node_size equal to n forbids any split, so every tree is one leaf
    // holding the full sample (subsampling and honesty disabled).
    let x = uniform_matrix(8, 2, 3);
    let y = vec![1.5, -2.25, 0.75, 4.0, -1.0, 2.5, 0.0, 3.25];
    let cfg = ForestConfig {
        num_trees: 7,
        subsample_fraction: 1.0,
        honesty: false,
        min_node_size: 8,
        seed: 11,
        ..ForestConfig::default()
    };
    let forest = fit_regression_forest(&x, &y, &cfg).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let pred = forest.predict(&uniform_matrix(5, 2, 4)).unwrap();
    assert_eq!(pred, vec![mean; 5]);
}

#[test]
fn refits_are_deterministic_and_seed_sensitive() {
    let x = uniform_matrix(300, 4, 5);
    let y: Vec<f64> = (0..300)
        .map(|i| x.get(i, 0) * 2.0 - x.get(i, 1) + (i % 5) as f64 * 0.1)
        .collect();
    let cfg = ForestConfig {
        num_trees: 40,
        seed: 42,
        ..ForestConfig::default()
    };
    let q = uniform_matrix(80, 4, 6);
    let a = fit_regression_forest(&x, &y, &cfg).unwrap().predict(&q).unwrap();
    let b = fit_regression_forest(&x, &y, &cfg).unwrap().predict(&q).unwrap();
    assert_eq!(a, b);

    let c = fit_regression_forest(&x, &y, &cfg.with_seed(43))
        .unwrap()
        .predict(&q)
        .unwrap();
    assert_ne!(a, c);
}

#[test]
fn oob_error_tracks_a_linear_signal() {
    let n = 4000;
    let x = uniform_matrix(n, 4, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let y: Vec<f64> = (0..n)
        .map(|i| 2.0 * x.get(i, 0) - x.get(i, 1) + rng.gen_range(-0.1..0.1))
        .collect();
    let forest = fit_regression_forest(&x, &y, &ForestConfig {
        num_trees: 300,
        seed: 9,
        ..ForestConfig::default()
    })
    .unwrap();

    let oob = forest.predict_oob(&x).unwrap();
    assert!(oob.fallback_count == 0, "300 trees left {} rows with no out-of-bag vote", oob.fallback_count);
    let err = rmse(&oob.values, &y);
    let spread = std_dev(&y);
    assert!(
        err < 0.25 * spread,
        "out-of-bag rmse {err:.3} too large next to outcome spread {spread:.3}"
    );

    // the out-of-bag estimate should resemble held-out error, not train error
    let q = uniform_matrix(2000, 4, 10);
    let truth: Vec<f64> = (0..2000).map(|i| 2.0 * q.get(i, 0) - q.get(i, 1)).collect();
    let held_out = rmse(&forest.predict(&q).unwrap(), &truth);
    assert!(
        held_out / err < 2.0 && err / held_out < 2.0,
        "oob rmse {err:.3} and held-out rmse {held_out:.3} disagree"
    );
}

#[test]
fn honest_leaves_do_not_memorize_noise() {
    // Pure noise outcome. A non-honest forest that sees every row in every
    // tree can split until it reproduces the training outcomes; an honest
    // forest fills leaves with units the structure never saw.
    let n = 400;
    let x = uniform_matrix(n, 3, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let base = ForestConfig {
        num_trees: 30,
        subsample_fraction: 1.0,
        min_node_size: 1,
        seed: 14,
        ..ForestConfig::default()
    };
    let memorizing = fit_regression_forest(&x, &y, &ForestConfig {
        honesty: false,
        ..base.clone()
    })
    .unwrap();
    let honest = fit_regression_forest(&x, &y, &base).unwrap();

    let train_err_memorizing = rmse(&memorizing.predict(&x).unwrap(), &y);
    let train_err_honest = rmse(&honest.predict(&x).unwrap(), &y);
    assert!(
        train_err_memorizing < 0.05,
        "non-honest forest should fit noise nearly perfectly, rmse {train_err_memorizing:.3}"
    );
    assert!(
        train_err_honest > 5.0 * train_err_memorizing.max(0.02),
        "honest forest reproduced training noise: rmse {train_err_honest:.3}"
    );

    // leaf means cannot leave the outcome range
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    for v in honest.predict(&uniform_matrix(100, 3, 15)).unwrap() {
        assert!(v >= lo && v <= hi);
    }
}

#[test]
fn oob_falls_back_when_every_tree_saw_every_row() {
    let x = uniform_matrix(60, 2, 16);
    let y: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
    let cfg = ForestConfig {
        num_trees: 2,
        subsample_fraction: 1.0,
        seed: 17,
        ..ForestConfig::default()
    };
    let forest = fit_regression_forest(&x, &y, &cfg).unwrap();
    let oob = forest.predict_oob(&x).unwrap();
    assert_eq!(oob.fallback_count, 60);
    assert_eq!(oob.values, forest.predict(&x).unwrap());
}

#[test]
fn config_and_shape_errors_are_reported() {
    let x = uniform_matrix(30, 2, 18);
    let y = vec![0.0; 30];
    assert!(fit_regression_forest(&x, &y[..29], &ForestConfig::default()).is_err());
    assert!(
        fit_regression_forest(&x, &y, &ForestConfig {
            num_trees: 0,
            ..ForestConfig::default()
        })
        .is_err()
    );
    // subsample × honesty leaves fewer units than one honest leaf needs
    assert!(
        fit_regression_forest(&x, &y, &ForestConfig {
            min_node_size: 20,
            ..ForestConfig::default()
        })
        .is_err()
    );
    let forest = fit_regression_forest(&x, &y, &ForestConfig {
        num_trees: 5,
        min_node_size: 3,
        ..ForestConfig::default()
    })
    .unwrap();
    assert!(forest.predict(&uniform_matrix(10, 3, 19)).is_err());
    assert!(forest.predict_oob(&uniform_matrix(29, 2, 20)).is_err());
}
