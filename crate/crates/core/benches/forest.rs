//! Parallel vs sequential forest benchmarks.
//!
//! Run with `cargo bench -p uplift-forest`. The "seq" variants force the
//! sequential code path at runtime, so one binary covers both modes; on a
//! single-core host the two should land within noise of each other.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use uplift_forest::causal::{fit_causal_forest, CenteredData, CenteringDiagnostics, ForestMeta};
use uplift_forest::parallel::force_sequential;
use uplift_forest::regression::{fit_regression_forest, ForestConfig};
use uplift_forest::synthetic::{generate, Baseline, EffectSpec, SyntheticSpec};

fn bench_spec(n: usize) -> SyntheticSpec {
    SyntheticSpec {
        n,
        p: 10,
        arm_probs: vec![0.5, 0.5],
        baseline: Baseline::Linear {
            coefficients: vec![1.0, -0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        },
        effects: vec![EffectSpec::Step {
            threshold: 0.0,
            below: -1.0,
            above: 1.0,
        }],
        noise_sd: 1.0,
        purchase_sparsity: 0.0,
        seed: 99,
    }
}

fn small_cfg() -> ForestConfig {
    ForestConfig {
        num_trees: 60,
        ..ForestConfig::default()
    }
}

fn centered(n: usize) -> (uplift_forest::Matrix, CenteredData) {
    let data = generate(&bench_spec(n)).unwrap();
    let ds = data.dataset;
    let w_mean = ds.treatment.iter().map(|&w| f64::from(w)).sum::<f64>() / ds.n() as f64;
    let y_mean = ds.outcome.iter().sum::<f64>() / ds.n() as f64;
    let cd = CenteredData {
        covariates: ds.covariates.clone(),
        y_resid: ds.outcome.iter().map(|y| y - y_mean).collect(),
        w_resid: ds
            .treatment
            .iter()
            .map(|&w| f64::from(w) - w_mean)
            .collect(),
        e_hat: vec![w_mean; ds.n()],
        diagnostics: CenteringDiagnostics::default(),
    };
    (ds.covariates, cd)
}

fn bench_forests(c: &mut Criterion) {
    let n = 2000;
    let data = generate(&bench_spec(n)).unwrap();
    let x = data.dataset.covariates.clone();
    let y = data.dataset.outcome.clone();
    let (_, cd) = centered(n);
    let cfg = small_cfg();

    let mut group = c.benchmark_group("fit_regression");
    group.sample_size(10);
    for (label, seq) in [("par", false), ("seq", true)] {
        group.bench_function(label, |b| {
            force_sequential(seq);
            b.iter(|| fit_regression_forest(&x, &y, &cfg).unwrap());
        });
    }
    group.finish();

    let mut group = c.benchmark_group("fit_causal");
    group.sample_size(10);
    for (label, seq) in [("par", false), ("seq", true)] {
        group.bench_function(label, |b| {
            force_sequential(seq);
            b.iter(|| fit_causal_forest(&cd, &cfg, ForestMeta::default()).unwrap());
        });
    }
    group.finish();

    force_sequential(false);
    let forest = fit_causal_forest(&cd, &cfg, ForestMeta::default()).unwrap();
    let mut group = c.benchmark_group("predict_ite");
    group.sample_size(20);
    for (label, seq) in [("par", false), ("seq", true)] {
        group.bench_function(label, |b| {
            force_sequential(seq);
            b.iter_batched(
                || x.clone(),
                |xq| forest.predict_ite(&xq).unwrap(),
                BatchSize::LargeInput,
            );
        });
    }
    group.finish();
    force_sequential(false);
}

criterion_group!(benches, bench_forests);
criterion_main!(benches);
