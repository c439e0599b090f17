use hyperopinion::regression::{
    evaluate_with, fit_ols, FeatureSpec, Source, SourceSet, SplitManifest, Target, DEFAULT_RIDGE,
};
use hyperopinion::seed::rng_from_seed;
use hyperopinion::sweep::{run_cell, standard_betas, standard_qs, SweepConfig};
use hyperopinion::Execution;
use proptest::prelude::*;
use rand::Rng;

/// Solves the normal equations of `[1 | X]` by Cholesky.
fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len() + 1;
    let row =
        |r: &Vec<f64>| -> Vec<f64> { std::iter::once(1.0).chain(r.iter().copied()).collect() };
    let mut g = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (r, &t) in x.iter().zip(y) {
        let z = row(r);
        for i in 0..p {
            rhs[i] += z[i] * t;
            for j in 0..p {
                g[i][j] += z[i] * z[j];
            }
        }
    }
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = if i == j {
                (g[i][i] - s).sqrt()
            } else {
                (g[i][j] - s) / l[j][j]
            };
        }
    }
    let mut z = vec![0.0; p];
    for i in 0..p {
        z[i] = (rhs[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        b[i] = (z[i] - (i + 1..p).map(|k| l[k][i] * b[k]).sum::<f64>()) / l[i][i];
    }
    b
}

#[test]
fn qr_fit_agrees_with_normal_equations() {
    let mut rng = rng_from_seed(99);
    let x: Vec<Vec<f64>> = (0..100)
        .map(|_| (0..5).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| 0.7 - 1.2 * r[0] + 0.3 * r[2] + 2.0 * r[4] + rng.random_range(-0.5..0.5))
        .collect();
    let fit = fit_ols(&x, &y, 0.0, Execution::Parallel).unwrap();
    let b = normal_equations(&x, &y);
    assert!((fit.intercept - b[0]).abs() < 1e-6);
    for j in 0..5 {
        assert!(
            (fit.weights[j] - b[j + 1]).abs() < 1e-6,
            "{j}: {} vs {}",
            fit.weights[j],
            b[j + 1]
        );
    }
}

fn train_rmse(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let fit = fit_ols(x, y, 0.0, Execution::Serial).unwrap();
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(r, t)| (fit.predict(r) - t).powi(2))
        .sum();
    (sse / y.len() as f64).sqrt()
}

proptest! {
    #[test]
    fn more_features_never_raise_training_error(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 12..40),
        y_seed in any::<u64>(),
        keep in 1usize..6,
    ) {
        let mut rng = rng_from_seed(y_seed);
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 0.5 + rng.random_range(-1.0..1.0)).collect();
        let sub: Vec<Vec<f64>> = rows.iter().map(|r| r[..keep].to_vec()).collect();
        prop_assert!(train_rmse(&rows, &y) <= train_rmse(&sub, &y) + 1e-9);
    }

    #[test]
    fn split_is_balanced_per_cell(runs in 5u32..60, nb in 1usize..4, nq in 1usize..4, seed in any::<u64>()) {
        let cfg = SweepConfig { betas: vec![0.5; nb], qs: vec![0.5; nq], runs, ..SweepConfig::default() };
        let split = SplitManifest::new(&cfg, seed).unwrap();
        let expected = (0.2 * f64::from(runs)).round() as usize;
        for (bi, qi) in cfg.cells() {
            let test = (0..runs).filter(|&r| split.is_test(bi, qi, r)).count();
            prop_assert_eq!(test, expected);
        }
        let mut text = Vec::new();
        split.write_tsv(&mut text).unwrap();
        prop_assert_eq!(SplitManifest::read_tsv(&text[..]).unwrap(), split);
    }
}

#[test]
fn constant_predictor_baselines() {
    // Population standard deviation of each balanced grid, computed directly.
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    assert!((sd(&standard_qs()) - (99.0f64 / 1200.0).sqrt()).abs() < 1e-12);
    assert!((sd(&standard_betas()) - (80.0f64 / 1200.0).sqrt()).abs() < 1e-12);

    let cfg = SweepConfig {
        runs: 5,
        n: 20,
        timesteps: 2,
        ..SweepConfig::default()
    };
    let split = SplitManifest::new(&cfg, 4).unwrap();
    let spec = FeatureSpec::new(2, SourceSet::only(Source::NA)).unwrap();
    let reports = evaluate_with(
        &cfg,
        |bi, qi| run_cell(&cfg, bi, qi, Execution::Parallel),
        &[Target::Q, Target::Beta],
        &[spec],
        &split,
        DEFAULT_RIDGE,
        Execution::Parallel,
    )
    .unwrap();
    assert!((reports[0].baseline_rmse - 0.2872).abs() < 5e-5);
    assert!((reports[1].baseline_rmse - 0.2582).abs() < 5e-5);
    assert_eq!(reports[0].train_runs + reports[0].test_runs, 450);
    assert_eq!(reports[0].test_runs, 90);
}

#[test]
fn mismatched_split_is_rejected() {
    let cfg = SweepConfig {
        runs: 5,
        n: 20,
        timesteps: 2,
        betas: vec![0.5],
        qs: vec![0.1, 0.2],
        ..SweepConfig::default()
    };
    let other = SweepConfig {
        runs: 6,
        ..cfg.clone()
    };
    let split = SplitManifest::new(&other, 0).unwrap();
    let spec = FeatureSpec::new(2, SourceSet::FULL).unwrap();
    let r = evaluate_with(
        &cfg,
        |bi, qi| run_cell(&cfg, bi, qi, Execution::Serial),
        &[Target::Q],
        &[spec],
        &split,
        0.0,
        Execution::Serial,
    );
    assert!(r.is_err());
}
