mod common;

use common::*;
use hdselect_core::solver::{
    fit_lasso, fit_lasso_warm, fit_ridge, kkt_check, lambda_max, objective, regularization_path,
    Algorithm, CoordinateOrder, FitOptions, PathGrid, PenaltyConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn lambda_zero_matches_normal_equations() {
    let mut r = rng(1);
    let (x, y) = sparse_instance(60, 8, 3, 1.0, &mut r);
    let fit = fit_lasso(&x, &y, &PenaltyConfig::uniform(0.0, 8).unwrap(), &FitOptions::default()).unwrap();
    let ols = ols_normal_equations(&x, &y);
    assert!((fit.coefficients - ols).amax() < 1e-8);
}

#[test]
fn at_and_above_lambda_max_everything_is_zero() {
    let mut r = rng(2);
    for _ in 0..10 {
        let (x, y) = sparse_instance(40, 10, 2, 0.7, &mut r);
        let psi: Vec<f64> = (0..10).map(|_| r.random_range(0.5..2.0)).collect();
        let lmax = lambda_max(&x, &y, &psi).unwrap();
        assert!((lmax - lambda_max_direct(&x, &y, &psi)).abs() <= 1e-12 * lmax);
        for scale in [1.0, 1.5] {
            let pen = PenaltyConfig::new(lmax * scale, psi.clone()).unwrap();
            let fit = fit_lasso(&x, &y, &pen, &FitOptions::default()).unwrap();
            assert!(fit.coefficients.iter().all(|b| *b == 0.0));
            assert!(fit.active_set.is_empty());
            assert!(kkt_check(&fit, &x, &y, &pen) <= 1e-12);
        }
        let pen = PenaltyConfig::new(lmax * 0.99, psi.clone()).unwrap();
        let fit = fit_lasso(&x, &y, &pen, &FitOptions::default()).unwrap();
        assert!(!fit.active_set.is_empty());
    }
}

#[test]
fn single_column_closed_forms() {
    let mut r = rng(3);
    let n = 50;
    let x = orthonormal_design(n, 1, &mut r);
    let y = gauss_vector(n, &mut r) + x.column(0) * 0.4;
    let rho = x.column(0).dot(&y) / n as f64;
    let lmax = lambda_max(&x, &y, &[1.0]).unwrap();
    assert!((lmax - 2.0 * n as f64 * rho.abs()).abs() < 1e-10 * lmax);
    for lambda in [0.0, 1.0, 5.0, 0.5 * lmax, 2.0 * lmax] {
        let pen = PenaltyConfig::uniform(lambda, 1).unwrap();
        let fit = fit_lasso(&x, &y, &pen, &FitOptions::default()).unwrap();
        let expected = rho.signum() * (rho.abs() - lambda / (2.0 * n as f64)).max(0.0);
        assert!((fit.coefficients[0] - expected).abs() < 1e-10);
        let ridge = fit_ridge(&x, &y, &pen).unwrap();
        assert!((ridge[0] - rho / (1.0 + lambda / n as f64)).abs() < 1e-10);
    }
}

#[test]
fn orthonormal_design_is_coordinatewise_soft_thresholding() {
    let mut r = rng(4);
    let n = 80;
    let x = orthonormal_design(n, 6, &mut r);
    let y = &x * DVector::from_vec(vec![1.0, -0.5, 0.2, 0.0, 0.0, 0.05]) + gauss_vector(n, &mut r) * 0.3;
    let lmax = lambda_max(&x, &y, &[1.0; 6]).unwrap();
    let mut prev: Option<DVector<f64>> = None;
    for k in 0..=20 {
        let lambda = lmax * k as f64 / 20.0;
        let fit = fit_lasso(&x, &y, &PenaltyConfig::uniform(lambda, 6).unwrap(), &FitOptions::default()).unwrap();
        for j in 0..6 {
            let rho = x.column(j).dot(&y) / n as f64;
            let st = rho.signum() * (rho.abs() - lambda / (2.0 * n as f64)).max(0.0);
            assert!((fit.coefficients[j] - st).abs() < 1e-10);
        }
        if let Some(p) = &prev {
            for j in 0..6 {
                assert!(fit.coefficients[j].abs() <= p[j].abs() + 1e-12);
            }
        }
        prev = Some(fit.coefficients);
    }
}

#[test]
fn ridge_zero_penalty_is_ols_and_huge_penalty_vanishes() {
    let mut r = rng(5);
    let (x, y) = sparse_instance(50, 6, 3, 1.0, &mut r);
    let ols = ols_normal_equations(&x, &y);
    let b0 = fit_ridge(&x, &y, &PenaltyConfig::uniform(0.0, 6).unwrap()).unwrap();
    assert!((b0 - &ols).amax() < 1e-10);
    let big = fit_ridge(&x, &y, &PenaltyConfig::uniform(1e9, 6).unwrap()).unwrap();
    assert!(big.norm() < 1e-6 * ols.norm());
}

#[test]
fn sign_pattern_oracle_agrees() {
    let mut r = rng(6);
    for _ in 0..25 {
        let p = r.random_range(1..=6);
        let n = r.random_range(p + 5..=40);
        let (x, y) = sparse_instance(n, p, p.min(2), 0.8, &mut r);
        let psi: Vec<f64> = (0..p).map(|_| r.random_range(0.5..1.5)).collect();
        let lambda = r.random_range(0.0..1.0) * lambda_max_direct(&x, &y, &psi);
        let pen = PenaltyConfig::new(lambda, psi.clone()).unwrap();
        let fit = fit_lasso(&x, &y, &pen, &FitOptions::default()).unwrap();
        let oracle = sign_pattern_minimum(&x, &y, lambda, &psi);
        assert!((fit.objective - oracle).abs() <= 1e-8, "{} vs {}", fit.objective, oracle);
        assert!((objective(&x, &y, &fit.coefficients, &pen) - lasso_objective(&x, &y, &fit.coefficients, lambda, &psi)).abs() < 1e-12);
    }
}

#[test]
fn both_algorithms_reach_the_same_solution() {
    let mut r = rng(7);
    let (x, y) = sparse_instance(60, 30, 4, 1.0, &mut r);
    let lmax = lambda_max(&x, &y, &[1.0; 30]).unwrap();
    let pen = PenaltyConfig::uniform(0.1 * lmax, 30).unwrap();
    let mut opts = FitOptions { algorithm: Algorithm::Naive, ..Default::default() };
    let a = fit_lasso(&x, &y, &pen, &opts).unwrap();
    opts.algorithm = Algorithm::Covariance;
    let b = fit_lasso(&x, &y, &pen, &opts).unwrap();
    assert!(a.converged && b.converged);
    assert!((&x * &a.coefficients - &x * &b.coefficients).amax() < 1e-6);
}

#[test]
fn fitted_values_unique_across_coordinate_orders() {
    let mut r = rng(8);
    for _ in 0..10 {
        // p > N, where coefficients need not be unique but fitted values are
        let (x, y) = sparse_instance(30, 60, 3, 1.0, &mut r);
        let lmax = lambda_max(&x, &y, &[1.0; 60]).unwrap();
        let pen = PenaltyConfig::uniform(0.05 * lmax, 60).unwrap();
        let a = fit_lasso(&x, &y, &pen, &FitOptions::default()).unwrap();
        let opts = FitOptions { order: CoordinateOrder::Reversed, ..Default::default() };
        let b = fit_lasso(&x, &y, &pen, &opts).unwrap();
        assert!((&x * &a.coefficients - &x * &b.coefficients).amax() <= 1e-6);
        for j in 0..60 {
            assert!(a.coefficients[j] * b.coefficients[j] >= 0.0);
        }
    }
}

#[test]
fn duplicated_column_leaves_fit_unchanged() {
    let mut r = rng(9);
    let (x, y) = sparse_instance(50, 5, 3, 1.0, &mut r);
    let mut xd = DMatrix::zeros(50, 6);
    xd.columns_mut(0, 5).copy_from(&x);
    xd.set_column(5, &x.column(1));
    let lmax = lambda_max(&x, &y, &[1.0; 5]).unwrap();
    let opts = FitOptions { tol: 1e-12, ..Default::default() };
    let a = fit_lasso(&x, &y, &PenaltyConfig::uniform(0.2 * lmax, 5).unwrap(), &opts).unwrap();
    let b = fit_lasso(&xd, &y, &PenaltyConfig::uniform(0.2 * lmax, 6).unwrap(), &opts).unwrap();
    assert!((&x * &a.coefficients - &xd * &b.coefficients).amax() <= 1e-8);
    assert!((b.coefficients[1] + b.coefficients[5] - a.coefficients[1]).abs() <= 1e-6);
}

#[test]
fn warm_start_lands_on_the_same_solution() {
    let mut r = rng(10);
    let (x, y) = sparse_instance(40, 80, 4, 1.0, &mut r);
    let lmax = lambda_max(&x, &y, &[1.0; 80]).unwrap();
    let pen = PenaltyConfig::uniform(0.2 * lmax, 80).unwrap();
    let cold = fit_lasso(&x, &y, &pen, &FitOptions::default()).unwrap();
    let start = gauss_vector(80, &mut r);
    let warm = fit_lasso_warm(&x, &y, &pen, &FitOptions::default(), &start).unwrap();
    assert!((cold.objective - warm.objective).abs() < 1e-10);
}

#[test]
fn path_endpoints_and_monotone_l1() {
    let mut r = rng(11);
    let (x, y) = sparse_instance(100, 10, 4, 1.0, &mut r);
    let path = regularization_path(&x, &y, &[1.0; 10], &PathGrid::default(), &FitOptions::default()).unwrap();
    assert_eq!(path.points.len(), 100);
    assert!(path.points[0].fit.coefficients.iter().all(|b| *b == 0.0));
    let l1: Vec<f64> = path.points.iter().map(|p| p.fit.coefficients.iter().map(|b| b.abs()).sum::<f64>()).collect();
    // lambdas decrease along the path, so l1 must not decrease
    assert!(l1.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    let ols = ols_normal_equations(&x, &y);
    let last = &path.points.last().unwrap().fit.coefficients;
    assert!((last - &ols).norm() <= 0.05 * ols.norm());
}

#[test]
fn unpenalized_columns_are_partialled_in_lambda_max() {
    let mut r = rng(12);
    let (x, y) = sparse_instance(50, 4, 2, 1.0, &mut r);
    let psi = [0.0, 1.0, 1.0, 1.0];
    let lmax = lambda_max(&x, &y, &psi).unwrap();
    let fit = fit_lasso(&x, &y, &PenaltyConfig::new(lmax, psi.to_vec()).unwrap(), &FitOptions::default()).unwrap();
    assert_eq!(fit.active_set, vec![0]);
    let b0 = x.column(0).dot(&y) / x.column(0).norm_squared();
    assert!((fit.coefficients[0] - b0).abs() < 1e-8);
}
