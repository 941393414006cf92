mod common;

use common::*;
use hdselect_core::dataset::{destandardize, standardize, Dataset, StandardizeRequest};
use hdselect_core::panelfx::{within_transform, PanelIndex};
use hdselect_core::postsel::post_lasso_ols;
use hdselect_core::solver::{
    fit_lasso, kkt_check, lambda_max, objective, sparsity_index, FitOptions, PenaltyConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn instance(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let (x, y) = sparse_instance(n, p, p.min(3), 1.0, &mut r);
    let psi: Vec<f64> = (0..p).map(|_| r.random_range(0.2..2.0)).collect();
    (x, y, psi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn converged_fits_satisfy_kkt(seed in any::<u64>(), n in 10usize..60, p in 1usize..40, frac in 0.0f64..1.0) {
        let (x, y, psi) = instance(seed, n, p);
        let lambda = frac * lambda_max(&x, &y, &psi).unwrap();
        let pen = PenaltyConfig::new(lambda, psi).unwrap();
        let fit = fit_lasso(&x, &y, &pen, &FitOptions::default()).unwrap();
        if fit.converged {
            prop_assert!(kkt_check(&fit, &x, &y, &pen) <= 1e-6);
        }
        let active: Vec<usize> = (0..p).filter(|&j| fit.coefficients[j] != 0.0).collect();
        prop_assert_eq!(&fit.active_set, &active);
        prop_assert_eq!(sparsity_index(fit.coefficients.as_slice(), n).s, active.len());
    }

    #[test]
    fn fit_beats_random_perturbations(seed in any::<u64>(), frac in 0.05f64..0.9) {
        let (x, y, psi) = instance(seed, 30, 8);
        let lambda = frac * lambda_max(&x, &y, &psi).unwrap();
        let pen = PenaltyConfig::new(lambda, psi).unwrap();
        let fit = fit_lasso(&x, &y, &pen, &FitOptions::default()).unwrap();
        let mut r = rng(seed ^ 0x5eed);
        for _ in 0..10 {
            let b = &fit.coefficients + gauss_vector(8, &mut r) * 1e-3;
            prop_assert!(objective(&x, &y, &b, &pen) >= fit.objective - 1e-12);
        }
    }

    #[test]
    fn destandardized_predictions_round_trip(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let mut r = rng(seed);
        let n = 40;
        let cols: Vec<(String, Vec<f64>)> = (0..5)
            .map(|j| {
                let scale = r.random_range(0.1..10.0);
                let shift = r.random_range(-5.0..5.0);
                (format!("x{j}"), (0..n).map(|_| shift + scale * gauss(&mut r)).collect())
            })
            .collect();
        let yv: Vec<f64> = (0..n).map(|i| cols[0].1[i] * 0.3 - cols[2].1[i] + gauss(&mut r)).collect();
        let mut all = cols.clone();
        all.push(("y".into(), yv));
        let ds = Dataset::from_numeric(all).unwrap();
        let names: Vec<String> = (0..5).map(|j| format!("x{j}")).collect();
        let req = StandardizeRequest { dependent: Some("y".into()), penalized: names.clone(), unpenalized: vec![] };
        let (std_ds, rec) = standardize(&ds, &req).unwrap();
        let xs = std_ds.matrix(&names).unwrap();
        let ys = std_ds.vector("y").unwrap();
        let lambda = frac * lambda_max(&xs, &ys, &[1.0; 5]).unwrap();
        let fit = fit_lasso(&xs, &ys, &PenaltyConfig::uniform(lambda, 5).unwrap(), &FitOptions::default()).unwrap();
        let (b, c) = destandardize(&fit.coefficients, &rec).unwrap();
        let x = ds.matrix(&names).unwrap();
        let pred_orig = (&x * b).add_scalar(c);
        let pred_std = (&xs * &fit.coefficients).add_scalar(rec.response.as_ref().unwrap().mean);
        prop_assert!((pred_orig - pred_std).amax() <= 1e-10 * ds.vector("y").unwrap().amax().max(1.0));
    }

    #[test]
    fn within_is_idempotent(seed in any::<u64>(), groups in 1usize..6, per in 1usize..6) {
        let mut r = rng(seed);
        let n = groups * per;
        let id: Vec<f64> = (0..n).map(|i| (i % groups) as f64).collect();
        let v: Vec<f64> = (0..n).map(|_| 10.0 * gauss(&mut r)).collect();
        let ds = Dataset::from_numeric(vec![("id", id), ("v", v)]).unwrap();
        let idx = PanelIndex::new(&ds, "id", None).unwrap();
        let once = within_transform(&ds, &idx, &["v"]).unwrap().data;
        let twice = within_transform(&once, &idx, &["v"]).unwrap().data;
        for (a, b) in once.numeric("v").unwrap().iter().zip(twice.numeric("v").unwrap()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for rows in &idx.groups {
            let m: f64 = rows.iter().map(|&i| once.numeric("v").unwrap()[i]).sum::<f64>() / rows.len() as f64;
            prop_assert!(m.abs() <= 1e-12);
        }
    }

    #[test]
    fn post_lasso_is_idempotent_on_its_support(seed in any::<u64>()) {
        let (x, y, _) = instance(seed, 40, 10);
        let mut r = rng(seed);
        let support: Vec<usize> = (0..10).filter(|_| r.random_bool(0.5)).collect();
        let first = post_lasso_ols(&x, &y, &support, &[]).unwrap();
        let again = post_lasso_ols(&x, &y, &first.active_set, &[]).unwrap();
        prop_assert!((first.coefficients - again.coefficients).amax() <= 1e-12);
    }
}
