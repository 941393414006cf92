mod common;

use common::*;
use hdselect_core::inference::{chs_estimate, pds_estimate, pds_select, ChsVariant, HdDesign};
use hdselect_core::sim::{replication_rng, toeplitz_design};
use hdselect_core::solver::FitOptions;
use hdselect_core::tuning::{Tuner, TunerConfig};
use hdselect_core::{Block, SeMode};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}{j}")).collect()
}

fn design(y: DVector<f64>, d: DVector<f64>, x: DMatrix<f64>) -> HdDesign {
    let p = x.ncols();
    HdDesign::new(
        y,
        Block::new(vec!["d".into()], DMatrix::from_column_slice(d.len(), 1, d.as_slice())).unwrap(),
        Block::new(names("x", p), x).unwrap(),
    )
}

fn rigorous() -> TunerConfig {
    TunerConfig::default()
}

#[test]
fn second_step_catches_controls_that_only_move_d() {
    let n = 100;
    let p = 50;
    let flags: Vec<(bool, bool)> = (0..200)
        .into_par_iter()
        .map(|rep| {
            let mut r = replication_rng(11, rep);
            let x = toeplitz_design(n, p, 0.5, &mut r);
            let gamma = DVector::from_fn(p, |j, _| if j < 3 { 1.0 } else { 0.0 });
            let d = &x * gamma + gauss_vector(n, &mut r);
            let y = gauss_vector(n, &mut r);
            let sel = pds_select(&design(y, d, x), &rigorous()).unwrap();
            (sel.step1.is_empty(), !sel.step2[0].is_empty())
        })
        .collect();
    let step1_empty = flags.iter().filter(|f| f.0).count();
    let step2_found = flags.iter().filter(|f| f.1).count();
    assert!(step2_found >= 180, "step 2 nonempty in {step2_found}/200");
    assert!(step1_empty > 100, "step 1 empty in {step1_empty}/200");
}

#[test]
fn randomized_treatment_selects_nothing_in_step_two() {
    let n = 100;
    let p = 50;
    let empty = (0..200)
        .into_par_iter()
        .filter(|&rep| {
            let mut r = replication_rng(12, rep);
            let x = toeplitz_design(n, p, 0.5, &mut r);
            let d = gauss_vector(n, &mut r);
            let beta = DVector::from_fn(p, |j, _| if j < 5 { 0.5 } else { 0.0 });
            let y = &d * 0.5 + &x * beta + gauss_vector(n, &mut r);
            pds_select(&design(y, d, x), &rigorous()).unwrap().step2[0].is_empty()
        })
        .count();
    assert!(empty >= 180, "step 2 empty in {empty}/200");
}

#[test]
fn cluster_errors_inflate_standard_errors() {
    let mut r = rng(50);
    let g = 10;
    let per = 20;
    let n = g * per;
    let cluster: Vec<usize> = (0..n).map(|i| i / per).collect();
    let shock_d: Vec<f64> = (0..g).map(|_| gauss(&mut r)).collect();
    let shock_e: Vec<f64> = (0..g).map(|_| gauss(&mut r)).collect();
    let d = DVector::from_fn(n, |i, _| shock_d[cluster[i]] + 0.3 * gauss(&mut r));
    let y = DVector::from_fn(n, |i, _| 0.5 * d[i] + shock_e[cluster[i]]);
    let des = design(y, d, DMatrix::zeros(n, 0));
    let sel = pds_select(&des, &rigorous()).unwrap();
    let iid = pds_estimate(&des, &sel, &SeMode::Iid).unwrap();
    let cl = pds_estimate(&des, &sel, &SeMode::Cluster(cluster)).unwrap();
    assert_eq!(iid.alpha, cl.alpha);
    assert!(cl.std_errors[0] >= iid.std_errors[0], "{} < {}", cl.std_errors[0], iid.std_errors[0]);
    assert!(pds_estimate(&des, &sel, &SeMode::Cluster(vec![0; n])).is_err());
}

#[test]
fn unpenalized_chs_is_frisch_waugh_lovell() {
    let mut r = rng(51);
    let n = 80;
    let p = 10;
    let x = gauss_matrix(n, p, &mut r);
    let d = x.column(0) * 0.7 + gauss_vector(n, &mut r);
    let y = &d * 0.5 + x.column(1) + gauss_vector(n, &mut r);
    let mut full = DMatrix::zeros(n, p + 1);
    full.set_column(0, &d);
    full.columns_mut(1, p).copy_from(&x);
    let oracle = ols_normal_equations(&with_intercept(&full), &y)[1];

    let des = design(y, d, x);
    let tuner = TunerConfig {
        tuner: Tuner::Fixed(0.0),
        fit: FitOptions { tol: 1e-14, kkt_tol: 1e-10, ..Default::default() },
    };
    for variant in [ChsVariant::LassoOrthogonalized, ChsVariant::PostLassoOrthogonalized] {
        let res = chs_estimate(&des, variant, &tuner, &SeMode::Iid).unwrap();
        assert!((res.alpha[0] - oracle).abs() <= 1e-8, "{variant:?}: {} vs {oracle}", res.alpha[0]);
    }
    let sel = pds_select(&des, &tuner).unwrap();
    let pds = pds_estimate(&des, &sel, &SeMode::Iid).unwrap();
    assert!((pds.alpha[0] - oracle).abs() <= 1e-8);
}

#[test]
fn rescaling_a_control_leaves_estimates_unchanged() {
    let mut r = rng(52);
    let n = 120;
    let p = 60;
    let x = toeplitz_design(n, p, 0.5, &mut r);
    let coef = DVector::from_fn(p, |j, _| if j < 4 { 0.8 } else { 0.0 });
    let d = &x * &coef + gauss_vector(n, &mut r);
    let y = &d * 0.5 + &x * &coef + gauss_vector(n, &mut r);
    let mut xs = x.clone();
    xs.column_mut(2).scale_mut(250.0);
    xs.column_mut(7).scale_mut(0.01);
    let a = design(y.clone(), d.clone(), x);
    let b = design(y, d, xs);
    let sa = pds_select(&a, &rigorous()).unwrap();
    let sb = pds_select(&b, &rigorous()).unwrap();
    assert_eq!(sa.step1, sb.step1);
    assert_eq!(sa.step2, sb.step2);
    let ra = pds_estimate(&a, &sa, &SeMode::Robust).unwrap();
    let rb = pds_estimate(&b, &sb, &SeMode::Robust).unwrap();
    assert!((ra.alpha[0] - rb.alpha[0]).abs() <= 1e-8);
    assert!((ra.std_errors[0] - rb.std_errors[0]).abs() <= 1e-8);
    let ca = chs_estimate(&a, ChsVariant::PostLassoOrthogonalized, &rigorous(), &SeMode::Robust).unwrap();
    let cb = chs_estimate(&b, ChsVariant::PostLassoOrthogonalized, &rigorous(), &SeMode::Robust).unwrap();
    assert!((ca.alpha[0] - cb.alpha[0]).abs() <= 1e-8);
}

#[test]
fn union_rule_holds_in_the_final_design() {
    let mut r = rng(53);
    let n = 150;
    let p = 80;
    let x = toeplitz_design(n, p, 0.5, &mut r);
    let beta = DVector::from_fn(p, |j, _| if j < 3 { 1.0 } else { 0.0 });
    let gamma = DVector::from_fn(p, |j, _| if (2..6).contains(&j) { 1.0 } else { 0.0 });
    let d = &x * gamma + gauss_vector(n, &mut r);
    let y = &d * 0.5 + &x * beta + gauss_vector(n, &mut r);
    let mut des = design(y, d, x);
    des.aset = Block::new(vec!["a1".into()], gauss_matrix(n, 1, &mut r)).unwrap();
    des.unpenalized = Block::new(vec!["u1".into()], gauss_matrix(n, 1, &mut r)).unwrap();
    let sel = pds_select(&des, &rigorous()).unwrap();
    let res = pds_estimate(&des, &sel, &SeMode::Iid).unwrap();
    let mut required: Vec<&String> = res.selected_step1.iter().collect();
    for s in &res.selected_step2 {
        required.extend(s.controls.iter());
    }
    required.push(&des.aset.names[0]);
    required.push(&des.unpenalized.names[0]);
    for name in required {
        assert!(
            res.union_controls.contains(name) || res.dropped_collinear.contains(name),
            "{name} missing from the final design"
        );
    }
    let in_table: Vec<&str> = res.coefficients.iter().map(|c| c.name.as_str()).collect();
    for name in &res.union_controls {
        assert!(in_table.contains(&name.as_str()));
    }
    assert_eq!(in_table[0], "d");
    // vcov symmetric with nonnegative diagonal
    assert!(res.vcov[0][0] >= 0.0);
}

#[test]
fn without_controls_both_estimators_are_the_simple_slope() {
    let mut r = rng(54);
    let n = 40;
    let d = gauss_vector(n, &mut r);
    let y = &d * 1.3 + gauss_vector(n, &mut r);
    let dc = centred(&d);
    let slope = dc.dot(&centred(&y)) / dc.norm_squared();
    let des = design(y, d, DMatrix::zeros(n, 0));
    let sel = pds_select(&des, &rigorous()).unwrap();
    assert!(sel.step1.is_empty() && sel.step2[0].is_empty());
    let pds = pds_estimate(&des, &sel, &SeMode::Iid).unwrap();
    assert!((pds.alpha[0] - slope).abs() < 1e-12);
    for variant in [ChsVariant::LassoOrthogonalized, ChsVariant::PostLassoOrthogonalized] {
        let chs = chs_estimate(&des, variant, &rigorous(), &SeMode::Iid).unwrap();
        assert!((chs.alpha[0] - slope).abs() < 1e-12);
    }
}

#[test]
fn robust_vcov_is_symmetric_for_two_treatments() {
    let mut r = rng(55);
    let n = 100;
    let x = toeplitz_design(n, 30, 0.5, &mut r);
    let d = gauss_matrix(n, 2, &mut r) + x.columns(0, 2) * 0.5;
    let y = d.column(0) * 0.5 - d.column(1) + x.column(0) + gauss_vector(n, &mut r);
    let des = HdDesign::new(
        y,
        Block::new(vec!["d1".into(), "d2".into()], d).unwrap(),
        Block::new(names("x", 30), x).unwrap(),
    );
    let sel = pds_select(&des, &rigorous()).unwrap();
    assert_eq!(sel.step2.len(), 2);
    let res = pds_estimate(&des, &sel, &SeMode::Robust).unwrap();
    assert!((res.vcov[0][1] - res.vcov[1][0]).abs() <= 1e-14 * res.vcov[0][0].abs().max(1.0));
    let det = res.vcov[0][0] * res.vcov[1][1] - res.vcov[0][1] * res.vcov[1][0];
    assert!(res.vcov[0][0] >= 0.0 && det >= -1e-15);
}
