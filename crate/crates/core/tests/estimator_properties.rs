use mnar_pcor::error::Error;
use mnar_pcor::estimators::{corrected_beta2, corrected_sigma_sq, PreparedEstimator, PARTNER_COLUMN};
use mnar_pcor::model::{rho_from_components, validate_regularity, Dataset, Mechanism, Roles};
use mnar_pcor::regression::{ols_fit, LeastSquares};
use mnar_pcor::simulation::{simulate_sample, true_rho, SimulationDesign};
use mnar_pcor::{estimate, estimate_mdm_a, estimate_mdm_b, estimate_mdm_c};
use nalgebra::{DMatrix, DVector};

mod common;
use common::{rare_selection_dataset, simulated};

fn with_column(ds: &Dataset, c: usize, f: impl Fn(f64) -> f64) -> Dataset {
    let columns = (0..ds.n_vars())
        .map(|j| ds.column(j).iter().zip(ds.mask(j)).map(|(&v, &o)| o.then(|| if j == c { f(v) } else { v })).collect())
        .collect();
    Dataset::new(ds.names().to_vec(), columns, ds.roles().clone()).unwrap()
}

/// Complete-case plug-in estimates computed from plain OLS fits.
fn plug_in(ds: &Dataset, mechanism: Mechanism) -> (f64, f64, f64, f64, f64) {
    let complete = ds.complete_rows();
    let target = ols_fit(&ds.target_design(&complete), &ds.gather(0, &complete)).unwrap();
    let s2 = match mechanism {
        Mechanism::A => {
            let all = ds.all_rows();
            ols_fit(&ds.adjuster_design(&all), &ds.gather(1, &all)).unwrap().residual_variance
        }
        Mechanism::B => ols_fit(&ds.adjuster_design(&complete), &ds.gather(1, &complete)).unwrap().residual_variance,
        Mechanism::C => {
            let rows = ds.partner_rows();
            let fit = ols_fit(&ds.adjuster_design(&rows), &ds.gather(1, &rows)).unwrap();
            fit.rss / (rows.len() - ds.n_vars()) as f64
        }
    };
    let b = target.coef[PARTNER_COLUMN];
    let s1 = target.residual_variance;
    let rho = rho_from_components(b, s1, s2).unwrap();
    let se = (s1 * target.xtx_inv[(1, 1)] / (b * b + s1 / s2)).sqrt();
    (b, s1, s2, rho, se)
}

#[test]
fn zero_gamma_equals_complete_case_plug_in() {
    for seed in 0..10 {
        for (mech, g20) in [(Mechanism::A, 0.0), (Mechanism::B, 0.0), (Mechanism::C, 0.4)] {
            let ds = simulated(300, mech, 0.5, g20, seed);
            let est = estimate(&ds, mech, 0.0, 0.0).unwrap();
            let (b, s1, s2, rho, se) = plug_in(&ds, mech);
            assert_eq!(est.beta2_hat.to_bits(), b.to_bits());
            assert_eq!(est.sigma1_sq_hat.to_bits(), s1.to_bits());
            assert_eq!(est.sigma2_sq_hat.to_bits(), s2.to_bits());
            assert_eq!(est.rho_hat.to_bits(), rho.to_bits());
            assert!((est.se_hat - se).abs() <= 1e-15 * se, "{} vs {se}", est.se_hat);
        }
    }
}

#[test]
fn fully_observed_target_is_degenerate() {
    let ds = simulated(200, Mechanism::A, 0.5, 0.0, 1);
    let full = Dataset::from_parts(
        ds.names().to_vec(),
        (0..4).map(|c| ds.column(c).iter().map(|v| if v.is_nan() { 0.5 } else { *v }).collect()).collect(),
        vec![vec![true; 200]; 4],
        ds.roles().clone(),
    )
    .unwrap();
    assert!(matches!(estimate_mdm_a(&full, 0.3), Err(Error::Degenerate { all_observed: true, .. })));
}

#[test]
fn mask_mismatch_is_a_mechanism_error() {
    let a = simulated(200, Mechanism::A, 0.5, 0.0, 2);
    assert!(matches!(estimate_mdm_b(&a, 0.3), Err(Error::Mechanism { .. })));
    let c = simulated(200, Mechanism::C, 0.5, 0.2, 2);
    assert!(matches!(estimate_mdm_a(&c, 0.3), Err(Error::Mechanism { .. })));
    assert!(matches!(estimate_mdm_b(&c, 0.3), Err(Error::Mechanism { .. })));
}

#[test]
fn too_few_partner_rows_for_mechanism_c() {
    let ds = simulated(200, Mechanism::C, 0.5, 0.2, 3);
    let mut observed: Vec<Vec<bool>> = (0..4).map(|c| ds.mask(c).to_vec()).collect();
    let mut kept = 0;
    for o in observed[1].iter_mut() {
        if *o {
            kept += 1;
            *o = kept <= 4;
        }
    }
    let values = (0..4).map(|c| ds.column(c).to_vec()).collect();
    let ds = Dataset::from_parts(ds.names().to_vec(), values, observed, ds.roles().clone()).unwrap();
    assert!(matches!(estimate_mdm_c(&ds, 0.2, 0.2), Err(Error::InsufficientData { .. })));
}

#[test]
fn gamma_out_of_range_is_rejected() {
    let ds = simulated(200, Mechanism::A, 0.5, 0.0, 4);
    assert!(matches!(estimate_mdm_a(&ds, 1.01), Err(Error::Domain(_))));
    assert!(matches!(estimate_mdm_a(&ds, f64::NAN), Err(Error::Domain(_))));
}

#[test]
fn consistency_at_large_n_mechanism_a() {
    let ds = simulated(100_000, Mechanism::A, 0.5, 0.0, 20_240_501);
    let est = estimate_mdm_a(&ds, 0.5).unwrap();
    assert!((est.rho_hat - 0.359).abs() < 0.02, "{}", est.rho_hat);
}

#[test]
fn partner_variance_recovered_under_shared_mask() {
    let ds = simulated(100_000, Mechanism::B, 0.5, 0.0, 77);
    let est = estimate_mdm_b(&ds, 0.5).unwrap();
    let df = (est.n_complete - 3) as f64;
    let mc_se = 1.16 * (2.0 / df).sqrt();
    assert!((est.sigma2_sq_hat - 1.16).abs() < 3.0 * mc_se, "{} (se {mc_se})", est.sigma2_sq_hat);
}

#[test]
fn separate_masks_recover_rho_at_large_n() {
    let design = SimulationDesign::new(100_000, Mechanism::C, 0.5, 88).with_gamma20(0.3);
    let ds = simulate_sample(&design, 0).unwrap().to_dataset().unwrap();
    let est = estimate_mdm_c(&ds, 0.5, 0.3).unwrap();
    let truth = true_rho(&design).unwrap();
    assert!((est.rho_hat - truth).abs() < 3.0 * est.se_hat, "{} vs {truth} (se {})", est.rho_hat, est.se_hat);
    assert!(est.n2.unwrap() > est.n_complete);
}

#[test]
fn consistency_improves_with_sample_size() {
    let median_error = |n: usize| {
        let mut errs: Vec<f64> = (0..50)
            .map(|r| {
                let design = SimulationDesign::new(n, Mechanism::A, 0.5, 4242);
                let ds = simulate_sample(&design, r).unwrap().to_dataset().unwrap();
                (estimate_mdm_a(&ds, 0.5).unwrap().rho_hat - true_rho(&design).unwrap()).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        (errs[24] + errs[25]) / 2.0
    };
    let e3 = median_error(1_000);
    let e4 = median_error(10_000);
    let e5 = median_error(100_000);
    assert!(e3 > e4 && e4 > e5, "{e3} {e4} {e5}");
}

#[test]
fn affine_target_rescaling_leaves_rho_unchanged() {
    for (mech, g1, g2) in [(Mechanism::A, 0.6, 0.0), (Mechanism::B, -0.4, 0.0), (Mechanism::C, 0.5, 0.3)] {
        let ds = simulated(400, mech, g1, g2, 9);
        let a = estimate(&ds, mech, g1, g2).unwrap();
        for (scale, shift) in [(3.5, 120.0), (0.01, -7.0)] {
            let scaled = with_column(&ds, 0, |v| scale * v + shift);
            let b = estimate(&scaled, mech, g1, g2).unwrap();
            assert!((a.rho_hat - b.rho_hat).abs() < 1e-10, "{} vs {}", a.rho_hat, b.rho_hat);
            assert!((a.se_hat - b.se_hat).abs() < 1e-10);
        }
        // reflecting the target also reflects its correlation with the selection error
        let reflected = with_column(&ds, 0, |v| -2.0 * v + 1.0);
        let r = estimate(&reflected, mech, -g1, g2).unwrap();
        assert!((a.rho_hat + r.rho_hat).abs() < 1e-10, "{} vs {}", a.rho_hat, r.rho_hat);
    }
}

#[test]
fn standard_error_shrinks_with_nested_samples() {
    let small = simulated(4_000, Mechanism::A, 0.5, 0.0, 31);
    let large = simulated(16_000, Mechanism::A, 0.5, 0.0, 31);
    assert_eq!(small.column(1)[..100], large.column(1)[..100]);
    let a = estimate_mdm_a(&small, 0.5).unwrap();
    let b = estimate_mdm_a(&large, 0.5).unwrap();
    let ratio = a.se_hat / b.se_hat;
    assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
}

#[test]
fn well_conditioned_data_pass_every_check() {
    let ds = simulated(250, Mechanism::A, 0.5, 0.0, 5);
    let report = validate_regularity(&ds, Mechanism::A, 0.1, 0.0);
    assert!(report.all_passed(), "{}", report.summary());
    assert_eq!(report.checks.len(), 5);
    let ds = simulated(250, Mechanism::C, 0.5, 0.3, 5);
    assert_eq!(validate_regularity(&ds, Mechanism::C, 0.1, 0.1).checks.len(), 6);
}

#[test]
fn duplicated_covariate_fails_design_check() {
    let ds = simulated(250, Mechanism::A, 0.5, 0.0, 6);
    let mut columns: Vec<Vec<Option<f64>>> =
        (0..4).map(|c| ds.column(c).iter().zip(ds.mask(c)).map(|(&v, &o)| o.then_some(v)).collect()).collect();
    columns.push(columns[2].clone());
    let names = ["x1", "x2", "age", "hypertension", "age_copy"].map(String::from).to_vec();
    let dup = Dataset::new(names, columns, Roles { target: 0, partner: 1, adjusters: vec![2, 3, 4] }).unwrap();
    let report = validate_regularity(&dup, Mechanism::A, 0.2, 0.0);
    assert!(!report.check(2).unwrap().passed, "{}", report.summary());
    assert!(estimate_mdm_a(&dup, 0.2).is_err());
}

#[test]
fn denominator_sign_change_fails_assumption_four() {
    let ds = rare_selection_dataset();
    let prepared = PreparedEstimator::new(&ds, Mechanism::A).unwrap();
    let df = prepared.n_complete() - 3;
    let summary = *prepared.target_summary();
    // scan for the sign change of the denominator
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let crossing = grid
        .windows(2)
        .find(|w| summary.denominator(w[0], df) > 0.0 && summary.denominator(w[1], df) <= 0.0)
        .expect("denominator changes sign in [0, 1]");
    let q = (summary.u_dot_lambda - summary.explained_ss) / df as f64;
    let root = (-1.0 / q).sqrt();
    assert!(crossing[0] < root && root <= crossing[1]);

    assert!(summary.denominator(root, df).abs() < 1e-8);
    let at_root = prepared.regularity(root, 0.0);
    assert!(!at_root.check(4).unwrap().passed, "{}", at_root.summary());
    assert!(matches!(prepared.estimate(root, 0.0), Err(Error::Regularity(_))));
    let before = prepared.regularity(crossing[0] * 0.5, 0.0);
    assert!(before.check(4).unwrap().passed);
    let beyond = prepared.regularity((root + 1.0) / 2.0, 0.0);
    assert!(!beyond.all_passed());
}

#[test]
fn zero_index_denominator_matches_direct_arithmetic() {
    let ds = simulated(300, Mechanism::A, 0.5, 0.0, 12);
    let complete = ds.complete_rows();
    let x = ds.target_design(&complete);
    let ls = LeastSquares::new(&x).unwrap();
    let n = complete.len();
    let u = vec![0.0; n];
    let lambda = vec![(2.0 / std::f64::consts::PI).sqrt(); n];
    let g = 0.7;
    let got = corrected_sigma_sq(2.5, g, &u, &lambda, &ls, n - 4).unwrap();

    let l = DVector::from_vec(lambda.clone());
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let quad = (l.transpose() * &x * xtx_inv * x.transpose() * &l)[(0, 0)];
    let direct = 2.5 / (1.0 - g * g * quad / (n - 4) as f64);
    assert!((got / direct - 1.0).abs() < 1e-12, "{got} vs {direct}");
    assert_eq!(corrected_sigma_sq(2.5, 0.0, &u, &lambda, &ls, n - 4).unwrap(), 2.5);
}

#[test]
fn constant_mills_vector_leaves_slope_unchanged() {
    let ds = simulated(300, Mechanism::A, 0.5, 0.0, 13);
    let complete = ds.complete_rows();
    let ls = LeastSquares::new(&ds.target_design(&complete)).unwrap();
    let lambda = vec![1.3; complete.len()];
    let b = corrected_beta2(0.25, 0.8, 0.03, &ls, &lambda).unwrap();
    assert!((b - 0.25).abs() < 1e-14, "{b}");
    assert_eq!(corrected_beta2(0.25, 0.0, 0.03, &ls, &lambda).unwrap(), 0.25);
}

#[test]
fn probit_recovers_selection_coefficients_at_large_n() {
    use mnar_pcor::probit::{fit_probit, normal_cdf, normal_pdf};
    let design = SimulationDesign::new(100_000, Mechanism::A, 0.5, 515);
    let s = simulate_sample(&design, 0).unwrap();
    let ds = s.to_dataset().unwrap();
    let x = ds.target_design(&ds.all_rows());
    let fit = fit_probit(&x, &s.target_observed).unwrap();
    assert!(fit.converged);

    // Inverse expected information at the estimate.
    let mut info = DMatrix::<f64>::zeros(4, 4);
    for i in 0..x.nrows() {
        let row = x.row(i).transpose();
        let t = (row.transpose() * DVector::from_column_slice(&fit.delta_hat))[(0, 0)];
        let p = normal_cdf(t);
        let w = normal_pdf(t).powi(2) / (p * (1.0 - p));
        info += w * &row * row.transpose();
    }
    let cov = info.try_inverse().unwrap();
    let truth = design.coefficients.selection_a;
    for j in 0..4 {
        let se = cov[(j, j)].sqrt();
        assert!((fit.delta_hat[j] - truth[j]).abs() < 3.0 * se, "δ{j}: {} vs {} (se {se})", fit.delta_hat[j], truth[j]);
    }
}
