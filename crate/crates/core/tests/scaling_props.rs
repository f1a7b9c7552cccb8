use deplab::scaling::{
    chi_square_sf, crossover, fit_fixed_only, fit_mixed_model_data, fit_ols_data, lrt_for_predictor,
    spearman, synthetic_mixed_data, FitMethod, RegressionData, SyntheticMixedSpec,
};
use proptest::prelude::*;

fn mixed_spec() -> impl Strategy<Value = SyntheticMixedSpec> {
    (0.0f64..2.0, -1.0f64..-0.1, 0.0f64..0.3, 0.01f64..0.2).prop_map(|(intercept, slope, isd, rsd)| {
        SyntheticMixedSpec {
            intercept,
            slope,
            intercept_sd: isd,
            residual_sd: rsd,
            ..SyntheticMixedSpec::default()
        }
    })
}

proptest! {
    #[test]
    fn chi_square_matches_normal_identity(x in 0.0f64..=40.0) {
        let expected = libm::erfc((x / 2.0).sqrt());
        prop_assert!((chi_square_sf(x, 1) - expected).abs() < 1e-10);
    }

    #[test]
    fn chi_square_decreases_in_statistic(a in 0.0f64..50.0, b in 0.0f64..50.0, df in 1usize..6) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(chi_square_sf(hi, df) <= chi_square_sf(lo, df));
    }

    #[test]
    fn spearman_invariant_to_monotone_maps(pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..25)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0]));
        let base = spearman(&x, &y).unwrap();
        prop_assert!(base.rho.abs() <= 1.0);
        let fx: Vec<f64> = x.iter().map(|v| (v / 10.0).exp()).collect();
        let fy: Vec<f64> = y.iter().map(|v| v.powi(3) - 7.0).collect();
        let mapped = spearman(&fx, &fy).unwrap();
        prop_assert!((base.rho - mapped.rho).abs() < 1e-12);
    }

    #[test]
    fn ols_residuals_orthogonal_to_design(rows in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 6..30)) {
        let data = RegressionData {
            y: rows.iter().map(|r| r.2).collect(),
            columns: vec![
                ("a".into(), rows.iter().map(|r| r.0).collect()),
                ("b".into(), rows.iter().map(|r| r.1).collect()),
            ],
            groups: (0..rows.len()).map(|i| i.to_string()).collect(),
        };
        let Ok(fit) = fit_ols_data(&data) else { return Ok(()) };
        prop_assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-8);
        for (_, col) in &data.columns {
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(c, e)| c * e).sum();
            prop_assert!(dot.abs() < 1e-8);
        }
    }

    #[test]
    fn fixed_only_fit_reduces_to_ols(spec in mixed_spec(), seed in any::<u64>()) {
        let data = synthetic_mixed_data(&spec, seed);
        let ols = fit_ols_data(&data).unwrap();
        let fixed = fit_fixed_only(&data, FitMethod::Ml).unwrap();
        for (name, b) in ols.names.iter().zip(&ols.coefficients) {
            prop_assert!((fixed.coefficient(name).unwrap() - b).abs() < 1e-8);
        }
    }

    #[test]
    fn lrt_statistic_nonnegative(spec in mixed_spec(), seed in any::<u64>()) {
        let data = synthetic_mixed_data(&spec, seed);
        let (null, alt, lrt) = lrt_for_predictor(&data, "noise").unwrap();
        prop_assert!(alt.log_likelihood >= null.log_likelihood - 1e-9);
        prop_assert!(lrt.chi2 >= 0.0 && lrt.p_value <= 1.0);
        prop_assert!(alt.random_intercept_variance >= 0.0 && alt.residual_variance >= 0.0);
        prop_assert_eq!(alt.fixed_effects.len(), 3);
    }

    #[test]
    fn crossover_zeroes_prediction(spec in mixed_spec(), seed in any::<u64>()) {
        let data = synthetic_mixed_data(&spec, seed)
            .restrict(&["log_train".to_string()])
            .unwrap();
        let fit = fit_mixed_model_data(&data, FitMethod::Reml).unwrap();
        prop_assume!(fit.coefficient("log_train").unwrap() < 0.0);
        let est = crossover(&fit).unwrap();
        prop_assert!(fit.predict(&[("log_train", est.log10_sentences)]).abs() < 1e-9);
        prop_assert_eq!(est.sentences, 10f64.powf(est.log10_sentences).round() as u64);
    }
}
