use idm_odds::quadrature::integrate_with_breaks;
use idm_odds::{Analytic, CohortBaseline, OddsMethod, QuadratureConfig, RateModel};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn survivor_ratio_is_exit_hazard_between_ages(t in 50.0f64..150.0, a in 1.0f64..95.0, frac in 0.0f64..1.0) {
        let model = RateModel::reference();
        let an = Analytic::new(&model).with_quadrature(QuadratureConfig::tight());
        let delta = frac * a;
        let ratio = an.survivor_function_m(t, a, a - delta).unwrap()
            / an.survivor_function_m(t, a, a).unwrap();
        let birth = t - a;
        let hazard = integrate_with_breaks(
            |tau| model.incidence(birth + tau, tau).unwrap() + model.mortality_healthy(birth + tau, tau),
            a - delta,
            a,
            &[30.0],
            &QuadratureConfig::tight(),
        )
        .unwrap();
        let oracle = hazard.exp();
        prop_assert!((ratio - oracle).abs() <= 1e-10 * oracle, "{} vs {}", ratio, oracle);
    }

    #[test]
    fn odds_ignore_baseline_scale(t in 50.0f64..150.0, a in 31.0f64..95.0, scale in 1e-3f64..1e6) {
        let model = RateModel::reference();
        let unit = Analytic::new(&model);
        let scaled = Analytic::new(&model).with_baseline(CohortBaseline::constant(scale));
        for method in [OddsMethod::PseudoConvolution, OddsMethod::Keiding] {
            prop_assert_eq!(unit.prevalence(t, a, method).unwrap().odds, scaled.prevalence(t, a, method).unwrap().odds);
        }
        let u = unit.prevalence(t, a, OddsMethod::CohortRatio).unwrap().odds;
        let s = scaled.prevalence(t, a, OddsMethod::CohortRatio).unwrap().odds;
        prop_assert!((u - s).abs() <= 4.0 * f64::EPSILON * u);
        let pow2 = Analytic::new(&model).with_baseline(CohortBaseline::constant(1024.0));
        prop_assert_eq!(u, pow2.prevalence(t, a, OddsMethod::CohortRatio).unwrap().odds);
    }

    #[test]
    fn y_weight_decreases_when_disease_mortality_dominates(t in 50.0f64..150.0, a in 1.0f64..95.0) {
        let model = RateModel::reference()
            .with_ratio(idm_odds::MortalityRatioParams::new(0.0, 0.0, 10.0))
            .unwrap();
        let an = Analytic::new(&model);
        let grid: Vec<f64> = (0..=40).map(|k| (a * k as f64 / 40.0).min(a)).collect();
        for d in &grid {
            let (tp, ap) = (t - d, a - d);
            let excess = model.mortality_diseased(tp, ap, 0.0).unwrap()
                - model.mortality_healthy(tp, ap)
                - model.incidence(tp, ap).unwrap();
            prop_assert!(excess > 0.0);
        }
        let y: Vec<f64> = grid.iter().map(|d| an.y_weight(t, a, *d).unwrap()).collect();
        prop_assert_eq!(y[0], 1.0);
        prop_assert!(y.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn prevalence_is_a_probability(t in 0.0f64..200.0, a in 0.0f64..100.0) {
        let model = RateModel::reference();
        let r = Analytic::new(&model).odds_pseudo(t, a).unwrap();
        prop_assert!(r.odds >= 0.0);
        prop_assert!((0.0..1.0).contains(&r.prevalence));
        prop_assert_eq!(r.prevalence, r.odds / (1.0 + r.odds));
    }
}

#[test]
fn reference_odds_curve_rises_over_working_ages() {
    let model = RateModel::reference();
    let an = Analytic::new(&model);
    let ages: Vec<f64> = (0..=50).map(|k| 30.0 + k as f64).collect();
    let curve = an.curve(100.0, &ages, OddsMethod::PseudoConvolution).unwrap();
    assert_eq!(curve[0].odds, 0.0);
    assert!(curve.windows(2).all(|w| w[1].odds > w[0].odds));
    // oldest reference group: 164 of 910
    let oldest = an.odds_pseudo(100.0, 92.5).unwrap().odds;
    assert!((oldest - 164.0 / 746.0).abs() < 0.03, "{oldest}");
}

#[test]
fn group_five_prevalence_near_table_arithmetic() {
    let model = RateModel::reference();
    let p = Analytic::new(&model).odds_pseudo(100.0, 62.5).unwrap().prevalence;
    assert!((p - 1228.0 / 8857.0).abs() < 0.01, "{p}");
}
