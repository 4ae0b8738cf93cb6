use endcut::cart::GrowConfig;
use endcut::causal::{fit_honest_causal, fit_theta_ipw, fit_theta_reg, transform_outcome, CausalCriterion};
use endcut::dgp::{sample, sample_with, Dataset, DgpSpec};
use endcut::rng::RngStream;
use endcut::stats;
use endcut::Error;

fn arm_mean(data: &Dataset, ids: impl Iterator<Item = usize>, arm: u8) -> f64 {
    let d = data.d.as_ref().unwrap();
    let v: Vec<f64> = ids.filter(|&i| d[i] == arm).map(|i| data.y[i]).collect();
    stats::mean(&v)
}

#[test]
fn depth_zero_estimators_have_closed_forms() {
    let spec = DgpSpec::causal_constant(301, 2, 1.5, 0.3, 1.0).with_seed(9);
    let data = sample(&spec).unwrap();
    let leaf = GrowConfig::new(0);
    let x = [0.3, 0.7];

    let reg = fit_theta_reg(&data, &leaf).unwrap().predict(&x);
    let want = arm_mean(&data, 0..data.n(), 1) - arm_mean(&data, 0..data.n(), 0);
    assert!((reg - want).abs() < 1e-12);

    let ipw = fit_theta_ipw(&data, &leaf).unwrap().predict(&x);
    let d = data.d.as_ref().unwrap();
    let ystar: Vec<f64> = (0..data.n()).map(|i| transform_outcome(data.y[i], f64::from(d[i]), 0.3)).collect();
    assert!((ipw - stats::mean(&ystar)).abs() < 1e-12);

    // the second half (indices 150..301) estimates the effect
    let honest = fit_honest_causal(&data, &leaf, CausalCriterion::squared_effect()).unwrap().predict(&x);
    let want = arm_mean(&data, 150..301, 1) - arm_mean(&data, 150..301, 0);
    assert!((honest - want).abs() < 1e-12);
}

#[test]
fn transformed_outcome_is_unbiased_for_the_effect() {
    let spec = DgpSpec::causal_constant(200_000, 1, 2.0, 0.25, 1.0).with_seed(4);
    let data = sample(&spec).unwrap();
    let d = data.d.as_ref().unwrap();
    let ystar: Vec<f64> = (0..data.n()).map(|i| transform_outcome(data.y[i], f64::from(d[i]), 0.25)).collect();
    let e = stats::mean_estimate(&ystar);
    assert!((e.value - 2.0).abs() < 4.0 * e.se, "{} +- {}", e.value, e.se);
}

#[test]
fn null_effect_estimates_are_symmetric() {
    // with no effect and symmetric noise, estimate and its negation share a law
    let spec = DgpSpec::causal_constant(400, 1, 0.0, 0.5, 1.0);
    let cfg = GrowConfig::stump();
    let mut est = Vec::new();
    for r in 0..400 {
        let data = sample_with(&spec, &RngStream::new(17, r)).unwrap();
        for crit in [CausalCriterion::squared_effect(), CausalCriterion::SseOnTransformed] {
            est.push(fit_honest_causal(&data, &cfg, crit).unwrap().predict(&[0.5]));
        }
    }
    let neg: Vec<f64> = est.iter().map(|v| -v).collect();
    let ks = stats::ks_two_sample(&est, &neg);
    assert!(ks < 0.08, "ks = {ks}");
    let m = stats::mean_estimate(&est);
    assert!(m.value.abs() < 4.0 * m.se);
}

#[test]
fn missing_arms_and_indicators_are_errors() {
    let plain = sample(&DgpSpec::location(50, 1, 0.0, 1.0)).unwrap();
    assert!(matches!(fit_theta_reg(&plain, &GrowConfig::stump()), Err(Error::InvalidArgument(_))));
    let x: Vec<f64> = (0..10).map(|i| f64::from(i) / 10.0).collect();
    let all_treated = Dataset::from_columns(vec![x], vec![1.0; 10], Some(vec![1; 10]), Some(0.5)).unwrap();
    assert!(matches!(fit_theta_reg(&all_treated, &GrowConfig::stump()), Err(Error::EmptyArm(_))));
    assert!(matches!(
        fit_honest_causal(&all_treated, &GrowConfig::stump(), CausalCriterion::squared_effect()),
        Err(Error::EmptyArm(_))
    ));
}
