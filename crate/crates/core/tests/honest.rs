mod common;

use endcut::cart::GrowConfig;
use endcut::dgp::{sample, Dataset, DgpSpec};
use endcut::honest::{cart_plus_grow, honest_fit, leftmost_cell_trace, EmptyPolicy};
use endcut::rng::RngStream;
use endcut::Error;
use proptest::prelude::*;

fn one_dim(x: &[f64], y: &[f64]) -> Dataset {
    Dataset::from_columns(vec![x.to_vec()], y.to_vec(), None, None).unwrap()
}

#[test]
fn structure_ignores_estimation_responses() {
    let spec = DgpSpec::location(200, 2, 0.0, 1.0);
    let s = sample(&spec.clone().with_seed(1)).unwrap();
    let e = sample(&spec.clone().with_seed(2)).unwrap();
    let cfg = GrowConfig::new(3);
    let a = honest_fit(&s, &e, &cfg, EmptyPolicy::AncestorFallback).unwrap();
    let b = honest_fit(&s, &e.with_responses(vec![7.0; 200]).unwrap(), &cfg, EmptyPolicy::AncestorFallback).unwrap();
    assert_eq!(a.structure.to_text(), b.structure.to_text());
    for (_, v, c) in b.leaf_estimates() {
        if c > 0 {
            assert_eq!(v, Some(7.0));
        }
    }
}

#[test]
fn leaf_values_are_estimation_means() {
    let s = one_dim(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]);
    let e = one_dim(&[0.05, 0.15, 0.6, 0.7, 0.95], &[1.0, 3.0, 10.0, 20.0, 60.0]);
    let ht = honest_fit(&s, &e, &GrowConfig::stump(), EmptyPolicy::AncestorFallback).unwrap();
    assert_eq!(ht.predict(&[0.0]), 2.0);
    assert_eq!(ht.predict(&[1.0]), 30.0);
}

#[test]
fn empty_leaves_follow_the_policy() {
    let s = one_dim(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]);
    let e = one_dim(&[0.7, 0.9], &[4.0, 6.0]);
    let fallback = honest_fit(&s, &e, &GrowConfig::stump(), EmptyPolicy::AncestorFallback).unwrap();
    // the left leaf is empty, so it takes the root estimate
    assert_eq!(fallback.predict(&[0.0]), 5.0);
    let spec = DgpSpec::location(4, 1, -2.5, 1.0);
    let oracle = honest_fit(&s, &e, &GrowConfig::stump(), EmptyPolicy::TrueMean(spec)).unwrap();
    assert_eq!(oracle.predict(&[0.0]), -2.5);
    assert_eq!(oracle.predict(&[1.0]), 5.0);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let s = sample(&DgpSpec::location(20, 2, 0.0, 1.0)).unwrap();
    let e = sample(&DgpSpec::location(20, 1, 0.0, 1.0)).unwrap();
    let err = honest_fit(&s, &e, &GrowConfig::stump(), EmptyPolicy::AncestorFallback).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch(_)));
}

#[test]
fn cart_plus_is_reproducible_and_nested() {
    let spec = DgpSpec::location(2000, 1, 0.0, 1.0);
    let data = sample(&spec.clone().with_seed(3)).unwrap();
    let stream = RngStream::new(3, 1);
    let a = cart_plus_grow(&data, &spec, 8, &stream).unwrap();
    let b = cart_plus_grow(&data, &spec, 8, &stream).unwrap();
    assert_eq!(a, b);
    let trace = leftmost_cell_trace(&a);
    assert_eq!(trace[0].cell_size, 2000);
    assert!(trace.windows(2).all(|w| w[1].cell_size < w[0].cell_size && w[1].depth == w[0].depth + 1));
    assert!(trace.len() <= 9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn within_leaf_shuffles_change_nothing(case in 0u64..1_000_000) {
        prop_assert_eq!(common::honest_permutation_case(21, case), Ok(()));
    }
}
