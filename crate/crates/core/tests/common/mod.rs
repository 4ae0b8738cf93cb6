//! Invariance checks shared by the property tests and the acceptance target.
//! Each check builds one random case from `(seed, case)` and returns a
//! description of the first violation.

#![allow(dead_code)]

use endcut::cart::{self, GrowConfig, Tree};
use endcut::dgp::Dataset;
use endcut::ensemble::{fit_forest, ForestSpec};
use endcut::honest::{honest_fit, EmptyPolicy};
use endcut::rng::{RngStream, StreamRng};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Check = Result<(), String>;

pub fn random_data(rng: &mut StreamRng, n_lo: usize, n_hi: usize) -> Dataset {
    let n = rng.random_range(n_lo..=n_hi);
    let p = rng.random_range(1..=3);
    let coarse = rng.random_bool(0.3);
    let cols = (0..p)
        .map(|_| (0..n).map(|_| if coarse { f64::from(rng.random_range(0..10u8)) / 10.0 } else { rng.random::<f64>() }).collect())
        .collect();
    let y = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Dataset::from_columns(cols, y, None, None).unwrap()
}

fn map_column(data: &Dataset, j: usize, f: impl Fn(f64) -> f64) -> Dataset {
    let cols = (0..data.p()).map(|k| data.column(k).iter().map(|&v| if k == j { f(v) } else { v }).collect()).collect();
    Dataset::from_columns(cols, data.y.clone(), None, None).unwrap()
}

fn same_structure(a: &Tree, b: &Tree) -> Check {
    if a.nodes.len() != b.nodes.len() {
        return Err(format!("{} nodes vs {}", a.nodes.len(), b.nodes.len()));
    }
    for (u, v) in a.nodes.iter().zip(&b.nodes) {
        let su = u.split.map(|s| (s.direction, s.order_index));
        let sv = v.split.map(|s| (s.direction, s.order_index));
        if su != sv || u.sample_ids != v.sample_ids || u.children != v.children {
            return Err(format!("node {} differs: {su:?} vs {sv:?}", u.id));
        }
    }
    Ok(())
}

/// A strictly increasing map applied to one covariate leaves every split
/// position and every sample partition unchanged.
pub fn monotone_case(seed: u64, case: u64) -> Check {
    let mut rng = RngStream::new(seed, 0x40).substream(case).rng();
    let data = random_data(&mut rng, 2, 80);
    let depth = rng.random_range(1..=4);
    let j = rng.random_range(0..data.p());
    let k = rng.random_range(0..3);
    let maps: [fn(f64) -> f64; 3] = [|v| v * v, |v| 0.5 * (v + v * v * v), |v| v.exp_m1() / 1f64.exp_m1()];
    let cfg = GrowConfig::new(depth);
    let a = cart::grow(&data, &data.y, &cfg).map_err(|e| e.to_string())?;
    let b = cart::grow(&map_column(&data, j, maps[k]), &data.y, &cfg).map_err(|e| e.to_string())?;
    same_structure(&a, &b).map_err(|e| format!("case {case}: map {k} on x{j}: {e}"))
}

/// `y -> a + c y` with `c > 0` keeps every split and maps leaf outputs affinely.
pub fn affine_case(seed: u64, case: u64) -> Check {
    let mut rng = RngStream::new(seed, 0x41).substream(case).rng();
    let data = random_data(&mut rng, 2, 80);
    let depth = rng.random_range(1..=4);
    let a0: f64 = rng.random_range(-5.0..5.0);
    let c: f64 = rng.random_range(0.1..10.0);
    let moved: Vec<f64> = data.y.iter().map(|&v| a0 + c * v).collect();
    let cfg = GrowConfig::new(depth);
    let t = cart::grow(&data, &data.y, &cfg).map_err(|e| e.to_string())?;
    let u = cart::grow(&data, &moved, &cfg).map_err(|e| e.to_string())?;
    same_structure(&t, &u).map_err(|e| format!("case {case}: {e}"))?;
    for (x, y) in t.nodes.iter().zip(&u.nodes) {
        if x.split.map(|s| s.threshold) != y.split.map(|s| s.threshold) {
            return Err(format!("case {case}: threshold moved at node {}", x.id));
        }
        let want = a0 + c * x.output;
        if (y.output - want).abs() > 1e-9 * (1.0 + want.abs()) {
            return Err(format!("case {case}: node {} output {} vs {want}", x.id, y.output));
        }
    }
    Ok(())
}

/// Shuffling estimation responses among samples routed to the same leaf
/// leaves every honest prediction bit-for-bit unchanged.
pub fn honest_permutation_case(seed: u64, case: u64) -> Check {
    let mut rng = RngStream::new(seed, 0x42).substream(case).rng();
    let structure = random_data(&mut rng, 2, 60);
    let p = structure.p();
    let m = rng.random_range(1..=60);
    let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
    let y: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let est = Dataset::from_columns(cols, y, None, None).unwrap();
    let cfg = GrowConfig::new(rng.random_range(1..=3));
    let ht = honest_fit(&structure, &est, &cfg, EmptyPolicy::AncestorFallback).map_err(|e| e.to_string())?;
    let mut by_leaf: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..m {
        by_leaf.entry(ht.structure.leaf_for(&est.row(i))).or_default().push(i);
    }
    let mut y2 = est.y.clone();
    for ids in by_leaf.values() {
        let mut vals: Vec<f64> = ids.iter().map(|&i| est.y[i]).collect();
        vals.shuffle(&mut rng);
        for (&i, v) in ids.iter().zip(vals) {
            y2[i] = v;
        }
    }
    let ht2 = honest_fit(&structure, &est.with_responses(y2).unwrap(), &cfg, EmptyPolicy::AncestorFallback).map_err(|e| e.to_string())?;
    for leaf in ht.structure.leaves() {
        if ht.node_value(leaf).map(f64::to_bits) != ht2.node_value(leaf).map(f64::to_bits) {
            return Err(format!("case {case}: leaf {leaf} {:?} vs {:?}", ht.node_value(leaf), ht2.node_value(leaf)));
        }
    }
    for _ in 0..10 {
        let x: Vec<f64> = (0..p).map(|_| rng.random()).collect();
        if ht.predict(&x).to_bits() != ht2.predict(&x).to_bits() {
            return Err(format!("case {case}: prediction at {x:?} moved"));
        }
    }
    Ok(())
}

/// Reordering the trees of a forest leaves its predictions bit-for-bit unchanged.
pub fn forest_permutation_case(seed: u64, case: u64) -> Check {
    let mut rng = RngStream::new(seed, 0x43).substream(case).rng();
    let data = random_data(&mut rng, 4, 60);
    let s = 2 * rng.random_range(1..=data.n() / 2);
    let spec = ForestSpec::new(rng.random_range(1..=25), s, rng.random_range(1..=data.p()), rng.random_range(1..=3))
        .with_seed(rng.random())
        .with_honest(rng.random_bool(0.5));
    let forest = fit_forest(&data, &spec).map_err(|e| e.to_string())?;
    let mut shuffled = forest.clone();
    shuffled.trees.shuffle(&mut rng);
    for _ in 0..10 {
        let x: Vec<f64> = (0..data.p()).map(|_| rng.random()).collect();
        if forest.predict(&x).to_bits() != shuffled.predict(&x).to_bits() {
            return Err(format!("case {case}: prediction at {x:?} moved"));
        }
    }
    Ok(())
}

/// Runs `check` on cases `0..cases` and collects failures.
pub fn sweep(cases: u64, seed: u64, check: fn(u64, u64) -> Check) -> Vec<String> {
    (0..cases).filter_map(|c| check(seed, c).err()).collect()
}
