//! Honest random forests: every tree sees a random subsample, split in half
//! between structure and estimation, and a fresh random set of candidate
//! directions at each node.

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;

use crate::cart::{self, FeatureChoice, FitMeta, GrowConfig, Tree};
use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::honest::{EmptyPolicy, HonestTree};
use crate::rng::{RngStream, StreamRng};

const FOREST_STREAM: u64 = 0xF0_4E57;
const SUBSAMPLE_TAG: u64 = 0;
const FEATURE_TAG: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestSpec {
    /// Number of trees `B`.
    pub trees: usize,
    /// Subsample size `s`; even, at most `n`.
    pub subsample: usize,
    /// Candidate directions per node, `1 <= mtry <= p`.
    pub mtry: usize,
    pub depth: usize,
    pub honest: bool,
    pub min_node_size: usize,
    pub empty_policy: EmptyPolicy,
    pub seed: u64,
}

impl ForestSpec {
    pub fn new(trees: usize, subsample: usize, mtry: usize, depth: usize) -> Self {
        ForestSpec {
            trees,
            subsample,
            mtry,
            depth,
            honest: true,
            min_node_size: 1,
            empty_policy: EmptyPolicy::AncestorFallback,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_honest(mut self, honest: bool) -> Self {
        self.honest = honest;
        self
    }

    pub fn with_empty_policy(mut self, policy: EmptyPolicy) -> Self {
        self.empty_policy = policy;
        self
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidSpec("a forest needs at least one tree".into()));
        }
        if self.subsample % 2 == 1 || self.subsample == 0 || self.subsample > n {
            return Err(Error::InvalidSpec(format!("subsample {} must be even and in 2..={n}", self.subsample)));
        }
        if self.mtry == 0 || self.mtry > p {
            return Err(Error::InvalidSpec(format!("mtry {} must be in 1..={p}", self.mtry)));
        }
        Ok(())
    }

    fn tree_stream(&self, b: usize) -> RngStream {
        RngStream::new(self.seed, FOREST_STREAM).substream(b as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Member {
    Honest(HonestTree),
    Adaptive(Tree),
}

impl Member {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Member::Honest(t) => t.predict(x),
            Member::Adaptive(t) => t.predict(x),
        }
    }

    pub fn structure(&self) -> &Tree {
        match self {
            Member::Honest(t) => &t.structure,
            Member::Adaptive(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub spec: ForestSpec,
    pub trees: Vec<Member>,
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        forest_predict(self, x)
    }
}

/// A uniform `s`-subset of `0..n`, randomly halved into `(S0, S1)`.
/// Each half is returned in ascending order.
pub fn draw_subsample(n: usize, s: usize, rng: &mut StreamRng) -> Result<(Vec<usize>, Vec<usize>)> {
    if s % 2 == 1 || s > n {
        return Err(Error::InvalidArgument(format!("subsample {s} must be even and at most {n}")));
    }
    let mut picked = index::sample(rng, n, s).into_vec();
    picked.shuffle(rng);
    let mut s1 = picked.split_off(s / 2);
    picked.sort_unstable();
    s1.sort_unstable();
    Ok((picked, s1))
}

/// A uniform `m`-subset of the `p` directions, ascending.
pub fn draw_features(p: usize, m: usize, rng: &mut StreamRng) -> Result<Vec<usize>> {
    if m == 0 || m > p {
        return Err(Error::InvalidArgument(format!("mtry {m} must be in 1..={p}")));
    }
    let mut f = index::sample(rng, p, m).into_vec();
    f.sort_unstable();
    Ok(f)
}

fn fit_member(data: &Dataset, spec: &ForestSpec, b: usize) -> Result<Member> {
    let stream = spec.tree_stream(b);
    let (s0, s1) = draw_subsample(data.n(), spec.subsample, &mut stream.substream(SUBSAMPLE_TAG).rng())?;
    let mut feature_rng = stream.substream(FEATURE_TAG).rng();
    let mut features = FeatureChoice::Random { p: data.p(), mtry: spec.mtry, rng: &mut feature_rng };
    let cfg = GrowConfig::new(spec.depth).with_min_node_size(spec.min_node_size);
    let meta = FitMeta { seed: Some(spec.seed), config: cfg.clone(), mtry: Some(spec.mtry) };
    if spec.honest {
        let structure = cart::grow_on(data, &data.y, s0, &cfg, &mut features, meta)?;
        Ok(Member::Honest(HonestTree::estimate_on(structure, data, &data.y, &s1, spec.empty_policy.clone())))
    } else {
        let mut all = s0;
        all.extend(s1);
        all.sort_unstable();
        Ok(Member::Adaptive(cart::grow_on(data, &data.y, all, &cfg, &mut features, meta)?))
    }
}

/// Fits `B` trees on independent streams; tree order is fixed by index.
pub fn fit_forest(data: &Dataset, spec: &ForestSpec) -> Result<Forest> {
    spec.validate(data.n(), data.p())?;
    let trees = (0..spec.trees).into_par_iter().map(|b| fit_member(data, spec, b)).collect::<Result<Vec<_>>>()?;
    Ok(Forest { spec: spec.clone(), trees })
}

/// Mean of the member predictions, summed in sorted order so that the
/// result does not depend on the order of the trees.
pub fn forest_predict(forest: &Forest, x: &[f64]) -> f64 {
    let mut v: Vec<f64> = forest.trees.iter().map(|t| t.predict(x)).collect();
    v.sort_unstable_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}
