//! Honest trees: the partition comes from one sample, the leaf values from
//! another. CART+ is the variant that draws fresh responses for every level
//! of the tree and once more for the terminal outputs.

use crate::cart::{self, FitMeta, GrowConfig, LevelGrower, RegressionRule, Tree, TreeMode};
use crate::dgp::{fresh_responses, Dataset, DgpSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// What a leaf without estimation samples predicts.
#[derive(Debug, Clone, PartialEq)]
pub enum EmptyPolicy {
    /// The true conditional mean of the generating process (simulation only).
    TrueMean(DgpSpec),
    /// The estimate of the nearest ancestor that has estimation samples.
    AncestorFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HonestTree {
    pub structure: Tree,
    est_sums: Vec<f64>,
    est_counts: Vec<usize>,
    values: Vec<Option<f64>>,
    pub empty_policy: EmptyPolicy,
}

impl HonestTree {
    /// Attaches estimation statistics (per node sums and counts) to a structure tree.
    pub(crate) fn from_node_stats(mut structure: Tree, est_sums: Vec<f64>, est_counts: Vec<usize>, empty_policy: EmptyPolicy) -> Self {
        structure.mode = TreeMode::Honest;
        let mut values: Vec<Option<f64>> = vec![None; structure.nodes.len()];
        for id in 0..structure.nodes.len() {
            values[id] = if est_counts[id] > 0 {
                Some(est_sums[id] / est_counts[id] as f64)
            } else {
                match empty_policy {
                    EmptyPolicy::TrueMean(_) => None,
                    EmptyPolicy::AncestorFallback => match structure.nodes[id].parent {
                        // parents precede children in the arena
                        Some(parent) => values[parent],
                        None => Some(structure.nodes[0].output),
                    },
                }
            };
        }
        Self { structure, est_sums, est_counts, values, empty_policy }
    }

    /// Routes the estimation samples `ids` of `data` through `structure`.
    pub(crate) fn estimate_on(structure: Tree, data: &Dataset, responses: &[f64], ids: &[usize], policy: EmptyPolicy) -> Self {
        let mut routed: Vec<Vec<f64>> = vec![Vec::new(); structure.nodes.len()];
        for &i in ids {
            let mut id = 0;
            loop {
                routed[id].push(responses[i]);
                let node = &structure.nodes[id];
                match (node.children, node.split) {
                    (Some((l, r)), Some(s)) => id = if data.x(i, s.direction) <= s.threshold { l } else { r },
                    _ => break,
                }
            }
        }
        // summing in sorted order makes each node value a function of the
        // multiset of its responses, not of the sample order
        let counts = routed.iter().map(Vec::len).collect();
        let sums = routed
            .iter_mut()
            .map(|v| {
                v.sort_unstable_by(f64::total_cmp);
                v.iter().sum()
            })
            .collect();
        Self::from_node_stats(structure, sums, counts, policy)
    }

    pub fn leaf_for(&self, x: &[f64]) -> usize {
        self.structure.leaf_for(x)
    }

    /// Estimation-sample count of a node.
    pub fn est_count(&self, node: usize) -> usize {
        self.est_counts[node]
    }

    /// Mean estimation response of a node, if it received any.
    pub fn est_mean(&self, node: usize) -> Option<f64> {
        (self.est_counts[node] > 0).then(|| self.est_sums[node] / self.est_counts[node] as f64)
    }

    /// Resolved output of a node; `None` means "the true mean" under [`EmptyPolicy::TrueMean`].
    pub fn node_value(&self, node: usize) -> Option<f64> {
        self.values[node]
    }

    /// `(leaf id, resolved estimate, estimation count)` for every leaf.
    pub fn leaf_estimates(&self) -> Vec<(usize, Option<f64>, usize)> {
        self.structure.leaves().into_iter().map(|l| (l, self.values[l], self.est_counts[l])).collect()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let leaf = self.leaf_for(x);
        match (self.values[leaf], &self.empty_policy) {
            (Some(v), _) => v,
            (None, EmptyPolicy::TrueMean(spec)) => spec.true_mean(x),
            (None, EmptyPolicy::AncestorFallback) => unreachable!("fallback always resolves"),
        }
    }

    /// `sup_x |prediction(x) - mu(x)|`; empty leaves under the true-mean policy contribute zero.
    pub fn sup_error(&self, spec: &DgpSpec) -> f64 {
        cart::sup_error_by_leaf(&self.structure, spec, |leaf| self.values[leaf])
    }
}

/// Grows the partition on `structure_data` and estimates leaf values from `est_data`.
pub fn honest_fit(structure_data: &Dataset, est_data: &Dataset, cfg: &GrowConfig, empty_policy: EmptyPolicy) -> Result<HonestTree> {
    if structure_data.p() != est_data.p() {
        return Err(Error::ShapeMismatch(format!(
            "structure data has p = {}, estimation data has p = {}",
            structure_data.p(),
            est_data.p()
        )));
    }
    let structure = cart::grow(structure_data, &structure_data.y, cfg)?;
    let ids: Vec<usize> = (0..est_data.n()).collect();
    Ok(HonestTree::estimate_on(structure, est_data, &est_data.y, &ids, empty_policy))
}

pub fn honest_predict(ht: &HonestTree, x: &[f64]) -> f64 {
    ht.predict(x)
}

/// CART+ growth: level `l` is split on responses drawn from
/// `stream.substream(l)`, the outputs on responses from `stream.substream(K)`.
/// Covariates (and treatments) stay fixed throughout.
pub fn cart_plus_grow(data: &Dataset, spec: &DgpSpec, max_depth: usize, stream: &RngStream) -> Result<HonestTree> {
    let cfg = GrowConfig::new(max_depth);
    let mut grower = LevelGrower::new(data, (0..data.n()).collect(), &cfg)?;
    let mut features = cart::feature_choice(&cfg, data.p());
    for level in 0..max_depth {
        if grower.is_done() {
            break;
        }
        let y = fresh_responses(data, spec, &mut stream.substream(level as u64).rng())?;
        grower.split_level(&RegressionRule { y: &y }, &mut features);
    }
    let y_out = fresh_responses(data, spec, &mut stream.substream(max_depth as u64).rng())?;
    let meta = FitMeta { seed: Some(stream.seed), config: cfg, mtry: None };
    let mut tree = grower.finish(TreeMode::Honest, meta);
    tree.set_mean_outputs(&y_out);
    let sums = tree.nodes.iter().map(|n| n.sample_ids.iter().map(|&i| y_out[i]).sum()).collect();
    let counts = tree.nodes.iter().map(|n| n.count()).collect();
    Ok(HonestTree::from_node_stats(tree, sums, counts, EmptyPolicy::AncestorFallback))
}

/// One step of the left-most cell trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellTrace {
    pub depth: usize,
    /// Samples in the cell containing `x = 0` at this depth.
    pub cell_size: usize,
    /// Split index of that cell, if it was split.
    pub split_index: Option<usize>,
}

/// Sample counts of the cell containing the origin, from the root down.
pub fn leftmost_cell_trace(ht: &HonestTree) -> Vec<CellTrace> {
    let tree = &ht.structure;
    let mut out = Vec::new();
    let mut id = 0;
    loop {
        let node = &tree.nodes[id];
        out.push(CellTrace { depth: node.depth, cell_size: node.count(), split_index: node.split.map(|s| s.order_index) });
        match node.children {
            Some((l, _)) => id = l,
            None => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::sample;

    fn one_dim(x: &[f64], y: &[f64]) -> Dataset {
        Dataset::from_columns(vec![x.to_vec()], y.to_vec(), None, None).unwrap()
    }

    #[test]
    fn constant_estimation_responses() {
        let spec = DgpSpec::location(100, 1, 0.0, 1.0).with_seed(1);
        let s = sample(&spec).unwrap();
        let e = sample(&spec.clone().with_seed(2)).unwrap();
        let e = e.with_responses(vec![5.0; 100]).unwrap();
        let ht = honest_fit(&s, &e, &GrowConfig::new(3), EmptyPolicy::AncestorFallback).unwrap();
        for (_, v, c) in ht.leaf_estimates() {
            if c > 0 {
                assert_eq!(v, Some(5.0));
            }
        }
        assert_eq!(honest_predict(&ht, &[0.3]), 5.0);
    }

    #[test]
    fn empty_leaf_true_mean_policy() {
        let s = one_dim(&[0.1, 0.2, 0.7, 0.8], &[0.0, 0.0, 4.0, 4.0]);
        let e = one_dim(&[0.6, 0.9], &[1.0, 3.0]);
        let spec = DgpSpec::location(4, 1, 0.0, 1.0);
        let ht = honest_fit(&s, &e, &GrowConfig::stump(), EmptyPolicy::TrueMean(spec)).unwrap();
        assert_eq!(ht.predict(&[0.1]), 0.0);
        assert_eq!(ht.predict(&[0.9]), 2.0);
        assert_eq!(ht.est_count(ht.leaf_for(&[0.1])), 0);
    }

    #[test]
    fn empty_leaf_ancestor_fallback() {
        let s = one_dim(&[0.1, 0.2, 0.7, 0.8], &[0.0, 0.0, 4.0, 4.0]);
        let e = one_dim(&[0.6, 0.9], &[1.0, 3.0]);
        let ht = honest_fit(&s, &e, &GrowConfig::stump(), EmptyPolicy::AncestorFallback).unwrap();
        assert_eq!(ht.predict(&[0.15]), 2.0);
        assert_eq!(ht.predict(&[0.75]), 2.0);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let s = one_dim(&[0.1, 0.2], &[0.0, 1.0]);
        let e = Dataset::from_columns(vec![vec![0.1], vec![0.2]], vec![1.0], None, None).unwrap();
        assert!(honest_fit(&s, &e, &GrowConfig::stump(), EmptyPolicy::AncestorFallback).is_err());
    }

    #[test]
    fn cart_plus_depth_zero_is_fresh_mean() {
        let spec = DgpSpec::location(50, 1, 0.0, 1.0).with_seed(4);
        let data = sample(&spec).unwrap();
        let stream = RngStream::new(4, 99);
        let ht = cart_plus_grow(&data, &spec, 0, &stream).unwrap();
        let fresh = crate::dgp::regenerate_responses(&data, &spec, &stream.substream(0)).unwrap();
        let mean = fresh.y.iter().sum::<f64>() / 50.0;
        assert_eq!(ht.structure.nodes.len(), 1);
        assert!((ht.predict(&[0.5]) - mean).abs() < 1e-15);
        assert_eq!(leftmost_cell_trace(&ht), vec![CellTrace { depth: 0, cell_size: 50, split_index: None }]);
    }

    #[test]
    fn cart_plus_noiseless_outputs_mu() {
        let spec = DgpSpec::location(300, 1, 1.5, 1e-12).with_seed(6);
        let data = sample(&spec).unwrap();
        let ht = cart_plus_grow(&data, &spec, 5, &RngStream::new(6, 1)).unwrap();
        for x in [0.0, 0.2, 0.5, 0.99, 1.0] {
            assert!((ht.predict(&[x]) - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn leftmost_trace_is_monotone_and_linked() {
        let spec = DgpSpec::location(2000, 1, 0.0, 1.0).with_seed(10);
        let data = sample(&spec).unwrap();
        let ht = cart_plus_grow(&data, &spec, 8, &RngStream::new(10, 3)).unwrap();
        let trace = leftmost_cell_trace(&ht);
        assert_eq!(trace[0].cell_size, 2000);
        for w in trace.windows(2) {
            assert!(w[1].cell_size <= w[0].cell_size);
            assert_eq!(Some(w[1].cell_size), w[0].split_index);
        }
    }

    #[test]
    fn cart_plus_deterministic_given_stream() {
        let spec = DgpSpec::location(500, 2, 0.0, 1.0).with_seed(2);
        let data = sample(&spec).unwrap();
        let a = cart_plus_grow(&data, &spec, 4, &RngStream::new(2, 5)).unwrap();
        let b = cart_plus_grow(&data, &spec, 4, &RngStream::new(2, 5)).unwrap();
        assert_eq!(a, b);
    }
}
