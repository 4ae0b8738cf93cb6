//! Cost-complexity (weakest-link) pruning and cross-validated choice of the
//! complexity parameter.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;

use crate::cart::{self, FitMeta, GrowConfig, Node, Tree};
use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Relative tolerance under which two critical values count as one step.
const ALPHA_TOL: f64 = 1e-12;

/// The nested sequence of subtrees minimising `risk + alpha * leaves`.
///
/// Subtree `k` is optimal for `alpha` in `[alphas[k], alphas[k + 1])`. The
/// first entry is at `alpha = 0` and the last is the root-only tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneSequence {
    pub alphas: Vec<f64>,
    pub n_leaves: Vec<usize>,
    /// Total leaf risk of each subtree.
    pub risks: Vec<f64>,
    /// Per node, the smallest alpha at which the node is no longer internal.
    /// Leaves of the full tree hold `-inf`.
    pub collapse_alpha: Vec<f64>,
    parents: Vec<Option<usize>>,
}

/// One member of a [`PruneSequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct Subtree {
    pub alpha: f64,
    pub n_leaves: usize,
    pub risk: f64,
    /// Internal nodes of the full tree that are leaves here.
    pub collapsed: Vec<usize>,
}

impl PruneSequence {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Index of the subtree in force at `alpha`.
    pub fn index_for(&self, alpha: f64) -> usize {
        self.alphas.partition_point(|&a| a <= alpha).saturating_sub(1)
    }

    pub fn subtree(&self, k: usize) -> Subtree {
        let alpha = self.alphas[k];
        let terminal = self.collapsed_at(alpha);
        let collapsed = (0..terminal.len())
            .filter(|&t| terminal[t] && self.collapse_alpha[t] > f64::NEG_INFINITY && self.parents[t].is_none_or(|q| !terminal[q]))
            .collect();
        Subtree { alpha, n_leaves: self.n_leaves[k], risk: self.risks[k], collapsed }
    }

    /// Per node, whether it is terminal (or lies below a terminal node) at `alpha`.
    pub fn collapsed_at(&self, alpha: f64) -> Vec<bool> {
        self.collapse_alpha.iter().map(|&c| c <= alpha).collect()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Per-node sum of squared deviations from the node mean.
pub fn node_sse(tree: &Tree, responses: &[f64]) -> Vec<f64> {
    tree.nodes
        .iter()
        .map(|node| {
            let ids = &node.sample_ids;
            if ids.is_empty() {
                return 0.0;
            }
            let m = ids.iter().map(|&i| responses[i]).sum::<f64>() / ids.len() as f64;
            ids.iter().map(|&i| (responses[i] - m).powi(2)).sum()
        })
        .collect()
}

/// Weakest-link sequence of a regression tree under training SSE.
pub fn weakest_link(tree: &Tree, responses: &[f64]) -> PruneSequence {
    weakest_link_with_risk(tree, &node_sse(tree, responses))
}

/// Weakest-link sequence for an arbitrary per-node risk.
pub fn weakest_link_with_risk(tree: &Tree, risk: &[f64]) -> PruneSequence {
    let n = tree.nodes.len();
    let kids = |t: usize| tree.nodes[t].children;
    let parents: Vec<Option<usize>> = tree.nodes.iter().map(|nd| nd.parent).collect();
    let mut collapse = vec![f64::NEG_INFINITY; n];
    let mut internal: Vec<bool> = tree.nodes.iter().map(|nd| !nd.is_leaf()).collect();
    let mut sub_risk = risk.to_vec();
    let mut sub_leaves = vec![1usize; n];

    // alpha = 0: children come after parents, so a reverse sweep is bottom-up
    for t in (0..n).rev() {
        if let Some((l, r)) = kids(t) {
            sub_risk[t] = sub_risk[l] + sub_risk[r];
            sub_leaves[t] = sub_leaves[l] + sub_leaves[r];
            if risk[t] <= sub_risk[t] {
                internal[t] = false;
                sub_risk[t] = risk[t];
                sub_leaves[t] = 1;
            }
        }
    }
    let mark_below = |t: usize, alpha: f64, collapse: &mut Vec<f64>, internal: &mut Vec<bool>| {
        let mut stack = vec![t];
        while let Some(u) = stack.pop() {
            if let Some((l, r)) = kids(u) {
                if collapse[u] == f64::NEG_INFINITY {
                    collapse[u] = alpha;
                }
                internal[u] = false;
                stack.push(l);
                stack.push(r);
            }
        }
    };
    for t in 0..n {
        if kids(t).is_some() && !internal[t] && collapse[t] == f64::NEG_INFINITY {
            mark_below(t, 0.0, &mut collapse, &mut internal);
        }
    }

    let mut alphas = vec![0.0];
    let mut n_leaves = vec![sub_leaves[0]];
    let mut risks = vec![sub_risk[0]];
    let mut version = vec![0u64; n];
    let link = |t: usize, sub_risk: &[f64], sub_leaves: &[usize]| (risk[t] - sub_risk[t]) / (sub_leaves[t] - 1) as f64;
    let mut heap = BinaryHeap::new();
    for t in 0..n {
        if internal[t] {
            heap.push(Reverse((Key(link(t, &sub_risk, &sub_leaves)), t, 0u64)));
        }
    }
    while let Some(&Reverse((Key(g), t, v))) = heap.peek() {
        if !internal[t] || v != version[t] {
            heap.pop();
            continue;
        }
        let alpha = g.max(*alphas.last().unwrap());
        let limit = alpha + ALPHA_TOL * alpha.abs().max(1e-300);
        while let Some(&Reverse((Key(g), t, v))) = heap.peek() {
            if g > limit {
                break;
            }
            heap.pop();
            if !internal[t] || v != version[t] {
                continue;
            }
            let (dr, dl) = (risk[t] - sub_risk[t], sub_leaves[t] - 1);
            mark_below(t, alpha, &mut collapse, &mut internal);
            sub_risk[t] = risk[t];
            sub_leaves[t] = 1;
            let mut up = parents[t];
            while let Some(q) = up {
                sub_risk[q] += dr;
                sub_leaves[q] -= dl;
                version[q] += 1;
                if internal[q] {
                    heap.push(Reverse((Key(link(q, &sub_risk, &sub_leaves)), q, version[q])));
                }
                up = parents[q];
            }
        }
        if alpha > *alphas.last().unwrap() {
            alphas.push(alpha);
            n_leaves.push(sub_leaves[0]);
            risks.push(sub_risk[0]);
        } else {
            // merged into the alpha = 0 step
            *n_leaves.last_mut().unwrap() = sub_leaves[0];
            *risks.last_mut().unwrap() = sub_risk[0];
        }
    }
    PruneSequence { alphas, n_leaves, risks, collapse_alpha: collapse, parents }
}

/// Copies `tree` keeping every node that has no terminal proper ancestor;
/// nodes flagged in `terminal` become leaves. Returns the new tree and the
/// old id of each new node.
pub fn collapse(tree: &Tree, terminal: &[bool]) -> (Tree, Vec<usize>) {
    let mut nodes: Vec<Node> = Vec::new();
    let mut old_ids = Vec::new();
    let mut queue = std::collections::VecDeque::from([(0usize, None::<usize>)]);
    while let Some((old, parent)) = queue.pop_front() {
        let id = nodes.len();
        let mut node = tree.nodes[old].clone();
        node.id = id;
        node.parent = parent;
        if let Some(p) = parent {
            let kids = nodes[p].children.get_or_insert((id, id));
            kids.1 = id;
        }
        let expand = node.children.filter(|_| !terminal[old]);
        node.children = None;
        if expand.is_none() {
            node.split = None;
        }
        nodes.push(node);
        old_ids.push(old);
        if let Some((l, r)) = expand {
            queue.push_back((l, Some(id)));
            queue.push_back((r, Some(id)));
        }
    }
    let depth = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
    let pruned = Tree { nodes, p: tree.p, max_depth: depth, mode: tree.mode, meta: tree.meta.clone() };
    (pruned, old_ids)
}

/// The member of `seq` in force at `alpha`, as a standalone tree.
pub fn prune_to(tree: &Tree, seq: &PruneSequence, alpha: f64) -> Tree {
    collapse(tree, &seq.collapsed_at(alpha)).0
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub one_se: bool,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 10, one_se: false, seed: 0 }
    }
}

/// Cross-validation curve and the chosen complexity parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub alpha: f64,
    pub cv_error: f64,
    pub grid: Vec<f64>,
    /// Mean validation loss at each grid point.
    pub errors: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// A fitted tree ready for pruning: per-node risk and per-node prediction.
pub(crate) struct Prunable {
    pub tree: Tree,
    pub risks: Vec<f64>,
    pub values: Vec<f64>,
}

const FOLD_STREAM: u64 = 0xF01D;

/// Fold label of every sample: a seeded permutation dealt round-robin.
pub fn fold_labels(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut RngStream::new(seed, FOLD_STREAM).rng());
    let mut labels = vec![0; n];
    for (k, &i) in perm.iter().enumerate() {
        labels[i] = k % folds;
    }
    labels
}

/// K-fold choice of alpha over the union of all critical values. `fit`
/// builds a prunable tree on a training id list; `target` is the value each
/// held-out prediction is scored against by squared error.
pub(crate) fn select_alpha(
    data: &Dataset,
    full: &PruneSequence,
    cv: &CvConfig,
    fit: impl Fn(&[usize]) -> Result<Prunable> + Sync,
    target: impl Fn(usize) -> f64 + Sync,
) -> Result<CvSelection> {
    let n = data.n();
    if cv.folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if n < cv.folds {
        return Err(Error::InvalidArgument(format!("{n} samples for {} folds", cv.folds)));
    }
    let labels = fold_labels(n, cv.folds, cv.seed);
    let fitted = (0..cv.folds)
        .map(|k| {
            let train: Vec<usize> = (0..n).filter(|&i| labels[i] != k).collect();
            let model = fit(&train)?;
            let seq = weakest_link_with_risk(&model.tree, &model.risks);
            Ok((model, seq))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grid: Vec<f64> = full.alphas.clone();
    for (_, seq) in &fitted {
        grid.extend_from_slice(&seq.alphas);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    // per-grid-point sums of loss and squared loss, via difference arrays
    let g = grid.len();
    let mut d1 = vec![0.0; g + 1];
    let mut d2 = vec![0.0; g + 1];
    for (k, (model, seq)) in fitted.iter().enumerate() {
        for i in (0..n).filter(|&i| labels[i] == k) {
            let path = model.tree.path(&data.row(i));
            let y = target(i);
            // node path[j] predicts on alpha in [c_j, c_{j-1}), c_{-1} = +inf
            let mut hi = g;
            for &node in &path {
                let c = seq.collapse_alpha[node];
                let lo = grid.partition_point(|&a| a < c);
                if lo < hi {
                    let loss = (y - model.values[node]).powi(2);
                    d1[lo] += loss;
                    d1[hi] -= loss;
                    d2[lo] += loss * loss;
                    d2[hi] -= loss * loss;
                    hi = lo;
                }
            }
        }
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut errors = Vec::with_capacity(g);
    let mut std_errors = Vec::with_capacity(g);
    let nf = n as f64;
    for j in 0..g {
        s1 += d1[j];
        s2 += d2[j];
        let m = s1 / nf;
        errors.push(m);
        std_errors.push(((s2 / nf - m * m).max(0.0) / nf).sqrt());
    }
    let mut best = 0;
    for j in 1..g {
        if errors[j] <= errors[best] {
            best = j;
        }
    }
    let mut pick = best;
    if cv.one_se {
        let cut = errors[best] + std_errors[best];
        pick = (0..g).rev().find(|&j| errors[j] <= cut).unwrap_or(best);
    }
    Ok(CvSelection { alpha: grid[pick], cv_error: errors[pick], grid, errors, std_errors })
}

/// Grows a CART tree on `data`, chooses alpha by K-fold CV on squared error
/// and returns the chosen alpha with the pruned full-data tree.
pub fn cv_select(data: &Dataset, cfg: &GrowConfig, cv: &CvConfig) -> Result<(CvSelection, Tree)> {
    let p = data.p();
    let grow = |ids: &[usize]| {
        let meta = FitMeta { seed: None, config: cfg.clone(), mtry: None };
        cart::grow_on(data, &data.y, ids.to_vec(), cfg, &mut cart::feature_choice(cfg, p), meta)
    };
    let full = grow(&(0..data.n()).collect::<Vec<_>>())?;
    let full_seq = weakest_link(&full, &data.y);
    let fit = |ids: &[usize]| -> Result<Prunable> {
        let tree = grow(ids)?;
        let risks = node_sse(&tree, &data.y);
        let values = tree.nodes.iter().map(|nd| nd.output).collect();
        Ok(Prunable { tree, risks, values })
    };
    let selection = select_alpha(data, &full_seq, cv, fit, |i| data.y[i])?;
    let pruned = prune_to(&full, &full_seq, selection.alpha);
    Ok((selection, pruned))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{sample, DgpSpec};

    fn one_dim(x: Vec<f64>, y: Vec<f64>) -> Dataset {
        Dataset::from_columns(vec![x], y, None, None).unwrap()
    }

    #[test]
    fn single_split_critical_alpha_is_gain() {
        let data = one_dim(vec![0.1, 0.2, 0.7, 0.9], vec![0.0, 1.0, 5.0, 6.0]);
        let tree = cart::grow(&data, &data.y, &GrowConfig::stump()).unwrap();
        let seq = weakest_link(&tree, &data.y);
        let gain = tree.root().split.unwrap().gain;
        assert_eq!(seq.alphas.len(), 2);
        assert!((seq.alphas[1] - gain).abs() < 1e-12);
        assert_eq!(seq.n_leaves, vec![2, 1]);
        assert_eq!(seq.subtree(1).collapsed, vec![0]);
        assert!(seq.subtree(0).collapsed.is_empty());
    }

    #[test]
    fn sequence_nested_and_monotone() {
        let spec = DgpSpec::location(200, 2, 0.0, 1.0).with_seed(4);
        let data = sample(&spec).unwrap();
        let tree = cart::grow(&data, &data.y, &GrowConfig::new(5)).unwrap();
        let seq = weakest_link(&tree, &data.y);
        assert!(seq.alphas.windows(2).all(|w| w[0] < w[1]));
        assert!(seq.n_leaves.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(*seq.n_leaves.last().unwrap(), 1);
        for k in 1..seq.len() {
            let (a, b) = (seq.collapsed_at(seq.alphas[k - 1]), seq.collapsed_at(seq.alphas[k]));
            assert!(a.iter().zip(&b).all(|(x, y)| !x || *y));
            let pruned = prune_to(&tree, &seq, seq.alphas[k]);
            assert_eq!(pruned.n_leaves(), seq.n_leaves[k]);
        }
    }

    #[test]
    fn pruned_leaf_outputs_are_training_means() {
        let spec = DgpSpec::location(150, 1, 0.0, 1.0).with_seed(6);
        let data = sample(&spec).unwrap();
        let tree = cart::grow(&data, &data.y, &GrowConfig::new(4)).unwrap();
        let seq = weakest_link(&tree, &data.y);
        let pruned = prune_to(&tree, &seq, seq.alphas[seq.len() / 2]);
        for leaf in pruned.leaves() {
            let node = pruned.node(leaf);
            let m = node.sample_ids.iter().map(|&i| data.y[i]).sum::<f64>() / node.sample_ids.len() as f64;
            assert!((node.output - m).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gain_tree_collapses_at_zero() {
        let data = one_dim(vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 1.0, 1.0, 1.0]);
        let tree = cart::grow(&data, &data.y, &GrowConfig::new(2)).unwrap();
        let seq = weakest_link(&tree, &data.y);
        assert_eq!(seq.alphas, vec![0.0]);
        assert_eq!(seq.n_leaves, vec![1]);
    }

    #[test]
    fn leave_one_out_runs() {
        let spec = DgpSpec::location(20, 1, 0.0, 1.0).with_seed(1);
        let data = sample(&spec).unwrap();
        let cv = CvConfig { folds: 20, ..CvConfig::default() };
        let (sel, tree) = cv_select(&data, &GrowConfig::new(3), &cv).unwrap();
        assert!(sel.alpha >= 0.0);
        assert!(tree.n_leaves() >= 1);
        assert!(cv_select(&data, &GrowConfig::new(3), &CvConfig { folds: 21, ..cv }).is_err());
    }

    #[test]
    fn noiseless_step_keeps_split() {
        let spec = DgpSpec::location(200, 1, 0.0, 1.0).with_seed(5);
        let data = sample(&spec).unwrap();
        let y: Vec<f64> = (0..data.n()).map(|i| if data.x(i, 0) <= 0.5 { 0.0 } else { 1.0 }).collect();
        let data = data.with_responses(y).unwrap();
        let (_, tree) = cv_select(&data, &GrowConfig::new(4), &CvConfig::default()).unwrap();
        assert!(tree.n_leaves() >= 2);
        assert!((tree.predict(&[0.2]) - 0.0).abs() < 1e-12);
        assert!((tree.predict(&[0.8]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fold_labels_balanced_and_seeded() {
        let a = fold_labels(23, 5, 9);
        assert_eq!(a, fold_labels(23, 5, 9));
        for k in 0..5 {
            let c = a.iter().filter(|&&f| f == k).count();
            assert!(c == 4 || c == 5);
        }
    }
}
