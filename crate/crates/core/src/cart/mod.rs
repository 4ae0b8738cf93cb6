//! CART regression trees: split search, level-wise growth and
//! piecewise-constant prediction.

mod split;
mod text;

pub use split::{best_split, improves, impurity_gain, split_sse, NodeData, SplitResult, TIE_TOLERANCE};
pub(crate) use split::{scan_feature, sorted_ids, RegressionRule, SplitRule};

use rand::seq::index;

use crate::dgp::{Dataset, DgpSpec};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq)]
pub struct GrowConfig {
    /// Maximal depth `K`; `0` gives a single leaf.
    pub max_depth: usize,
    /// Smallest admissible child size.
    pub min_node_size: usize,
    /// Directions scanned at every node; `None` scans all of them.
    pub feature_subset: Option<Vec<usize>>,
}

impl GrowConfig {
    pub fn new(max_depth: usize) -> Self {
        Self { max_depth, min_node_size: 1, feature_subset: None }
    }

    pub fn stump() -> Self {
        Self::new(1)
    }

    pub fn with_min_node_size(mut self, min_node_size: usize) -> Self {
        self.min_node_size = min_node_size;
        self
    }

    pub fn with_features(mut self, features: Vec<usize>) -> Self {
        self.feature_subset = Some(features);
        self
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.min_node_size == 0 {
            return Err(Error::InvalidArgument("min_node_size must be at least 1".into()));
        }
        if let Some(f) = &self.feature_subset {
            if f.is_empty() {
                return Err(Error::InvalidArgument("feature subset is empty".into()));
            }
            if let Some(bad) = f.iter().find(|&&j| j >= p) {
                return Err(Error::InvalidArgument(format!("direction {bad} out of range for p = {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeMode {
    Adaptive,
    Honest,
}

/// Seed and configuration a tree was fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct FitMeta {
    pub seed: Option<u64>,
    pub config: GrowConfig,
    pub mtry: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub sample_ids: Vec<usize>,
    /// Number of fitting samples in the node (kept when sample ids are not).
    pub n_samples: usize,
    /// Closed bounds `[lo, hi]` per direction.
    pub bounds: Vec<(f64, f64)>,
    pub split: Option<SplitResult>,
    /// `(left, right)` child ids.
    pub children: Option<(usize, usize)>,
    pub output: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn count(&self) -> usize {
        self.n_samples
    }
}

/// Binary partition of `[0, 1]^p` stored as a node arena; node 0 is the root
/// and children always follow their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub p: usize,
    pub max_depth: usize,
    pub mode: TreeMode,
    pub meta: FitMeta,
}

impl Tree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Node ids from the root to the leaf containing `x`.
    pub fn path(&self, x: &[f64]) -> Vec<usize> {
        let mut path = vec![0];
        let mut id = 0;
        while let (Some((l, r)), Some(s)) = (self.nodes[id].children, self.nodes[id].split) {
            id = if x[s.direction] <= s.threshold { l } else { r };
            path.push(id);
        }
        path
    }

    pub fn leaf_for(&self, x: &[f64]) -> usize {
        let mut id = 0;
        while let (Some((l, r)), Some(s)) = (self.nodes[id].children, self.nodes[id].split) {
            id = if x[s.direction] <= s.threshold { l } else { r };
        }
        id
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_for(x)].output
    }

    /// Exact `sup_x |prediction(x) - mu(x)|` over the unit cube.
    pub fn sup_error(&self, spec: &DgpSpec) -> f64 {
        sup_error_by_leaf(self, spec, |leaf| Some(self.nodes[leaf].output))
    }

    /// Recomputes every node output as the mean of `responses` over its samples.
    pub(crate) fn set_mean_outputs(&mut self, responses: &[f64]) {
        for node in &mut self.nodes {
            if !node.sample_ids.is_empty() {
                node.output = node.sample_ids.iter().map(|&i| responses[i]).sum::<f64>() / node.sample_ids.len() as f64;
            }
        }
    }
}

/// Points per dimension used to bound a non-constant truth inside a leaf box.
pub const SUP_GRID_POINTS: usize = 512;

/// `max_leaf sup_{x in leaf} |value(leaf) - mu(x)|`; leaves whose value is
/// `None` are taken to equal the truth.
pub(crate) fn sup_error_by_leaf(tree: &Tree, spec: &DgpSpec, value: impl Fn(usize) -> Option<f64>) -> f64 {
    let mut sup = 0.0_f64;
    for leaf in tree.leaves() {
        let Some(v) = value(leaf) else { continue };
        let bounds = &tree.nodes[leaf].bounds;
        if spec.has_constant_mean() {
            let centre: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
            sup = sup.max((v - spec.true_mean(&centre)).abs());
            continue;
        }
        let per_dim = ((SUP_GRID_POINTS as f64).powf(1.0 / tree.p as f64).ceil() as usize).max(2);
        let total = per_dim.pow(tree.p as u32);
        let mut x = vec![0.0; tree.p];
        for flat in 0..total {
            let mut rest = flat;
            for (j, xj) in x.iter_mut().enumerate() {
                let k = rest % per_dim;
                rest /= per_dim;
                let (lo, hi) = bounds[j];
                *xj = lo + (hi - lo) * k as f64 / (per_dim - 1) as f64;
            }
            sup = sup.max((v - spec.true_mean(&x)).abs());
        }
    }
    sup
}

/// How candidate directions are chosen at each node.
pub(crate) enum FeatureChoice<'r> {
    /// The same sorted set at every node.
    Fixed(Vec<usize>),
    /// A fresh uniform `mtry`-subset at every node.
    Random { p: usize, mtry: usize, rng: &'r mut StreamRng },
}

impl FeatureChoice<'_> {
    fn draw(&mut self) -> Vec<usize> {
        match self {
            FeatureChoice::Fixed(f) => f.clone(),
            FeatureChoice::Random { p, mtry, rng } => {
                let mut m = index::sample(*rng, *p, *mtry).into_vec();
                m.sort_unstable();
                m
            }
        }
    }
}

struct Pending {
    node: usize,
    sorted: Vec<Option<Vec<usize>>>,
}

/// Top-down, level-by-level growth. Each call to [`LevelGrower::split_level`]
/// refines every frontier node once, so callers can change the responses
/// between levels.
pub(crate) struct LevelGrower<'d> {
    data: &'d Dataset,
    nodes: Vec<Node>,
    frontier: Vec<Pending>,
    cfg: GrowConfig,
}

impl<'d> LevelGrower<'d> {
    pub(crate) fn new(data: &'d Dataset, ids: Vec<usize>, cfg: &GrowConfig) -> Result<Self> {
        cfg.validate(data.p())?;
        if ids.is_empty() {
            return Err(Error::EmptyData);
        }
        let root = Node {
            id: 0,
            parent: None,
            depth: 0,
            n_samples: ids.len(),
            sample_ids: ids,
            bounds: vec![(0.0, 1.0); data.p()],
            split: None,
            children: None,
            output: 0.0,
        };
        Ok(Self {
            data,
            nodes: vec![root],
            frontier: vec![Pending { node: 0, sorted: vec![None; data.p()] }],
            cfg: cfg.clone(),
        })
    }

    pub(crate) fn is_done(&self) -> bool {
        self.frontier.is_empty()
    }

    /// Splits every frontier node with `rule`; children form the new frontier.
    pub(crate) fn split_level<R: SplitRule>(&mut self, rule: &R, features: &mut FeatureChoice<'_>) {
        let frontier = std::mem::take(&mut self.frontier);
        for mut pending in frontier {
            let id = pending.node;
            if self.nodes[id].depth >= self.cfg.max_depth || self.nodes[id].sample_ids.len() < 2 {
                continue;
            }
            let candidates = features.draw();
            let Some(stats) = rule.node_stats(&self.nodes[id].sample_ids) else { continue };
            let mut best = None;
            for &j in &candidates {
                if pending.sorted[j].is_none() {
                    pending.sorted[j] = Some(sorted_ids(self.data, &self.nodes[id].sample_ids, j));
                }
                let sorted = pending.sorted[j].as_deref().expect("just filled");
                scan_feature(rule, self.data, j, sorted, &stats, self.cfg.min_node_size, &mut best);
            }
            if let Some(split) = best {
                self.attach_children(pending, split);
            }
        }
    }

    fn attach_children(&mut self, pending: Pending, split: SplitResult) {
        let id = pending.node;
        let (j, tau) = (split.direction, split.threshold);
        let data = self.data;
        let goes_left = |s: &usize| data.x(*s, j) <= tau;
        let (left_ids, right_ids): (Vec<usize>, Vec<usize>) = self.nodes[id].sample_ids.iter().partition(|s| goes_left(s));
        let mut left_sorted = Vec::with_capacity(pending.sorted.len());
        let mut right_sorted = Vec::with_capacity(pending.sorted.len());
        for list in pending.sorted {
            match list {
                Some(list) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(goes_left);
                    left_sorted.push(Some(l));
                    right_sorted.push(Some(r));
                }
                None => {
                    left_sorted.push(None);
                    right_sorted.push(None);
                }
            }
        }
        let parent = &self.nodes[id];
        let depth = parent.depth + 1;
        let mut left_bounds = parent.bounds.clone();
        left_bounds[j].1 = tau;
        let mut right_bounds = parent.bounds.clone();
        right_bounds[j].0 = tau;
        let (l, r) = (self.nodes.len(), self.nodes.len() + 1);
        for (cid, ids, bounds) in [(l, left_ids, left_bounds), (r, right_ids, right_bounds)] {
            self.nodes.push(Node {
                id: cid,
                parent: Some(id),
                depth,
                n_samples: ids.len(),
                sample_ids: ids,
                bounds,
                split: None,
                children: None,
                output: 0.0,
            });
        }
        self.nodes[id].split = Some(split);
        self.nodes[id].children = Some((l, r));
        self.frontier.push(Pending { node: l, sorted: left_sorted });
        self.frontier.push(Pending { node: r, sorted: right_sorted });
    }

    pub(crate) fn finish(self, mode: TreeMode, meta: FitMeta) -> Tree {
        Tree { nodes: self.nodes, p: self.data.p(), max_depth: self.cfg.max_depth, mode, meta }
    }
}

/// Grows a CART tree on the samples `ids` of `data` using `responses`
/// (indexed by sample id) at every level.
pub(crate) fn grow_on(
    data: &Dataset,
    responses: &[f64],
    ids: Vec<usize>,
    cfg: &GrowConfig,
    features: &mut FeatureChoice<'_>,
    meta: FitMeta,
) -> Result<Tree> {
    if responses.len() != data.n() {
        return Err(Error::ShapeMismatch(format!("{} responses for {} samples", responses.len(), data.n())));
    }
    let mut grower = LevelGrower::new(data, ids, cfg)?;
    let rule = RegressionRule { y: responses };
    while !grower.is_done() {
        grower.split_level(&rule, features);
    }
    let mut tree = grower.finish(TreeMode::Adaptive, meta);
    tree.set_mean_outputs(responses);
    Ok(tree)
}

pub(crate) fn feature_choice(cfg: &GrowConfig, p: usize) -> FeatureChoice<'static> {
    let mut f = cfg.feature_subset.clone().unwrap_or_else(|| (0..p).collect());
    f.sort_unstable();
    f.dedup();
    FeatureChoice::Fixed(f)
}

/// Grows a CART tree on all of `data` with the given responses; leaf outputs
/// are within-leaf means.
pub fn grow(data: &Dataset, responses: &[f64], cfg: &GrowConfig) -> Result<Tree> {
    let meta = FitMeta { seed: None, config: cfg.clone(), mtry: None };
    grow_on(data, responses, (0..data.n()).collect(), cfg, &mut feature_choice(cfg, data.p()), meta)
}
