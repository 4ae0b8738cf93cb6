//! Conditional average treatment effect estimators built from trees, for
//! randomised data with a known treatment probability.

use crate::cart::{self, FitMeta, GrowConfig, LevelGrower, SplitRule, Tree, TreeMode};
use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::prune::{self, CvConfig, CvSelection, Prunable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalKind {
    /// Difference of two arm-wise regression trees.
    RegPlugin,
    /// One regression tree on the transformed outcome.
    TransformedOutcome,
    /// Effect-targeting splits on one half, arm-mean differences on the other.
    HonestCausal,
}

/// Split criterion of the honest causal tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CausalCriterion {
    /// Maximise `sum_c n_c theta_c^2 - penalty * sum_c n_c Var(theta_c)` over the two children.
    SquaredEffectGain { variance_penalty: f64 },
    /// CART squared error on the transformed outcome.
    SseOnTransformed,
}

impl CausalCriterion {
    pub fn squared_effect() -> Self {
        CausalCriterion::SquaredEffectGain { variance_penalty: 0.0 }
    }
}

/// `y (d - xi) / (xi (1 - xi))`.
pub fn transform_outcome(y: f64, d: f64, xi: f64) -> f64 {
    y * (d - xi) / (xi * (1.0 - xi))
}

fn transformed(data: &Dataset) -> Result<Vec<f64>> {
    let (d, xi) = arms(data)?;
    Ok(data.y.iter().zip(d).map(|(&y, &d)| transform_outcome(y, f64::from(d), xi)).collect())
}

fn arms(data: &Dataset) -> Result<(&[u8], f64)> {
    match (&data.d, data.xi) {
        (Some(d), Some(xi)) => Ok((d, xi)),
        _ => Err(Error::InvalidArgument("causal estimators need treatment indicators and a propensity".into())),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct ArmSums {
    n1: usize,
    s1: f64,
    q1: f64,
    n0: usize,
    s0: f64,
    q0: f64,
}

impl ArmSums {
    #[inline]
    fn push(&mut self, y: f64, d: u8) {
        if d == 1 {
            self.n1 += 1;
            self.s1 += y;
            self.q1 += y * y;
        } else {
            self.n0 += 1;
            self.s0 += y;
            self.q0 += y * y;
        }
    }

    fn minus(&self, other: &ArmSums) -> ArmSums {
        ArmSums {
            n1: self.n1 - other.n1,
            s1: self.s1 - other.s1,
            q1: self.q1 - other.q1,
            n0: self.n0 - other.n0,
            s0: self.s0 - other.s0,
            q0: self.q0 - other.q0,
        }
    }

    fn both_arms(&self) -> bool {
        self.n1 > 0 && self.n0 > 0
    }

    fn effect(&self) -> f64 {
        self.s1 / self.n1 as f64 - self.s0 / self.n0 as f64
    }

    /// `n theta^2 - penalty * n (v1/n1 + v0/n0)`.
    fn score(&self, penalty: f64) -> f64 {
        let n = (self.n1 + self.n0) as f64;
        let theta = self.effect();
        let mut score = n * theta * theta;
        if penalty != 0.0 {
            let var = |n: usize, s: f64, q: f64| {
                let m = s / n as f64;
                (q / n as f64 - m * m).max(0.0) / n as f64
            };
            score -= penalty * n * (var(self.n1, self.s1, self.q1) + var(self.n0, self.s0, self.q0));
        }
        score
    }
}

/// Split rule for the honest causal tree. Children must keep both arms.
struct CausalRule<'a> {
    y: &'a [f64],
    ystar: &'a [f64],
    d: &'a [u8],
    criterion: CausalCriterion,
}

#[derive(Clone, Copy)]
struct CausalAcc {
    arms: ArmSums,
    centred: f64,
}

struct CausalStats {
    arms: ArmSums,
    mean_star: f64,
}

impl SplitRule for CausalRule<'_> {
    type Stats = CausalStats;
    type Acc = CausalAcc;

    fn node_stats(&self, ids: &[usize]) -> Option<CausalStats> {
        let mut arms = ArmSums::default();
        for &i in ids {
            arms.push(self.y[i], self.d[i]);
        }
        if arms.n1 < 2 || arms.n0 < 2 {
            return None;
        }
        let mean_star = ids.iter().map(|&i| self.ystar[i]).sum::<f64>() / ids.len() as f64;
        Some(CausalStats { arms, mean_star })
    }

    fn empty(&self) -> CausalAcc {
        CausalAcc { arms: ArmSums::default(), centred: 0.0 }
    }

    fn push(&self, acc: &mut CausalAcc, id: usize, stats: &CausalStats) {
        acc.arms.push(self.y[id], self.d[id]);
        acc.centred += self.ystar[id] - stats.mean_star;
    }

    fn gain(&self, left: &CausalAcc, n_left: usize, n: usize, stats: &CausalStats) -> Option<f64> {
        let right = stats.arms.minus(&left.arms);
        if !left.arms.both_arms() || !right.both_arms() {
            return None;
        }
        Some(match self.criterion {
            CausalCriterion::SquaredEffectGain { variance_penalty } => {
                left.arms.score(variance_penalty) + right.score(variance_penalty) - stats.arms.score(variance_penalty)
            }
            CausalCriterion::SseOnTransformed => {
                left.centred * left.centred * n as f64 / (n_left as f64 * (n - n_left) as f64)
            }
        })
    }
}

/// Honest causal tree: structure from one half, effects from the other.
#[derive(Debug, Clone, PartialEq)]
pub struct HonestCausalTree {
    /// Partition grown on the structure half; node outputs are structure-half effects.
    pub structure: Tree,
    /// Per-node effect estimates from the estimation half, with ancestor fallback.
    pub effects: Vec<f64>,
    /// Per-node `(treated, control)` estimation counts.
    pub est_arm_counts: Vec<(usize, usize)>,
    /// Per-node structure-half risk; a split's gain equals `risk(t) - risk(l) - risk(r)`.
    pub risks: Vec<f64>,
    pub criterion: CausalCriterion,
}

impl HonestCausalTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.effects[self.structure.leaf_for(x)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CausalParts {
    TwoArm { treated: Tree, control: Tree },
    Transformed(Tree),
    Honest(HonestCausalTree),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalEstimate {
    pub kind: CausalKind,
    pub parts: CausalParts,
    pub xi: f64,
}

impl CausalEstimate {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.parts {
            CausalParts::TwoArm { treated, control } => treated.predict(x) - control.predict(x),
            CausalParts::Transformed(tree) => tree.predict(x),
            CausalParts::Honest(ht) => ht.predict(x),
        }
    }
}

/// Arm-wise CART trees; the effect is treated prediction minus control prediction.
pub fn fit_theta_reg(data: &Dataset, cfg: &GrowConfig) -> Result<CausalEstimate> {
    let (d, xi) = arms(data)?;
    let treated: Vec<usize> = (0..data.n()).filter(|&i| d[i] == 1).collect();
    let control: Vec<usize> = (0..data.n()).filter(|&i| d[i] == 0).collect();
    if treated.is_empty() {
        return Err(Error::EmptyArm("treated"));
    }
    if control.is_empty() {
        return Err(Error::EmptyArm("control"));
    }
    let meta = FitMeta { seed: None, config: cfg.clone(), mtry: None };
    let fit = |ids: Vec<usize>| cart::grow_on(data, &data.y, ids, cfg, &mut cart::feature_choice(cfg, data.p()), meta.clone());
    Ok(CausalEstimate {
        kind: CausalKind::RegPlugin,
        parts: CausalParts::TwoArm { treated: fit(treated)?, control: fit(control)? },
        xi,
    })
}

/// CART on the transformed outcome.
pub fn fit_theta_ipw(data: &Dataset, cfg: &GrowConfig) -> Result<CausalEstimate> {
    let (_, xi) = arms(data)?;
    let ystar = transformed(data)?;
    Ok(CausalEstimate { kind: CausalKind::TransformedOutcome, parts: CausalParts::Transformed(cart::grow(data, &ystar, cfg)?), xi })
}

/// Honest causal tree on all of `data`: the first half of the samples builds
/// the partition, the second half estimates the leaf effects.
pub fn fit_honest_causal(data: &Dataset, cfg: &GrowConfig, criterion: CausalCriterion) -> Result<CausalEstimate> {
    let ids: Vec<usize> = (0..data.n()).collect();
    let (_, xi) = arms(data)?;
    let ht = fit_honest_causal_on(data, &ids, cfg, criterion)?;
    Ok(CausalEstimate { kind: CausalKind::HonestCausal, parts: CausalParts::Honest(ht), xi })
}

/// Honest causal tree on the samples `ids`, halved in the given order.
pub(crate) fn fit_honest_causal_on(data: &Dataset, ids: &[usize], cfg: &GrowConfig, criterion: CausalCriterion) -> Result<HonestCausalTree> {
    let (d, _) = arms(data)?;
    let ystar = transformed(data)?;
    let half = ids.len() / 2;
    let (structure_ids, est_ids) = ids.split_at(half);
    let has = |set: &[usize], arm: u8| set.iter().any(|&i| d[i] == arm);
    if !has(structure_ids, 1) || !has(est_ids, 1) {
        return Err(Error::EmptyArm("treated"));
    }
    if !has(structure_ids, 0) || !has(est_ids, 0) {
        return Err(Error::EmptyArm("control"));
    }
    let rule = CausalRule { y: &data.y, ystar: &ystar, d, criterion };
    let mut grower = LevelGrower::new(data, structure_ids.to_vec(), cfg)?;
    let mut features = cart::feature_choice(cfg, data.p());
    while !grower.is_done() {
        grower.split_level(&rule, &mut features);
    }
    let mut structure = grower.finish(TreeMode::Honest, FitMeta { seed: None, config: cfg.clone(), mtry: None });

    let n_nodes = structure.nodes.len();
    let mut risks = vec![0.0; n_nodes];
    for node in &mut structure.nodes {
        let mut sums = ArmSums::default();
        for &i in &node.sample_ids {
            sums.push(data.y[i], d[i]);
        }
        node.output = if sums.both_arms() { sums.effect() } else { 0.0 };
        risks[node.id] = match criterion {
            CausalCriterion::SquaredEffectGain { variance_penalty } if sums.both_arms() => -sums.score(variance_penalty),
            CausalCriterion::SquaredEffectGain { .. } => 0.0,
            CausalCriterion::SseOnTransformed => {
                let m = node.sample_ids.iter().map(|&i| ystar[i]).sum::<f64>() / node.sample_ids.len() as f64;
                node.sample_ids.iter().map(|&i| (ystar[i] - m).powi(2)).sum()
            }
        };
    }

    let mut est = vec![ArmSums::default(); n_nodes];
    for &i in est_ids {
        let mut id = 0;
        loop {
            est[id].push(data.y[i], d[i]);
            let node = &structure.nodes[id];
            match (node.children, node.split) {
                (Some((l, r)), Some(s)) => id = if data.x(i, s.direction) <= s.threshold { l } else { r },
                _ => break,
            }
        }
    }
    let mut effects = vec![0.0; n_nodes];
    for id in 0..n_nodes {
        effects[id] = if est[id].both_arms() {
            est[id].effect()
        } else {
            match structure.nodes[id].parent {
                Some(parent) => effects[parent],
                None => structure.nodes[0].output,
            }
        };
    }
    let est_arm_counts = est.iter().map(|s| (s.n1, s.n0)).collect();
    Ok(HonestCausalTree { structure, effects, est_arm_counts, risks, criterion })
}

/// Honest causal tree pruned by cross-validation. The weakest-link sequence
/// uses the structure-half risks; the validation loss is the squared error
/// against the transformed outcome.
pub fn fit_pruned_honest_causal(
    data: &Dataset,
    cfg: &GrowConfig,
    criterion: CausalCriterion,
    cv: &CvConfig,
) -> Result<(CvSelection, CausalEstimate)> {
    let (_, xi) = arms(data)?;
    let ystar = transformed(data)?;
    let fit = |ids: &[usize]| -> Result<Prunable> {
        let ht = fit_honest_causal_on(data, ids, cfg, criterion)?;
        Ok(Prunable { values: ht.effects.clone(), risks: ht.risks.clone(), tree: ht.structure })
    };
    let all: Vec<usize> = (0..data.n()).collect();
    let full = fit_honest_causal_on(data, &all, cfg, criterion)?;
    let full_seq = prune::weakest_link_with_risk(&full.structure, &full.risks);
    let selection = prune::select_alpha(data, &full_seq, cv, fit, |i| ystar[i])?;
    let keep = full_seq.collapsed_at(selection.alpha);
    let (structure, old_ids) = prune::collapse(&full.structure, &keep);
    let pick = |v: &[f64]| old_ids.iter().map(|&o| v[o]).collect::<Vec<f64>>();
    let pruned = HonestCausalTree {
        effects: pick(&full.effects),
        risks: pick(&full.risks),
        est_arm_counts: old_ids.iter().map(|&o| full.est_arm_counts[o]).collect(),
        structure,
        criterion,
    };
    Ok((selection, CausalEstimate { kind: CausalKind::HonestCausal, parts: CausalParts::Honest(pruned), xi }))
}
