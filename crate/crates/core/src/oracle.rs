//! Slow reference implementations. They evaluate definitions literally and
//! are used to certify the fast paths in tests and in `selftest`.

use std::fmt;

use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cart::{self, best_split, improves, impurity_gain, sorted_ids, split_sse, GrowConfig, NodeData, SplitResult, Tree};
use crate::dgp::{Dataset, DgpSpec, Noise};
use crate::error::{Error, Result};
use crate::prune::{node_sse, weakest_link, PruneSequence};
use crate::rng::{RngStream, StreamRng};

/// Largest tree accepted by [`enumerate_pruned_subtrees`].
pub const MAX_ENUMERATION_LEAVES: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub input: String,
    pub fast: String,
    pub oracle: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub cases_run: usize,
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    pub fn new(name: &str) -> Self {
        OracleReport { name: name.to_string(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn record(&mut self, input: impl Into<String>, fast: impl fmt::Debug, oracle: impl fmt::Debug, agree: bool) {
        self.cases_run += 1;
        if !agree {
            self.mismatches.push(Mismatch { input: input.into(), fast: format!("{fast:?}"), oracle: format!("{oracle:?}") });
        }
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "ok" } else { "MISMATCH" };
        writeln!(f, "{}: {} cases, {} mismatches [{verdict}]", self.name, self.cases_run, self.mismatches.len())?;
        for m in self.mismatches.iter().take(5) {
            writeln!(f, "  {}: fast {} oracle {}", m.input, m.fast, m.oracle)?;
        }
        Ok(())
    }
}

/// Best split by direct evaluation of the two-cell SSE at every candidate.
/// The gain is the parent SSE minus the two-cell SSE; ties (within the
/// shared tolerance) go to the smaller direction, then the smaller index.
pub fn brute_force_best_split(node: &NodeData<'_>, features: &[usize]) -> Option<SplitResult> {
    let n = node.len();
    let y = node.responses;
    if n < 2 || node.ids.iter().all(|&i| y[i] == y[node.ids[0]]) {
        return None;
    }
    let sse = |s: &[usize]| {
        let m = s.iter().map(|&k| y[k]).sum::<f64>() / s.len() as f64;
        s.iter().map(|&k| (y[k] - m).powi(2)).sum::<f64>()
    };
    let total = sse(&node.ids);
    let mut fs = features.to_vec();
    fs.sort_unstable();
    fs.dedup();
    let mut best: Option<SplitResult> = None;
    for &j in &fs {
        let sorted = sorted_ids(node.data, &node.ids, j);
        for i in 1..n {
            let tau = node.data.x(sorted[i - 1], j);
            if tau == node.data.x(sorted[i], j) {
                continue;
            }
            let gain = total - (sse(&sorted[..i]) + sse(&sorted[i..]));
            if best.as_ref().is_none_or(|b: &SplitResult| improves(gain, b.gain)) {
                best = Some(SplitResult { direction: j, order_index: i, threshold: tau, gain });
            }
        }
    }
    best
}

/// One pruned subtree: which internal nodes were turned into leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedSubtree {
    pub collapsed: Vec<usize>,
    pub n_leaves: usize,
    pub sse: f64,
}

/// Every pruned subtree of `tree` (including the tree itself and the root
/// alone), with leaf count and training SSE.
pub fn enumerate_pruned_subtrees(tree: &Tree, responses: &[f64]) -> Result<Vec<PrunedSubtree>> {
    if tree.n_leaves() > MAX_ENUMERATION_LEAVES {
        return Err(Error::TooManyLeaves(tree.n_leaves(), MAX_ENUMERATION_LEAVES));
    }
    let risk = node_sse(tree, responses);
    Ok(enumerate_with_risk(tree, &risk, 0))
}

fn enumerate_with_risk(tree: &Tree, risk: &[f64], t: usize) -> Vec<PrunedSubtree> {
    let Some((l, r)) = tree.nodes[t].children else {
        return vec![PrunedSubtree { collapsed: Vec::new(), n_leaves: 1, sse: risk[t] }];
    };
    let mut out = vec![PrunedSubtree { collapsed: vec![t], n_leaves: 1, sse: risk[t] }];
    let right = enumerate_with_risk(tree, risk, r);
    for a in enumerate_with_risk(tree, risk, l) {
        for b in &right {
            let mut collapsed = a.collapsed.clone();
            collapsed.extend_from_slice(&b.collapsed);
            out.push(PrunedSubtree { collapsed, n_leaves: a.n_leaves + b.n_leaves, sse: a.sse + b.sse });
        }
    }
    out
}

/// Checks that the sequence attains the lower envelope of
/// `sse + alpha * leaves` over all pruned subtrees, at each critical value
/// and between consecutive ones.
pub fn check_envelope(seq: &PruneSequence, all: &[PrunedSubtree]) -> std::result::Result<(), String> {
    let mut probes = Vec::new();
    for k in 0..seq.len() {
        probes.push(seq.alphas[k]);
        let next = seq.alphas.get(k + 1).copied().unwrap_or(seq.alphas[k] * 2.0 + 1.0);
        probes.push(0.5 * (seq.alphas[k] + next));
    }
    for alpha in probes {
        let k = seq.index_for(alpha);
        let ours = seq.risks[k] + alpha * seq.n_leaves[k] as f64;
        let best = all.iter().map(|s| s.sse + alpha * s.n_leaves as f64).fold(f64::INFINITY, f64::min);
        if ours > best + 1e-9 * (1.0 + best.abs()) {
            return Err(format!("alpha {alpha}: sequence cost {ours}, envelope {best}"));
        }
    }
    Ok(())
}

/// Empirical law of the root split of a decision stump under the pure-noise
/// location model.
#[derive(Debug, Clone, PartialEq)]
pub struct StumpLaw {
    pub n: usize,
    /// Split index of each replication, in `1..n`.
    pub split_index: Vec<usize>,
    /// Split point: the `split_index`-th order statistic of `n` uniforms.
    pub threshold: Vec<f64>,
    pub left_mean: Vec<f64>,
    pub right_mean: Vec<f64>,
}

impl StumpLaw {
    /// Fraction of replications with `lo <= split index <= hi`.
    pub fn freq_between(&self, lo: f64, hi: f64) -> f64 {
        let hits = self.split_index.iter().filter(|&&i| (i as f64) >= lo && (i as f64) <= hi).count();
        hits as f64 / self.split_index.len() as f64
    }

    /// `sup_x |stump(x) - mu|` of replication `r`, i.e. the larger absolute child mean.
    pub fn sup_error(&self, r: usize) -> f64 {
        self.left_mean[r].abs().max(self.right_mean[r].abs())
    }

    /// Stump prediction of replication `r` at `x` (closed left cell).
    pub fn predict(&self, r: usize, x: f64) -> f64 {
        if x <= self.threshold[r] {
            self.left_mean[r]
        } else {
            self.right_mean[r]
        }
    }
}

/// Simulates the root split on `reps` fresh noise samples with `mu = 0`.
///
/// Sorting by a continuous covariate leaves the responses i.i.d., so they are
/// drawn directly in covariate order. The covariates are independent of the
/// responses, so given the split index `i` the split point is distributed as
/// the `i`-th uniform order statistic, `Beta(i, n + 1 - i)`, and is drawn from
/// that law. Replication `r` uses `stream.substream(r)`.
pub fn exact_stump_moments(n: usize, noise: Noise, reps: usize, stream: &RngStream) -> Result<StumpLaw> {
    if n < 2 {
        return Err(Error::InvalidArgument("a stump needs n >= 2".into()));
    }
    let spec = DgpSpec::location(n, 1, 0.0, 1.0).with_noise(noise);
    spec.validate()?;
    let draws: Vec<(usize, f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.substream(r as u64).rng();
            let y: Vec<f64> = (0..n).map(|_| spec.draw_noise(&mut rng)).collect();
            let (i, left, right) = stump_on_sequence(&y);
            let tau = Beta::new(i as f64, (n + 1 - i) as f64).expect("valid shape").sample(&mut rng);
            (i, tau, left, right)
        })
        .collect();
    let mut law = StumpLaw { n, split_index: Vec::new(), threshold: Vec::new(), left_mean: Vec::new(), right_mean: Vec::new() };
    for (i, tau, l, r) in draws {
        law.split_index.push(i);
        law.threshold.push(tau);
        law.left_mean.push(l);
        law.right_mean.push(r);
    }
    Ok(law)
}

/// Split index and child means of a stump fitted to responses already in
/// covariate order (distinct covariates). Constant responses give index 1
/// by convention, with both means equal.
pub fn stump_on_sequence(y: &[f64]) -> (usize, f64, f64) {
    let n = y.len();
    let total: f64 = y.iter().sum();
    let mean = total / n as f64;
    if y.iter().all(|&v| v == y[0]) {
        return (1, mean, mean);
    }
    let (mut partial, mut raw) = (0.0, 0.0);
    let (mut best_i, mut best_g, mut best_raw) = (0, f64::NEG_INFINITY, 0.0);
    for (k, &v) in y[..n - 1].iter().enumerate() {
        let i = k + 1;
        partial += v - mean;
        raw += v;
        let g = partial * partial * n as f64 / (i as f64 * (n - i) as f64);
        if g > best_g {
            (best_i, best_g, best_raw) = (i, g, raw);
        }
    }
    (best_i, best_raw / best_i as f64, (total - best_raw) / (n - best_i) as f64)
}

/// A small random regression instance: `n <= 50`, `p <= 3`. Covariates are
/// drawn from a coarse grid half of the time so that ties occur.
pub fn random_instance(rng: &mut StreamRng) -> Dataset {
    let n = rng.random_range(2..=50);
    let p = rng.random_range(1..=3);
    let coarse = rng.random_bool(0.5);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| if coarse { f64::from(rng.random_range(0..8u8)) / 8.0 } else { rng.random::<f64>() }).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Dataset::from_columns(cols, y, None, None).expect("well-formed instance")
}

fn instance_label(case: usize, data: &Dataset) -> String {
    format!("case {case} (n = {}, p = {})", data.n(), data.p())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Fast split search against [`brute_force_best_split`]: same direction and
/// index, gain within `1e-9` relative.
pub fn split_search_sweep(cases: usize, seed: u64) -> OracleReport {
    let mut report = OracleReport::new("split search vs brute force");
    let stream = RngStream::new(seed, 0x5E1);
    for case in 0..cases {
        let data = random_instance(&mut stream.substream(case as u64).rng());
        let node = NodeData::root(&data, &data.y).expect("aligned");
        let features: Vec<usize> = (0..data.p()).collect();
        let fast = best_split(&node, &features).expect("valid features");
        let slow = brute_force_best_split(&node, &features);
        let agree = match (fast, slow) {
            (None, None) => true,
            (Some(f), Some(s)) => f.direction == s.direction && f.order_index == s.order_index && rel_close(f.gain, s.gain, 1e-9),
            _ => false,
        };
        report.record(instance_label(case, &data), fast, slow, agree);
    }
    report
}

/// The SSE minimiser and the gain maximiser over all candidates pick the
/// same `(direction, index)` when both break ties by the smallest direction,
/// then the smallest index.
pub fn criterion_sweep(cases: usize, seed: u64) -> OracleReport {
    let mut report = OracleReport::new("argmin SSE vs argmax gain");
    let stream = RngStream::new(seed, 0x5E1);
    for case in 0..cases {
        let data = random_instance(&mut stream.substream(case as u64).rng());
        let node = NodeData::root(&data, &data.y).expect("aligned");
        let mut by_sse: Option<(f64, (usize, usize))> = None;
        let mut by_gain: Option<(f64, (usize, usize))> = None;
        for j in 0..data.p() {
            let sorted = sorted_ids(&data, &node.ids, j);
            for i in 1..data.n() {
                if data.x(sorted[i - 1], j) == data.x(sorted[i], j) {
                    continue;
                }
                let sse = split_sse(&node, j, i).expect("valid candidate");
                let gain = impurity_gain(&node, j, i).expect("valid candidate");
                if by_sse.is_none_or(|(b, _)| improves(-sse, -b)) {
                    by_sse = Some((sse, (j, i)));
                }
                if by_gain.is_none_or(|(b, _)| improves(gain, b)) {
                    by_gain = Some((gain, (j, i)));
                }
            }
        }
        let (a, b) = (by_sse.map(|v| v.1), by_gain.map(|v| v.1));
        report.record(instance_label(case, &data), a, b, a == b);
    }
    report
}

/// Weakest-link sequences against the exhaustive lower envelope, on random
/// trees with at most [`MAX_ENUMERATION_LEAVES`] leaves.
pub fn prune_envelope_sweep(cases: usize, seed: u64) -> OracleReport {
    let mut report = OracleReport::new("weakest link vs exhaustive envelope");
    let stream = RngStream::new(seed, 0x9E);
    for case in 0..cases {
        let data = random_instance(&mut stream.substream(case as u64).rng());
        let mut depth = 3;
        let tree = loop {
            let t = cart::grow(&data, &data.y, &GrowConfig::new(depth)).expect("valid config");
            if t.n_leaves() <= MAX_ENUMERATION_LEAVES || depth == 0 {
                break t;
            }
            depth -= 1;
        };
        let all = enumerate_pruned_subtrees(&tree, &data.y).expect("small tree");
        let seq = weakest_link(&tree, &data.y);
        let verdict = check_envelope(&seq, &all);
        report.record(instance_label(case, &data), verdict.clone(), "on envelope", verdict.is_ok());
    }
    report
}

/// [`stump_on_sequence`] against a fitted stump on distinct sorted covariates.
pub fn stump_law_sweep(cases: usize, seed: u64) -> OracleReport {
    let mut report = OracleReport::new("sequence stump vs fitted stump");
    let stream = RngStream::new(seed, 0x57);
    for case in 0..cases {
        let mut rng = stream.substream(case as u64).rng();
        let n = rng.random_range(2..=60);
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
        let data = Dataset::from_columns(vec![x], y.clone(), None, None).expect("well-formed");
        let tree = cart::grow(&data, &data.y, &GrowConfig::stump()).expect("valid config");
        let (i, left, right) = stump_on_sequence(&y);
        let fitted = (tree.root().split.map_or(1, |s| s.order_index), tree.predict(&[0.0]), tree.predict(&[1.0]));
        let agree = i == fitted.0 && rel_close(left, fitted.1, 1e-9) && rel_close(right, fitted.2, 1e-9);
        report.record(format!("case {case} (n = {n})"), (i, left, right), fitted, agree);
    }
    report
}

/// Every sweep with the given number of cases each.
pub fn all_sweeps(cases: usize, seed: u64) -> Vec<OracleReport> {
    vec![
        split_search_sweep(cases, seed),
        criterion_sweep(cases, seed),
        prune_envelope_sweep(cases.div_ceil(5), seed),
        stump_law_sweep(cases.div_ceil(5), seed),
    ]
}
