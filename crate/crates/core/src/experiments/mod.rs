//! Monte Carlo harness. Each experiment turns an [`ExperimentConfig`] into
//! per-replication rows and a summary that is a pure function of the config
//! and the rows, so it can be recomputed from `rows.csv` alone.
//!
//! Replication `r` draws from stream `(seed, r)`, and rows are collected in
//! replication order, so output does not depend on the thread count.

pub mod ou;
pub mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

pub use ou::{ou_sup_events, simulate_ou_path, simulate_ou_sup_ratio, OuPath};
pub use report::{emit_report, parse_rows, parse_summary, summary_distance, ExperimentReport, Row, SummaryRow};

use crate::cart::{self, GrowConfig, Tree};
use crate::causal::{self, CausalCriterion, CausalEstimate, CausalKind, CausalParts};
use crate::dgp::{sample_with, Dataset, DgpKind, DgpSpec};
use crate::ensemble::{fit_forest, Forest, ForestSpec};
use crate::error::{Error, Result};
use crate::honest::{cart_plus_grow, honest_fit, leftmost_cell_trace, EmptyPolicy, HonestTree};
use crate::oracle::exact_stump_moments;
use crate::prune::{self, CvConfig};
use crate::rng::RngStream;
use crate::stats::{self, Estimate};

/// Depth cap for trees that are grown out and then pruned.
pub const PRUNE_MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    PointwiseRmse,
    SplitIndex,
    SupRates,
    Imse,
    CartPlus,
    HonestLowerBound,
    ForestBound,
    OuRatio,
}

/// Empty-leaf rule for honest estimators, resolved against the generating process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HonestPolicy {
    TrueMean,
    Ancestor,
}

impl HonestPolicy {
    fn resolve(self, dgp: &DgpSpec) -> EmptyPolicy {
        match self {
            HonestPolicy::TrueMean => EmptyPolicy::TrueMean(dgp.clone()),
            HonestPolicy::Ancestor => EmptyPolicy::AncestorFallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Stump,
    Tree { depth: usize },
    /// Partition from the sample, leaf means from an independent sample of the same size.
    Honest { depth: usize, policy: HonestPolicy },
    CartPlus { depth: usize },
    Causal { kind: CausalKind, criterion: CausalCriterion, depth: usize },
    Forest { trees: usize, subsample: usize, mtry: usize, depth: usize, policy: HonestPolicy },
    Pruned { folds: usize, min_node_size: usize },
    PrunedCausal { criterion: CausalCriterion, folds: usize, min_node_size: usize },
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Stump => "stump".into(),
            Estimator::Tree { depth } => format!("tree-K{depth}"),
            Estimator::Honest { depth, .. } => format!("honest-K{depth}"),
            Estimator::CartPlus { depth } => format!("cartplus-K{depth}"),
            Estimator::Causal { kind, .. } => match kind {
                CausalKind::RegPlugin => "causal-reg".into(),
                CausalKind::TransformedOutcome => "causal-ipw".into(),
                CausalKind::HonestCausal => "causal-honest".into(),
            },
            Estimator::Forest { .. } => "forest".into(),
            Estimator::Pruned { .. } => "pruned".into(),
            Estimator::PrunedCausal { .. } => "pruned-causal".into(),
        }
    }

    pub fn is_causal(&self) -> bool {
        matches!(self, Estimator::Causal { .. } | Estimator::PrunedCausal { .. })
    }

    fn forest_spec(&self, seed: u64, dgp: &DgpSpec) -> Option<ForestSpec> {
        match *self {
            Estimator::Forest { trees, subsample, mtry, depth, policy } => {
                Some(ForestSpec::new(trees, subsample, mtry, depth).with_seed(seed).with_empty_policy(policy.resolve(dgp)))
            }
            _ => None,
        }
    }
}

/// `rmse(est_num at x_num) / rmse(est_den at x_den)` compared with `bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCheck {
    pub num_x: usize,
    pub num_est: usize,
    pub den_x: usize,
    pub den_est: usize,
    pub bound: f64,
    /// Pass when the ratio is at least `bound`; otherwise when it is below.
    pub at_least: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuSettings {
    pub pairs: Vec<(f64, f64)>,
    pub paths: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub kind: ExperimentKind,
    pub dgp: DgpSpec,
    pub estimators: Vec<Estimator>,
    pub grid: Vec<Vec<f64>>,
    pub reps: usize,
    pub a: f64,
    pub b: f64,
    pub depth: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Depths studied by the IMSE check.
    pub depths: Vec<usize>,
    /// Sample sizes of the CART+ study.
    pub n_ladder: Vec<usize>,
    /// CART+ depth is `ceil(depth_factor * ln ln n)`.
    pub depth_factor: f64,
    /// CART+ error thresholds, or sup-error threshold multipliers.
    pub thresholds: Vec<f64>,
    pub ratio_checks: Vec<RatioCheck>,
    pub ou: OuSettings,
}

impl ExperimentConfig {
    pub fn new(id: &str, kind: ExperimentKind, dgp: DgpSpec) -> Self {
        ExperimentConfig {
            id: id.to_string(),
            kind,
            grid: grid_1d(21),
            dgp,
            estimators: vec![Estimator::Stump],
            reps: 500,
            a: 0.1,
            b: 0.9,
            depth: 1,
            seed: 0,
            out_dir: None,
            depths: vec![1, 2, 3],
            n_ladder: vec![1_000, 10_000, 100_000],
            depth_factor: 6.0,
            thresholds: vec![0.25, 0.5],
            ratio_checks: Vec::new(),
            ou: OuSettings { pairs: vec![(1.0, 2.0), (3.0, 4.0)], paths: 100_000, dt: 0.005 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        let exponents = matches!(self.kind, ExperimentKind::SplitIndex | ExperimentKind::SupRates);
        if exponents && !(0.0 < self.a && self.a < self.b && self.b < 1.0) {
            return Err(Error::InvalidArgument(format!("need 0 < a < b < 1, got a = {}, b = {}", self.a, self.b)));
        }
        for x in &self.grid {
            if x.len() != self.dgp.p || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(format!("grid point {x:?} is not in [0,1]^{}", self.dgp.p)));
            }
        }
        let labels: Vec<String> = self.estimators.iter().map(Estimator::label).collect();
        if (1..labels.len()).any(|k| labels[..k].contains(&labels[k])) {
            return Err(Error::InvalidArgument(format!("estimator labels must be distinct: {labels:?}")));
        }
        let pointwise = matches!(self.kind, ExperimentKind::PointwiseRmse | ExperimentKind::ForestBound);
        if pointwise && (self.estimators.is_empty() || self.grid.is_empty()) {
            return Err(Error::InvalidArgument("pointwise experiments need estimators and a grid".into()));
        }
        for c in &self.ratio_checks {
            if c.num_x.max(c.den_x) >= self.grid.len() || c.num_est.max(c.den_est) >= self.estimators.len() {
                return Err(Error::InvalidArgument("ratio check refers to a missing grid point or estimator".into()));
            }
        }
        let location_only = matches!(
            self.kind,
            ExperimentKind::SplitIndex | ExperimentKind::SupRates | ExperimentKind::Imse | ExperimentKind::CartPlus | ExperimentKind::HonestLowerBound
        );
        if location_only && (self.dgp.kind != DgpKind::Location || self.dgp.p != 1) {
            return Err(Error::InvalidArgument(format!("{:?} needs the one-dimensional location model", self.kind)));
        }
        if self.kind == ExperimentKind::Imse && self.depths.is_empty() {
            return Err(Error::InvalidArgument("no depths given".into()));
        }
        if self.kind == ExperimentKind::CartPlus && (self.n_ladder.is_empty() || self.thresholds.is_empty()) {
            return Err(Error::InvalidArgument("CART+ study needs sample sizes and thresholds".into()));
        }
        if self.kind == ExperimentKind::SupRates && self.thresholds.is_empty() {
            return Err(Error::InvalidArgument("no threshold multipliers given".into()));
        }
        if self.kind == ExperimentKind::OuRatio {
            if self.ou.pairs.is_empty() || self.ou.paths == 0 {
                return Err(Error::InvalidArgument("O-U study needs interval pairs and paths".into()));
            }
            if let Some(&(a, b)) = self.ou.pairs.iter().find(|(a, b)| !(*a >= 0.0 && a < b)) {
                return Err(Error::InvalidArgument(format!("need 0 <= A < B, got ({a}, {b})")));
            }
        }
        Ok(())
    }

    fn row(&self, rep: usize, x: String, estimator: &str, n: usize, value: f64, sq_error: Option<f64>, split_index: Option<usize>) -> Row {
        Row { experiment: self.id.clone(), rep, x, estimator: estimator.to_string(), n, value, sq_error, split_index, seed: self.seed }
    }

    fn summary(&self, x: &str, estimator: &str, n: usize, reps: usize, statistic: &str, est: Estimate) -> SummaryRow {
        SummaryRow {
            experiment: self.id.clone(),
            x: x.to_string(),
            estimator: estimator.to_string(),
            n,
            reps,
            statistic: statistic.to_string(),
            estimate: est.value,
            mc_se: Some(est.se),
            bound: None,
            pass: None,
        }
    }

    /// The generating process an estimator is run on: causal estimators on
    /// the product model use its randomised counterpart.
    fn dgp_for(&self, est: &Estimator) -> Result<DgpSpec> {
        if !est.is_causal() || self.dgp.kind.is_causal() {
            return Ok(self.dgp.clone());
        }
        match self.dgp.kind {
            DgpKind::Product => {
                let mut d = DgpSpec::causal_product(self.dgp.n, self.dgp.xi, self.dgp.sigma);
                d.noise = self.dgp.noise;
                Ok(d)
            }
            _ => Err(Error::InvalidArgument(format!("causal estimator {} needs a randomised model", est.label()))),
        }
    }
}

/// `count` equispaced points in `[0.01, 0.99]`.
pub fn grid_1d(count: usize) -> Vec<Vec<f64>> {
    spaced(count, 0.01, 0.99).into_iter().map(|v| vec![v]).collect()
}

/// `(0, t)` for `count` equispaced `t` in `[0, 1]`.
pub fn edge_grid(count: usize) -> Vec<Vec<f64>> {
    spaced(count, 0.0, 1.0).into_iter().map(|t| vec![0.0, t]).collect()
}

/// The diagonal points `(t, ..., t)` in `p` dimensions for `count` equispaced `t` in `[0, 1]`.
pub fn diagonal_grid(count: usize, p: usize) -> Vec<Vec<f64>> {
    spaced(count, 0.0, 1.0).into_iter().map(|t| vec![t; p]).collect()
}

fn spaced(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count).map(|k| (lo * (count - 1 - k) as f64 + hi * k as f64) / (count - 1) as f64).collect(),
    }
}

pub fn format_point(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Points within `0.5 n^{a-1}` of the boundary, plus the end points.
pub fn boundary_points(n: usize, a: f64) -> Vec<f64> {
    let h = 0.5 * (n as f64).powf(a - 1.0);
    vec![0.0, h, 1.0 - h, 1.0]
}

/// `sigma n^{-b/2} sqrt(2 ln ln n)`.
pub fn sup_threshold(n: usize, b: f64, sigma: f64) -> f64 {
    let n = n as f64;
    sigma * n.powf(-b / 2.0) * (2.0 * n.ln().ln()).sqrt()
}

/// Finite-`n` approximation to the law of `ln(i) / ln(n)` given `i <= n / 2`,
/// obtained from the Ornstein-Uhlenbeck sup-ratio identity; it tends to the
/// uniform law on `[0, 1]`.
pub fn log_index_cdf(n: usize, b: f64) -> f64 {
    let nf = n as f64;
    let top = (nf / 2.0).ln() / nf.ln();
    if b <= 0.0 {
        return 0.0;
    }
    if b >= top {
        return 1.0;
    }
    let v = (b * nf.ln() - ((1.0 - nf.powf(b - 1.0)) / (1.0 - 1.0 / nf)).ln()) / (nf - 1.0).ln();
    v.clamp(0.0, 1.0)
}

/// `ceil(c ln ln n)`.
pub fn cart_plus_depth(n: usize, c: f64) -> usize {
    (c * (n as f64).ln().ln()).ceil() as usize
}

/// The bound `sigma^2 (1 - 2^{-i})^2 / i`.
pub fn honest_lb_term(i: usize, sigma: f64) -> f64 {
    let i = i as f64;
    sigma * sigma * (1.0 - (-i).exp2()).powi(2) / i
}

/// Integrated squared error of an honest tree against a constant mean,
/// under the uniform covariate law. Empty leaves contribute zero.
pub fn imse_constant(ht: &HonestTree, mu: f64) -> f64 {
    ht.leaf_estimates()
        .into_iter()
        .map(|(leaf, value, _)| {
            let vol: f64 = ht.structure.nodes[leaf].bounds.iter().map(|(lo, hi)| hi - lo).product();
            value.map_or(0.0, |v| vol * (v - mu).powi(2))
        })
        .sum()
}

enum Fitted {
    Tree(Tree),
    Honest(HonestTree),
    Causal(CausalEstimate),
    Forest(Forest),
}

impl Fitted {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Fitted::Tree(t) => t.predict(x),
            Fitted::Honest(t) => t.predict(x),
            Fitted::Causal(c) => c.predict(x),
            Fitted::Forest(f) => f.predict(x),
        }
    }

    fn split_index(&self) -> Option<usize> {
        let tree = match self {
            Fitted::Tree(t) => t,
            Fitted::Honest(t) => &t.structure,
            Fitted::Causal(c) => match &c.parts {
                CausalParts::Transformed(t) => t,
                CausalParts::Honest(h) => &h.structure,
                CausalParts::TwoArm { .. } => return None,
            },
            Fitted::Forest(_) => return None,
        };
        tree.root().split.map(|s| s.order_index)
    }
}

fn fit_estimator(est: &Estimator, data: &Dataset, dgp: &DgpSpec, stream: &RngStream) -> Result<Fitted> {
    Ok(match *est {
        Estimator::Stump => Fitted::Tree(cart::grow(data, &data.y, &GrowConfig::stump())?),
        Estimator::Tree { depth } => Fitted::Tree(cart::grow(data, &data.y, &GrowConfig::new(depth))?),
        Estimator::Honest { depth, policy } => {
            let est_data = sample_with(dgp, &stream.substream(0))?;
            Fitted::Honest(honest_fit(data, &est_data, &GrowConfig::new(depth), policy.resolve(dgp))?)
        }
        Estimator::CartPlus { depth } => Fitted::Honest(cart_plus_grow(data, dgp, depth, &stream.substream(0))?),
        Estimator::Causal { kind, criterion, depth } => {
            let cfg = GrowConfig::new(depth);
            Fitted::Causal(match kind {
                CausalKind::RegPlugin => causal::fit_theta_reg(data, &cfg)?,
                CausalKind::TransformedOutcome => causal::fit_theta_ipw(data, &cfg)?,
                CausalKind::HonestCausal => causal::fit_honest_causal(data, &cfg, criterion)?,
            })
        }
        Estimator::Forest { .. } => {
            let seed = stream.substream(0).rng().random::<u64>();
            Fitted::Forest(fit_forest(data, &est.forest_spec(seed, dgp).expect("forest estimator"))?)
        }
        Estimator::Pruned { folds, min_node_size } => {
            let cv = CvConfig { folds, one_se: false, seed: stream.substream(0).rng().random() };
            let cfg = GrowConfig::new(PRUNE_MAX_DEPTH).with_min_node_size(min_node_size);
            Fitted::Tree(prune::cv_select(data, &cfg, &cv)?.1)
        }
        Estimator::PrunedCausal { criterion, folds, min_node_size } => {
            let cv = CvConfig { folds, one_se: false, seed: stream.substream(0).rng().random() };
            let cfg = GrowConfig::new(PRUNE_MAX_DEPTH).with_min_node_size(min_node_size);
            Fitted::Causal(causal::fit_pruned_honest_causal(data, &cfg, criterion, &cv)?.1)
        }
    })
}

const DATA_TAG: u64 = 0;
const COUNTERPART_TAG: u64 = 1;
const FIT_TAG: u64 = 100;

/// Runs `f` for every replication on stream `(seed, rep)` and concatenates
/// the rows in replication order.
fn per_rep<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<Row>>
where
    F: Fn(usize, &RngStream) -> Result<Vec<Row>> + Sync,
{
    let chunks = (0..cfg.reps).into_par_iter().map(|r| f(r, &RngStream::new(cfg.seed, r as u64))).collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn pointwise_rows(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let dgps: Vec<DgpSpec> = cfg.estimators.iter().map(|e| cfg.dgp_for(e)).collect::<Result<_>>()?;
    let points: Vec<String> = cfg.grid.iter().map(|x| format_point(x)).collect();
    per_rep(cfg, |rep, stream| {
        let base = sample_with(&cfg.dgp, &stream.substream(DATA_TAG))?;
        let mut counterpart: Option<Dataset> = None;
        let mut rows = Vec::with_capacity(cfg.estimators.len() * cfg.grid.len());
        for (e, est) in cfg.estimators.iter().enumerate() {
            let dgp = &dgps[e];
            let data = if *dgp == cfg.dgp {
                &base
            } else {
                counterpart.get_or_insert(sample_with(dgp, &stream.substream(COUNTERPART_TAG))?)
            };
            let fitted = fit_estimator(est, data, dgp, &stream.substream(FIT_TAG + e as u64))?;
            let split = fitted.split_index();
            let label = est.label();
            for (x, key) in cfg.grid.iter().zip(&points) {
                let value = fitted.predict(x);
                let target = if est.is_causal() { dgp.true_effect(x) } else { dgp.true_mean(x) };
                rows.push(cfg.row(rep, key.clone(), &label, dgp.n, value, Some((value - target).powi(2)), split));
            }
        }
        Ok(rows)
    })
}

fn finish(cfg: &ExperimentConfig, rows: Vec<Row>, start: Instant) -> ExperimentReport {
    let summary = summarize(cfg, &rows);
    ExperimentReport { config: cfg.clone(), rows, summary, wall_time_secs: start.elapsed().as_secs_f64() }
}

fn expect_kind(cfg: &ExperimentConfig, kinds: &[ExperimentKind]) -> Result<()> {
    cfg.validate()?;
    if !kinds.contains(&cfg.kind) {
        return Err(Error::InvalidArgument(format!("config kind {:?} does not match this runner", cfg.kind)));
    }
    Ok(())
}

/// Pointwise RMSE of every estimator at every grid point against the truth
/// (the conditional mean, or the effect for causal estimators).
pub fn run_pointwise_rmse(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, &[ExperimentKind::PointwiseRmse, ExperimentKind::ForestBound])?;
    let start = Instant::now();
    Ok(finish(cfg, pointwise_rows(cfg)?, start))
}

/// Pointwise RMSE of pruned estimators; the edge-grid corner checks live in
/// the config's ratio checks.
pub fn run_pruned_rmse(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if !cfg.estimators.iter().all(|e| matches!(e, Estimator::Pruned { .. } | Estimator::PrunedCausal { .. })) {
        return Err(Error::InvalidArgument("pruned study takes only pruned estimators".into()));
    }
    run_pointwise_rmse(cfg)
}

/// Split-index range events and the law of `ln(i) / ln(n)` for the root
/// split of a stump fitted to pure noise.
pub fn run_split_index(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, &[ExperimentKind::SplitIndex])?;
    let start = Instant::now();
    let n = cfg.dgp.n;
    let law = exact_stump_moments(n, cfg.dgp.noise, cfg.reps, &RngStream::new(cfg.seed, 0))?;
    let ln_n = (n as f64).ln();
    let rows = (0..cfg.reps)
        .map(|r| {
            let i = law.split_index[r];
            cfg.row(r, String::new(), "stump", n, (i as f64).ln() / ln_n, None, Some(i))
        })
        .collect();
    Ok(finish(cfg, rows, start))
}

/// Sup-error events of the stump and the pointwise events at boundary points.
pub fn run_sup_error_rates(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, &[ExperimentKind::SupRates])?;
    let start = Instant::now();
    let (n, sigma, mu) = (cfg.dgp.n, cfg.dgp.sigma, cfg.dgp.mu);
    let law = exact_stump_moments(n, cfg.dgp.noise, cfg.reps, &RngStream::new(cfg.seed, 0))?;
    let points = boundary_points(n, cfg.a);
    let mut rows = Vec::with_capacity(cfg.reps * (1 + points.len()));
    for r in 0..cfg.reps {
        let i = Some(law.split_index[r]);
        let sup = sigma * law.sup_error(r);
        rows.push(cfg.row(r, String::new(), "stump", n, sup, Some(sup * sup), i));
        for &x in &points {
            let v = mu + sigma * law.predict(r, x);
            rows.push(cfg.row(r, format_point(&[x]), "stump", n, v, Some((v - mu).powi(2)), i));
        }
    }
    Ok(finish(cfg, rows, start))
}

/// Exact integrated squared error of honest trees of each configured depth.
pub fn run_imse_check(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, &[ExperimentKind::Imse])?;
    let start = Instant::now();
    let dgp = &cfg.dgp;
    let rows = per_rep(cfg, |rep, stream| {
        let structure = sample_with(dgp, &stream.substream(DATA_TAG))?;
        let estimation = sample_with(dgp, &stream.substream(COUNTERPART_TAG))?;
        cfg.depths
            .iter()
            .map(|&k| {
                let ht = honest_fit(&structure, &estimation, &GrowConfig::new(k), EmptyPolicy::TrueMean(dgp.clone()))?;
                let split = ht.structure.root().split.map(|s| s.order_index);
                let imse = imse_constant(&ht, dgp.mu);
                Ok(cfg.row(rep, String::new(), &format!("honest-K{k}"), dgp.n, imse, None, split))
            })
            .collect()
    })?;
    Ok(finish(cfg, rows, start))
}

/// CART+ trees of depth `ceil(c ln ln n)` along the sample-size ladder:
/// the error at `x = 0` and the size of the cell containing it.
pub fn run_cartplus_inconsistency(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, &[ExperimentKind::CartPlus])?;
    let start = Instant::now();
    let rows = per_rep(cfg, |rep, stream| {
        let mut rows = Vec::new();
        for (k, &n) in cfg.n_ladder.iter().enumerate() {
            let mut dgp = cfg.dgp.clone();
            dgp.n = n;
            let sub = stream.substream(k as u64);
            let data = sample_with(&dgp, &sub.substream(DATA_TAG))?;
            let depth = cart_plus_depth(n, cfg.depth_factor);
            let ht = cart_plus_grow(&data, &dgp, depth, &sub.substream(FIT_TAG))?;
            let v = ht.predict(&[0.0]);
            let cell = leftmost_cell_trace(&ht).last().map_or(n, |c| c.cell_size);
            rows.push(cfg.row(rep, "0".into(), "cartplus", n, v, Some((v - dgp.mu).powi(2)), Some(depth)));
            rows.push(cfg.row(rep, "0".into(), "cartplus-cell", n, cell as f64, None, Some(depth)));
        }
        Ok(rows)
    })?;
    Ok(finish(cfg, rows, start))
}

/// Honest stump: squared sup error against the split-index functional.
pub fn run_honest_lower_bound(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, &[ExperimentKind::HonestLowerBound])?;
    let start = Instant::now();
    let dgp = &cfg.dgp;
    let rows = per_rep(cfg, |rep, stream| {
        let structure = sample_with(dgp, &stream.substream(DATA_TAG))?;
        let estimation = sample_with(dgp, &stream.substream(COUNTERPART_TAG))?;
        let ht = honest_fit(&structure, &estimation, &GrowConfig::stump(), EmptyPolicy::TrueMean(dgp.clone()))?;
        let i = ht.structure.root().split.map_or(structure.n(), |s| s.order_index);
        let sup = ht.sup_error(dgp);
        Ok(vec![
            cfg.row(rep, String::new(), "honest", dgp.n, sup * sup, None, Some(i)),
            cfg.row(rep, String::new(), "lb-functional", dgp.n, honest_lb_term(i, dgp.sigma), None, Some(i)),
        ])
    })?;
    Ok(finish(cfg, rows, start))
}

/// Second moment of an honest forest under the location model.
pub fn run_forest_bound(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, &[ExperimentKind::ForestBound])?;
    run_pointwise_rmse(cfg)
}

/// Frequency of the O-U sup-ratio event for each `(A, B)` pair.
pub fn run_ou_ratio(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(cfg, &[ExperimentKind::OuRatio])?;
    let start = Instant::now();
    let mut rows = Vec::new();
    for (k, &(a, b)) in cfg.ou.pairs.iter().enumerate() {
        let events = ou_sup_events(a, b, cfg.ou.paths, cfg.ou.dt, &RngStream::new(cfg.seed, k as u64))?;
        let key = format_point(&[a, b]);
        for (p, hit) in events.into_iter().enumerate() {
            rows.push(cfg.row(p, key.clone(), "ou", cfg.ou.paths, f64::from(u8::from(hit)), None, None));
        }
    }
    Ok(finish(cfg, rows, start))
}

/// Dispatches on the config kind.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.kind {
        ExperimentKind::PointwiseRmse => run_pointwise_rmse(cfg),
        ExperimentKind::SplitIndex => run_split_index(cfg),
        ExperimentKind::SupRates => run_sup_error_rates(cfg),
        ExperimentKind::Imse => run_imse_check(cfg),
        ExperimentKind::CartPlus => run_cartplus_inconsistency(cfg),
        ExperimentKind::HonestLowerBound => run_honest_lower_bound(cfg),
        ExperimentKind::ForestBound => run_forest_bound(cfg),
        ExperimentKind::OuRatio => run_ou_ratio(cfg),
    }
}

/// Summary of `report` rebuilt from its rows.
pub fn recompute_summary(report: &ExperimentReport) -> Vec<SummaryRow> {
    summarize(&report.config, &report.rows)
}

/// Values grouped by `(x, estimator, n)` in row order.
fn grouped(rows: &[Row], f: impl Fn(&Row) -> f64) -> BTreeMap<(&str, &str, usize), Vec<f64>> {
    let mut m: BTreeMap<(&str, &str, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        m.entry((r.x.as_str(), r.estimator.as_str(), r.n)).or_default().push(f(r));
    }
    m
}

fn with_check(mut s: SummaryRow, bound: f64, pass: Option<bool>) -> SummaryRow {
    s.bound = Some(bound);
    s.pass = pass;
    s
}

/// Aggregates rows into summary statistics and checks. Pure in `(cfg, rows)`.
pub fn summarize(cfg: &ExperimentConfig, rows: &[Row]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    match cfg.kind {
        ExperimentKind::PointwiseRmse | ExperimentKind::ForestBound => {
            let sq = grouped(rows, |r| r.sq_error.unwrap_or(f64::NAN));
            let points: Vec<String> = cfg.grid.iter().map(|x| format_point(x)).collect();
            let mut rmse_at = BTreeMap::new();
            for est in &cfg.estimators {
                let label = est.label();
                let Ok(dgp) = cfg.dgp_for(est) else { continue };
                for key in &points {
                    let Some(v) = sq.get(&(key.as_str(), label.as_str(), dgp.n)) else { continue };
                    if cfg.kind == ExperimentKind::ForestBound {
                        let s = cfg.summary(key, &label, dgp.n, v.len(), "mean_sq", stats::mean_estimate(v));
                        match est {
                            Estimator::Forest { subsample, mtry, .. } => {
                                let (s_, m, p) = (*subsample as f64, *mtry as f64, dgp.p as f64);
                                let bound = dgp.sigma.powi(2) / dgp.n as f64 * (1.0 + s_ / 2.0 * m / p) * 1.5;
                                let pass = s.estimate <= bound;
                                out.push(with_check(s, bound, Some(pass)));
                            }
                            _ => out.push(s),
                        }
                    } else {
                        let e = stats::rmse(v);
                        rmse_at.insert((key.clone(), label.clone()), e);
                        out.push(cfg.summary(key, &label, dgp.n, v.len(), "rmse", e));
                    }
                }
            }
            for c in &cfg.ratio_checks {
                let (ln, ld) = (cfg.estimators[c.num_est].label(), cfg.estimators[c.den_est].label());
                let (Some(&num), Some(&den)) = (rmse_at.get(&(points[c.num_x].clone(), ln.clone())), rmse_at.get(&(points[c.den_x].clone(), ld.clone())))
                else {
                    continue;
                };
                let r = stats::ratio(num, den);
                let pass = if c.at_least { r.value >= c.bound } else { r.value < c.bound };
                let est = if ln == ld { ln } else { format!("{ln}|{ld}") };
                let x = format!("{}|{}", points[c.num_x], points[c.den_x]);
                out.push(with_check(cfg.summary(&x, &est, cfg.dgp.n, cfg.reps, "rmse_ratio", r), c.bound, Some(pass)));
            }
        }
        ExperimentKind::SplitIndex => {
            let n = cfg.dgp.n;
            let nf = n as f64;
            let idx: Vec<usize> = rows.iter().filter_map(|r| r.split_index).collect();
            let reps = idx.len();
            let lo = |i: usize| (i as f64) >= nf.powf(cfg.a) && (i as f64) <= nf.powf(cfg.b);
            let hi = |i: usize| (i as f64) >= nf - nf.powf(cfg.b) && (i as f64) <= nf - nf.powf(cfg.a);
            let bound = (cfg.b - cfg.a) / std::f64::consts::E;
            for (name, ev) in [("freq_lo", &lo as &dyn Fn(usize) -> bool), ("freq_hi", &hi)] {
                let f = stats::frequency(idx.iter().map(|&i| ev(i)));
                let pass = f.value >= bound - 3.0 * f.se;
                out.push(with_check(cfg.summary("", "stump", n, reps, name, f), bound, Some(pass)));
            }
            let diff: Vec<f64> = idx.iter().map(|&i| f64::from(u8::from(lo(i))) - f64::from(u8::from(hi(i)))).collect();
            let d = stats::mean_estimate(&diff);
            let pass = d.value.abs() <= 3.0 * d.se;
            out.push(with_check(cfg.summary("", "stump", n, reps, "mirror_diff", d), 0.0, Some(pass)));
            let conj = stats::frequency(idx.iter().map(|&i| lo(i)));
            out.push(with_check(cfg.summary("", "stump", n, reps, "freq_lo_half_range", conj), (cfg.b - cfg.a) / 2.0, None));
            let logs: Vec<f64> = rows.iter().filter(|r| r.split_index.is_some_and(|i| 2 * i <= n)).map(|r| r.value).collect();
            let ks = stats::ks_uniform(&logs);
            let mut s = cfg.summary("", "stump", n, logs.len(), "ks_uniform", Estimate { value: ks, se: 0.0 });
            s.mc_se = None;
            out.push(with_check(s, 0.08, Some(ks < 0.08)));
            // informational: the finite-n law that tends to the uniform one
            let ks_n = stats::ks_statistic(&logs, |b| log_index_cdf(n, b));
            let mut s = cfg.summary("", "stump", n, logs.len(), "ks_finite_n", Estimate { value: ks_n, se: 0.0 });
            s.mc_se = None;
            out.push(s);
        }
        ExperimentKind::SupRates => {
            let n = cfg.dgp.n;
            let thr = sup_threshold(n, cfg.b, cfg.dgp.sigma);
            let sup: Vec<f64> = rows.iter().filter(|r| r.x.is_empty()).map(|r| r.value).collect();
            for (k, &m) in cfg.thresholds.iter().enumerate() {
                let f = stats::frequency(sup.iter().map(|&v| v >= m * thr));
                let s = cfg.summary("", "stump", n, sup.len(), &format!("freq_sup_ge_{m}x"), f);
                if k == 0 {
                    let bound = 2.0 * cfg.b / std::f64::consts::E;
                    out.push(with_check(s, bound, Some(f.value >= bound - 3.0 * f.se)));
                } else {
                    out.push(s);
                }
            }
            let bound = (cfg.b - cfg.a) / std::f64::consts::E;
            let vals = grouped(rows, |r| (r.value - cfg.dgp.mu).abs());
            for x in boundary_points(n, cfg.a) {
                let key = format_point(&[x]);
                let Some(v) = vals.get(&(key.as_str(), "stump", n)) else { continue };
                let f = stats::frequency(v.iter().map(|&e| e >= thr));
                out.push(with_check(cfg.summary(&key, "stump", n, v.len(), "freq_point", f), bound, Some(f.value >= bound - 3.0 * f.se)));
            }
        }
        ExperimentKind::Imse => {
            let vals = grouped(rows, |r| r.value);
            let n = cfg.dgp.n;
            for &k in &cfg.depths {
                let label = format!("honest-K{k}");
                let Some(v) = vals.get(&("", label.as_str(), n)) else { continue };
                let e = stats::mean_estimate(v);
                let bound = 2f64.powi(k as i32 + 1) * cfg.dgp.sigma.powi(2) / (n + 1) as f64;
                out.push(with_check(cfg.summary("", &label, n, v.len(), "mean", e), bound, Some(e.value <= bound + 3.0 * e.se)));
            }
        }
        ExperimentKind::CartPlus => {
            let vals = grouped(rows, |r| r.value);
            let mu = cfg.dgp.mu;
            let mut first_last: Vec<(Estimate, Estimate)> = Vec::new();
            for (k, &c) in cfg.thresholds.iter().enumerate() {
                let mut freqs = Vec::new();
                for &n in &cfg.n_ladder {
                    let Some(v) = vals.get(&("0", "cartplus", n)) else { continue };
                    let f = stats::frequency(v.iter().map(|&x| (x - mu).abs() > c));
                    out.push(cfg.summary("0", "cartplus", n, v.len(), &format!("freq_abs_gt_{c}"), f));
                    freqs.push(f);
                    if k == 0 {
                        if let Some(cells) = vals.get(&("0", "cartplus-cell", n)) {
                            for m0 in [10.0, 50.0] {
                                let g = stats::frequency(cells.iter().map(|&s| s <= m0));
                                out.push(cfg.summary("0", "cartplus-cell", n, cells.len(), &format!("freq_cell_le_{m0}"), g));
                            }
                        }
                    }
                }
                if let (Some(&f0), Some(&f1)) = (freqs.first(), freqs.last()) {
                    first_last.push((f0, f1));
                }
            }
            for (k, (&c, (f0, f1))) in cfg.thresholds.iter().zip(first_last).enumerate() {
                let r = stats::ratio(f1, f0);
                let (n0, n1) = (cfg.n_ladder[0], *cfg.n_ladder.last().expect("validated"));
                let s = cfg.summary(&format!("{n1}|{n0}"), "cartplus", n1, cfg.reps, &format!("freq_ratio_gt_{c}"), r);
                let pass = (k == 0).then_some(r.value >= 0.5 && f1.value >= 0.05);
                out.push(with_check(s, 0.5, pass));
            }
        }
        ExperimentKind::HonestLowerBound => {
            let n = cfg.dgp.n;
            let vals = grouped(rows, |r| r.value);
            let (Some(lhs), Some(rhs)) = (vals.get(&("", "honest", n)), vals.get(&("", "lb-functional", n))) else {
                return out;
            };
            out.push(cfg.summary("", "honest", n, lhs.len(), "mean_sq_sup", stats::mean_estimate(lhs)));
            out.push(cfg.summary("", "lb-functional", n, rhs.len(), "mean", stats::mean_estimate(rhs)));
            let gap: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
            let g = stats::mean_estimate(&gap);
            out.push(with_check(cfg.summary("", "honest|lb-functional", n, gap.len(), "lb_gap", g), 0.0, Some(g.value >= -3.0 * g.se)));
        }
        ExperimentKind::OuRatio => {
            let vals = grouped(rows, |r| r.value);
            for &(a, b) in &cfg.ou.pairs {
                let key = format_point(&[a, b]);
                let Some(v) = vals.get(&(key.as_str(), "ou", cfg.ou.paths)) else { continue };
                let f = stats::frequency(v.iter().map(|&h| h > 0.5));
                let bound = (b - a) / b;
                let pass = (f.value - bound).abs() <= 3.0 * f.se;
                out.push(with_check(cfg.summary(&key, "ou", cfg.ou.paths, v.len(), "freq", f), bound, Some(pass)));
            }
        }
    }
    out
}

/// Configurations of the published designs. `name` is the CLI subcommand.
pub fn preset(name: &str, seed: u64) -> Option<ExperimentConfig> {
    use ExperimentKind::*;
    let mut cfg = match name {
        "stump-rmse" => {
            let mut c = ExperimentConfig::new(name, PointwiseRmse, DgpSpec::location(1000, 1, 0.0, 1.0));
            c.ratio_checks = vec![RatioCheck { num_x: 0, num_est: 0, den_x: 10, den_est: 0, bound: 1.5, at_least: true }];
            c
        }
        "causal-rmse" => {
            let mut c = ExperimentConfig::new(name, PointwiseRmse, DgpSpec::causal_constant(1000, 1, 1.0, 0.5, 1.0));
            c.estimators = vec![
                Estimator::Causal { kind: CausalKind::HonestCausal, criterion: CausalCriterion::squared_effect(), depth: 1 },
                Estimator::Causal { kind: CausalKind::TransformedOutcome, criterion: CausalCriterion::squared_effect(), depth: 1 },
            ];
            c.ratio_checks = vec![RatioCheck { num_x: 0, num_est: 0, den_x: 10, den_est: 0, bound: 1.5, at_least: true }];
            c
        }
        "forest-rmse" => {
            let mut c = ExperimentConfig::new(name, PointwiseRmse, DgpSpec::location(1000, 1, 0.0, 1.0));
            c.estimators = vec![
                Estimator::Forest { trees: 2000, subsample: 100, mtry: 1, depth: 1, policy: HonestPolicy::Ancestor },
                Estimator::Stump,
            ];
            c.ratio_checks = vec![RatioCheck { num_x: 0, num_est: 0, den_x: 0, den_est: 1, bound: 0.5, at_least: false }];
            c
        }
        "pruned-rmse" => {
            let mut c = ExperimentConfig::new(name, PointwiseRmse, DgpSpec::product(1000, 1.0));
            c.grid = edge_grid(21);
            c.estimators = vec![
                Estimator::Pruned { folds: 10, min_node_size: 5 },
                Estimator::PrunedCausal { criterion: CausalCriterion::squared_effect(), folds: 10, min_node_size: 5 },
            ];
            c.ratio_checks = (0..2)
                .flat_map(|e| {
                    [0, 20].map(|x| RatioCheck { num_x: x, num_est: e, den_x: 10, den_est: e, bound: 1.3, at_least: true })
                })
                .collect();
            c
        }
        "split-index" => {
            let mut c = ExperimentConfig::new(name, SplitIndex, DgpSpec::location(100_000, 1, 0.0, 1.0));
            c.reps = 4000;
            c.grid = Vec::new();
            c
        }
        "sup-rates" => {
            let mut c = ExperimentConfig::new(name, SupRates, DgpSpec::location(100_000, 1, 0.0, 1.0));
            c.reps = 4000;
            c.b = 0.5;
            c.thresholds = vec![1.0, 2.0, 4.0];
            c.grid = Vec::new();
            c
        }
        "imse" => {
            let mut c = ExperimentConfig::new(name, Imse, DgpSpec::location(999, 1, 0.0, 1.0));
            c.reps = 2000;
            c.grid = Vec::new();
            c
        }
        "cartplus" => {
            let mut c = ExperimentConfig::new(name, CartPlus, DgpSpec::location(1000, 1, 0.0, 1.0));
            c.reps = 1000;
            c.grid = vec![vec![0.0]];
            c
        }
        "honest-lb" => {
            let mut c = ExperimentConfig::new(name, HonestLowerBound, DgpSpec::location(1000, 1, 0.0, 1.0));
            c.reps = 4000;
            c.grid = Vec::new();
            c
        }
        "forest-bound" => {
            let mut c = ExperimentConfig::new(name, ForestBound, DgpSpec::location(2000, 50, 0.0, 1.0));
            c.grid = diagonal_grid(5, 50);
            c.estimators = vec![Estimator::Forest { trees: 4000, subsample: 12, mtry: 2, depth: 1, policy: HonestPolicy::TrueMean }];
            c
        }
        "ou-ratio" => {
            let mut c = ExperimentConfig::new(name, OuRatio, DgpSpec::location(1, 1, 0.0, 1.0));
            c.grid = Vec::new();
            c
        }
        _ => return None,
    };
    cfg.seed = seed;
    Some(cfg)
}

/// Every preset name, in CLI order.
pub const PRESETS: [&str; 11] = [
    "stump-rmse",
    "causal-rmse",
    "forest-rmse",
    "pruned-rmse",
    "split-index",
    "sup-rates",
    "imse",
    "cartplus",
    "honest-lb",
    "forest-bound",
    "ou-ratio",
];
