//! Command-line front end. `endcut exp <name>` runs a preset experiment with
//! flag overrides, `endcut fit` fits one estimator and `endcut selftest` runs
//! the oracle sweeps.
//!
//! A `--config FILE` of `key = value` lines supplies flags; command-line flags
//! override it. Exit codes: 0 success, 1 failed check, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cart::{self, GrowConfig};
use crate::causal::{self, CausalCriterion};
use crate::dgp::{sample_with, Dataset, DgpKind, DgpSpec};
use crate::ensemble::{fit_forest, ForestSpec};
use crate::error::{Error, Result};
use crate::experiments::{self, diagonal_grid, edge_grid, emit_report, format_point, grid_1d, Estimator, ExperimentConfig, ExperimentKind, HonestPolicy};
use crate::honest::{cart_plus_grow, honest_fit, EmptyPolicy};
use crate::oracle;
use crate::prune::{self, CvConfig};
use crate::rng::RngStream;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "ENDCUT_SEED";

#[derive(Debug, Parser)]
#[command(name = "endcut", version, about = "CART boundary-behaviour laboratory", arg_required_else_help = true)]
struct Cli {
    /// Flat `key = value` file of flag defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one estimator and print it with predictions on the grid.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Run a Monte Carlo experiment.
    #[command(args_override_self = true)]
    Exp(ExpArgs),
    /// Run the oracle sweeps; fails on any mismatch.
    #[command(args_override_self = true)]
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExpName {
    StumpRmse,
    CausalRmse,
    ForestRmse,
    PrunedRmse,
    SplitIndex,
    SupRates,
    Imse,
    Cartplus,
    HonestLb,
    ForestBound,
    OuRatio,
}

impl ExpName {
    fn preset(self) -> &'static str {
        match self {
            ExpName::StumpRmse => "stump-rmse",
            ExpName::CausalRmse => "causal-rmse",
            ExpName::ForestRmse => "forest-rmse",
            ExpName::PrunedRmse => "pruned-rmse",
            ExpName::SplitIndex => "split-index",
            ExpName::SupRates => "sup-rates",
            ExpName::Imse => "imse",
            ExpName::Cartplus => "cartplus",
            ExpName::HonestLb => "honest-lb",
            ExpName::ForestBound => "forest-bound",
            ExpName::OuRatio => "ou-ratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    SquaredEffect,
    SseTransformed,
}

impl From<CriterionArg> for CausalCriterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::SquaredEffect => CausalCriterion::squared_effect(),
            CriterionArg::SseTransformed => CausalCriterion::SseOnTransformed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    TrueMean,
    Ancestor,
}

impl From<PolicyArg> for HonestPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::TrueMean => HonestPolicy::TrueMean,
            PolicyArg::Ancestor => HonestPolicy::Ancestor,
        }
    }
}

/// Flags shared by `fit` and `exp`. Unset flags keep the preset value.
#[derive(Debug, Args)]
struct Common {
    /// Sample size; `exp cartplus` takes a comma list (the n-ladder).
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    /// A point count, or a comma list of points; a point is a scalar or
    /// `;`-joined coordinates.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    criterion: Option<CriterionArg>,
    #[arg(long, value_enum)]
    empty_policy: Option<PolicyArg>,
    /// Cross-validation folds for pruned estimators.
    #[arg(long)]
    folds: Option<usize>,
    /// Smallest child size for pruned estimators.
    #[arg(long)]
    min_node_size: Option<usize>,
}

#[derive(Debug, Args)]
struct ExpArgs {
    #[arg(value_enum)]
    name: ExpName,
    #[command(flatten)]
    common: Common,
    /// Replications (paths for `ou-ratio`).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// CART+ depth multiplier `c` in `ceil(c ln ln n)`.
    #[arg(long)]
    depth_factor: Option<f64>,
    /// Comma list: error thresholds (cartplus) or sup multipliers (sup-rates).
    #[arg(long)]
    thresholds: Option<String>,
    /// O-U time step.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Cart,
    Honest,
    Cartplus,
    Pruned,
    CausalReg,
    CausalIpw,
    CausalHonest,
    PrunedCausal,
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DgpArg {
    Location,
    CausalConstant,
    Checkerboard,
    Product,
    CausalProduct,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "cart")]
    model: Model,
    /// CSV with a header: covariate columns, `y`, and `d` for causal models.
    #[arg(long, conflicts_with = "dgp")]
    data: Option<PathBuf>,
    /// Simulate the data instead of reading it.
    #[arg(long, value_enum)]
    dgp: Option<DgpArg>,
    #[arg(long)]
    mu: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    /// Random instances per sweep.
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long)]
    seed: Option<u64>,
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with(args: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = match inject_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => {
                let mut buf = Vec::new();
                let r = pool.install(|| dispatch(&cli.command, &mut buf));
                let _ = out.write_all(&buf);
                r
            }
            Err(e) => Err(Error::InvalidArgument(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command, out),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::InvalidSpec(_) | Error::ShapeMismatch(_) | Error::Parse { .. } => 2,
                _ => 1,
            }
        }
    }
}

/// Splices `--key value` pairs from the `--config` file in right after the
/// subcommand, so that flags given on the command line come later and win.
fn inject_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (k, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(k + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path).map_err(|e| Error::InvalidArgument(format!("config file {path}: {e}")))?;
    let pairs = parse_config(&text)?;
    let Some(sub) = strs.iter().position(|a| matches!(a.as_str(), "fit" | "exp" | "selftest")) else { return Ok(args) };
    // `exp` takes the experiment name as its first positional.
    let at = if strs[sub] == "exp" { (sub + 2).min(strs.len()) } else { sub + 1 };
    let mut out: Vec<OsString> = args[..at].to_vec();
    for (k, v) in pairs {
        out.push(format!("--{k}").into());
        out.push(v.into());
    }
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

/// `key = value` lines; `#` starts a comment. Keys use flag spelling
/// without the dashes (`empty-policy`, or `empty_policy`).
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse { line: ln + 1, reason: format!("expected key = value, got `{line}`") });
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() || matches!(key.as_str(), "config" | "threads") {
            return Err(Error::Parse { line: ln + 1, reason: format!("key `{key}` not allowed here") });
        }
        m.insert(key, v.trim().to_string());
    }
    Ok(m)
}

fn default_seed() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0)
}

fn dispatch(cmd: &Command, out: &mut dyn Write) -> Result<bool> {
    match cmd {
        Command::Exp(a) => run_exp(a, out),
        Command::Fit(a) => run_fit(a, out),
        Command::Selftest(a) => run_selftest(a, out),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::InvalidArgument(format!("bad {what} `{t}`"))))
        .collect()
}

fn parse_single_n(s: &str) -> Result<usize> {
    match parse_list::<usize>(s, "sample size")?.as_slice() {
        [n] => Ok(*n),
        _ => Err(Error::InvalidArgument("--n takes a single value here".into())),
    }
}

/// Grid from `--grid`: a count, or explicit points. Scalars map to the
/// default layout of the model: `x` for `p = 1`, the edge `(0, t)` for the
/// two-dimensional models and the diagonal otherwise.
fn parse_grid(spec: &str, dgp: &DgpSpec) -> Result<Vec<Vec<f64>>> {
    if let Ok(count) = spec.trim().parse::<usize>() {
        return Ok(default_grid(dgp, count));
    }
    spec.split(',')
        .map(|item| {
            let coords = item.split(';').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<Vec<f64>, _>>();
            let coords = coords.map_err(|_| Error::InvalidArgument(format!("bad grid point `{item}`")))?;
            Ok(match coords.as_slice() {
                [t] if dgp.p == 2 && matches!(dgp.kind, DgpKind::Product | DgpKind::CausalProduct | DgpKind::Checkerboard) => vec![0.0, *t],
                [t] => vec![*t; dgp.p],
                _ => coords,
            })
        })
        .collect()
}

fn default_grid(dgp: &DgpSpec, count: usize) -> Vec<Vec<f64>> {
    match (dgp.p, dgp.kind) {
        (1, _) => grid_1d(count),
        (2, DgpKind::Product | DgpKind::CausalProduct | DgpKind::Checkerboard) => edge_grid(count),
        (p, _) => diagonal_grid(count, p),
    }
}

fn apply_estimator_flags(est: &mut Estimator, c: &Common) {
    match est {
        Estimator::Tree { depth } | Estimator::CartPlus { depth } => {
            *depth = c.depth.unwrap_or(*depth);
        }
        Estimator::Honest { depth, policy } => {
            *depth = c.depth.unwrap_or(*depth);
            *policy = c.empty_policy.map_or(*policy, Into::into);
        }
        Estimator::Causal { criterion, depth, .. } => {
            *depth = c.depth.unwrap_or(*depth);
            *criterion = c.criterion.map_or(*criterion, Into::into);
        }
        Estimator::Forest { trees, subsample, mtry, depth, policy } => {
            *trees = c.trees.unwrap_or(*trees);
            *subsample = c.subsample.unwrap_or(*subsample);
            *mtry = c.mtry.unwrap_or(*mtry);
            *depth = c.depth.unwrap_or(*depth);
            *policy = c.empty_policy.map_or(*policy, Into::into);
        }
        Estimator::Pruned { folds, min_node_size } => {
            *folds = c.folds.unwrap_or(*folds);
            *min_node_size = c.min_node_size.unwrap_or(*min_node_size);
        }
        Estimator::PrunedCausal { criterion, folds, min_node_size } => {
            *criterion = c.criterion.map_or(*criterion, Into::into);
            *folds = c.folds.unwrap_or(*folds);
            *min_node_size = c.min_node_size.unwrap_or(*min_node_size);
        }
        Estimator::Stump => {
            if let Some(d) = c.depth.filter(|&d| d != 1) {
                *est = Estimator::Tree { depth: d };
            }
        }
    }
}

/// The preset for `a.name` with every given flag applied.
fn resolve_exp(a: &ExpArgs) -> Result<ExperimentConfig> {
    let c = &a.common;
    let seed = c.seed.unwrap_or_else(default_seed);
    let mut cfg = experiments::preset(a.name.preset(), seed).expect("every name has a preset");
    let d = &mut cfg.dgp;
    if let Some(n) = &c.n {
        if cfg.kind == ExperimentKind::CartPlus {
            cfg.n_ladder = parse_list(n, "sample size")?;
        } else {
            d.n = parse_single_n(n)?;
        }
    }
    let p_changed = c.p.is_some_and(|p| p != d.p);
    d.p = c.p.unwrap_or(d.p);
    d.sigma = c.sigma.unwrap_or(d.sigma);
    d.theta = c.theta.unwrap_or(d.theta);
    d.xi = c.xi.unwrap_or(d.xi);
    if let Some(g) = &c.grid {
        cfg.grid = parse_grid(g, &cfg.dgp)?;
    } else if p_changed && !cfg.grid.is_empty() {
        cfg.grid = default_grid(&cfg.dgp, cfg.grid.len());
    }
    for est in &mut cfg.estimators {
        apply_estimator_flags(est, c);
    }
    if let Some(k) = c.depth {
        cfg.depth = k;
        if cfg.kind == ExperimentKind::Imse {
            cfg.depths = vec![k];
        }
    }
    if let Some(r) = a.reps {
        if cfg.kind == ExperimentKind::OuRatio {
            cfg.ou.paths = r;
        } else {
            cfg.reps = r;
        }
    }
    if cfg.kind == ExperimentKind::OuRatio {
        match (a.a, a.b) {
            (Some(x), Some(y)) => cfg.ou.pairs = vec![(x, y)],
            (None, None) => {}
            _ => return Err(Error::InvalidArgument("ou-ratio takes --a and --b together".into())),
        }
        cfg.ou.dt = a.dt.unwrap_or(cfg.ou.dt);
    } else {
        cfg.a = a.a.unwrap_or(cfg.a);
        cfg.b = a.b.unwrap_or(cfg.b);
    }
    cfg.depth_factor = a.depth_factor.unwrap_or(cfg.depth_factor);
    if let Some(t) = &a.thresholds {
        cfg.thresholds = parse_list(t, "threshold")?;
    }
    cfg.out_dir = c.out.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn run_exp(a: &ExpArgs, out: &mut dyn Write) -> Result<bool> {
    let cfg = resolve_exp(a)?;
    writeln!(out, "config: {cfg:?}")?;
    let report = experiments::run(&cfg)?;
    if let Some(dir) = &cfg.out_dir {
        emit_report(&report, dir)?;
    }
    for s in &report.summary {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        let verdict = match s.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "",
        };
        writeln!(
            out,
            "{:<22} {:<24} {:<14} n={:<7} est={:.6} se={} bound={} {verdict}",
            s.statistic,
            s.estimator,
            if s.x.is_empty() { "-" } else { &s.x },
            s.n,
            s.estimate,
            fmt(s.mc_se),
            fmt(s.bound)
        )?;
    }
    writeln!(out, "{}: {} in {:.1}s", cfg.id, if report.passed() { "all checks passed" } else { "CHECK FAILED" }, report.wall_time_secs)?;
    Ok(report.passed())
}

fn read_data(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let y_col = header.iter().position(|h| h == "y").ok_or_else(|| Error::InvalidArgument("data needs a `y` column".into()))?;
    let d_col = header.iter().position(|h| h == "d");
    let x_cols: Vec<usize> = (0..header.len()).filter(|&k| k != y_col && Some(k) != d_col).collect();
    if x_cols.is_empty() {
        return Err(Error::InvalidArgument("data has no covariate columns".into()));
    }
    let mut cols = vec![Vec::new(); x_cols.len()];
    let (mut y, mut d) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k].trim().parse().map_err(|_| Error::Parse { line: line + 2, reason: format!("`{}` is not a number", &rec[k]) })
        };
        for (c, &k) in cols.iter_mut().zip(&x_cols) {
            c.push(num(k)?);
        }
        y.push(num(y_col)?);
        if let Some(k) = d_col {
            d.push(match rec[k].trim() {
                "0" => 0u8,
                "1" => 1u8,
                other => return Err(Error::Parse { line: line + 2, reason: format!("treatment `{other}` is not 0 or 1") }),
            });
        }
    }
    let xi = d_col.map(|_| d.iter().map(|&v| f64::from(v)).sum::<f64>() / d.len().max(1) as f64);
    Dataset::from_columns(cols, y, d_col.map(|_| d), xi)
}

fn fit_dgp(a: &FitArgs) -> Result<DgpSpec> {
    let c = &a.common;
    let n = c.n.as_deref().map(parse_single_n).transpose()?.unwrap_or(1000);
    let sigma = c.sigma.unwrap_or(1.0);
    let xi = c.xi.unwrap_or(0.5);
    let p = c.p.unwrap_or(1);
    let mut spec = match a.dgp.unwrap_or(DgpArg::Location) {
        DgpArg::Location => DgpSpec::location(n, p, a.mu.unwrap_or(0.0), sigma),
        DgpArg::CausalConstant => DgpSpec::causal_constant(n, p, c.theta.unwrap_or(1.0), xi, sigma),
        DgpArg::Checkerboard => DgpSpec::checkerboard(n, sigma),
        DgpArg::Product => DgpSpec::product(n, sigma),
        DgpArg::CausalProduct => DgpSpec::causal_product(n, xi, sigma),
    };
    spec.seed = c.seed.unwrap_or_else(default_seed);
    spec.validate()?;
    Ok(spec)
}

fn run_fit(a: &FitArgs, out: &mut dyn Write) -> Result<bool> {
    let c = &a.common;
    let (data, dgp) = match &a.data {
        Some(path) => (read_data(path)?, None),
        None => {
            let spec = fit_dgp(a)?;
            (sample_with(&spec, &RngStream::new(spec.seed, 0))?, Some(spec))
        }
    };
    let depth = c.depth.unwrap_or(1);
    let seed = c.seed.unwrap_or_else(default_seed);
    let criterion: CausalCriterion = c.criterion.map_or(CausalCriterion::squared_effect(), Into::into);
    let policy = match (c.empty_policy.unwrap_or(PolicyArg::Ancestor), &dgp) {
        (PolicyArg::TrueMean, Some(spec)) => EmptyPolicy::TrueMean(spec.clone()),
        (PolicyArg::TrueMean, None) => return Err(Error::InvalidArgument("--empty-policy true-mean needs a simulated model".into())),
        (PolicyArg::Ancestor, _) => EmptyPolicy::AncestorFallback,
    };
    let cv = CvConfig { folds: c.folds.unwrap_or(10), one_se: false, seed };
    let pruned_cfg = GrowConfig::new(experiments::PRUNE_MAX_DEPTH).with_min_node_size(c.min_node_size.unwrap_or(5));
    let grid_dgp = dgp.clone().unwrap_or_else(|| DgpSpec::location(data.n(), data.p(), 0.0, 1.0));
    let grid = match &c.grid {
        Some(g) => parse_grid(g, &grid_dgp)?,
        None => default_grid(&grid_dgp, 21),
    };
    if let Some(x) = grid.iter().find(|x| x.len() != data.p()) {
        return Err(Error::InvalidArgument(format!("grid point {x:?} has the wrong dimension for p = {}", data.p())));
    }
    let (text, predictions): (String, Vec<f64>) = match a.model {
        Model::Cart => {
            let t = cart::grow(&data, &data.y, &GrowConfig::new(depth))?;
            (t.to_text(), grid.iter().map(|x| t.predict(x)).collect())
        }
        Model::Honest => {
            let half = data.n() / 2;
            let pick = |ids: Vec<usize>| -> Result<Dataset> {
                let cols = (0..data.p()).map(|j| ids.iter().map(|&i| data.x(i, j)).collect()).collect();
                Dataset::from_columns(cols, ids.iter().map(|&i| data.y[i]).collect(), None, None)
            };
            let ht = honest_fit(&pick((0..half).collect())?, &pick((half..data.n()).collect())?, &GrowConfig::new(depth), policy)?;
            (ht.structure.to_text(), grid.iter().map(|x| ht.predict(x)).collect())
        }
        Model::Cartplus => {
            let spec = dgp.as_ref().ok_or_else(|| Error::InvalidArgument("cartplus needs a simulated model".into()))?;
            let ht = cart_plus_grow(&data, spec, depth, &RngStream::new(seed, 1))?;
            (ht.structure.to_text(), grid.iter().map(|x| ht.predict(x)).collect())
        }
        Model::Pruned => {
            let (sel, t) = prune::cv_select(&data, &pruned_cfg, &cv)?;
            (format!("# alpha {} cv error {}\n{}", sel.alpha, sel.cv_error, t.to_text()), grid.iter().map(|x| t.predict(x)).collect())
        }
        Model::CausalReg | Model::CausalIpw | Model::CausalHonest | Model::PrunedCausal => {
            let cfg = GrowConfig::new(depth);
            let est = match a.model {
                Model::CausalReg => causal::fit_theta_reg(&data, &cfg)?,
                Model::CausalIpw => causal::fit_theta_ipw(&data, &cfg)?,
                Model::CausalHonest => causal::fit_honest_causal(&data, &cfg, criterion)?,
                _ => causal::fit_pruned_honest_causal(&data, &pruned_cfg, criterion, &cv)?.1,
            };
            (format!("{:?}\n", est.kind), grid.iter().map(|x| est.predict(x)).collect())
        }
        Model::Forest => {
            let spec = ForestSpec::new(c.trees.unwrap_or(500), c.subsample.unwrap_or(data.n().min(100)), c.mtry.unwrap_or(data.p()), depth)
                .with_seed(seed)
                .with_empty_policy(policy);
            let f = fit_forest(&data, &spec)?;
            (format!("forest of {} trees\n", f.trees.len()), grid.iter().map(|x| f.predict(x)).collect())
        }
    };
    let mut csv = String::from("x,prediction\n");
    for (x, v) in grid.iter().zip(&predictions) {
        csv.push_str(&format!("{},{v}\n", format_point(x)));
    }
    out.write_all(text.as_bytes())?;
    out.write_all(csv.as_bytes())?;
    if let Some(dir) = &c.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("model.txt"), &text)?;
        fs::write(dir.join("predictions.csv"), &csv)?;
    }
    Ok(true)
}

fn run_selftest(a: &SelftestArgs, out: &mut dyn Write) -> Result<bool> {
    let seed = a.seed.unwrap_or_else(default_seed);
    let mut ok = true;
    for r in oracle::all_sweeps(a.cases, seed) {
        write!(out, "{r}")?;
        ok &= r.passed();
    }
    writeln!(out, "selftest: {}", if ok { "ok" } else { "MISMATCH" })?;
    Ok(ok)
}
