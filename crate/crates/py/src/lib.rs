//! Python bindings. Data cross the boundary as plain lists of floats.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use endcut::cart::{self, GrowConfig, NodeData};
use endcut::causal::{self, CausalCriterion};
use endcut::dgp::{self, DgpSpec};
use endcut::ensemble::{self, ForestSpec};
use endcut::experiments;
use endcut::honest::{self, EmptyPolicy};
use endcut::prune::{self, CvConfig};
use endcut::rng::RngStream;

fn err(e: endcut::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn criterion(name: &str) -> PyResult<CausalCriterion> {
    match name {
        "squared-effect" => Ok(CausalCriterion::squared_effect()),
        "sse-transformed" => Ok(CausalCriterion::SseOnTransformed),
        _ => Err(PyValueError::new_err(format!("unknown criterion `{name}`"))),
    }
}

#[pyclass(name = "Dataset", module = "endcut_py", frozen)]
struct PyDataset {
    inner: dgp::Dataset,
}

#[pymethods]
impl PyDataset {
    /// `columns[j][i]` is covariate `j` of sample `i`.
    #[new]
    #[pyo3(signature = (columns, y, d=None, xi=None))]
    fn new(columns: Vec<Vec<f64>>, y: Vec<f64>, d: Option<Vec<u8>>, xi: Option<f64>) -> PyResult<Self> {
        Ok(Self { inner: dgp::Dataset::from_columns(columns, y, d, xi).map_err(err)? })
    }

    /// Draws from a named model: location, causal-constant, checkerboard,
    /// product or causal-product.
    #[staticmethod]
    #[pyo3(signature = (kind, n, p=1, sigma=1.0, mu=0.0, theta=1.0, xi=0.5, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn simulate(kind: &str, n: usize, p: usize, sigma: f64, mu: f64, theta: f64, xi: f64, seed: u64) -> PyResult<Self> {
        let spec = match kind {
            "location" => DgpSpec::location(n, p, mu, sigma),
            "causal-constant" => DgpSpec::causal_constant(n, p, theta, xi, sigma),
            "checkerboard" => DgpSpec::checkerboard(n, sigma),
            "product" => DgpSpec::product(n, sigma),
            "causal-product" => DgpSpec::causal_product(n, xi, sigma),
            _ => return Err(PyValueError::new_err(format!("unknown model `{kind}`"))),
        };
        let data = dgp::sample_with(&spec, &RngStream::new(seed, 0)).map_err(err)?;
        Ok(Self { inner: data })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    #[getter]
    fn d(&self) -> Option<Vec<u8>> {
        self.inner.d.clone()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i))
    }
}

#[pyclass(name = "Tree", module = "endcut_py", frozen)]
struct PyTree {
    inner: cart::Tree,
}

#[pymethods]
impl PyTree {
    fn predict(&self, x: Vec<f64>) -> f64 {
        self.inner.predict(&x)
    }

    fn predict_many(&self, xs: Vec<Vec<f64>>) -> Vec<f64> {
        xs.iter().map(|x| self.inner.predict(x)).collect()
    }

    #[getter]
    fn n_leaves(&self) -> usize {
        self.inner.n_leaves()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    /// `(direction, order_index, threshold, gain)` of the root split.
    fn root_split(&self) -> Option<(usize, usize, f64, f64)> {
        self.inner.root().split.map(|s| (s.direction, s.order_index, s.threshold, s.gain))
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str, p: usize) -> PyResult<Self> {
        Ok(Self { inner: cart::Tree::from_text(text, p).map_err(err)? })
    }
}

#[pyclass(name = "HonestTree", module = "endcut_py", frozen)]
struct PyHonestTree {
    inner: honest::HonestTree,
}

#[pymethods]
impl PyHonestTree {
    fn predict(&self, x: Vec<f64>) -> f64 {
        self.inner.predict(&x)
    }

    fn structure(&self) -> PyTree {
        PyTree { inner: self.inner.structure.clone() }
    }
}

#[pyclass(name = "CausalEstimate", module = "endcut_py", frozen)]
struct PyCausal {
    inner: causal::CausalEstimate,
}

#[pymethods]
impl PyCausal {
    fn predict(&self, x: Vec<f64>) -> f64 {
        self.inner.predict(&x)
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.inner.kind)
    }
}

#[pyclass(name = "Forest", module = "endcut_py", frozen)]
struct PyForest {
    inner: ensemble::Forest,
}

#[pymethods]
impl PyForest {
    fn predict(&self, x: Vec<f64>) -> f64 {
        self.inner.predict(&x)
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.trees.len()
    }
}

/// Best root split over `features` (all by default) as
/// `(direction, order_index, threshold, gain)`.
#[pyfunction]
#[pyo3(signature = (data, features=None))]
fn best_split(data: &PyDataset, features: Option<Vec<usize>>) -> PyResult<Option<(usize, usize, f64, f64)>> {
    let d = &data.inner;
    let node = NodeData::root(d, &d.y).map_err(err)?;
    let features = features.unwrap_or_else(|| (0..d.p()).collect());
    let s = cart::best_split(&node, &features).map_err(err)?;
    Ok(s.map(|s| (s.direction, s.order_index, s.threshold, s.gain)))
}

#[pyfunction]
#[pyo3(signature = (data, depth, min_node_size=1))]
fn fit_cart(data: &PyDataset, depth: usize, min_node_size: usize) -> PyResult<PyTree> {
    let cfg = GrowConfig::new(depth).with_min_node_size(min_node_size);
    Ok(PyTree { inner: cart::grow(&data.inner, &data.inner.y, &cfg).map_err(err)? })
}

/// Partition from `structure`, leaf means from `estimation`; empty leaves
/// fall back to the nearest ancestor with estimation samples.
#[pyfunction]
fn fit_honest(structure: &PyDataset, estimation: &PyDataset, depth: usize) -> PyResult<PyHonestTree> {
    let ht = honest::honest_fit(&structure.inner, &estimation.inner, &GrowConfig::new(depth), EmptyPolicy::AncestorFallback).map_err(err)?;
    Ok(PyHonestTree { inner: ht })
}

/// `kind` is reg, ipw or honest.
#[pyfunction]
#[pyo3(signature = (data, kind, depth=1, criterion="squared-effect"))]
fn fit_causal(data: &PyDataset, kind: &str, depth: usize, criterion: &str) -> PyResult<PyCausal> {
    let cfg = GrowConfig::new(depth);
    let inner = match kind {
        "reg" => causal::fit_theta_reg(&data.inner, &cfg),
        "ipw" => causal::fit_theta_ipw(&data.inner, &cfg),
        "honest" => causal::fit_honest_causal(&data.inner, &cfg, self::criterion(criterion)?),
        _ => return Err(PyValueError::new_err(format!("unknown causal kind `{kind}`"))),
    }
    .map_err(err)?;
    Ok(PyCausal { inner })
}

#[pyfunction]
#[pyo3(signature = (data, trees, subsample, mtry, depth=1, seed=0, honest=true))]
#[allow(clippy::too_many_arguments)]
fn fit_forest(data: &PyDataset, trees: usize, subsample: usize, mtry: usize, depth: usize, seed: u64, honest: bool) -> PyResult<PyForest> {
    let spec = ForestSpec::new(trees, subsample, mtry, depth).with_seed(seed).with_honest(honest);
    Ok(PyForest { inner: ensemble::fit_forest(&data.inner, &spec).map_err(err)? })
}

/// Weakest-link sequence of `tree` on the responses of `data`, as
/// `(alphas, n_leaves, risks)`.
#[pyfunction]
fn prune_sequence(tree: &PyTree, data: &PyDataset) -> PyResult<(Vec<f64>, Vec<usize>, Vec<f64>)> {
    if data.inner.n() != tree.inner.root().count() {
        return Err(PyValueError::new_err("data does not match the tree's training sample"));
    }
    let seq = prune::weakest_link(&tree.inner, &data.inner.y);
    Ok((seq.alphas, seq.n_leaves, seq.risks))
}

/// Cross-validated cost-complexity pruning; returns `(alpha, tree)`.
#[pyfunction]
#[pyo3(signature = (data, folds=10, min_node_size=5, seed=0))]
fn cv_prune(data: &PyDataset, folds: usize, min_node_size: usize, seed: u64) -> PyResult<(f64, PyTree)> {
    let cfg = GrowConfig::new(experiments::PRUNE_MAX_DEPTH).with_min_node_size(min_node_size);
    let (sel, tree) = prune::cv_select(&data.inner, &cfg, &CvConfig { folds, one_se: false, seed }).map_err(err)?;
    Ok((sel.alpha, PyTree { inner: tree }))
}

/// Runs a preset experiment. Returns `{"passed": bool, "summary": [dict, ...]}`.
#[pyfunction]
#[pyo3(signature = (name, seed=0, reps=None, n=None, out=None))]
fn run_experiment<'py>(py: Python<'py>, name: &str, seed: u64, reps: Option<usize>, n: Option<usize>, out: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = experiments::preset(name, seed).ok_or_else(|| PyValueError::new_err(format!("unknown experiment `{name}`")))?;
    if let Some(r) = reps {
        if cfg.kind == experiments::ExperimentKind::OuRatio {
            cfg.ou.paths = r;
        } else {
            cfg.reps = r;
        }
    }
    if let Some(n) = n {
        cfg.dgp.n = n;
    }
    let report = py.detach(|| experiments::run(&cfg)).map_err(err)?;
    if let Some(dir) = out {
        experiments::emit_report(&report, &dir).map_err(err)?;
    }
    let summary = report
        .summary
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("x", &s.x)?;
            d.set_item("estimator", &s.estimator)?;
            d.set_item("n", s.n)?;
            d.set_item("reps", s.reps)?;
            d.set_item("statistic", &s.statistic)?;
            d.set_item("estimate", s.estimate)?;
            d.set_item("mc_se", s.mc_se)?;
            d.set_item("bound", s.bound)?;
            d.set_item("pass", s.pass)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let d = PyDict::new(py);
    d.set_item("passed", report.passed())?;
    d.set_item("summary", summary)?;
    Ok(d)
}

/// Monte Carlo probability of the O-U sup-ratio event as `(estimate, se)`.
#[pyfunction]
#[pyo3(signature = (a, b, paths=10_000, dt=0.005, seed=0))]
fn ou_sup_ratio(py: Python<'_>, a: f64, b: f64, paths: usize, dt: f64, seed: u64) -> PyResult<(f64, f64)> {
    let e = py.detach(|| experiments::simulate_ou_sup_ratio(a, b, paths, dt, &RngStream::new(seed, 0))).map_err(err)?;
    Ok((e.value, e.se))
}

/// Runs the oracle sweeps; true when every case agrees.
#[pyfunction]
#[pyo3(signature = (cases=200, seed=0))]
fn selftest(py: Python<'_>, cases: usize, seed: u64) -> bool {
    py.detach(|| endcut::oracle::all_sweeps(cases, seed).iter().all(|r| r.passed()))
}

#[pymodule]
fn endcut_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTree>()?;
    m.add_class::<PyHonestTree>()?;
    m.add_class::<PyCausal>()?;
    m.add_class::<PyForest>()?;
    m.add_function(wrap_pyfunction!(best_split, m)?)?;
    m.add_function(wrap_pyfunction!(fit_cart, m)?)?;
    m.add_function(wrap_pyfunction!(fit_honest, m)?)?;
    m.add_function(wrap_pyfunction!(fit_causal, m)?)?;
    m.add_function(wrap_pyfunction!(fit_forest, m)?)?;
    m.add_function(wrap_pyfunction!(prune_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(cv_prune, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(ou_sup_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
