//! Python bindings: `import wassrisk`.
//!
//! Input errors raise `ValueError`; failed computations raise `RuntimeError`.
//! Solver reports come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wassrisk_core as core;
use wassrisk_core::measures::{default_nodes, DEFAULT_NODES_1D, DEFAULT_TAIL_MASS};
use wassrisk_core::{AffinePiece, DualSolver, EsTolerances, Expectation, RobustEsProblem};

fn py_err(e: core::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Convex piecewise-linear payoff `x ↦ maxᵢ (⟨mᵢ, x⟩ + cᵢ)`.
#[pyclass(name = "PwlConvex", module = "wassrisk", frozen, eq)]
#[derive(Clone, PartialEq)]
struct PyPwl(core::PwlConvex);

#[pymethods]
impl PyPwl {
    /// `pieces` is a list of `(slope, intercept)` pairs, each slope of length `dim`.
    #[new]
    fn new(dim: usize, pieces: Vec<(Vec<f64>, f64)>) -> PyResult<Self> {
        let pieces = pieces.into_iter().map(|(m, c)| AffinePiece::new(m, c)).collect();
        core::PwlConvex::new(dim, pieces).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn call(strike: f64) -> PyResult<Self> {
        core::PwlConvex::call(strike).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn put(strike: f64) -> PyResult<Self> {
        core::PwlConvex::put(strike).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn straddle(strike: f64) -> PyResult<Self> {
        core::PwlConvex::straddle(strike).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn constant(dim: usize, value: f64) -> PyResult<Self> {
        core::PwlConvex::constant(dim, value).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(json_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(json_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn pieces(&self) -> Vec<(Vec<f64>, f64)> {
        self.0.pieces().iter().map(|p| (p.slope.clone(), p.intercept)).collect()
    }

    fn lipschitz(&self) -> f64 {
        self.0.lipschitz()
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.evaluate(&x).map_err(py_err)
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.evaluate(x)
    }

    /// Same slopes, intercepts raised by `‖m‖² / (2λ)`.
    fn lambda_c_transform(&self, lam: f64) -> PyResult<Self> {
        self.0.lambda_c_transform(lam).map(Self).map_err(py_err)
    }

    fn sum(&self, other: &PyPwl) -> PyResult<Self> {
        self.0.sum(&other.0).map(Self).map_err(py_err)
    }

    fn shift(&self, k: f64) -> Self {
        Self(self.0.shift(k))
    }

    fn scale(&self, a: f64) -> PyResult<Self> {
        self.0.scale(a).map(Self).map_err(py_err)
    }

    /// `(f − α)⁺`.
    fn excess_over(&self, alpha: f64) -> Self {
        Self(self.0.excess_over(alpha))
    }

    fn prune(&self) -> Self {
        Self(self.0.prune())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("PwlConvex(dim={}, pieces={:?})", self.0.dim(), self.pieces())
    }
}

/// Finitely supported probability measure.
#[pyclass(name = "DiscreteMeasure", module = "wassrisk", frozen)]
#[derive(Clone)]
struct PyDiscrete(core::DiscreteMeasure);

#[pymethods]
impl PyDiscrete {
    #[new]
    fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> PyResult<Self> {
        core::DiscreteMeasure::new(atoms, weights).map(Self).map_err(py_err)
    }

    #[getter]
    fn atoms(&self) -> Vec<Vec<f64>> {
        self.0.atoms().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn expect(&self, f: &PyPwl) -> PyResult<f64> {
        self.0.expect_pwl(&f.0).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("DiscreteMeasure(atoms={:?}, weights={:?})", self.0.atoms(), self.0.weights())
    }
}

/// An integrable baseline: a discrete measure or a quadrature grid over a product lognormal.
#[pyclass(name = "Baseline", module = "wassrisk", frozen)]
struct PyBaseline(core::Baseline);

#[pymethods]
impl PyBaseline {
    #[staticmethod]
    fn discrete(measure: &PyDiscrete) -> Self {
        Self(core::Baseline::Discrete(measure.0.clone()))
    }

    /// Product of independent lognormals `exp(N(μₖ, σₖ²))`, discretized on a trapezoid grid.
    #[staticmethod]
    #[pyo3(signature = (mu, sigma, nodes=None, tail_mass=DEFAULT_TAIL_MASS))]
    fn lognormal(py: Python<'_>, mu: Vec<f64>, sigma: Vec<f64>, nodes: Option<usize>, tail_mass: f64) -> PyResult<Self> {
        let nodes = nodes.unwrap_or_else(|| default_nodes(mu.len()));
        let spec = core::MeasureSpec::Lognormal { mu, sigma };
        py.allow_threads(|| spec.baseline(nodes, tail_mass)).map(Self).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn expect(&self, py: Python<'_>, f: &PyPwl) -> PyResult<f64> {
        py.allow_threads(|| self.0.expect_pwl(&f.0)).map_err(py_err)
    }
}

/// Optimal quadratic transport cost and plan: `(value, [(i, j, mass), ..])`.
#[pyfunction]
fn dc_discrete(mu: &PyDiscrete, nu: &PyDiscrete) -> PyResult<(f64, Vec<(usize, usize, f64)>)> {
    let sol = core::dc_discrete(&mu.0, &nu.0).map_err(py_err)?;
    Ok((sol.value, sol.coupling.entries()))
}

/// `λθ + ∫ f^{λc} dν₀` at a fixed λ.
#[pyfunction]
fn dual_objective(f: &PyPwl, baseline: &PyBaseline, theta: f64, lam: f64) -> PyResult<f64> {
    core::dual_objective(&f.0, &baseline.0, theta, lam).map_err(py_err)
}

/// Worst-case expectation over the ball of radius θ.
#[pyfunction]
#[pyo3(signature = (f, baseline, theta, tol=None))]
fn robust_expected_value<'py>(
    py: Python<'py>,
    f: &PyPwl,
    baseline: &PyBaseline,
    theta: f64,
    tol: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let solver = tol.map(DualSolver::with_tol).unwrap_or_default();
    let r = py
        .allow_threads(|| core::robust_expected_value(&f.0, &baseline.0, theta, &solver))
        .map_err(py_err)?;
    let d = PyDict::new_bound(py);
    d.set_item("value", r.value)?;
    d.set_item("lambda", r.lambda)?;
    d.set_item("evaluations", r.evaluations)?;
    d.set_item("bracket", r.bracket)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

fn es_dict<'py>(py: Python<'py>, r: &core::EsSolveReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("value", r.value)?;
    d.set_item("alpha", r.alpha)?;
    d.set_item("lambda", r.lambda)?;
    d.set_item("v_min", r.v_min)?;
    d.set_item("v_max", r.v_max)?;
    d.set_item("outer_evaluations", r.outer_evaluations)?;
    d.set_item("inner_evaluations", r.inner_evaluations)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

/// Expected Shortfall at level β under the baseline.
#[pyfunction]
fn es_nonrobust(py: Python<'_>, f: &PyPwl, baseline: &PyBaseline, beta: f64) -> PyResult<f64> {
    py.allow_threads(|| core::es_nonrobust(&f.0, &baseline.0, beta)).map_err(py_err)
}

/// Worst-case Expected Shortfall at level β over the ball of radius θ.
#[pyfunction]
#[pyo3(signature = (f, baseline, theta, beta, tol=None))]
fn robust_es<'py>(
    py: Python<'py>,
    f: &PyPwl,
    baseline: &PyBaseline,
    theta: f64,
    beta: f64,
    tol: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let tolerances = tol.map(EsTolerances::with_tol).unwrap_or_default();
    let r = py
        .allow_threads(|| {
            core::robust_es(&RobustEsProblem::new(&f.0, &baseline.0, theta, beta).with_tolerances(tolerances))
        })
        .map_err(py_err)?;
    es_dict(py, &r)
}

/// Analytic robust ES of a call on `exp(N(μ, σ²))`.
#[pyfunction]
#[pyo3(signature = (strike, mu, sigma, theta, beta, nodes=DEFAULT_NODES_1D, tail_mass=DEFAULT_TAIL_MASS))]
fn robust_es_call_closed_form<'py>(
    py: Python<'py>,
    strike: f64,
    mu: f64,
    sigma: f64,
    theta: f64,
    beta: f64,
    nodes: usize,
    tail_mass: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cf = py
        .allow_threads(|| -> core::Result<_> {
            let ln = core::ProductLognormal::new(vec![mu], vec![sigma])?;
            let grid = core::QuadratureGrid::build(&ln, nodes, tail_mass)?;
            core::robust_es_call_closed_form(strike, &ln, &grid, theta, beta)
        })
        .map_err(py_err)?;
    let d = PyDict::new_bound(py);
    d.set_item("q_beta", cf.q_beta)?;
    d.set_item("call_at_q", cf.call_at_q)?;
    d.set_item("correction", cf.correction)?;
    d.set_item("value", cf.value)?;
    Ok(d)
}

/// Payoff of the three-asset portfolio (shares, calls on asset 2, puts on asset 3).
#[pyfunction]
#[pyo3(signature = (w1, w2, w3, premium_measure="risk_neutral"))]
fn portfolio_payoff(w1: f64, w2: f64, w3: f64, premium_measure: &str) -> PyResult<PyPwl> {
    let measure = parse_premium(premium_measure)?;
    let spec = core::ThreeAssetSpec::standard(w1, w2, w3)
        .resolve_premiums(measure, core::portfolio::DEFAULT_PRICING_NODES)
        .map_err(py_err)?;
    spec.payoff().map(PyPwl).map_err(py_err)
}

fn parse_premium(s: &str) -> PyResult<core::PremiumMeasure> {
    match s {
        "risk_neutral" => Ok(core::PremiumMeasure::RiskNeutral),
        "physical" => Ok(core::PremiumMeasure::Physical),
        other => Err(PyValueError::new_err(format!(
            "premium_measure must be 'risk_neutral' or 'physical', got {other:?}"
        ))),
    }
}

/// Robust ES table for the three-asset portfolio.
///
/// `config` is a JSON string in the same shape as the CLI's table config; missing fields take
/// their defaults. Returns one dict per (weights, θ) row.
#[pyfunction]
#[pyo3(signature = (config=None, nodes=None))]
fn run_table1<'py>(py: Python<'py>, config: Option<&str>, nodes: Option<usize>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg: core::Table1Config = match config {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => core::Table1Config::default(),
    };
    if let Some(n) = nodes {
        cfg.nodes = n;
    }
    let rows = py.allow_threads(|| core::run_table1(&cfg)).map_err(py_err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new_bound(py);
            d.set_item("weights", (r.w1, r.w2, r.w3))?;
            d.set_item("theta", r.theta)?;
            d.set_item("robust_es_pct", r.robust_es_pct)?;
            d.set_item("alpha", r.alpha)?;
            d.set_item("lambda", r.lambda)?;
            d.set_item("converged", r.converged)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "wassrisk")]
fn wassrisk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPwl>()?;
    m.add_class::<PyDiscrete>()?;
    m.add_class::<PyBaseline>()?;
    m.add_function(wrap_pyfunction!(dc_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(dual_objective, m)?)?;
    m.add_function(wrap_pyfunction!(robust_expected_value, m)?)?;
    m.add_function(wrap_pyfunction!(es_nonrobust, m)?)?;
    m.add_function(wrap_pyfunction!(robust_es, m)?)?;
    m.add_function(wrap_pyfunction!(robust_es_call_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(portfolio_payoff, m)?)?;
    m.add_function(wrap_pyfunction!(run_table1, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
